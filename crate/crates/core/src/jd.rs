//! Approximate joint diagonalization of stacks of symmetric matrices.
//!
//! Both solvers minimize the squared off-diagonal Frobenius criterion
//! `Σ_m Σ_{i≠j} [B M_m Bᵀ]_ij²`. [`oajd`] restricts `B` to orthogonal matrices
//! and uses cyclic Jacobi rotations; [`noajd`] searches over invertible
//! matrices with FFDIAG-style multiplicative updates `B ← (I + W) B`.
//!
//! Results are returned in a canonical signed-permutation form: rows sorted by
//! descending magnitude of the diagonal of `B M_0 Bᵀ`, each row's largest entry
//! positive.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MticaError, Result};

/// Symmetry tolerance for stack members.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Update norms at or above this are shrunk to [`STEP_SHRINK`] before use.
const MAX_UPDATE_NORM: f64 = 1.0;
const STEP_SHRINK: f64 = 0.9;
const LINE_SEARCH_HALVINGS: usize = 40;
/// Jacobi rotations with `|sin θ|` below this are skipped.
const ROTATION_FLOOR: f64 = 1e-15;

/// A non-empty list of equally sized symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixStack {
    mats: Vec<DMatrix<f64>>,
}

impl MatrixStack {
    pub fn new(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = mats.first().ok_or(MticaError::InvalidParameter {
            name: "stack",
            reason: "needs at least one matrix".into(),
        })?;
        let p = first.nrows();
        if p == 0 {
            return Err(MticaError::EmptyData);
        }
        for (index, m) in mats.iter().enumerate() {
            if m.nrows() != p || m.ncols() != p {
                return Err(MticaError::DimensionMismatch {
                    expected: p,
                    got: if m.nrows() != p { m.nrows() } else { m.ncols() },
                });
            }
            let deviation = (m - m.transpose()).amax();
            if !(deviation <= SYMMETRY_TOLERANCE) {
                return Err(MticaError::NotSymmetric { index, deviation });
            }
        }
        Ok(Self { mats })
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    /// `B M_m Bᵀ` for every member.
    pub fn congruence(&self, b: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        self.mats.iter().map(|m| b * m * b.transpose()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JdOptions {
    /// Maximum number of sweeps.
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for JdOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

/// Outcome of a joint diagonalization.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDiagResult {
    /// The diagonalizer `B` (rows are the separating directions).
    pub diag_matrix: DMatrix<f64>,
    /// Final value of the off-diagonality criterion.
    pub residual: f64,
    /// Number of sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Criterion before the first sweep followed by its value after each sweep.
    pub history: Vec<f64>,
}

fn off_sq(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut s = 0.0;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s
}

fn stack_off(mats: &[DMatrix<f64>]) -> f64 {
    mats.iter().map(off_sq).sum()
}

/// `Σ_m Σ_{i≠j} ([B M_m Bᵀ]_ij)²`.
pub fn offdiag_criterion(stack: &MatrixStack, b: &DMatrix<f64>) -> Result<f64> {
    let p = stack.dim();
    if b.ncols() != p {
        return Err(MticaError::DimensionMismatch {
            expected: p,
            got: b.ncols(),
        });
    }
    Ok(stack_off(&stack.congruence(b)))
}

/// Orthogonal joint diagonalization by cyclic Jacobi sweeps.
///
/// Each rotation angle is the closed-form maximizer of the summed squared
/// diagonal of the rotated `2×2` blocks, so every rotation (and therefore
/// every sweep) can only lower the criterion.
pub fn oajd(stack: &MatrixStack, opts: &JdOptions) -> Result<JointDiagResult> {
    let p = stack.dim();
    let mut mats: Vec<DMatrix<f64>> = stack.matrices().to_vec();
    let mut v = DMatrix::<f64>::identity(p, p);
    let mut crit = stack_off(&mats);
    let mut history = vec![crit];
    let mut converged = p == 1 || crit == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut rotated = false;
        for i in 0..p - 1 {
            for j in i + 1..p {
                let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
                for m in &mats {
                    let h1 = m[(i, i)] - m[(j, j)];
                    let h2 = m[(i, j)] + m[(j, i)];
                    g11 += h1 * h1;
                    g12 += h1 * h2;
                    g22 += h2 * h2;
                }
                let ton = g11 - g22;
                let toff = 2.0 * g12;
                let theta = 0.5 * toff.atan2(ton + ton.hypot(toff));
                let (s, c) = theta.sin_cos();
                if s.abs() <= ROTATION_FLOOR {
                    continue;
                }
                rotated = true;
                for m in mats.iter_mut() {
                    rotate_pair(m, i, j, c, s);
                }
                for k in 0..p {
                    let a = v[(k, i)];
                    let b = v[(k, j)];
                    v[(k, i)] = c * a + s * b;
                    v[(k, j)] = -s * a + c * b;
                }
            }
        }
        let next = stack_off(&mats);
        history.push(next);
        let decrease = crit - next;
        crit = next;
        if !rotated || decrease < opts.tol {
            converged = true;
        }
    }

    let b = canonical_form(v.transpose(), stack);
    let residual = offdiag_criterion(stack, &b)?;
    Ok(JointDiagResult {
        diag_matrix: b,
        residual,
        iterations,
        converged,
        history,
    })
}

/// `M ← Gᵀ M G` for the Givens rotation `G` acting on coordinates `(i, j)`.
fn rotate_pair(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    let p = m.nrows();
    for k in 0..p {
        let a = m[(i, k)];
        let b = m[(j, k)];
        m[(i, k)] = c * a + s * b;
        m[(j, k)] = -s * a + c * b;
    }
    for k in 0..p {
        let a = m[(k, i)];
        let b = m[(k, j)];
        m[(k, i)] = c * a + s * b;
        m[(k, j)] = -s * a + c * b;
    }
}

/// Non-orthogonal joint diagonalization (FFDIAG-style).
///
/// Each sweep solves, for every pair `i < j`, the `2×2` least-squares system
/// that cancels the linearized off-diagonal entries of `(I + W) C_m (I + W)ᵀ`
/// given the current diagonals. The update is capped in Frobenius norm,
/// backtracked until the criterion does not increase, and followed by
/// normalizing the rows of `B` to unit length.
pub fn noajd(stack: &MatrixStack, opts: &JdOptions) -> Result<JointDiagResult> {
    if stack.len() < 2 {
        return Err(MticaError::InvalidParameter {
            name: "stack",
            reason: format!(
                "non-orthogonal diagonalization needs at least 2 matrices, got {}",
                stack.len()
            ),
        });
    }
    let p = stack.dim();
    let mut b = DMatrix::<f64>::identity(p, p);
    let mut mats = stack.congruence(&b);
    let mut crit = stack_off(&mats);
    if let Some(start) = mean_whitened_start(stack, opts) {
        let start_mats = stack.congruence(&start);
        let start_crit = stack_off(&start_mats);
        if start_crit < crit {
            b = start;
            mats = start_mats;
            crit = start_crit;
        }
    }
    let mut history = vec![crit];
    let mut converged = p == 1 || crit == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut w = ffdiag_update(&mats);
        let norm = w.norm();
        if norm < opts.tol {
            history.push(crit);
            converged = true;
            break;
        }
        if norm >= MAX_UPDATE_NORM {
            w *= STEP_SHRINK / norm;
        }

        let mut accepted = line_search(stack, &b, &w, crit);
        if accepted.is_none() {
            let g = descent_direction(&mats);
            let gn = g.norm();
            if gn > 0.0 {
                accepted = line_search(stack, &b, &(g * (STEP_SHRINK / gn)), crit);
            }
        }
        match accepted {
            Some((nb, nm, nc)) => {
                let moved = (&nb - &b).norm();
                b = nb;
                mats = nm;
                crit = nc;
                history.push(crit);
                if moved < opts.tol {
                    converged = true;
                }
            }
            None => {
                // No step along the update lowers the criterion: a numerical
                // stationary point of the linearized problem.
                history.push(crit);
                converged = true;
            }
        }
    }

    let b = canonical_form(b, stack);
    let residual = offdiag_criterion(stack, &b)?;
    Ok(JointDiagResult {
        diag_matrix: b,
        residual,
        iterations,
        converged,
        history,
    })
}

/// Whitens the stack by its mean, diagonalizes the whitened stack
/// orthogonally and maps back, with unit rows. `None` when the mean is not
/// positive definite.
fn mean_whitened_start(stack: &MatrixStack, opts: &JdOptions) -> Option<DMatrix<f64>> {
    let p = stack.dim();
    let mut mean = DMatrix::<f64>::zeros(p, p);
    for m in stack.matrices() {
        mean += m;
    }
    mean /= stack.len() as f64;
    let eig = mean.symmetric_eigen();
    let max = eig.eigenvalues.max();
    if !(max > 0.0) || eig.eigenvalues.min() <= max * 1e-12 {
        return None;
    }
    let w = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * eig.eigenvectors.transpose();
    let whitened = MatrixStack::new(stack.congruence(&w)).ok()?;
    let rot = oajd(&whitened, opts).ok()?;
    let mut b = rot.diag_matrix * w;
    normalize_rows(&mut b);
    Some(b)
}

fn line_search(
    stack: &MatrixStack,
    b: &DMatrix<f64>,
    w: &DMatrix<f64>,
    crit: f64,
) -> Option<(DMatrix<f64>, Vec<DMatrix<f64>>, f64)> {
    let p = b.nrows();
    let mut step = 1.0;
    for _ in 0..LINE_SEARCH_HALVINGS {
        let mut candidate = (DMatrix::identity(p, p) + w * step) * b;
        normalize_rows(&mut candidate);
        let cand_mats = stack.congruence(&candidate);
        let cand_crit = stack_off(&cand_mats);
        if cand_crit < crit || (cand_crit == crit && step == 1.0) {
            return Some((candidate, cand_mats, cand_crit));
        }
        step *= 0.5;
    }
    None
}

/// Negative gradient of the criterion with respect to a zero-diagonal
/// update `W` at `W = 0`.
fn descent_direction(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = mats[0].nrows();
    let mut g = DMatrix::<f64>::zeros(p, p);
    for m in mats {
        let mut off = m.clone();
        off.fill_diagonal(0.0);
        g -= off * m;
    }
    g.fill_diagonal(0.0);
    g
}

fn ffdiag_update(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = mats[0].nrows();
    // z[i][j] = Σ_m D_i D_j, y[i][j] = Σ_m D_j E_ij
    let mut z = DMatrix::<f64>::zeros(p, p);
    let mut y = DMatrix::<f64>::zeros(p, p);
    for m in mats {
        for i in 0..p {
            for j in 0..p {
                z[(i, j)] += m[(i, i)] * m[(j, j)];
                if i != j {
                    y[(i, j)] += m[(j, j)] * m[(i, j)];
                }
            }
        }
    }
    let mut w = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in i + 1..p {
            let det = z[(i, i)] * z[(j, j)] - z[(i, j)] * z[(i, j)];
            let scale = z[(i, i)] * z[(j, j)];
            if !(det > 1e-14 * scale) {
                continue;
            }
            w[(i, j)] = (z[(i, j)] * y[(j, i)] - z[(i, i)] * y[(i, j)]) / det;
            w[(j, i)] = (z[(i, j)] * y[(i, j)] - z[(j, j)] * y[(j, i)]) / det;
        }
    }
    w
}

fn normalize_rows(b: &mut DMatrix<f64>) {
    for mut row in b.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
}

/// Sorts rows by descending `|[B M_0 Bᵀ]_ii|` and flips each row so that its
/// largest-magnitude entry is positive.
pub fn canonical_form(b: DMatrix<f64>, stack: &MatrixStack) -> DMatrix<f64> {
    let p = b.nrows();
    let d = &b * &stack.matrices()[0] * b.transpose();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| d[(y, y)].abs().total_cmp(&d[(x, x)].abs()).then(x.cmp(&y)));
    let mut out = DMatrix::zeros(p, b.ncols());
    for (r, &src) in order.iter().enumerate() {
        let row = b.row(src);
        let mut pivot = 0;
        for k in 1..row.len() {
            if row[k].abs() > row[pivot].abs() {
                pivot = k;
            }
        }
        let sign = if row[pivot] < 0.0 { -1.0 } else { 1.0 };
        out.set_row(r, &(row * sign));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation(theta: f64) -> DMatrix<f64> {
        let (s, c) = theta.sin_cos();
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    }

    fn is_signed_permutation(m: &DMatrix<f64>, tol: f64) -> bool {
        let p = m.nrows();
        (0..p).all(|i| {
            let row = m.row(i);
            let big = row.iter().filter(|v| (v.abs() - 1.0).abs() < tol).count();
            let small = row.iter().filter(|v| v.abs() < tol).count();
            big == 1 && small == p - 1
        })
    }

    #[test]
    fn criterion_examples() {
        let diag = MatrixStack::new(vec![
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0])),
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0])),
        ])
        .unwrap();
        let i2 = DMatrix::identity(2, 2);
        assert_eq!(offdiag_criterion(&diag, &i2).unwrap(), 0.0);
        let r = rotation(std::f64::consts::FRAC_PI_2);
        assert!(offdiag_criterion(&diag, &r).unwrap() < 1e-30);

        let ones = MatrixStack::new(vec![DMatrix::from_element(2, 2, 1.0)]).unwrap();
        assert_eq!(offdiag_criterion(&ones, &i2).unwrap(), 2.0);
        assert!(offdiag_criterion(&ones, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn stack_validation() {
        assert!(MatrixStack::new(vec![]).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(
            MatrixStack::new(vec![asym]),
            Err(MticaError::NotSymmetric { index: 0, .. })
        ));
        assert!(MatrixStack::new(vec![DMatrix::identity(2, 2), DMatrix::identity(3, 3)]).is_err());
    }

    #[test]
    fn oajd_on_diagonal_stack() {
        let stack = MatrixStack::new(vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let r = oajd(&stack, &JdOptions::default()).unwrap();
        assert!(r.residual < 1e-20);
        assert!(r.converged);
        assert!(is_signed_permutation(&r.diag_matrix, 1e-12));
        // row order follows |diag(B M_0 Bᵀ)| descending
        assert_eq!(r.diag_matrix, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn oajd_recovers_rotation() {
        let q = rotation(30f64.to_radians());
        let d1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let d2 = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let stack = MatrixStack::new(vec![&q * d1 * q.transpose(), &q * d2 * q.transpose()]).unwrap();
        let r = oajd(&stack, &JdOptions::default()).unwrap();
        assert!(r.residual < 1e-12);
        assert!(is_signed_permutation(&(&r.diag_matrix * &q), 1e-8));
        let ortho = &r.diag_matrix.transpose() * &r.diag_matrix - DMatrix::identity(2, 2);
        assert!(ortho.norm() < 1e-8);
    }

    #[test]
    fn noajd_recovers_shear_mixing() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let d1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let d2 = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let stack = MatrixStack::new(vec![&a * d1 * a.transpose(), &a * d2 * a.transpose()]).unwrap();
        let r = noajd(&stack, &JdOptions::default()).unwrap();
        let ainv = a.try_inverse().unwrap();
        let err = crate::sim::amari_error(&r.diag_matrix, &ainv).unwrap();
        assert!(err < 1e-6, "amari {err}, {r:?}");
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn noajd_on_diagonal_stack() {
        let stack = MatrixStack::new(vec![
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 5.0]),
            DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5]),
        ])
        .unwrap();
        let r = noajd(&stack, &JdOptions::default()).unwrap();
        assert!(r.residual < 1e-18);
        assert!(r.converged);
        assert!(is_signed_permutation(&r.diag_matrix, 1e-12));
        assert!(noajd(
            &MatrixStack::new(vec![DMatrix::identity(2, 2)]).unwrap(),
            &JdOptions::default()
        )
        .is_err());
    }

    #[test]
    fn one_dimensional_stacks_are_trivial() {
        let stack = MatrixStack::new(vec![DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 3.0)]).unwrap();
        for r in [
            oajd(&stack, &JdOptions::default()).unwrap(),
            noajd(&stack, &JdOptions::default()).unwrap(),
        ] {
            assert_eq!(r.diag_matrix, DMatrix::identity(1, 1));
            assert_eq!(r.residual, 0.0);
        }
    }
}
