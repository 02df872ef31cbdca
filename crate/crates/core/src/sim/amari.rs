use nalgebra::DMatrix;

use crate::error::{MticaError, Result};

/// Amari error between two separation matrices, in `[0, 1]`.
///
/// With `Ψ = G H⁻¹`, sums the row-wise and column-wise excess of `Σ|Ψ|` over
/// `max|Ψ|` and normalizes by `2p(p - 1)`. Zero exactly when `G = P D H` for
/// a permutation `P` and nonsingular diagonal `D`.
pub fn amari_error(g: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<f64> {
    let p = g.nrows();
    if g.ncols() != p || h.shape() != (p, p) {
        return Err(MticaError::DimensionMismatch {
            expected: p,
            got: if g.ncols() != p { g.ncols() } else { h.nrows() },
        });
    }
    if p < 2 {
        return Ok(0.0);
    }
    let h_inv = h.clone().try_inverse().ok_or(MticaError::SingularMatrix)?;
    let psi = (g * h_inv).abs();
    if !psi.iter().all(|v| v.is_finite()) {
        return Err(MticaError::SingularMatrix);
    }

    let mut total = 0.0;
    for i in 0..p {
        let row = psi.row(i);
        let max = row.max();
        if max <= 0.0 {
            return Err(MticaError::SingularMatrix);
        }
        total += row.sum() / max - 1.0;
    }
    for j in 0..p {
        let col = psi.column(j);
        let max = col.max();
        if max <= 0.0 {
            return Err(MticaError::SingularMatrix);
        }
        total += col.sum() / max - 1.0;
    }
    Ok(total / (2.0 * p as f64 * (p as f64 - 1.0)))
}
