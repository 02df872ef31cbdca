//! Fixed workloads shared by the benchmarks.

use mtica::sim::{gen_mixing, mix, sample_sources};
use mtica::{mt_moments, DataMatrix, MatrixStack, MtFunction, SeedStream, SourceFamily, SourceSpec};
use nalgebra::DMatrix;

/// A mixture of `p` sources cycling through every source law, `n` samples.
pub fn mixture(n: usize, p: usize, seed: u64) -> DataMatrix {
    let seeds = SeedStream::new(seed);
    let specs: Vec<SourceSpec> = SourceFamily::ALL
        .iter()
        .cycle()
        .take(p)
        .map(|&f| SourceSpec::new(f))
        .collect();
    let s = sample_sources(&specs, n, &mut seeds.stream("sources", 0)).expect("valid sources");
    let a = gen_mixing(p, (1.0, 2.0), &mut seeds.stream("mixing", 0)).expect("valid mixing");
    mix(&a, &s).expect("shapes agree")
}

/// `m` Gaussian MT-covariances of `data` at test-points on a small lattice.
pub fn mt_stack(data: &DataMatrix, m: usize) -> MatrixStack {
    let p = data.n_channels();
    let mats: Vec<DMatrix<f64>> = (0..m)
        .map(|k| {
            let t = nalgebra::DVector::from_fn(p, |i, _| (((k + 1) * (i + 3)) % 7) as f64 / 7.0 - 0.5);
            let spec = MtFunction::gaussian(t, 1.0).expect("positive width");
            mt_moments(data, &spec).expect("non-degenerate weights").sigma
        })
        .collect();
    MatrixStack::new(mats).expect("symmetric stack")
}
