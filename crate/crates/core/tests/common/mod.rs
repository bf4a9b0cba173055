#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_koopman::dictionary::DictionarySpec;
use sparse_koopman::enrichment::SnapshotPairs;
use sparse_koopman::linalg::{CMatrix, C64};
use sparse_koopman::solver::{assemble_gram, GramPair};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn real_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn complex_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_pairs(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SnapshotPairs {
    SnapshotPairs::observed(real_matrix(rng, n, m), real_matrix(rng, n, m)).unwrap()
}

/// Gram pair of a random dataset with at least as many samples as features,
/// so G is invertible with probability one.
pub fn random_gram(rng: &mut ChaCha8Rng, dim: usize) -> (GramPair, DictionarySpec) {
    let spec = DictionarySpec::identity(dim).unwrap();
    let pairs = random_pairs(rng, dim, 2 * dim + 1);
    (assemble_gram(&pairs, &spec).unwrap(), spec)
}

pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Largest entry gap between two multisets under the optimal matching.
pub fn matched_gap(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let cost = DMatrix::from_fn(a.len(), b.len(), |i, j| (a[i] - b[j]).norm());
    let assign = sparse_koopman::linalg::min_cost_assignment(&cost);
    assign.iter().enumerate().map(|(i, &j)| cost[(i, j)]).fold(0.0, f64::max)
}

/// Triple-loop Gram assembly, `G_ij = (1/M) sum_m conj(psi_i(x_m)) psi_j(x_m)`.
pub fn naive_gram(pairs: &SnapshotPairs, spec: &DictionarySpec) -> (CMatrix, CMatrix) {
    let k = spec.feature_dim();
    let m = pairs.len();
    let lift = |mat: &DMatrix<f64>, col: usize| spec.evaluate(mat.column(col).as_slice()).unwrap();
    let mut g = CMatrix::zeros(k, k);
    let mut a = CMatrix::zeros(k, k);
    for s in 0..m {
        let px = lift(pairs.past(), s);
        let py = lift(pairs.future(), s);
        for i in 0..k {
            for j in 0..k {
                g[(i, j)] += px[i].conj() * px[j];
                a[(i, j)] += px[i].conj() * py[j];
            }
        }
    }
    (g / C64::new(m as f64, 0.0), a / C64::new(m as f64, 0.0))
}

/// Largest residual `|(G + dG) K - (A + dA)|_F` over `samples` perturbation
/// pairs with `|dG|_F, |dA|_F <= lambda`. Half of the draws lie on the sphere,
/// the rest fill the ball.
pub fn sampled_worst_residual(gram: &GramPair, k: &CMatrix, lambda: f64, samples: usize, seed: u64) -> f64 {
    let n = gram.dim();
    let mut r = rng(seed);
    let mut draw = |on_sphere: bool| {
        let d = complex_matrix(&mut r, n, n);
        let scale = if on_sphere { 1.0 } else { r.gen::<f64>().powf(1.0 / (2 * n * n) as f64) };
        let norm = d.norm();
        d * C64::new(lambda * scale / norm, 0.0)
    };
    let mut worst = 0.0f64;
    for s in 0..samples {
        let dg = draw(s % 2 == 0);
        let da = draw(s % 2 == 0);
        worst = worst.max(((&gram.g + dg) * k - (&gram.a + da)).norm());
    }
    worst
}
