//! Enrichment of sparse snapshot data with bounded artificial points.
//!
//! Perturbations are drawn uniformly from closed Euclidean balls: a
//! standard-normal direction normalized to unit length, scaled by
//! `radius * u^(1/N)` with `u ~ U[0, 1)`. The generator is ChaCha20 seeded
//! through `seed_from_u64`, so a given seed reproduces the same points on
//! every platform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dictionary::DictionarySpec;
use crate::error::{invalid, Error, Result};
use crate::linalg::numerical_rank;

/// Name of the pseudorandom generator recorded in model files.
pub const GENERATOR: &str = "chacha20/seed_from_u64";

/// Default relative singular-value threshold for Jacobian rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    Artificial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentConfig {
    pub radius_x: f64,
    /// Defaults to `radius_x` (unit Lipschitz bound) when absent.
    pub radius_y: Option<f64>,
    pub points_per_sample: usize,
    pub seed: u64,
}

impl EnrichmentConfig {
    pub fn new(radius_x: f64, points_per_sample: usize, seed: u64) -> Self {
        Self { radius_x, radius_y: None, points_per_sample, seed }
    }

    pub fn radius_y(&self) -> f64 {
        self.radius_y.unwrap_or(self.radius_x)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_x > 0.0 && self.radius_x.is_finite()) {
            return Err(invalid(format!("radius_x must be positive, got {}", self.radius_x)));
        }
        let ry = self.radius_y();
        if !(ry > 0.0 && ry.is_finite()) {
            return Err(invalid(format!("radius_y must be positive, got {ry}")));
        }
        if self.points_per_sample == 0 {
            return Err(invalid("points_per_sample must be at least 1"));
        }
        Ok(())
    }
}

/// Paired snapshot matrices `past` (X_p) and `future` (X_f), one pair per
/// column, with a provenance tag per column.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotPairs {
    past: DMatrix<f64>,
    future: DMatrix<f64>,
    provenance: Vec<Provenance>,
}

impl SnapshotPairs {
    pub fn new(past: DMatrix<f64>, future: DMatrix<f64>, provenance: Vec<Provenance>) -> Result<Self> {
        if past.shape() != future.shape() {
            return Err(invalid(format!(
                "past and future shapes differ: {:?} vs {:?}",
                past.shape(),
                future.shape()
            )));
        }
        if provenance.len() != past.ncols() {
            return Err(Error::DimensionMismatch {
                context: "provenance tags",
                expected: past.ncols(),
                actual: provenance.len(),
            });
        }
        if !provenance.contains(&Provenance::Observed) {
            return Err(invalid("snapshot pairs need at least one observed column"));
        }
        Ok(Self { past, future, provenance })
    }

    /// All columns tagged observed.
    pub fn observed(past: DMatrix<f64>, future: DMatrix<f64>) -> Result<Self> {
        let n = past.ncols();
        Self::new(past, future, vec![Provenance::Observed; n])
    }

    /// Consecutive pairs `(x_t, x_{t+1})` of a trajectory.
    pub fn from_trajectory(traj: &DMatrix<f64>) -> Result<Self> {
        if traj.ncols() < 2 {
            return Err(invalid("a trajectory needs at least 2 snapshots to form pairs"));
        }
        let m = traj.ncols() - 1;
        Self::observed(traj.columns(0, m).into_owned(), traj.columns(1, m).into_owned())
    }

    pub fn past(&self) -> &DMatrix<f64> {
        &self.past
    }

    pub fn future(&self) -> &DMatrix<f64> {
        &self.future
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn state_dim(&self) -> usize {
        self.past.nrows()
    }

    pub fn len(&self) -> usize {
        self.past.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.past.ncols() == 0
    }

    pub fn n_observed(&self) -> usize {
        self.provenance.iter().filter(|p| **p == Provenance::Observed).count()
    }

    pub fn is_observed_only(&self) -> bool {
        self.provenance.iter().all(|p| *p == Provenance::Observed)
    }

    /// The observed columns only, in their original order.
    pub fn observed_subset(&self) -> SnapshotPairs {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.provenance[i] == Provenance::Observed).collect();
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])]);
        SnapshotPairs { past: pick(&self.past), future: pick(&self.future), provenance: vec![Provenance::Observed; idx.len()] }
    }
}

/// Uniform samples from the closed Euclidean ball of a given radius.
pub struct BallSampler {
    rng: ChaCha20Rng,
}

impl BallSampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn sample(&mut self, dim: usize, radius: f64) -> DVector<f64> {
        let dir = loop {
            let g = DVector::from_fn(dim, |_, _| self.rng.sample::<f64, _>(StandardNormal));
            let n = g.norm();
            if n > 0.0 {
                break g / n;
            }
        };
        let u: f64 = self.rng.gen();
        dir * (radius * u.powf(1.0 / dim as f64))
    }
}

/// Appends `points_per_sample` artificial pairs `(x_i + dx_i, y_i + dy_i)` per
/// observed pair, with `|dx_i| <= radius_x` and `|dy_i| <= radius_y`.
/// Observed columns come first, then the artificial ones in sample order.
pub fn enrich_pairs(pairs: &SnapshotPairs, cfg: &EnrichmentConfig) -> Result<SnapshotPairs> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(invalid("cannot enrich an empty dataset"));
    }
    if !pairs.is_observed_only() {
        return Err(invalid("enrich_pairs expects observed pairs only"));
    }
    let (n, m) = pairs.past.shape();
    let total = m * (1 + cfg.points_per_sample);
    let mut past = DMatrix::zeros(n, total);
    let mut future = DMatrix::zeros(n, total);
    past.columns_mut(0, m).copy_from(&pairs.past);
    future.columns_mut(0, m).copy_from(&pairs.future);
    let mut sampler = BallSampler::new(cfg.seed);
    let ry = cfg.radius_y();
    for s in 0..cfg.points_per_sample {
        for i in 0..m {
            let col = m * (1 + s) + i;
            let dx = sampler.sample(n, cfg.radius_x);
            let dy = sampler.sample(n, ry);
            past.set_column(col, &(pairs.past.column(i) + dx));
            future.set_column(col, &(pairs.future.column(i) + dy));
        }
    }
    let mut provenance = vec![Provenance::Observed; m];
    provenance.resize(total, Provenance::Artificial);
    SnapshotPairs::new(past, future, provenance)
}

/// Builds the pair set of a trajectory enriched with `points_per_sample`
/// perturbed copies of it: each copy perturbs every snapshot independently
/// within `radius_x`, and contributes the pairs `(x~_i, x~_{i+1})`.
pub fn enrich_trajectory(traj: &DMatrix<f64>, cfg: &EnrichmentConfig) -> Result<SnapshotPairs> {
    cfg.validate()?;
    enrich_trajectory_points(traj, cfg.points_per_sample * traj.ncols(), cfg)
}

/// Like [`enrich_trajectory`], but with a total budget of `n_points` perturbed
/// snapshots instead of whole copies. Full copies are used while the budget
/// allows; the remainder perturbs a prefix of the trajectory. A prefix of a
/// single snapshot forms no pair and is dropped.
pub fn enrich_trajectory_points(traj: &DMatrix<f64>, n_points: usize, cfg: &EnrichmentConfig) -> Result<SnapshotPairs> {
    if traj.ncols() < 2 {
        return Err(invalid("a trajectory needs at least 2 snapshots"));
    }
    if !(cfg.radius_x > 0.0 && cfg.radius_x.is_finite()) {
        return Err(invalid(format!("radius_x must be positive, got {}", cfg.radius_x)));
    }
    let (n, len) = traj.shape();
    let mut segments = vec![len; n_points / len];
    if n_points % len > 0 {
        segments.push(n_points % len);
    }
    let observed = len - 1;
    let artificial: usize = segments.iter().map(|&s| s - 1).sum();
    let mut past = DMatrix::zeros(n, observed + artificial);
    let mut future = DMatrix::zeros(n, observed + artificial);
    past.columns_mut(0, observed).copy_from(&traj.columns(0, observed));
    future.columns_mut(0, observed).copy_from(&traj.columns(1, observed));

    let mut sampler = BallSampler::new(cfg.seed);
    let mut col = observed;
    for &seg in &segments {
        let perturbed: Vec<DVector<f64>> =
            (0..seg).map(|i| traj.column(i) + sampler.sample(n, cfg.radius_x)).collect();
        for i in 0..seg.saturating_sub(1) {
            past.set_column(col, &perturbed[i]);
            future.set_column(col, &perturbed[i + 1]);
            col += 1;
        }
    }
    let mut provenance = vec![Provenance::Observed; observed];
    provenance.resize(observed + artificial, Provenance::Artificial);
    SnapshotPairs::new(past, future, provenance)
}

/// Useful number of artificial points around `x`: `min(N, rank J(x))`.
pub fn max_augmentation_count(spec: &DictionarySpec, x: &[f64], rank_tol: f64) -> Result<usize> {
    let jac = spec.jacobian(x)?;
    Ok(spec.state_dim().min(numerical_rank(&jac, rank_tol)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub column: usize,
    pub budget: usize,
    pub requested: usize,
    pub within_budget: bool,
}

/// Compares the requested points per sample against the per-sample cap.
/// Advisory only.
pub fn check_augmentation_budget(
    pairs: &SnapshotPairs,
    spec: &DictionarySpec,
    cfg: &EnrichmentConfig,
    rank_tol: f64,
) -> Result<Vec<BudgetEntry>> {
    let mut out = Vec::new();
    let mut buf = vec![0.0; pairs.state_dim()];
    for (i, tag) in pairs.provenance().iter().enumerate() {
        if *tag != Provenance::Observed {
            continue;
        }
        buf.iter_mut().zip(pairs.past().column(i).iter()).for_each(|(b, &v)| *b = v);
        let budget = max_augmentation_count(spec, &buf, rank_tol)?;
        out.push(BudgetEntry {
            column: i,
            budget,
            requested: cfg.points_per_sample,
            within_budget: cfg.points_per_sample <= budget,
        });
    }
    Ok(out)
}

/// Euclidean norm of the per-state standard deviations of a trajectory.
pub fn trajectory_spread(traj: &DMatrix<f64>) -> f64 {
    let m = traj.ncols() as f64;
    traj.row_iter()
        .map(|row| {
            let mean = row.sum() / m;
            row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sample_traj(n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |r, c| ((r + 1) as f64 * 0.3 + c as f64 * 0.17).sin())
    }

    #[test]
    fn enrich_pairs_layout() {
        let traj = sample_traj(3, 4);
        let pairs = SnapshotPairs::from_trajectory(&traj).unwrap();
        let cfg = EnrichmentConfig::new(0.1, 1, 7);
        let out = enrich_pairs(&pairs, &cfg).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(out.provenance()[..3], [Provenance::Observed; 3]);
        assert_eq!(out.provenance()[3..], [Provenance::Artificial; 3]);
        for i in 0..3 {
            assert_eq!(out.past().column(i), pairs.past().column(i));
            assert!((out.past().column(3 + i) - pairs.past().column(i)).norm() <= 0.1);
            assert!((out.future().column(3 + i) - pairs.future().column(i)).norm() <= 0.1);
        }
    }

    #[test]
    fn radius_y_independent_of_radius_x() {
        let pairs = SnapshotPairs::from_trajectory(&sample_traj(4, 30)).unwrap();
        let cfg = EnrichmentConfig { radius_x: 1e-3, radius_y: Some(0.5), points_per_sample: 3, seed: 1 };
        let out = enrich_pairs(&pairs, &cfg).unwrap();
        let m = pairs.len();
        let mut max_dy: f64 = 0.0;
        for s in 0..3 {
            for i in 0..m {
                let c = m * (1 + s) + i;
                assert!((out.past().column(c) - pairs.past().column(i)).norm() <= 1e-3);
                max_dy = max_dy.max((out.future().column(c) - pairs.future().column(i)).norm());
            }
        }
        assert!(max_dy <= 0.5 && max_dy > 1e-3);
    }

    #[test]
    fn degenerate_radius_copies_observed() {
        let pairs = SnapshotPairs::from_trajectory(&sample_traj(3, 5)).unwrap();
        let out = enrich_pairs(&pairs, &EnrichmentConfig::new(1e-15, 1, 3)).unwrap();
        for i in 0..4 {
            assert!((out.past().column(4 + i) - pairs.past().column(i)).amax() <= 1e-14);
        }
    }

    #[test]
    fn enrichment_is_deterministic() {
        let pairs = SnapshotPairs::from_trajectory(&sample_traj(3, 5)).unwrap();
        let cfg = EnrichmentConfig::new(0.2, 2, 42);
        assert_eq!(enrich_pairs(&pairs, &cfg).unwrap(), enrich_pairs(&pairs, &cfg).unwrap());
        let other = EnrichmentConfig::new(0.2, 2, 43);
        assert_ne!(enrich_pairs(&pairs, &cfg).unwrap(), enrich_pairs(&pairs, &other).unwrap());
    }

    #[test]
    fn enrich_pairs_rejects_bad_input() {
        let pairs = SnapshotPairs::observed(DMatrix::zeros(2, 0), DMatrix::zeros(2, 0));
        assert!(pairs.is_err());
        let good = SnapshotPairs::from_trajectory(&sample_traj(2, 3)).unwrap();
        assert!(enrich_pairs(&good, &EnrichmentConfig::new(0.0, 1, 0)).is_err());
        assert!(enrich_pairs(&good, &EnrichmentConfig::new(0.1, 0, 0)).is_err());
        let enriched = enrich_pairs(&good, &EnrichmentConfig::new(0.1, 1, 0)).unwrap();
        assert!(enrich_pairs(&enriched, &EnrichmentConfig::new(0.1, 1, 0)).is_err());
    }

    #[test]
    fn trajectory_enrichment_three_snapshots() {
        let traj = sample_traj(2, 3);
        let cfg = EnrichmentConfig::new(0.05, 1, 11);
        let out = enrich_trajectory(&traj, &cfg).unwrap();
        assert_eq!(out.len(), 4);
        // Rebuild the perturbed copy with the same stream.
        let mut sampler = BallSampler::new(11);
        let tilde: Vec<DVector<f64>> = (0..3).map(|i| traj.column(i) + sampler.sample(2, 0.05)).collect();
        assert_eq!(out.past().column(0), traj.column(0));
        assert_eq!(out.past().column(1), traj.column(1));
        assert_eq!(out.future().column(0), traj.column(1));
        assert_eq!(out.future().column(1), traj.column(2));
        assert_eq!(out.past().column(2), tilde[0].column(0));
        assert_eq!(out.past().column(3), tilde[1].column(0));
        assert_eq!(out.future().column(2), tilde[1].column(0));
        assert_eq!(out.future().column(3), tilde[2].column(0));
    }

    #[test]
    fn trajectory_enrichment_fifteen_snapshots() {
        let traj = sample_traj(4, 15);
        let out = enrich_trajectory(&traj, &EnrichmentConfig::new(1e-15, 1, 0)).unwrap();
        assert_eq!(out.len(), 28);
        assert_eq!(out.n_observed(), 14);
        for i in 0..14 {
            assert!((out.future().column(14 + i) - traj.column(i + 1)).amax() <= 1e-14);
            assert!((out.past().column(14 + i) - traj.column(i)).amax() <= 1e-14);
        }
    }

    #[test]
    fn point_budget_with_partial_copy() {
        let traj = sample_traj(3, 10);
        // 25 points: two full copies (9 pairs each) and a 5-snapshot prefix (4 pairs)
        let out = enrich_trajectory_points(&traj, 25, &EnrichmentConfig::new(0.01, 1, 0)).unwrap();
        assert_eq!(out.len(), 9 + 9 + 9 + 4);
        let zero = enrich_trajectory_points(&traj, 0, &EnrichmentConfig::new(0.01, 1, 0)).unwrap();
        assert_eq!(zero, SnapshotPairs::from_trajectory(&traj).unwrap());
    }

    #[test]
    fn trajectory_enrichment_needs_two_snapshots() {
        assert!(enrich_trajectory(&sample_traj(2, 1), &EnrichmentConfig::new(0.1, 1, 0)).is_err());
    }

    #[test]
    fn augmentation_counts() {
        let id = DictionarySpec::identity(5).unwrap();
        assert_eq!(max_augmentation_count(&id, &[0.1, 0.2, 0.3, 0.4, 0.5], DEFAULT_RANK_TOL).unwrap(), 5);
        let constant = DictionarySpec::monomial(3, 0).unwrap();
        assert_eq!(max_augmentation_count(&constant, &[1.0, 2.0, 3.0], DEFAULT_RANK_TOL).unwrap(), 0);
        let fourier = DictionarySpec::fourier(-10, 10).unwrap();
        assert_eq!(max_augmentation_count(&fourier, &[PI], DEFAULT_RANK_TOL).unwrap(), 1);
    }

    #[test]
    fn budget_report() {
        let traj = sample_traj(40, 4);
        let pairs = SnapshotPairs::from_trajectory(&traj).unwrap();
        let id = DictionarySpec::identity(40).unwrap();
        let report = check_augmentation_budget(&pairs, &id, &EnrichmentConfig::new(0.1, 2, 0), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(report.len(), 3);
        assert!(report.iter().all(|e| e.within_budget && e.budget == 40));

        let theta = DMatrix::from_fn(1, 6, |_, c| PI + 0.01 * c as f64);
        let pairs = SnapshotPairs::from_trajectory(&theta).unwrap();
        let fourier = DictionarySpec::fourier(-10, 10).unwrap();
        let report = check_augmentation_budget(&pairs, &fourier, &EnrichmentConfig::new(0.1, 3, 0), DEFAULT_RANK_TOL).unwrap();
        assert!(report.iter().all(|e| !e.within_budget && e.budget == 1));
        let report = check_augmentation_budget(&pairs, &fourier, &EnrichmentConfig::new(0.1, 1, 0), DEFAULT_RANK_TOL).unwrap();
        assert!(report.iter().all(|e| e.within_budget));
    }

    #[test]
    fn spread_of_constant_rows_is_zero() {
        let traj = DMatrix::from_element(3, 5, 2.0);
        assert_eq!(trajectory_spread(&traj), 0.0);
        let traj = DMatrix::from_row_slice(1, 2, &[0.0, 2.0]);
        assert!((trajectory_spread(&traj) - 1.0).abs() < 1e-15);
    }
}
