//! Gram assembly and Koopman matrix solvers.
//!
//! Features are row vectors: for a pair `(x, y)` the lifted rows satisfy
//! `Psi(y) ~ Psi(x) K`. A lifted column state therefore advances as
//! `z' = K^T z`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dictionary::DictionarySpec;
use crate::enrichment::{Provenance, SnapshotPairs};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, is_finite, pinv, CMatrix, C64};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transpose {
    /// `Psi^H Psi`, the usual complex inner product.
    #[default]
    Conjugate,
    /// `Psi^T Psi`, identical to the above for real dictionaries.
    Plain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramPair {
    pub g: CMatrix,
    pub a: CMatrix,
    pub sample_count: usize,
}

impl GramPair {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    fn check_k(&self, k: &CMatrix) -> Result<()> {
        if k.shape() != self.a.shape() {
            return Err(Error::DimensionMismatch { context: "koopman matrix", expected: self.dim(), actual: k.nrows() });
        }
        Ok(())
    }
}

pub fn assemble_gram(pairs: &SnapshotPairs, spec: &DictionarySpec) -> Result<GramPair> {
    assemble_gram_with(pairs, spec, Transpose::Conjugate)
}

pub fn assemble_gram_with(pairs: &SnapshotPairs, spec: &DictionarySpec, mode: Transpose) -> Result<GramPair> {
    if pairs.is_empty() {
        return Err(invalid("no snapshot pairs"));
    }
    if pairs.state_dim() != spec.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "snapshot state dimension",
            expected: spec.state_dim(),
            actual: pairs.state_dim(),
        });
    }
    let px = spec.lift_rows(pairs.past())?;
    let py = spec.lift_rows(pairs.future())?;
    if !is_finite(&px) || !is_finite(&py) {
        return Err(invalid("non-finite feature values"));
    }
    let m = pairs.len();
    let left = match mode {
        Transpose::Conjugate => px.adjoint(),
        Transpose::Plain => px.transpose(),
    };
    let scale = C64::new(1.0 / m as f64, 0.0);
    let g = &left * &px * scale;
    let g_t = match mode {
        Transpose::Conjugate => g.adjoint(),
        Transpose::Plain => g.transpose(),
    };
    let g = (&g + g_t) * C64::new(0.5, 0.0);
    let a = &left * &py * scale;
    Ok(GramPair { g, a, sample_count: m })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverTag {
    Edmd,
    Robust,
    Ridge,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Objective `|GK - A|_F + lambda |K|_F` at the returned matrix.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Rank of G retained by the pseudoinverse truncation.
    pub rank: usize,
    /// Ridge parameter `mu` of the stationary point, when one was found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge_parameter: Option<f64>,
    /// Objective after each accepted iteration, starting at the initial point.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub seed: u64,
    pub radius_x: f64,
    pub radius_y: f64,
    pub artificial_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KoopmanModel {
    pub koopman: CMatrix,
    pub lambda: f64,
    pub dictionary: DictionarySpec,
    pub output_map: Option<CMatrix>,
    pub solver: SolverTag,
    pub diagnostics: FitDiagnostics,
    pub enrichment: Option<EnrichmentRecord>,
    pub sweep: Vec<SweepPoint>,
    pub dt: Option<f64>,
}

impl KoopmanModel {
    pub fn new(koopman: CMatrix, lambda: f64, dictionary: DictionarySpec, solver: SolverTag) -> Result<Self> {
        let k = dictionary.feature_dim();
        if koopman.nrows() != k || koopman.ncols() != k {
            return Err(Error::DimensionMismatch { context: "koopman matrix", expected: k, actual: koopman.nrows() });
        }
        if !(lambda >= 0.0) {
            return Err(invalid(format!("lambda must be nonnegative, got {lambda}")));
        }
        if solver == SolverTag::Edmd && lambda != 0.0 {
            return Err(invalid("an edmd model has lambda = 0"));
        }
        Ok(Self {
            koopman,
            lambda,
            dictionary,
            output_map: None,
            solver,
            diagnostics: FitDiagnostics::default(),
            enrichment: None,
            sweep: Vec::new(),
            dt: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.koopman.nrows()
    }

    pub fn with_output_map(mut self, c: CMatrix) -> Result<Self> {
        if c.ncols() != self.dim() || c.nrows() != self.dictionary.state_dim() {
            return Err(Error::DimensionMismatch { context: "output map", expected: self.dim(), actual: c.ncols() });
        }
        self.output_map = Some(c);
        Ok(self)
    }
}

pub fn objective_value(gram: &GramPair, k: &CMatrix, lambda: f64) -> Result<f64> {
    gram.check_k(k)?;
    Ok((&gram.g * k - &gram.a).norm() + lambda * k.norm())
}

/// `|GK - A|_F + lambda * sqrt(|K|_F^2 + K_dim)`: the largest residual over
/// perturbations of G and A with Frobenius norm at most `lambda`.
pub fn worst_case_bound(gram: &GramPair, k: &CMatrix, lambda: f64) -> Result<f64> {
    gram.check_k(k)?;
    let r = (&gram.g * k - &gram.a).norm();
    Ok(r + lambda * (k.norm_squared() + gram.dim() as f64).sqrt())
}

fn check_gram(gram: &GramPair, spec: &DictionarySpec) -> Result<()> {
    let k = spec.feature_dim();
    if gram.g.shape() != (k, k) || gram.a.shape() != (k, k) {
        return Err(Error::DimensionMismatch { context: "gram matrices", expected: k, actual: gram.g.nrows() });
    }
    if !is_finite(&gram.g) || !is_finite(&gram.a) {
        return Err(invalid("non-finite gram entries"));
    }
    Ok(())
}

pub fn edmd_solve(gram: &GramPair, spec: &DictionarySpec) -> Result<KoopmanModel> {
    edmd_solve_with_rtol(gram, spec, gram.dim() as f64 * f64::EPSILON)
}

pub fn edmd_solve_with_rtol(gram: &GramPair, spec: &DictionarySpec, rtol: f64) -> Result<KoopmanModel> {
    check_gram(gram, spec)?;
    if gram.g.iter().all(|v| *v == C64::new(0.0, 0.0)) {
        return Err(invalid("G is identically zero: no data in feature space"));
    }
    let (gp, rank) = pinv(&gram.g, rtol);
    let k = gp * &gram.a;
    let mut model = KoopmanModel::new(k, 0.0, spec.clone(), SolverTag::Edmd)?;
    model.diagnostics = FitDiagnostics {
        objective: objective_value(gram, &model.koopman, 0.0)?,
        iterations: 0,
        converged: true,
        rank,
        ..Default::default()
    };
    Ok(model)
}

/// `argmin |GK - A|_F^2 + lambda^2 |K|_F^2 = (G^H G + lambda^2 I)^{-1} G^H A`.
pub fn ridge_solve(gram: &GramPair, spec: &DictionarySpec, lambda: f64) -> Result<KoopmanModel> {
    check_gram(gram, spec)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("ridge lambda must be positive, got {lambda}")));
    }
    let path = RidgePath::new(gram, 0.0);
    let k = path.solution(lambda * lambda);
    let mut model = KoopmanModel::new(k, lambda, spec.clone(), SolverTag::Ridge)?;
    model.diagnostics = FitDiagnostics {
        objective: objective_value(gram, &model.koopman, lambda)?,
        iterations: 0,
        converged: true,
        rank: path.rank(),
        ridge_parameter: Some(lambda * lambda),
        ..Default::default()
    };
    Ok(model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Smoothing of the residual norm, `sqrt(|R|^2 + eps^2)`.
    pub smoothing: f64,
    /// Relative singular-value truncation of G; `None` means `K_dim * eps`.
    pub rtol: Option<f64>,
}

impl Default for RobustOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50_000, smoothing: 1e-12, rtol: None }
    }
}

/// Ridge solutions `K(mu) = V diag(s / (s^2 + mu)) U^H A` over the retained
/// singular directions of `G = U S V^H`.
struct RidgePath {
    v: CMatrix,
    s: Vec<f64>,
    b: CMatrix,
    /// Squared norms of the rows of `U^H A`.
    b2: Vec<f64>,
    /// Residual mass in the dropped singular directions.
    null_residual2: f64,
}

impl RidgePath {
    fn new(gram: &GramPair, rtol: f64) -> Self {
        let dec = linalg::svd(&gram.g);
        let u = dec.u.expect("svd u");
        let v_t = dec.v_t.expect("svd v_t");
        let smax = dec.singular_values.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> =
            (0..dec.singular_values.len()).filter(|&i| dec.singular_values[i] > rtol * smax && dec.singular_values[i] > 0.0).collect();
        let b_all = u.adjoint() * &gram.a;
        let s = keep.iter().map(|&i| dec.singular_values[i]).collect();
        let b = CMatrix::from_fn(keep.len(), b_all.ncols(), |r, c| b_all[(keep[r], c)]);
        let v = CMatrix::from_fn(v_t.ncols(), keep.len(), |r, c| v_t[(keep[c], r)].conj());
        let b2: Vec<f64> = (0..b.nrows()).map(|r| b.row(r).norm_squared()).collect();
        let null_residual2 = (0..b_all.nrows()).filter(|i| !keep.contains(i)).map(|i| b_all.row(i).norm_squared()).sum();
        Self { v, s, b, b2, null_residual2 }
    }

    fn rank(&self) -> usize {
        self.s.len()
    }

    /// `(|K(mu)|_F, |G K(mu) - A|_F)` in closed form.
    fn norms(&self, mu: f64) -> (f64, f64) {
        let mut k2 = 0.0;
        let mut r2 = self.null_residual2;
        for (s, b2) in self.s.iter().zip(&self.b2) {
            let d = s * s + mu;
            k2 += (s / d).powi(2) * b2;
            r2 += (mu / d).powi(2) * b2;
        }
        (k2.sqrt(), r2.sqrt())
    }

    fn solution(&self, mu: f64) -> CMatrix {
        let mut scaled = self.b.clone();
        for (r, s) in self.s.iter().enumerate() {
            let w = s / (s * s + mu);
            scaled.row_mut(r).scale_mut(w);
        }
        &self.v * scaled
    }
}

/// Minimizes `J(K) = |GK - A|_F + lambda |K|_F`.
///
/// A nonzero minimizer with nonzero residual is a ridge solution `K(mu)` with
/// `mu |K(mu)|_F = lambda |G K(mu) - A|_F`; the left side minus the right is
/// increasing in `mu`, so `mu` is found by bisection on `log mu`. The result
/// is then refined by proximal gradient on the smoothed objective with
/// backtracking and the exact prox of `lambda |.|_F`, starting from whichever
/// of the EDMD and ridge-path solutions has the lower objective.
pub fn robust_solve(gram: &GramPair, spec: &DictionarySpec, lambda: f64, opts: &RobustOptions) -> Result<KoopmanModel> {
    check_gram(gram, spec)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("robust lambda must be positive, got {lambda} (use edmd_solve for 0)")));
    }
    let n = gram.dim();
    let rtol = opts.rtol.unwrap_or(n as f64 * f64::EPSILON);
    let zero = CMatrix::zeros(n, n);

    let a_norm = gram.a.norm();
    let gha = (gram.g.adjoint() * &gram.a).norm();
    let path = RidgePath::new(gram, rtol);

    // K = 0 is optimal when the subgradient condition |G^H A|_F <= lambda |A|_F holds.
    if a_norm == 0.0 || gha <= lambda * a_norm {
        let mut model = KoopmanModel::new(zero, lambda, spec.clone(), SolverTag::Robust)?;
        model.diagnostics = FitDiagnostics {
            objective: a_norm,
            iterations: 0,
            converged: true,
            rank: path.rank(),
            objective_history: vec![a_norm],
            ..Default::default()
        };
        return Ok(model);
    }

    let (start, mu) = path_solution(&path, lambda);
    let edmd = edmd_solve_with_rtol(gram, spec, rtol).map(|m| m.koopman).unwrap_or_else(|_| zero.clone());
    let j_path = objective_value(gram, &start, lambda)?;
    let j_edmd = objective_value(gram, &edmd, lambda)?;
    let init = if j_path <= j_edmd { start } else { edmd };

    let polish = proximal_gradient(gram, lambda, init, opts);
    let mut model = KoopmanModel::new(polish.k, lambda, spec.clone(), SolverTag::Robust)?;
    model.diagnostics = FitDiagnostics {
        objective: *polish.history.last().expect("history holds the start"),
        iterations: polish.iterations,
        converged: polish.converged,
        rank: path.rank(),
        ridge_parameter: Some(mu),
        objective_history: polish.history,
    };
    Ok(model)
}

fn path_solution(path: &RidgePath, lambda: f64) -> (CMatrix, f64) {
    let gap = |log_mu: f64| {
        let mu = log_mu.exp();
        let (k, r) = path.norms(mu);
        mu * k - lambda * r
    };
    let (mut lo, mut hi) = ((1e-300_f64).ln(), (1e300_f64).ln());
    if path.rank() == 0 {
        return (CMatrix::zeros(path.v.nrows(), path.b.ncols()), f64::INFINITY);
    }
    // Exact fit is optimal: no residual forced by dropped directions and the
    // penalty is too weak to pull away from it.
    if gap(lo) >= 0.0 {
        return (path.solution(0.0), 0.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = (0.5 * (lo + hi)).exp();
    (path.solution(mu), mu)
}

struct Polish {
    k: CMatrix,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn proximal_gradient(gram: &GramPair, lambda: f64, k0: CMatrix, opts: &RobustOptions) -> Polish {
    let eps2 = opts.smoothing * opts.smoothing;
    let residual = |k: &CMatrix| &gram.g * k - &gram.a;
    let smooth = |r: &CMatrix| (r.norm_squared() + eps2).sqrt();
    let objective = |k: &CMatrix| residual(k).norm() + lambda * k.norm();
    let gh = gram.g.adjoint();

    let mut k = k0;
    let mut history = vec![objective(&k)];
    let mut eta = 1.0 / linalg::spectral_norm(&gram.g).powi(2).max(f64::MIN_POSITIVE);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let r = residual(&k);
        let f = smooth(&r);
        let grad = &gh * &r / C64::new(f, 0.0);
        let next = loop {
            let z = &k - &grad * C64::new(eta, 0.0);
            let nz = z.norm();
            let shrink = if nz > 0.0 { (1.0 - lambda * eta / nz).max(0.0) } else { 0.0 };
            let cand = z * C64::new(shrink, 0.0);
            let d = &cand - &k;
            let fc = smooth(&residual(&cand));
            let model = f + grad.dotc(&d).re + d.norm_squared() / (2.0 * eta);
            if fc <= model + 1e-15 * f.max(1.0) || eta < 1e-300 {
                break cand;
            }
            eta *= 0.5;
        };
        let j_old = *history.last().unwrap();
        let j_new = objective(&next);
        iterations += 1;
        if !(j_new <= j_old) {
            // No further descent at this precision; keep the current point.
            converged = true;
            break;
        }
        k = next;
        history.push(j_new);
        if j_old - j_new <= opts.tol * j_old.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        eta *= 1.5;
    }
    Polish { k, history, iterations, converged }
}

/// Logarithmic grid `lo .. hi` with `n` points.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-6, 1.0, 13)
}

/// Mean one-step prediction error over the observed pairs. With an output
/// map `C` the error is measured in state space, `|y - Re(C K^T Psi(x)^T)|`;
/// without one, in feature space, `|Psi(y) - Psi(x) K|`.
pub fn one_step_score(k: &CMatrix, pairs: &SnapshotPairs, spec: &DictionarySpec, output_map: Option<&CMatrix>) -> Result<f64> {
    let obs = if pairs.is_observed_only() { pairs.clone() } else { pairs.observed_subset() };
    let px = spec.lift_rows(obs.past())?;
    let total: f64 = match output_map {
        Some(c) => {
            let pred = c * (px * k).transpose();
            let y = obs.future();
            (0..obs.len())
                .map(|j| (0..y.nrows()).map(|i| (y[(i, j)] - pred[(i, j)].re).powi(2)).sum::<f64>().sqrt())
                .sum()
        }
        None => {
            let r = spec.lift_rows(obs.future())? - px * k;
            r.row_iter().map(|row| row.norm()).sum()
        }
    };
    Ok(total / obs.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Robust,
    Ridge,
}

/// Fits one model per grid value and returns them with the index of the one
/// with the lowest one-step score on the observed pairs (first on ties).
pub fn sweep_lambda(
    gram: &GramPair,
    pairs: &SnapshotPairs,
    spec: &DictionarySpec,
    grid: &[f64],
    kind: PenaltyKind,
    opts: &RobustOptions,
    output_map: Option<&CMatrix>,
) -> Result<(Vec<KoopmanModel>, usize)> {
    if grid.is_empty() {
        return Err(invalid("empty lambda grid"));
    }
    let mut models = Vec::with_capacity(grid.len());
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let model = match kind {
            PenaltyKind::Robust => robust_solve(gram, spec, lambda, opts)?,
            PenaltyKind::Ridge => ridge_solve(gram, spec, lambda)?,
        };
        points.push(SweepPoint { lambda, score: one_step_score(&model.koopman, pairs, spec, output_map)? });
        models.push(model);
    }
    let best = (0..points.len())
        .fold(0, |b, i| if points[i].score < points[b].score { i } else { b });
    for m in &mut models {
        m.sweep = points.clone();
    }
    Ok((models, best))
}

/// Count of artificial columns in a pair set.
pub fn artificial_count(pairs: &SnapshotPairs) -> usize {
    pairs.provenance().iter().filter(|p| **p == Provenance::Artificial).count()
}

/// Real matrix helper for tests and callers holding real data.
pub fn real_gram(g: DMatrix<f64>, a: DMatrix<f64>, sample_count: usize) -> GramPair {
    GramPair { g: linalg::to_complex(&g), a: linalg::to_complex(&a), sample_count }
}
