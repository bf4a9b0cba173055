//! Ground-truth simulators for the three benchmark systems: a damped ring of
//! coupled linear oscillators, the discretized Stuart-Landau oscillator and
//! the viscous Burgers equation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{eigenvalues, to_complex, C64};

// ---------------------------------------------------------------------------
// Oscillator ring
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorRingConfig {
    pub n_oscillators: usize,
    pub damping: f64,
    pub dt: f64,
    pub n_steps: usize,
    /// Positions followed by velocities, length `2 * n_oscillators`.
    pub initial_state: Vec<f64>,
}

impl OscillatorRingConfig {
    /// Ring of 20 oscillators, damping 0.4, sampled at 0.01 s for 100 steps.
    pub fn benchmark_default() -> Self {
        let n = 20;
        Self {
            n_oscillators: n,
            damping: 0.4,
            dt: 0.01,
            n_steps: 100,
            initial_state: default_ring_initial_state(n, 0),
        }
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n_oscillators
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_oscillators < 2 {
            return Err(invalid("oscillator ring needs at least 2 oscillators"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(invalid(format!("damping must be nonnegative, got {}", self.damping)));
        }
        if self.n_steps == 0 {
            return Err(invalid("n_steps must be positive"));
        }
        if self.initial_state.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "oscillator initial_state",
                expected: self.state_dim(),
                actual: self.initial_state.len(),
            });
        }
        if self.initial_state.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial_state contains non-finite values"));
        }
        Ok(())
    }
}

/// Positions drawn uniformly from [-1, 1] with a ChaCha20 stream seeded by
/// `seed`; velocities start at rest.
pub fn default_ring_initial_state(n_oscillators: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut state = vec![0.0; 2 * n_oscillators];
    for v in state.iter_mut().take(n_oscillators) {
        *v = rng.gen_range(-1.0..=1.0);
    }
    state
}

/// Laplacian of the unweighted cycle graph on `n` nodes.
pub fn ring_laplacian(n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        l[(i, i)] += 2.0;
        l[(i, (i + 1) % n)] -= 1.0;
        l[(i, (i + n - 1) % n)] -= 1.0;
    }
    l
}

/// Continuous-time generator `[[0, I], [-L, -d I]]`.
pub fn oscillator_generator(n: usize, damping: f64) -> DMatrix<f64> {
    let l = ring_laplacian(n);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        a[(n + i, n + i)] = -damping;
        for j in 0..n {
            a[(n + i, j)] = -l[(i, j)];
        }
    }
    a
}

/// Exact one-step transition matrix `exp(A_c dt)`.
pub fn oscillator_transition(cfg: &OscillatorRingConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    Ok((oscillator_generator(cfg.n_oscillators, cfg.damping) * cfg.dt).exp())
}

pub fn simulate_oscillator_ring(cfg: &OscillatorRingConfig) -> Result<DMatrix<f64>> {
    let step = oscillator_transition(cfg)?;
    let dim = cfg.state_dim();
    let mut traj = DMatrix::zeros(dim, cfg.n_steps + 1);
    let mut x = DVector::from_column_slice(&cfg.initial_state);
    traj.set_column(0, &x);
    for t in 1..=cfg.n_steps {
        x = &step * x;
        traj.set_column(t, &x);
    }
    Ok(traj)
}

/// Eigenvalues of the exact discrete map.
pub fn exact_oscillator_spectrum(cfg: &OscillatorRingConfig) -> Result<Vec<C64>> {
    let step = oscillator_transition(cfg)?;
    eigenvalues(&to_complex(&step))
}

/// Total mechanical energy `0.5 v'v + 0.5 q'Lq` of a ring state.
pub fn oscillator_energy(n: usize, state: &[f64]) -> f64 {
    let l = ring_laplacian(n);
    let q = DVector::from_column_slice(&state[..n]);
    let v = DVector::from_column_slice(&state[n..2 * n]);
    0.5 * v.dot(&v) + 0.5 * q.dot(&(&l * &q))
}

// ---------------------------------------------------------------------------
// Stuart-Landau
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StuartLandauConfig {
    pub mu: f64,
    pub gamma: f64,
    pub beta: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub r0: f64,
    pub theta0: f64,
}

impl StuartLandauConfig {
    /// mu = 1, gamma = 1, beta = 0; 150 steps of 0.01 from (r, theta) = (1, pi).
    pub fn benchmark_default() -> Self {
        Self {
            mu: 1.0,
            gamma: 1.0,
            beta: 0.0,
            dt: 0.01,
            n_steps: 150,
            r0: 1.0,
            theta0: std::f64::consts::PI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(invalid("n_steps must be positive"));
        }
        for (name, v) in [("gamma", self.gamma), ("beta", self.beta), ("r0", self.r0), ("theta0", self.theta0)] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Explicit Euler update in polar coordinates; rows are (r, theta).
pub fn simulate_stuart_landau(cfg: &StuartLandauConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let mut traj = DMatrix::zeros(2, cfg.n_steps + 1);
    let (mut r, mut theta) = (cfg.r0, cfg.theta0);
    traj[(0, 0)] = r;
    traj[(1, 0)] = theta;
    for t in 1..=cfg.n_steps {
        let r_next = r + (cfg.mu * r - r * r * r) * cfg.dt;
        let theta_next = theta + (cfg.gamma - cfg.beta * r * r) * cfg.dt;
        if !r_next.is_finite() || !theta_next.is_finite() {
            return Err(Error::Divergence { step: t });
        }
        r = r_next;
        theta = theta_next;
        traj[(0, t)] = r;
        traj[(1, t)] = theta;
    }
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Burgers
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    /// `sin(2 pi x)`
    #[serde(rename = "sin_2pi_x")]
    Sin2PiX,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialProfile {
    Named(ProfileName),
    /// Values at the interior grid nodes, left to right.
    Sampled(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurgersConfig {
    pub viscosity: f64,
    pub dx: f64,
    pub dt: f64,
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
    pub initial_profile: InitialProfile,
    /// Dirichlet values at the left and right ends.
    pub boundary: (f64, f64),
}

const GRID_TOL: f64 = 1e-12;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;

fn grid_count(width: f64, step: f64, what: &str) -> Result<usize> {
    let n = (width / step).round();
    if n < 1.0 || (n * step - width).abs() > GRID_TOL {
        return Err(invalid(format!("{what} step {step} does not divide the range width {width}")));
    }
    Ok(n as usize)
}

impl BurgersConfig {
    /// k = 0.01, dx = 0.01, dt = 0.02 on x in [0, 1], `u(x, 0) = sin(2 pi x)`,
    /// zero Dirichlet ends. The time window covers 100 steps so that the
    /// longest training window (35 steps) plus a 35-step horizon fits.
    pub fn benchmark_default() -> Self {
        Self {
            viscosity: 0.01,
            dx: 0.01,
            dt: 0.02,
            x_range: (0.0, 1.0),
            t_range: (0.0, 2.0),
            initial_profile: InitialProfile::Named(ProfileName::Sin2PiX),
            boundary: (0.0, 0.0),
        }
    }

    /// Number of spatial intervals.
    pub fn n_intervals(&self) -> Result<usize> {
        grid_count(self.x_range.1 - self.x_range.0, self.dx, "space")
    }

    pub fn n_time_steps(&self) -> Result<usize> {
        grid_count(self.t_range.1 - self.t_range.0, self.dt, "time")
    }

    /// State variables are the nodes right of the left boundary, the right
    /// boundary node included (held at its Dirichlet value).
    pub fn state_dim(&self) -> Result<usize> {
        self.n_intervals()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.viscosity > 0.0 && self.viscosity.is_finite()) {
            return Err(invalid(format!("viscosity must be positive, got {}", self.viscosity)));
        }
        if !(self.dx > 0.0) || !(self.dt > 0.0) {
            return Err(invalid("dx and dt must be positive"));
        }
        let nx = self.n_intervals()?;
        self.n_time_steps()?;
        if nx < 2 {
            return Err(invalid("grid needs at least one interior node"));
        }
        if let InitialProfile::Sampled(v) = &self.initial_profile {
            if v.len() != nx - 1 {
                return Err(Error::DimensionMismatch {
                    context: "sampled initial profile",
                    expected: nx - 1,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid("initial profile contains non-finite values"));
            }
        }
        Ok(())
    }

    fn interior_initial(&self, nx: usize) -> Vec<f64> {
        let x0 = self.x_range.0;
        match &self.initial_profile {
            InitialProfile::Named(ProfileName::Sin2PiX) => (1..nx)
                .map(|j| (2.0 * std::f64::consts::PI * (x0 + j as f64 * self.dx)).sin())
                .collect(),
            InitialProfile::Named(ProfileName::Zero) => vec![0.0; nx - 1],
            InitialProfile::Sampled(v) => v.clone(),
        }
    }
}

/// Central-difference right-hand side `-u u_x + k u_xx` at the interior nodes.
fn burgers_rhs(u: &[f64], left: f64, right: f64, k: f64, dx: f64, out: &mut [f64]) {
    let n = u.len();
    for j in 0..n {
        let um = if j == 0 { left } else { u[j - 1] };
        let up = if j + 1 == n { right } else { u[j + 1] };
        out[j] = -u[j] * (up - um) / (2.0 * dx) + k * (up - 2.0 * u[j] + um) / (dx * dx);
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    c[0] = upper[0] / d;
    rhs[0] /= d;
    for i in 1..n {
        d = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / d } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// One Crank-Nicolson step with Newton iteration on the implicit stage.
fn burgers_step(u: &[f64], cfg: &BurgersConfig, step: usize) -> Result<Vec<f64>> {
    let n = u.len();
    let (left, right) = cfg.boundary;
    let (k, dx, dt) = (cfg.viscosity, cfg.dx, cfg.dt);
    let mut f_old = vec![0.0; n];
    burgers_rhs(u, left, right, k, dx, &mut f_old);

    let mut v = u.to_vec();
    let mut f_new = vec![0.0; n];
    let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut last_update = f64::INFINITY;
    let h = 0.5 * dt;
    let diff = k / (dx * dx);
    for _ in 0..NEWTON_MAX_ITER {
        burgers_rhs(&v, left, right, k, dx, &mut f_new);
        let mut rhs: Vec<f64> = (0..n).map(|j| -(v[j] - u[j] - h * (f_new[j] + f_old[j]))).collect();
        for j in 0..n {
            let vm = if j == 0 { left } else { v[j - 1] };
            let vp = if j + 1 == n { right } else { v[j + 1] };
            diag[j] = 1.0 - h * (-(vp - vm) / (2.0 * dx) - 2.0 * diff);
            upper[j] = -h * (-v[j] / (2.0 * dx) + diff);
            lower[j] = -h * (v[j] / (2.0 * dx) + diff);
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        last_update = rhs.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        for (vj, dj) in v.iter_mut().zip(&rhs) {
            *vj += dj;
        }
        if !last_update.is_finite() {
            break;
        }
        if last_update < NEWTON_TOL {
            return Ok(v);
        }
    }
    Err(Error::NonConvergence { step, update: last_update })
}

/// Flow field with one row per state node (see [`BurgersConfig::state_dim`])
/// and one column per time level.
pub fn simulate_burgers(cfg: &BurgersConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let nx = cfg.n_intervals()?;
    let nt = cfg.n_time_steps()?;
    let mut u = cfg.interior_initial(nx);
    let mut field = DMatrix::zeros(nx, nt + 1);
    let store = |field: &mut DMatrix<f64>, col: usize, u: &[f64]| {
        for (j, &v) in u.iter().enumerate() {
            field[(j, col)] = v;
        }
        field[(nx - 1, col)] = cfg.boundary.1;
    };
    store(&mut field, 0, &u);
    for t in 1..=nt {
        u = burgers_step(&u, cfg, t)?;
        store(&mut field, t, &u);
    }
    Ok(field)
}

/// Node coordinates of the state variables.
pub fn burgers_state_nodes(cfg: &BurgersConfig) -> Result<Vec<f64>> {
    let nx = cfg.n_intervals()?;
    Ok((1..=nx).map(|j| cfg.x_range.0 + j as f64 * cfg.dx).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small_ring(n: usize, damping: f64, x0: Vec<f64>, n_steps: usize) -> OscillatorRingConfig {
        OscillatorRingConfig { n_oscillators: n, damping, dt: 0.01, n_steps, initial_state: x0 }
    }

    /// Classical RK4 on the continuous generator with `substeps` per sample.
    fn rk4_oracle(a: &DMatrix<f64>, x0: &DVector<f64>, dt: f64, substeps: usize) -> DVector<f64> {
        let h = dt / substeps as f64;
        let mut x = x0.clone();
        for _ in 0..substeps {
            let k1 = a * &x;
            let k2 = a * (&x + &k1 * (h / 2.0));
            let k3 = a * (&x + &k2 * (h / 2.0));
            let k4 = a * (&x + &k3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        x
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        for n in 2..12 {
            let l = ring_laplacian(n);
            for i in 0..n {
                assert_eq!(l.row(i).sum(), 0.0);
            }
        }
    }

    #[test]
    fn benchmark_ring_shape() {
        let traj = simulate_oscillator_ring(&OscillatorRingConfig::benchmark_default()).unwrap();
        assert_eq!(traj.shape(), (40, 101));
    }

    #[test]
    fn zero_state_stays_zero() {
        let traj = simulate_oscillator_ring(&small_ring(5, 0.7, vec![0.0; 10], 20)).unwrap();
        assert!(traj.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_step_matches_refined_integrator() {
        let x0 = vec![0.3, -0.7, 0.1, 0.5];
        let cfg = small_ring(2, 0.0, x0.clone(), 1);
        let traj = simulate_oscillator_ring(&cfg).unwrap();
        let a = oscillator_generator(2, 0.0);
        let oracle = rk4_oracle(&a, &DVector::from_vec(x0), 0.01, 1000);
        let err = (traj.column(1) - oracle).amax();
        assert!(err < 1e-13, "err = {err}");
    }

    #[test]
    fn spectrum_matches_closed_form_modes() {
        // Each Laplacian eigenvalue l gives s^2 + d s + l = 0 in continuous time.
        let (n, d, dt) = (2usize, 0.4, 0.01);
        let cfg = OscillatorRingConfig { n_oscillators: n, damping: d, dt, n_steps: 1, initial_state: vec![0.0; 4] };
        let got = exact_oscillator_spectrum(&cfg).unwrap();
        let mut expected = Vec::new();
        for k in 0..n {
            let l = 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos();
            let disc = C64::new(d * d - 4.0 * l, 0.0).sqrt();
            for sign in [1.0, -1.0] {
                let s = (C64::new(-d, 0.0) + disc * sign) / 2.0;
                expected.push((s * dt).exp());
            }
        }
        for e in &expected {
            let best = got.iter().map(|g| (g - e).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12, "missing eigenvalue {e}");
        }
    }

    #[test]
    fn damped_spectrum_inside_unit_disc() {
        let ev = exact_oscillator_spectrum(&OscillatorRingConfig::benchmark_default()).unwrap();
        assert_eq!(ev.len(), 40);
        assert!(ev.iter().all(|z| z.norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn undamped_spectrum_on_unit_circle() {
        let mut cfg = OscillatorRingConfig::benchmark_default();
        cfg.damping = 0.0;
        let ev = exact_oscillator_spectrum(&cfg).unwrap();
        // the translation mode is a 2x2 Jordan block at 1, perturbed by ~sqrt(eps)
        for z in ev {
            let tol = if (z - C64::new(1.0, 0.0)).norm() < 1e-6 { 1e-7 } else { 1e-10 };
            assert!((z.norm() - 1.0).abs() < tol, "|{z}| != 1");
        }
    }

    #[test]
    fn energy_non_increasing_with_damping() {
        let cfg = OscillatorRingConfig::benchmark_default();
        let traj = simulate_oscillator_ring(&cfg).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..traj.ncols() {
            let col: Vec<f64> = traj.column(t).iter().cloned().collect();
            let e = oscillator_energy(cfg.n_oscillators, &col);
            assert!(e <= prev + 1e-12, "energy increased at step {t}");
            prev = e;
        }
    }

    #[test]
    fn rejects_bad_ring_input() {
        let mut cfg = small_ring(3, 0.1, vec![0.0; 6], 3);
        cfg.initial_state[2] = f64::NAN;
        assert!(simulate_oscillator_ring(&cfg).is_err());
        let cfg = small_ring(3, 0.1, vec![0.0; 5], 3);
        assert!(matches!(simulate_oscillator_ring(&cfg), Err(Error::DimensionMismatch { .. })));
        let cfg = small_ring(1, 0.1, vec![0.0; 2], 3);
        assert!(simulate_oscillator_ring(&cfg).is_err());
    }

    #[test]
    fn stuart_landau_fixed_radius() {
        let cfg = StuartLandauConfig::benchmark_default();
        let traj = simulate_stuart_landau(&cfg).unwrap();
        assert_eq!(traj.shape(), (2, 151));
        assert!(traj.row(0).iter().all(|&r| (r - 1.0).abs() < 1e-12));
        assert_eq!(traj[(1, 0)], PI);
    }

    #[test]
    fn stuart_landau_limit_cycle_radius_is_invariant() {
        let cfg = StuartLandauConfig { mu: 2.5, r0: 2.5_f64.sqrt(), n_steps: 500, ..StuartLandauConfig::benchmark_default() };
        let traj = simulate_stuart_landau(&cfg).unwrap();
        for r in traj.row(0).iter() {
            assert!((r - 2.5_f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn stuart_landau_phase_is_linear_recurrence() {
        let cfg = StuartLandauConfig::benchmark_default();
        let traj = simulate_stuart_landau(&cfg).unwrap();
        // theta_t = pi + t * 0.01 accumulated one addition at a time
        let mut theta = PI;
        for t in 0..=cfg.n_steps {
            assert_eq!(traj[(1, t)], theta);
            theta += 1.0 * 0.01;
            assert!((traj[(1, t)] - (PI + t as f64 * 0.01)).abs() < 1e-12);
        }
    }

    #[test]
    fn stuart_landau_blow_up_reported() {
        let cfg = StuartLandauConfig { dt: 10.0, r0: 5.0, ..StuartLandauConfig::benchmark_default() };
        assert!(matches!(simulate_stuart_landau(&cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn tridiagonal_solver_matches_dense() {
        let lower = [0.0, 1.0, -0.5, 0.25];
        let diag = [4.0, 5.0, 3.0, 6.0];
        let upper = [1.0, 0.5, 2.0, 0.0];
        let b = [1.0, -2.0, 3.0, 0.5];
        let mut x = b;
        solve_tridiagonal(&lower, &diag, &upper, &mut x);
        let mut dense = DMatrix::zeros(4, 4);
        for i in 0..4 {
            dense[(i, i)] = diag[i];
            if i > 0 {
                dense[(i, i - 1)] = lower[i];
            }
            if i < 3 {
                dense[(i, i + 1)] = upper[i];
            }
        }
        let r = dense * DVector::from_column_slice(&x) - DVector::from_column_slice(&b);
        assert!(r.amax() < 1e-14);
    }

    #[test]
    fn burgers_grid_matches_benchmark() {
        let cfg = BurgersConfig::benchmark_default();
        let field = simulate_burgers(&cfg).unwrap();
        assert_eq!(field.shape(), (100, 101));
        assert!(field.row(99).iter().all(|&v| v == 0.0));
        assert!((field[(24, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn burgers_zero_solution() {
        let cfg = BurgersConfig { initial_profile: InitialProfile::Named(ProfileName::Zero), ..BurgersConfig::benchmark_default() };
        let field = simulate_burgers(&cfg).unwrap();
        assert!(field.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn burgers_rejects_misaligned_grid() {
        let cfg = BurgersConfig { dx: 0.03, ..BurgersConfig::benchmark_default() };
        assert!(simulate_burgers(&cfg).is_err());
        let cfg = BurgersConfig { dt: 0.3, ..BurgersConfig::benchmark_default() };
        assert!(simulate_burgers(&cfg).is_err());
        let cfg = BurgersConfig { viscosity: 0.0, ..BurgersConfig::benchmark_default() };
        assert!(simulate_burgers(&cfg).is_err());
    }

    #[test]
    fn burgers_max_norm_non_increasing() {
        let field = simulate_burgers(&BurgersConfig::benchmark_default()).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..field.ncols() {
            let m = field.column(t).amax();
            assert!(m <= prev + 1e-12, "max norm grew at step {t}: {m} > {prev}");
            prev = m;
        }
    }

    #[test]
    fn simulators_are_deterministic() {
        let a = simulate_burgers(&BurgersConfig::benchmark_default()).unwrap();
        let b = simulate_burgers(&BurgersConfig::benchmark_default()).unwrap();
        assert_eq!(a, b);
        let cfg = OscillatorRingConfig::benchmark_default();
        assert_eq!(simulate_oscillator_ring(&cfg).unwrap(), simulate_oscillator_ring(&cfg).unwrap());
    }
}
