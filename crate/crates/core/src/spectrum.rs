//! Eigenvalues of learned Koopman matrices.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::solver::KoopmanModel;

/// Eigenvalues at or below this modulus get a `-inf` continuous-time value.
pub const ZERO_MODULUS: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    /// Sorted by [`dominance_order`].
    pub eigenvalues: Vec<C64>,
    pub spectral_radius: f64,
    pub dominant: Vec<C64>,
    pub continuous_time: Option<Vec<C64>>,
    pub dt: Option<f64>,
}

/// Descending modulus, then descending real part, then descending imaginary part.
pub fn dominance_order(a: &C64, b: &C64) -> Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

pub fn sort_dominant(values: &mut [C64]) {
    values.sort_by(dominance_order);
}

/// Principal-branch `ln(z) / dt`; near-zero eigenvalues map to `-inf + 0i`.
pub fn to_continuous(z: C64, dt: f64) -> C64 {
    if z.norm() <= ZERO_MODULUS {
        C64::new(f64::NEG_INFINITY, 0.0)
    } else {
        z.ln() / dt
    }
}

pub fn analyze(model: &KoopmanModel, dt: Option<f64>, m: usize) -> Result<SpectrumReport> {
    analyze_matrix(&model.koopman, dt, m)
}

pub fn analyze_matrix(k: &CMatrix, dt: Option<f64>, m: usize) -> Result<SpectrumReport> {
    let n = k.nrows();
    if m == 0 || m > n {
        return Err(invalid(format!("dominant count {m} must be in 1..={n}")));
    }
    if let Some(dt) = dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
    }
    let mut eigenvalues = linalg::eigenvalues(k)?;
    sort_dominant(&mut eigenvalues);
    Ok(from_sorted(eigenvalues, dt, m))
}

/// Report for a known eigenvalue list (for reference spectra).
pub fn report_from_eigenvalues(mut eigenvalues: Vec<C64>, dt: Option<f64>, m: usize) -> Result<SpectrumReport> {
    if m == 0 || m > eigenvalues.len() {
        return Err(invalid(format!("dominant count {m} must be in 1..={}", eigenvalues.len())));
    }
    sort_dominant(&mut eigenvalues);
    Ok(from_sorted(eigenvalues, dt, m))
}

fn from_sorted(eigenvalues: Vec<C64>, dt: Option<f64>, m: usize) -> SpectrumReport {
    let spectral_radius = eigenvalues.first().map(|z| z.norm()).unwrap_or(0.0);
    let dominant = eigenvalues[..m].to_vec();
    let continuous_time = dt.map(|dt| eigenvalues.iter().map(|&z| to_continuous(z, dt)).collect());
    SpectrumReport { eigenvalues, spectral_radius, dominant, continuous_time, dt }
}

/// Mean distance between the top-`m` eigenvalues of two reports under the
/// optimal one-to-one matching.
pub fn spectrum_distance(a: &SpectrumReport, b: &SpectrumReport, m: usize) -> Result<f64> {
    if m == 0 || m > a.eigenvalues.len().min(b.eigenvalues.len()) {
        return Err(invalid(format!("cannot compare the top {m} eigenvalues")));
    }
    let (ea, eb) = (&a.eigenvalues[..m], &b.eigenvalues[..m]);
    let cost = DMatrix::from_fn(m, m, |i, j| (ea[i] - eb[j]).norm());
    let assign = linalg::min_cost_assignment(&cost);
    Ok(assign.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum::<f64>() / m as f64)
}

/// CSV with columns `re,im,modulus` and `re_ct,im_ct` when dt was given.
pub fn to_csv(report: &SpectrumReport) -> String {
    let mut out = String::new();
    let ct = report.continuous_time.as_ref();
    out.push_str(if ct.is_some() { "re,im,modulus,re_ct,im_ct\n" } else { "re,im,modulus\n" });
    for (i, z) in report.eigenvalues.iter().enumerate() {
        write!(out, "{:?},{:?},{:?}", z.re, z.im, z.norm()).unwrap();
        if let Some(ct) = ct {
            write!(out, ",{:?},{:?}", ct[i].re, ct[i].im).unwrap();
        }
        out.push('\n');
    }
    out
}
