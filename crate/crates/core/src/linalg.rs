//! Dense complex linear-algebra helpers shared by the solvers and the
//! spectral analysis.

use nalgebra::{linalg::Schur, Complex, DMatrix, SVD};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|v| v.re)
}

/// Largest absolute imaginary component of any entry.
pub fn max_imaginary(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.im.abs()))
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

/// Default relative truncation for pseudoinverses: `max(rows, cols) * eps`.
pub fn default_rtol(m: &CMatrix) -> f64 {
    m.nrows().max(m.ncols()) as f64 * f64::EPSILON
}

pub(crate) fn svd(m: &CMatrix) -> SVD<C64, nalgebra::Dyn, nalgebra::Dyn> {
    SVD::new(m.clone(), true, true)
}

/// Truncated-SVD pseudoinverse. Singular values at or below `rtol * sigma_max`
/// are dropped. Returns the pseudoinverse and the retained rank.
pub fn pinv(m: &CMatrix, rtol: f64) -> (CMatrix, usize) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (CMatrix::zeros(cols, rows), 0);
    }
    let dec = svd(m);
    let u = dec.u.as_ref().expect("svd computed with u");
    let v_t = dec.v_t.as_ref().expect("svd computed with v_t");
    let s = &dec.singular_values;
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rtol * smax;
    let mut out = CMatrix::zeros(cols, rows);
    let mut rank = 0;
    for (i, &sv) in s.iter().enumerate() {
        if sv > cutoff && sv > 0.0 {
            rank += 1;
            let vi = v_t.row(i).adjoint();
            let ui = u.column(i).adjoint();
            out += (vi * ui) * C64::new(1.0 / sv, 0.0);
        }
    }
    (out, rank)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Number of singular values strictly above `rtol * sigma_max`.
pub fn numerical_rank(m: &CMatrix, rtol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = SVD::new(m.clone(), false, false).singular_values;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rtol * smax).count()
}

/// Eigenvalues of a general complex square matrix via the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "eigenvalues",
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    if !is_finite(m) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::Eigen("schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(n^3)). Returns `assignment[row] = column`.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    if n == 0 {
        return Vec::new();
    }
    // potentials u (rows), v (cols); p[j] = row matched to column j (1-based, 0 = none)
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
