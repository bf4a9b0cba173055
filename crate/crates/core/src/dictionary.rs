//! Observable dictionaries lifting a real state into complex feature space.
//!
//! Features are carried as complex numbers throughout; the real dictionaries
//! embed with zero imaginary part.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum DictionaryKind {
    /// `psi(x) = x`.
    Identity,
    /// `exp(i m x_c)` for `m = min_mode..=max_mode`, acting on the single
    /// state coordinate `component`.
    FourierExponential { min_mode: i32, max_mode: i32, component: usize },
    /// Every monomial of total degree `<= max_degree`, graded lexicographic.
    Monomial { max_degree: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DictionarySpec {
    kind: DictionaryKind,
    state_dim: usize,
    /// Exponent vectors for the monomial kind, in feature order.
    exponents: Vec<Vec<u32>>,
}

impl DictionarySpec {
    pub fn identity(state_dim: usize) -> Result<Self> {
        Self::new(DictionaryKind::Identity, state_dim)
    }

    /// Fourier features on a scalar state.
    pub fn fourier(min_mode: i32, max_mode: i32) -> Result<Self> {
        Self::new(DictionaryKind::FourierExponential { min_mode, max_mode, component: 0 }, 1)
    }

    /// Fourier features on coordinate `component` of a `state_dim` state;
    /// the remaining coordinates are ignored by the lift.
    pub fn fourier_on(state_dim: usize, component: usize, min_mode: i32, max_mode: i32) -> Result<Self> {
        Self::new(DictionaryKind::FourierExponential { min_mode, max_mode, component }, state_dim)
    }

    pub fn monomial(state_dim: usize, max_degree: u32) -> Result<Self> {
        Self::new(DictionaryKind::Monomial { max_degree }, state_dim)
    }

    pub fn new(kind: DictionaryKind, state_dim: usize) -> Result<Self> {
        if state_dim == 0 {
            return Err(invalid("dictionary state_dim must be positive"));
        }
        let mut exponents = Vec::new();
        match &kind {
            DictionaryKind::Identity => {}
            DictionaryKind::FourierExponential { min_mode, max_mode, component } => {
                if min_mode > max_mode {
                    return Err(invalid(format!("empty Fourier mode range [{min_mode}, {max_mode}]")));
                }
                if *component >= state_dim {
                    return Err(invalid(format!(
                        "Fourier component {component} out of range for state_dim {state_dim}"
                    )));
                }
            }
            DictionaryKind::Monomial { max_degree } => {
                exponents = graded_lex_exponents(state_dim, *max_degree);
            }
        }
        Ok(Self { kind, state_dim, exponents })
    }

    pub fn kind(&self) -> &DictionaryKind {
        &self.kind
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Number of features K.
    pub fn feature_dim(&self) -> usize {
        match &self.kind {
            DictionaryKind::Identity => self.state_dim,
            DictionaryKind::FourierExponential { min_mode, max_mode, .. } => (max_mode - min_mode + 1) as usize,
            DictionaryKind::Monomial { .. } => self.exponents.len(),
        }
    }

    /// True when every feature is real for real input.
    pub fn is_real(&self) -> bool {
        !matches!(self.kind, DictionaryKind::FourierExponential { .. })
    }

    /// Exponent vectors of the monomial features (empty for other kinds).
    pub fn monomial_exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                context: "dictionary input",
                expected: self.state_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<DVector<C64>> {
        self.check_dim(x)?;
        let out = match &self.kind {
            DictionaryKind::Identity => DVector::from_iterator(x.len(), x.iter().map(|&v| C64::new(v, 0.0))),
            DictionaryKind::FourierExponential { min_mode, max_mode, component } => {
                let theta = x[*component];
                DVector::from_iterator(
                    self.feature_dim(),
                    (*min_mode..=*max_mode).map(|m| C64::from_polar(1.0, m as f64 * theta)),
                )
            }
            DictionaryKind::Monomial { .. } => DVector::from_iterator(
                self.exponents.len(),
                self.exponents.iter().map(|e| C64::new(monomial(x, e), 0.0)),
            ),
        };
        if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(invalid("dictionary produced non-finite features"));
        }
        Ok(out)
    }

    /// Analytic Jacobian, `K x N`, entry `(k, n) = d psi_k / d x_n`.
    pub fn jacobian(&self, x: &[f64]) -> Result<CMatrix> {
        self.check_dim(x)?;
        let n = self.state_dim;
        let k = self.feature_dim();
        let mut jac = CMatrix::zeros(k, n);
        match &self.kind {
            DictionaryKind::Identity => jac.fill_with_identity(),
            DictionaryKind::FourierExponential { min_mode, component, .. } => {
                let theta = x[*component];
                for row in 0..k {
                    let m = (*min_mode + row as i32) as f64;
                    jac[(row, *component)] = C64::new(0.0, m) * C64::from_polar(1.0, m * theta);
                }
            }
            DictionaryKind::Monomial { .. } => {
                for (row, e) in self.exponents.iter().enumerate() {
                    for col in 0..n {
                        if e[col] == 0 {
                            continue;
                        }
                        let mut d = e.clone();
                        d[col] -= 1;
                        jac[(row, col)] = C64::new(e[col] as f64 * monomial(x, &d), 0.0);
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Lifts every column of `states` (N x M) into a feature matrix with one
    /// row per sample (M x K), the row-vector convention used for Gram
    /// assembly.
    pub fn lift_rows(&self, states: &DMatrix<f64>) -> Result<CMatrix> {
        if states.nrows() != self.state_dim {
            return Err(Error::DimensionMismatch {
                context: "dictionary input",
                expected: self.state_dim,
                actual: states.nrows(),
            });
        }
        let mut out = CMatrix::zeros(states.ncols(), self.feature_dim());
        let mut buf = vec![0.0; self.state_dim];
        for j in 0..states.ncols() {
            buf.iter_mut().zip(states.column(j).iter()).for_each(|(b, &v)| *b = v);
            let row = self.evaluate(&buf)?;
            out.set_row(j, &row.transpose());
        }
        Ok(out)
    }
}

fn monomial(x: &[f64], exps: &[u32]) -> f64 {
    x.iter().zip(exps).map(|(&v, &p)| v.powi(p as i32)).product()
}

/// Exponent vectors of total degree `0..=max_degree`; within one degree the
/// vectors are in descending lexicographic order (x1^2, x1 x2, x2^2, ...).
fn graded_lex_exponents(n: usize, max_degree: u32) -> Vec<Vec<u32>> {
    fn fill(prefix: &mut Vec<u32>, remaining: u32, n: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == n {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for p in (0..=remaining).rev() {
            prefix.push(p);
            fill(prefix, remaining - p, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=max_degree {
        fill(&mut Vec::with_capacity(n), d, n, &mut out);
    }
    out
}

// JSON form: {"kind": ..., "state_dim": ..., "parameters": {...}}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawParameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode_range: Option<[i32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    component: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_degree: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: String,
    state_dim: usize,
    #[serde(default)]
    parameters: RawParameters,
}

impl Serialize for DictionarySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (kind, parameters) = match &self.kind {
            DictionaryKind::Identity => ("identity", RawParameters::default()),
            DictionaryKind::FourierExponential { min_mode, max_mode, component } => (
                "fourier_exponential",
                RawParameters { mode_range: Some([*min_mode, *max_mode]), component: Some(*component), ..Default::default() },
            ),
            DictionaryKind::Monomial { max_degree } => {
                ("monomial", RawParameters { max_degree: Some(*max_degree), ..Default::default() })
            }
        };
        RawSpec { kind: kind.to_string(), state_dim: self.state_dim, parameters }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DictionarySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawSpec::deserialize(d)?;
        let p = raw.parameters;
        let kind = match raw.kind.as_str() {
            "identity" => DictionaryKind::Identity,
            "fourier_exponential" => {
                let [min_mode, max_mode] =
                    p.mode_range.ok_or_else(|| D::Error::missing_field("parameters.mode_range"))?;
                DictionaryKind::FourierExponential { min_mode, max_mode, component: p.component.unwrap_or(0) }
            }
            "monomial" => DictionaryKind::Monomial {
                max_degree: p.max_degree.ok_or_else(|| D::Error::missing_field("parameters.max_degree"))?,
            },
            other => {
                return Err(D::Error::unknown_variant(other, &["identity", "fourier_exponential", "monomial"]))
            }
        };
        DictionarySpec::new(kind, raw.state_dim).map_err(D::Error::custom)
    }
}
