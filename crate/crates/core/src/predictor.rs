//! State reconstruction and multi-step prediction: lift, iterate, project.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::dictionary::DictionarySpec;
use crate::enrichment::SnapshotPairs;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, pinv, CMatrix, C64};
use crate::solver::KoopmanModel;

#[derive(Clone, Debug, PartialEq)]
pub struct OutputMapFit {
    /// N x K matrix with `x ~ Re(C Psi(x)^T)`.
    pub c: CMatrix,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Least-squares map from features back to states over the `past` columns.
/// With `include_artificial = false` only observed columns are used.
pub fn fit_output_map(pairs: &SnapshotPairs, spec: &DictionarySpec, include_artificial: bool) -> Result<OutputMapFit> {
    if pairs.is_empty() {
        return Err(invalid("no snapshot pairs"));
    }
    let data = if include_artificial { pairs.clone() } else { pairs.observed_subset() };
    let x = data.past();
    let p = spec.lift_rows(x)?;
    // C P^T = X  =>  C = X (P^T)^+
    let pt = p.transpose();
    let rtol = pt.nrows().max(pt.ncols()) as f64 * f64::EPSILON;
    let (pt_pinv, rank) = pinv(&pt, rtol);
    let c = linalg::to_complex(x) * pt_pinv;
    Ok(OutputMapFit { c, rank, rank_deficient: rank < spec.feature_dim() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult {
    /// N x (steps + 1), column 0 is the reconstruction of the initial state.
    pub predicted: DMatrix<f64>,
    pub reference: Option<DMatrix<f64>>,
    pub per_state_error: Option<DMatrix<f64>>,
    pub mse_per_state: Option<DVector<f64>>,
    /// Largest `|Im(C z_n)|` seen over the horizon.
    pub max_imaginary: f64,
    /// Set when the iteration produced non-finite values and was cut short.
    pub truncated: bool,
}

impl PredictionResult {
    pub fn steps(&self) -> usize {
        self.predicted.ncols() - 1
    }
}

/// `z_0 = Psi(x0)^T`, `z_{n+1} = K^T z_n`, `x_n = Re(C z_n)` for n = 0..=horizon.
pub fn predict(model: &KoopmanModel, x0: &[f64], horizon: usize) -> Result<PredictionResult> {
    let c = model.output_map.as_ref().ok_or_else(|| invalid("model has no output map"))?;
    if x0.len() != model.dictionary.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial condition",
            expected: model.dictionary.state_dim(),
            actual: x0.len(),
        });
    }
    let kt = model.koopman.transpose();
    let mut z = model.dictionary.evaluate(x0)?;
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(horizon + 1);
    let mut max_imaginary: f64 = 0.0;
    let mut truncated = false;
    for n in 0..=horizon {
        if n > 0 {
            z = &kt * &z;
        }
        let x = c * &z;
        if !x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            truncated = true;
            break;
        }
        max_imaginary = x.iter().fold(max_imaginary, |m, v| m.max(v.im.abs()));
        cols.push(x.map(|v| v.re));
    }
    if cols.is_empty() {
        return Err(invalid("initial reconstruction is not finite"));
    }
    Ok(PredictionResult {
        predicted: DMatrix::from_columns(&cols),
        reference: None,
        per_state_error: None,
        mse_per_state: None,
        max_imaginary,
        truncated,
    })
}

/// Fills in absolute errors and the per-state time-mean squared error.
pub fn evaluate_prediction(result: &PredictionResult, reference: &DMatrix<f64>) -> Result<PredictionResult> {
    if reference.shape() != result.predicted.shape() {
        return Err(invalid(format!(
            "reference shape {:?} does not match prediction shape {:?}",
            reference.shape(),
            result.predicted.shape()
        )));
    }
    let diff = &result.predicted - reference;
    let err = diff.abs();
    let m = diff.ncols() as f64;
    let mse = DVector::from_iterator(diff.nrows(), diff.row_iter().map(|r| r.norm_squared() / m));
    Ok(PredictionResult {
        reference: Some(reference.clone()),
        per_state_error: Some(err),
        mse_per_state: Some(mse),
        ..result.clone()
    })
}

/// CSV `t,x1_pred..xn_pred[,x1_ref..xn_ref,x1_err..xn_err]`, with
/// `t = t0 + n * dt`.
pub fn to_csv(result: &PredictionResult, t0: f64, dt: f64) -> String {
    let n = result.predicted.nrows();
    let mut out = String::from("t");
    let blocks: Vec<(&str, &DMatrix<f64>)> = std::iter::once(("pred", &result.predicted))
        .chain(result.reference.as_ref().map(|r| ("ref", r)))
        .chain(result.per_state_error.as_ref().map(|e| ("err", e)))
        .collect();
    for (suffix, _) in &blocks {
        for i in 1..=n {
            write!(out, ",x{i}_{suffix}").unwrap();
        }
    }
    out.push('\n');
    for col in 0..result.predicted.ncols() {
        write!(out, "{:?}", t0 + col as f64 * dt).unwrap();
        for (_, m) in &blocks {
            for i in 0..n {
                write!(out, ",{:?}", m[(i, col)]).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Lifts `x0` and reconstructs it without propagating.
pub fn reconstruct(model: &KoopmanModel, x0: &[f64]) -> Result<DVector<C64>> {
    let c = model.output_map.as_ref().ok_or_else(|| invalid("model has no output map"))?;
    Ok(c * model.dictionary.evaluate(x0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{assemble_gram, edmd_solve, SolverTag};

    fn scalar_model(k: f64) -> KoopmanModel {
        let spec = DictionarySpec::identity(1).unwrap();
        KoopmanModel::new(linalg::to_complex(&DMatrix::from_element(1, 1, k)), 0.0, spec, SolverTag::Edmd)
            .unwrap()
            .with_output_map(CMatrix::identity(1, 1))
            .unwrap()
    }

    #[test]
    fn identity_map_for_identity_dictionary() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.5, 1.0, -1.0]);
        let pairs = SnapshotPairs::from_trajectory(&x).unwrap();
        let fit = fit_output_map(&pairs, &DictionarySpec::identity(2).unwrap(), true).unwrap();
        assert!((fit.c - CMatrix::identity(2, 2)).norm() < 1e-10);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn exact_when_coordinates_in_span() {
        let x = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 0.0]);
        let pairs = SnapshotPairs::from_trajectory(&x).unwrap();
        let spec = DictionarySpec::monomial(1, 2).unwrap();
        let fit = fit_output_map(&pairs, &spec, true).unwrap();
        for &v in &[1.0, 2.0, 3.0] {
            let z = spec.evaluate(&[v]).unwrap();
            assert!(((&fit.c * z)[0].re - v).abs() < 1e-10);
        }
    }

    #[test]
    fn normal_equation_oracle() {
        // theta is not in the span of [e^{-i theta}, 1, e^{i theta}], so this is
        // a genuine least-squares fit: C = X conj(P) (P^T conj(P))^{-1}.
        let x = DMatrix::from_row_slice(1, 5, &[0.1, 0.5, 0.9, 1.4, 2.0]);
        let pairs = SnapshotPairs::from_trajectory(&x).unwrap();
        let spec = DictionarySpec::fourier(-1, 1).unwrap();
        let fit = fit_output_map(&pairs, &spec, true).unwrap();
        let p = spec.lift_rows(pairs.past()).unwrap();
        let normal = p.transpose() * p.map(|v| v.conj());
        let oracle = linalg::to_complex(pairs.past()) * p.map(|v| v.conj()) * normal.try_inverse().unwrap();
        assert!((&fit.c - oracle).norm() < 1e-10);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn rank_deficient_flagged() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        let pairs = SnapshotPairs::from_trajectory(&x).unwrap();
        let fit = fit_output_map(&pairs, &DictionarySpec::identity(2).unwrap(), true).unwrap();
        assert!(fit.rank_deficient);
    }

    #[test]
    fn geometric_sequence() {
        let r = predict(&scalar_model(0.5), &[1.0], 3).unwrap();
        assert_eq!(r.predicted.row(0).iter().cloned().collect::<Vec<_>>(), vec![1.0, 0.5, 0.25, 0.125]);
        assert!(!r.truncated);
    }

    #[test]
    fn learned_scalar_matches_geometric() {
        let x = DMatrix::from_row_slice(1, 3, &[1.0, 0.5, 0.25]);
        let pairs = SnapshotPairs::from_trajectory(&x).unwrap();
        let spec = DictionarySpec::identity(1).unwrap();
        let model = edmd_solve(&assemble_gram(&pairs, &spec).unwrap(), &spec).unwrap();
        let c = fit_output_map(&pairs, &spec, true).unwrap().c;
        let model = model.with_output_map(c).unwrap();
        let r = predict(&model, &[1.0], 3).unwrap();
        for (got, want) in r.predicted.iter().zip([1.0, 0.5, 0.25, 0.125]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_koopman_is_fixed_point() {
        let r = predict(&scalar_model(1.0), &[0.7], 5).unwrap();
        assert!(r.predicted.iter().all(|&v| v == 0.7));
        let r0 = predict(&scalar_model(1.0), &[0.7], 0).unwrap();
        assert_eq!(r0.predicted.ncols(), 1);
    }

    #[test]
    fn overflow_truncates() {
        let r = predict(&scalar_model(1e200), &[1.0], 5).unwrap();
        assert!(r.truncated);
        assert_eq!(r.predicted.ncols(), 2);
    }

    #[test]
    fn predict_requires_output_map_and_dimension() {
        let spec = DictionarySpec::identity(1).unwrap();
        let bare = KoopmanModel::new(CMatrix::identity(1, 1), 0.0, spec, SolverTag::Edmd).unwrap();
        assert!(predict(&bare, &[1.0], 1).is_err());
        assert!(predict(&scalar_model(1.0), &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn mse_examples() {
        let base = PredictionResult {
            predicted: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            reference: None,
            per_state_error: None,
            mse_per_state: None,
            max_imaginary: 0.0,
            truncated: false,
        };
        let same = evaluate_prediction(&base, &base.predicted).unwrap();
        assert!(same.mse_per_state.unwrap().iter().all(|&v| v == 0.0));
        let shifted = evaluate_prediction(&base, &base.predicted.add_scalar(-1.0)).unwrap();
        assert!(shifted.mse_per_state.unwrap().iter().all(|&v| v == 1.0));
        // errors (1, 2) at the first step and (3, 4) at the second
        let r = PredictionResult { predicted: DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]), ..base.clone() };
        let e = evaluate_prediction(&r, &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(e.mse_per_state.unwrap().as_slice(), &[5.0, 10.0]);
        assert!(evaluate_prediction(&base, &DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = predict(&scalar_model(0.5), &[1.0], 2).unwrap();
        assert_eq!(to_csv(&r, 0.0, 0.1), "t,x1_pred\n0.0,1.0\n0.1,0.5\n0.2,0.25\n");
        let e = evaluate_prediction(&r, &DMatrix::from_row_slice(1, 3, &[1.0, 0.5, 0.0])).unwrap();
        let csv = to_csv(&e, 1.0, 1.0);
        assert_eq!(csv.lines().next().unwrap(), "t,x1_pred,x1_ref,x1_err");
        assert_eq!(csv.lines().nth(3).unwrap(), "3.0,0.25,0.0,0.25");
    }
}
