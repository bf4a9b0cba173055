//! Model files and trajectory CSV.
//!
//! Complex matrices are stored row-major as `[re, im]` pairs. Floats are
//! written in shortest round-trip form and parsed exactly, so a saved model
//! loads back bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dictionary::DictionarySpec;
use crate::enrichment::{Provenance, SnapshotPairs};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::solver::{EnrichmentRecord, FitDiagnostics, KoopmanModel, SolverTag, SweepPoint};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl MatrixDoc {
    fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push([m[(r, c)].re, m[(r, c)].im]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    fn into_matrix(self, what: &str) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Format(format!(
                "{what}: {} entries for a {}x{} matrix",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        let cols = self.cols;
        Ok(CMatrix::from_fn(self.rows, cols, |r, c| {
            let [re, im] = self.data[r * cols + c];
            C64::new(re, im)
        }))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    schema_version: u32,
    solver: SolverTag,
    lambda: f64,
    dictionary: DictionarySpec,
    koopman: MatrixDoc,
    output_map: Option<MatrixDoc>,
    diagnostics: FitDiagnostics,
    enrichment: Option<EnrichmentRecord>,
    #[serde(default)]
    sweep: Vec<SweepPoint>,
    dt: Option<f64>,
}

pub fn model_to_json(model: &KoopmanModel) -> Result<String> {
    let doc = ModelDoc {
        schema_version: SCHEMA_VERSION,
        solver: model.solver,
        lambda: model.lambda,
        dictionary: model.dictionary.clone(),
        koopman: MatrixDoc::from_matrix(&model.koopman),
        output_map: model.output_map.as_ref().map(MatrixDoc::from_matrix),
        diagnostics: model.diagnostics.clone(),
        enrichment: model.enrichment.clone(),
        sweep: model.sweep.clone(),
        dt: model.dt,
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<KoopmanModel> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Format("missing schema_version".into()))?;
    if version != SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion { found: version.min(u32::MAX as u64) as u32, expected: SCHEMA_VERSION });
    }
    // Parse from the text rather than the Value so floats keep exact round trips.
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let koopman = doc.koopman.into_matrix("koopman")?;
    let mut model = KoopmanModel::new(koopman, doc.lambda, doc.dictionary, doc.solver)
        .map_err(|e| Error::Format(e.to_string()))?;
    if let Some(c) = doc.output_map {
        model = model.with_output_map(c.into_matrix("output_map")?).map_err(|e| Error::Format(e.to_string()))?;
    }
    model.diagnostics = doc.diagnostics;
    model.enrichment = doc.enrichment;
    model.sweep = doc.sweep;
    model.dt = doc.dt;
    Ok(model)
}

pub fn save_model(model: &KoopmanModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<KoopmanModel> {
    model_from_json(&fs::read_to_string(path)?)
}

/// Trajectory CSV: header `t,x1..xn`, one row per snapshot.
pub fn trajectory_to_csv(traj: &DMatrix<f64>, t0: f64, dt: f64) -> String {
    let mut out = String::from("t");
    for i in 1..=traj.nrows() {
        write!(out, ",x{i}").unwrap();
    }
    out.push('\n');
    for c in 0..traj.ncols() {
        write!(out, "{:?}", t0 + c as f64 * dt).unwrap();
        for r in 0..traj.nrows() {
            write!(out, ",{:?}", traj[(r, c)]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads a trajectory CSV written by [`trajectory_to_csv`]. Returns the time
/// column and the state matrix (one column per row of the file).
pub fn trajectory_from_csv(text: &str) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Format("empty trajectory file".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.first() != Some(&"t") {
        return Err(Error::Format("trajectory header must start with t".into()));
    }
    let n = names.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(Error::Format(format!("row {}: expected {} fields, got {}", lineno + 2, n + 1, fields.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| Error::Format(format!("row {}: bad number {s:?}", lineno + 2)))
        };
        times.push(parse(fields[0])?);
        for f in &fields[1..] {
            values.push(parse(f)?);
        }
    }
    let m = times.len();
    Ok((times, DMatrix::from_column_slice(n, m, &values)))
}

/// Snapshot pairs, one row per pair: `xp1..xpn,xf1..xfn,provenance`.
pub fn pairs_to_csv(pairs: &SnapshotPairs) -> String {
    let n = pairs.state_dim();
    let mut out = String::new();
    for prefix in ["xp", "xf"] {
        for i in 1..=n {
            write!(out, "{prefix}{i},").unwrap();
        }
    }
    out.push_str("provenance\n");
    for (j, tag) in pairs.provenance().iter().enumerate() {
        for m in [pairs.past(), pairs.future()] {
            for i in 0..n {
                write!(out, "{:?},", m[(i, j)]).unwrap();
            }
        }
        out.push_str(match tag {
            Provenance::Observed => "observed\n",
            Provenance::Artificial => "artificial\n",
        });
    }
    out
}

/// Plain numeric table with a header row.
pub fn table_to_csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverTag;

    fn sample_model() -> KoopmanModel {
        let spec = DictionarySpec::fourier(-1, 1).unwrap();
        let k = CMatrix::from_fn(3, 3, |r, c| C64::new(0.1 * r as f64 + 1.0 / 3.0, -(c as f64).sqrt() / 7.0));
        let mut m = KoopmanModel::new(k, 0.125, spec, SolverTag::Robust).unwrap();
        m = m.with_output_map(CMatrix::from_fn(1, 3, |_, c| C64::new(std::f64::consts::PI * c as f64, 1e-300))).unwrap();
        m.diagnostics.objective = 0.1 + 0.2;
        m.diagnostics.iterations = 12;
        m.diagnostics.objective_history = vec![1.0, 0.5];
        m.enrichment = Some(EnrichmentRecord { seed: 9, radius_x: 1e-3, radius_y: 2e-3, artificial_pairs: 29 });
        m.sweep = vec![SweepPoint { lambda: 1e-6, score: 0.3 }];
        m.dt = Some(0.01);
        m
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let m = sample_model();
        let back = model_from_json(&model_to_json(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        for (a, b) in m.koopman.iter().zip(back.koopman.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn unknown_version_refused() {
        let text = model_to_json(&sample_model()).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(model_from_json(&text), Err(Error::SchemaVersion { found: 2, .. })));
    }

    #[test]
    fn malformed_files_refused() {
        assert!(model_from_json("{").is_err());
        assert!(model_from_json("{\"solver\": \"edmd\"}").is_err());
        let text = model_to_json(&sample_model()).unwrap().replace("\"rows\": 3", "\"rows\": 4");
        assert!(matches!(model_from_json(&text), Err(Error::Format(_))));
    }

    #[test]
    fn pairs_csv_tags_rows() {
        let traj = DMatrix::from_fn(2, 3, |r, c| (r + 2 * c) as f64);
        let pairs = crate::enrichment::enrich_trajectory(&traj, &crate::enrichment::EnrichmentConfig::new(0.1, 1, 0)).unwrap();
        let csv = pairs_to_csv(&pairs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "xp1,xp2,xf1,xf2,provenance");
        assert_eq!(lines[1], "0.0,1.0,2.0,3.0,observed");
        assert_eq!(lines.len(), 5);
        assert!(lines[3].ends_with(",artificial"));
    }

    #[test]
    fn trajectory_round_trip() {
        let traj = DMatrix::from_fn(3, 4, |r, c| (r as f64 + 0.1) / (c as f64 + 3.0));
        let csv = trajectory_to_csv(&traj, 0.0, 0.01);
        assert!(csv.starts_with("t,x1,x2,x3\n0.0,"));
        let (t, back) = trajectory_from_csv(&csv).unwrap();
        assert_eq!(back, traj);
        assert_eq!(t.len(), 4);
        assert!(trajectory_from_csv("t,x1\n0.0,1.0,2.0\n").is_err());
        assert!(trajectory_from_csv("x1\n1.0\n").is_err());
    }
}
