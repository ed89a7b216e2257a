//! Amplitude sweeps producing a phase table, one row per amplitude.
//!
//! Rows run in parallel. After each row finishes the whole table is
//! rewritten atomically, so an interrupted sweep leaves a valid CSV and a
//! rerun skips every row that already has a result.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use critwave_core::classifier::{Agreement, Prediction};
use critwave_core::evolution::Outcome;
use critwave_core::ground_state::GroundStateConstants;

use crate::config::ExperimentConfig;
use crate::hyperbolic::{evaluate_h3, H3Evaluated};
use crate::io::write_csv;
use crate::run::evaluate;

pub const PHASE_COLUMNS: [&str; 6] = ["a", "E_phi", "grad_ratio", "prediction", "outcome", "verdict"];
pub const H3_PHASE_COLUMNS: [&str; 7] = [
    "a",
    "E_phi",
    "grad_ratio",
    "prediction",
    "outcome",
    "verdict",
    "transformed_prediction",
];
pub const FAILED: &str = "Failed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub a: f64,
    #[serde(rename = "E_phi")]
    pub e_phi: f64,
    /// `‖∇u₀‖ / ‖∇W‖` (the `H^{0,1}` norm for `ℍ³` data).
    pub grad_ratio: f64,
    pub prediction: String,
    pub outcome: String,
    pub verdict: String,
    /// `ℍ³` sweeps only: the prediction made on the transformed datum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transformed_prediction: Option<String>,
}

impl PhaseRow {
    pub fn failed(&self) -> bool {
        self.verdict == FAILED
    }

    fn failure(a: f64, hyperbolic: bool) -> Self {
        Self {
            a,
            e_phi: f64::NAN,
            grad_ratio: f64::NAN,
            prediction: FAILED.into(),
            outcome: FAILED.into(),
            verdict: FAILED.into(),
            transformed_prediction: hyperbolic.then(|| FAILED.into()),
        }
    }
}

/// Everything known about one row, beyond what goes into the CSV.
#[derive(Debug, Clone)]
pub struct RowResult {
    pub row: PhaseRow,
    pub prediction: Option<Prediction>,
    pub outcome: Option<Outcome>,
    pub error: Option<String>,
    pub reused: bool,
}

fn label<T: std::fmt::Debug>(x: &T) -> String {
    format!("{x:?}")
}

fn prediction_label(p: Option<&Prediction>) -> String {
    p.map_or_else(|| "Indeterminate".to_owned(), |p| label(&p.verdict))
}

/// Predicts and runs one amplitude of `base`.
pub fn evaluate_row(base: &ExperimentConfig, a: f64) -> RowResult {
    let hyperbolic = base.is_hyperbolic();
    let attempt = catch_unwind(AssertUnwindSafe(|| -> anyhow::Result<RowResult> {
        let data = base
            .data
            .with_amplitude(a)
            .ok_or_else(|| anyhow!("data family has no amplitude"))?;
        let cfg = ExperimentConfig { data, ..base.clone() };
        let grad_w = GroundStateConstants::for_dim(cfg.dimension)?.grad_norm();
        if hyperbolic {
            let H3Evaluated {
                prediction,
                transformed,
                outcome,
                verdict,
                ..
            } = evaluate_h3(&cfg)?;
            Ok(RowResult {
                row: PhaseRow {
                    a,
                    e_phi: prediction.energy,
                    grad_ratio: prediction.grad_norm / grad_w,
                    prediction: label(&prediction.verdict),
                    outcome: label(&outcome.kind),
                    verdict: label(&verdict),
                    transformed_prediction: Some(prediction_label(transformed.as_ref())),
                },
                prediction: Some(prediction),
                outcome: Some(outcome),
                error: None,
                reused: false,
            })
        } else {
            let ev = evaluate(&cfg, &mut ())?;
            let (e_phi, grad) = match &ev.prediction {
                Some(p) => (p.energy, p.grad_norm),
                None => {
                    let e = critwave_core::functionals::energy(&ev.initial, &cfg.coefficient(), cfg.sign());
                    (e.total, (2.0 * e.gradient).sqrt())
                }
            };
            Ok(RowResult {
                row: PhaseRow {
                    a,
                    e_phi,
                    grad_ratio: grad / grad_w,
                    prediction: prediction_label(ev.prediction.as_ref()),
                    outcome: label(&ev.outcome.kind),
                    verdict: label(&ev.verdict),
                    transformed_prediction: None,
                },
                prediction: ev.prediction,
                outcome: Some(ev.outcome),
                error: None,
                reused: false,
            })
        }
    }));
    let error = match attempt {
        Ok(Ok(r)) => return r,
        Ok(Err(e)) => format!("{e:#}"),
        Err(panic) => panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into()),
    };
    RowResult {
        row: PhaseRow::failure(a, hyperbolic),
        prediction: None,
        outcome: None,
        error: Some(error),
        reused: false,
    }
}

pub fn check_amplitudes(a_values: &[f64]) -> anyhow::Result<()> {
    if a_values.is_empty() {
        bail!("no amplitudes to sweep");
    }
    if a_values.iter().any(|a| !a.is_finite()) {
        bail!("amplitudes must be finite");
    }
    let up = a_values.windows(2).all(|w| w[1] > w[0]);
    let down = a_values.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        bail!("amplitudes must be strictly monotone");
    }
    Ok(())
}

pub fn phase_path(out: &Path, hyperbolic: bool) -> PathBuf {
    out.join(if hyperbolic { "h3_phase.csv" } else { "phase.csv" })
}

fn read_existing(path: &Path) -> anyhow::Result<HashMap<u64, PhaseRow>> {
    if !path.exists() {
        return Ok(HashMap::new());
    }
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = HashMap::new();
    for row in reader.deserialize::<PhaseRow>() {
        let row = row.with_context(|| format!("parsing {}", path.display()))?;
        if !row.failed() {
            rows.insert(row.a.to_bits(), row);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub path: PathBuf,
    pub results: Vec<RowResult>,
}

impl SweepReport {
    pub fn rows(&self) -> Vec<&PhaseRow> {
        self.results.iter().map(|r| &r.row).collect()
    }

    pub fn count(&self, verdict: Agreement) -> usize {
        let name = label(&verdict);
        self.results.iter().filter(|r| r.row.verdict == name).count()
    }

    pub fn failed(&self) -> usize {
        self.results.iter().filter(|r| r.row.failed()).count()
    }
}

/// Runs every amplitude not already in the table at `out`.
pub fn sweep(base: &ExperimentConfig, a_values: &[f64], out: &Path) -> anyhow::Result<SweepReport> {
    base.validate()?;
    check_amplitudes(a_values)?;
    if base.data.with_amplitude(1.0).is_none() {
        bail!("data family has no amplitude to sweep");
    }
    let hyperbolic = base.is_hyperbolic();
    let path = phase_path(out, hyperbolic);
    let existing = read_existing(&path)?;
    let slots: Vec<Option<RowResult>> = a_values
        .iter()
        .map(|a| {
            existing.get(&a.to_bits()).map(|row| RowResult {
                row: row.clone(),
                prediction: None,
                outcome: None,
                error: None,
                reused: true,
            })
        })
        .collect();
    let slots = Mutex::new(slots);
    let header: &[&str] = if hyperbolic { &H3_PHASE_COLUMNS } else { &PHASE_COLUMNS };
    let flush = |slots: &[Option<RowResult>]| -> anyhow::Result<()> {
        let rows: Vec<&PhaseRow> = slots.iter().flatten().map(|r| &r.row).collect();
        write_csv(&path, &rows, header)
    };
    flush(&slots.lock().expect("sweep lock"))?;
    let todo: Vec<usize> = {
        let s = slots.lock().expect("sweep lock");
        (0..a_values.len()).filter(|&i| s[i].is_none()).collect()
    };
    todo.par_iter().try_for_each(|&i| -> anyhow::Result<()> {
        let result = evaluate_row(base, a_values[i]);
        let mut s = slots.lock().expect("sweep lock");
        s[i] = Some(result);
        flush(&s)
    })?;
    let results = slots
        .into_inner()
        .expect("sweep lock")
        .into_iter()
        .map(|r| r.expect("every row evaluated"))
        .collect();
    Ok(SweepReport { path, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "dimension": 3,
                "grid": {"n": 512},
                "coefficient": {"family": "sinh_power", "sigma": 2},
                "sign": 1,
                "data": {"kind": "scaled_ground_state", "a": 1.0, "lambda": 0.25},
                "solver": {"cfl": 0.5, "t_final": 1.0},
                "diagnostics": {"refine": false}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn amplitude_checks() {
        assert!(check_amplitudes(&[]).is_err());
        assert!(check_amplitudes(&[0.5, 0.25, 0.75]).is_err());
        assert!(check_amplitudes(&[0.75, 0.5]).is_ok());
    }

    #[test]
    fn writes_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let first = sweep(&base(), &[0.25, 1.5], dir.path()).unwrap();
        assert_eq!(first.results.len(), 2);
        assert!(first.results.iter().all(|r| !r.reused));
        let text = std::fs::read_to_string(&first.path).unwrap();
        assert!(text.starts_with("a,E_phi,grad_ratio,prediction,outcome,verdict\n"));
        assert_eq!(text.lines().count(), 3);
        let again = sweep(&base(), &[0.25, 1.5, 1.75], dir.path()).unwrap();
        let reused: Vec<bool> = again.results.iter().map(|r| r.reused).collect();
        assert_eq!(reused, [true, true, false]);
        assert_eq!(std::fs::read_to_string(&again.path).unwrap().lines().count(), 4);
    }

    #[test]
    fn failing_row_does_not_abort() {
        let mut cfg = base();
        // an amplitude large enough to overflow the initial energy quadrature
        let report = sweep(&cfg, &[0.25, 1e80], tempfile::tempdir().unwrap().path()).unwrap();
        assert_eq!(report.failed(), 1);
        assert!(report.results[1].error.is_some());
        assert!(!report.results[0].row.failed());
        cfg.data = crate::config::DataSpec::Euclidean(critwave_core::initial_data::DataFamily::scaled_ground_state(1.0));
        assert!(sweep(&cfg, &[], tempfile::tempdir().unwrap().path()).is_err());
    }
}
