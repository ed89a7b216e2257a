//! Runs on hyperbolic space `ℍ³` through the transform to `ℝ³`.

use std::path::Path;

use anyhow::{anyhow, bail};
use serde::{Deserialize, Serialize};

use critwave_core::classifier::{predict_focusing, Agreement, Prediction};
use critwave_core::evolution::{refined_outcome, Outcome, WaveState};
use critwave_core::ground_state::GroundStateConstants;
use critwave_core::hyperbolic::{
    h3_energy, h3_predict, h3_solve, intertwining_residual, t_forward, transformed_coefficient, H3Energy, H3Run,
    H3Sample,
};
use critwave_core::Error;

use crate::config::{ExperimentConfig, SCHEMA};
use crate::io::{write_csv, write_json};
use crate::run::{verdict_of, GridProvenance, SolverProvenance};
use crate::sweep::{sweep, PhaseRow};

pub const H3_TRACE_COLUMNS: [&str; 4] = ["t", "energy", "norm_sq", "sup_norm"];

#[derive(Debug, Clone)]
pub struct H3Evaluated {
    /// Prediction from the `ℍ³` energy and `H^{0,1}` norm.
    pub prediction: Prediction,
    /// Prediction for the transformed Euclidean datum.
    pub transformed: Option<Prediction>,
    pub initial_energy: H3Energy,
    pub intertwining_residual: f64,
    pub run: H3Run,
    pub outcome: Outcome,
    pub verdict: Agreement,
}

impl H3Evaluated {
    pub fn predictions_agree(&self) -> Option<bool> {
        self.transformed.as_ref().map(|t| t.verdict == self.prediction.verdict)
    }
}

pub fn evaluate_h3(cfg: &ExperimentConfig) -> anyhow::Result<H3Evaluated> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let build = |g| cfg.hyperbolic_data(g).ok_or_else(|| anyhow!("configuration has no h3_family data"));
    let (v0, v1) = build(&grid)??;
    let ground = GroundStateConstants::for_dim(3)?;
    let prediction = h3_predict(&v0, &v1, ground)?;
    let mapped = WaveState::new(t_forward(&v0), t_forward(&v1), 0.0)?;
    let transformed = match predict_focusing(&mapped, &transformed_coefficient(), ground) {
        Ok(p) => Some(p),
        Err(Error::HypothesisNotSatisfied(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let solver = cfg.solver_config();
    let run = h3_solve(&v0, &v1, &solver)?;
    let outcome = if cfg.diagnostics.refine {
        let (w0, w1) = build(&grid.refined())??;
        let fine = h3_solve(&w0, &w1, &solver)?;
        refined_outcome(&run.evolution, &fine.evolution)
    } else {
        run.evolution.outcome()
    };
    let verdict = verdict_of(Some(&prediction), &outcome);
    Ok(H3Evaluated {
        initial_energy: h3_energy(&v0, &v1)?,
        intertwining_residual: intertwining_residual(&v0),
        prediction,
        transformed,
        run,
        outcome,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H3Summary {
    pub schema: u32,
    pub label: String,
    pub config: ExperimentConfig,
    pub grid: GridProvenance,
    pub solver: SolverProvenance,
    pub initial_energy: H3Energy,
    pub energy_drift: f64,
    pub intertwining_residual: f64,
    pub prediction: Prediction,
    pub transformed_prediction: Option<Prediction>,
    pub predictions_agree: Option<bool>,
    pub outcome: Outcome,
    pub verdict: Agreement,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<PhaseRow>,
}

/// `hyperbolic` subcommand: one run of the configured datum, plus an
/// amplitude sweep when `a_values` is given.
pub fn run_hyperbolic(cfg: &ExperimentConfig, out: &Path, a_values: Option<&[f64]>) -> anyhow::Result<H3Summary> {
    if !cfg.is_hyperbolic() {
        bail!("the `hyperbolic` subcommand needs h3_family data");
    }
    let ev = evaluate_h3(cfg)?;
    let grid = cfg.grid()?;
    let (steps, dt) = cfg.solver_config().steps(grid.dr());
    let rows = match a_values {
        Some(a) => sweep(cfg, a, out)?.results.into_iter().map(|r| r.row).collect(),
        None => Vec::new(),
    };
    let summary = H3Summary {
        schema: SCHEMA,
        label: format!("{} on H3", cfg.data.label()),
        config: cfg.clone(),
        grid: (&grid).into(),
        solver: SolverProvenance {
            cfl: cfg.solver.cfl,
            dt,
            steps,
            t_final: cfg.solver.t_final,
            refined: cfg.diagnostics.refine,
        },
        initial_energy: ev.initial_energy,
        energy_drift: ev.run.energy_drift(),
        intertwining_residual: ev.intertwining_residual,
        predictions_agree: ev.predictions_agree(),
        prediction: ev.prediction,
        transformed_prediction: ev.transformed,
        outcome: ev.outcome,
        verdict: ev.verdict,
        sweep: rows,
    };
    write_csv::<H3Sample>(&out.join("h3_trace.csv"), &ev.run.samples, &H3_TRACE_COLUMNS)?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
