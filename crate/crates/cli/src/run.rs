//! Single evolutions: prediction, run, comparison and artifacts.

use std::path::Path;

use anyhow::bail;
use serde::{Deserialize, Serialize};

use critwave_core::classifier::{compare, predict_constant_c, predict_defocusing, predict_focusing, Agreement, Prediction};
use critwave_core::coefficients::{
    certification_grid, check_decay_condition, check_defocusing_condition, check_focusing_condition, CoefficientSpec,
    ConditionReport,
};
use critwave_core::evolution::{evolve, evolve_with_refinement, Evolution, Observer, Outcome, Sign, WaveState};
use critwave_core::functionals::{
    energy, trapping_check, trapping_delta, Energy, MorawetzReport, TraceRecorder, TrappingReport, TRACE_COLUMNS,
};
use critwave_core::grid::RadialGrid;
use critwave_core::ground_state::GroundStateConstants;
use critwave_core::Error;

use crate::config::{ExperimentConfig, SCHEMA};
use crate::io::{write_csv, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProvenance {
    pub d: usize,
    pub r_max: f64,
    pub n: usize,
    pub dr: f64,
}

impl From<&RadialGrid> for GridProvenance {
    fn from(g: &RadialGrid) -> Self {
        Self {
            d: g.dim(),
            r_max: g.r_max(),
            n: g.cells(),
            dr: g.dr(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverProvenance {
    pub cfl: f64,
    pub dt: f64,
    pub steps: usize,
    pub t_final: f64,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Quadrature error bound of the ground-state constants.
    pub ground_state: f64,
    /// Tail corrections added to `‖∇W‖²` and `∫W^{2*}` beyond the quadrature radius.
    pub ground_state_tail_grad: f64,
    pub ground_state_tail_l2star: f64,
    /// Radius beyond which the data vanish to solver tolerance.
    pub data_support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    pub initial: Energy,
    pub final_row: Option<Energy>,
    /// Relative drift of the solver Hamiltonian.
    pub hamiltonian_drift: f64,
    /// Relative drift of the quadrature energy column of the trace.
    pub trace_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Margins {
    pub energy_gap: Option<f64>,
    pub norm_gap: Option<f64>,
    pub energy_tol: Option<f64>,
    pub norm_tol: Option<f64>,
}

impl From<Option<&Prediction>> for Margins {
    fn from(p: Option<&Prediction>) -> Self {
        p.map_or_else(Self::default, |p| Self {
            energy_gap: p.energy_gap,
            norm_gap: p.norm_gap,
            energy_tol: Some(p.energy_tol),
            norm_tol: Some(p.norm_tol),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub label: String,
    pub config: ExperimentConfig,
    pub grid: GridProvenance,
    pub solver: SolverProvenance,
    pub truncation: Truncation,
    pub prediction: Option<Prediction>,
    /// Why no prediction was made, if none was.
    pub prediction_note: Option<String>,
    pub outcome: Outcome,
    pub verdict: Agreement,
    pub energies: Energies,
    pub margins: Margins,
    pub trapping: Option<TrappingReport>,
    pub morawetz: Option<MorawetzReport>,
}

/// The prediction the theory makes for `state`, or the reason it makes none.
pub fn predict(cfg: &ExperimentConfig, state: &WaveState) -> anyhow::Result<(Option<Prediction>, Option<String>)> {
    let spec = cfg.coefficient();
    let result = match cfg.sign() {
        Sign::Defocusing => predict_defocusing(state, &spec),
        Sign::Focusing => {
            let ground = GroundStateConstants::for_dim(cfg.dimension)?;
            match spec {
                CoefficientSpec::Constant { c } if c > 0.0 && c <= 1.0 => predict_constant_c(state, c, ground),
                _ => predict_focusing(state, &spec, ground),
            }
        }
    };
    match result {
        Ok(p) => Ok((Some(p), None)),
        Err(Error::HypothesisNotSatisfied(msg)) => Ok((None, Some(msg))),
        Err(e) => Err(e.into()),
    }
}

pub fn condition_reports(spec: &CoefficientSpec, d: usize) -> anyhow::Result<Vec<ConditionReport>> {
    let grid = certification_grid(d)?;
    Ok(vec![
        check_defocusing_condition(spec, &grid),
        check_focusing_condition(spec, &grid),
        check_decay_condition(spec, &grid),
    ])
}

/// A run with its prediction and the comparison of the two.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub initial: WaveState,
    pub prediction: Option<Prediction>,
    pub prediction_note: Option<String>,
    pub evolution: Evolution,
    pub outcome: Outcome,
    pub verdict: Agreement,
}

pub fn verdict_of(prediction: Option<&Prediction>, outcome: &Outcome) -> Agreement {
    prediction.map_or(Agreement::Untested, |p| compare(p, outcome).verdict)
}

/// Predicts, evolves (at `n` and `2n` when refinement is on) and compares.
/// The observer sees the run at the configured resolution.
pub fn evaluate(cfg: &ExperimentConfig, observer: &mut dyn Observer) -> anyhow::Result<Evaluated> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let initial = cfg.initial_state(&grid)?;
    let (prediction, prediction_note) = predict(cfg, &initial)?;
    let solver = cfg.solver_config();
    let (evolution, outcome) = if cfg.diagnostics.refine {
        let run = evolve_with_refinement(|g| cfg.initial_state(g), &grid, &solver, observer)?;
        (run.coarse, run.outcome)
    } else {
        let ev = evolve(&initial, &solver, observer)?;
        let outcome = ev.outcome();
        (ev, outcome)
    };
    let verdict = verdict_of(prediction.as_ref(), &outcome);
    Ok(Evaluated {
        initial,
        prediction,
        prediction_note,
        evolution,
        outcome,
        verdict,
    })
}

/// `evolve` subcommand: writes `trace.csv`, `summary.json` and
/// `conditions.json` into `out`.
pub fn run_evolve(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Summary> {
    cfg.validate()?;
    if cfg.is_hyperbolic() {
        bail!("h3_family data is run by the `hyperbolic` subcommand");
    }
    let grid = cfg.grid()?;
    let spec = cfg.coefficient();
    let conditions = condition_reports(&spec, cfg.dimension)?;
    let mut recorder = TraceRecorder::new(&grid, &spec, cfg.sign(), &cfg.diagnostics_config())?;
    let ev = evaluate(cfg, &mut recorder)?;
    let mut trace = recorder.into_trace();
    trace.outcome = Some(ev.outcome.clone());

    let ground = GroundStateConstants::for_dim(cfg.dimension)?;
    let initial_energy = energy(&ev.initial, &spec, cfg.sign());
    let trapping = match (cfg.sign(), &ev.prediction) {
        (Sign::Focusing, Some(_)) => {
            let e_phi = energy(&ev.initial, &spec, Sign::Focusing).total;
            cfg.diagnostics
                .delta
                .or_else(|| trapping_delta(e_phi, ground))
                .map(|delta| trapping_check(&ev.initial, &spec, delta, ground))
                .transpose()?
        }
        _ => None,
    };
    let (steps, dt) = cfg.solver_config().steps(grid.dr());
    let summary = Summary {
        schema: SCHEMA,
        label: format!("{} with {}", cfg.data.label(), spec.label()),
        config: cfg.clone(),
        grid: (&grid).into(),
        solver: SolverProvenance {
            cfl: cfg.solver.cfl,
            dt,
            steps,
            t_final: cfg.solver.t_final,
            refined: cfg.diagnostics.refine,
        },
        truncation: Truncation {
            ground_state: ground.truncation_error_bound,
            ground_state_tail_grad: ground.tail_correction_grad,
            ground_state_tail_l2star: ground.tail_correction_l2star,
            data_support: cfg.data.support_estimate(),
        },
        margins: ev.prediction.as_ref().into(),
        prediction: ev.prediction,
        prediction_note: ev.prediction_note,
        outcome: ev.outcome,
        verdict: ev.verdict,
        energies: Energies {
            initial: initial_energy,
            final_row: trace.final_row().map(|r| Energy {
                total: r.e_total,
                kinetic: r.e_kinetic,
                gradient: r.e_gradient,
                potential: r.e_potential,
            }),
            hamiltonian_drift: ev.evolution.hamiltonian_drift(),
            trace_drift: trace.energy_drift(),
        },
        trapping,
        morawetz: (cfg.sign() == Sign::Defocusing).then(|| trace.morawetz()).flatten(),
    };
    write_csv(&out.join("trace.csv"), &trace.rows, &TRACE_COLUMNS)?;
    write_json(&out.join("conditions.json"), &conditions)?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use critwave_core::classifier::Regime;
    use critwave_core::evolution::OutcomeKind;

    fn config(a: f64, t_final: f64) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
                "dimension": 3,
                "grid": {{"n": 1024}},
                "coefficient": {{"family": "sinh_power", "sigma": 2}},
                "sign": 1,
                "data": {{"kind": "scaled_ground_state", "a": {a}, "lambda": 0.25}},
                "solver": {{"cfl": 0.5, "t_final": {t_final}}}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn small_datum_disperses() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_evolve(&config(0.25, 20.0), dir.path()).unwrap();
        assert_eq!(s.prediction.as_ref().unwrap().verdict, Regime::Scatter);
        assert_eq!(s.outcome.kind, OutcomeKind::Dispersed);
        assert_eq!(s.verdict, Agreement::Consistent);
        assert!(s.trapping.as_ref().unwrap().all_pass());
        for f in ["trace.csv", "summary.json", "conditions.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn large_datum_blows_up() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_evolve(&config(1.5, 2.0), dir.path()).unwrap();
        assert_eq!(s.prediction.as_ref().unwrap().verdict, Regime::BlowUp);
        assert!(s.outcome.confirmed_blowup(), "{:?}", s.outcome);
        assert_eq!(s.verdict, Agreement::Consistent);
    }

    #[test]
    fn failed_hypothesis_is_untested() {
        let mut cfg = config(0.25, 1.0);
        cfg.coefficient = Some(CoefficientSpec::table(vec![0.0, 1.0, 1.1], vec![1.0, 1.0, 0.1]).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let s = run_evolve(&cfg, dir.path()).unwrap();
        assert!(s.prediction.is_none());
        assert!(s.prediction_note.unwrap().contains("focusing condition"));
        assert_eq!(s.verdict, Agreement::Untested);
    }
}
