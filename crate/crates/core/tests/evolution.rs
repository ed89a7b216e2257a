use critwave_core::coefficients::CoefficientSpec;
use critwave_core::evolution::{evolve, Sign, SolverConfig, WaveState};
use critwave_core::grid::RadialGrid;
use critwave_core::initial_data::DataFamily;

fn sup_diff(a: &WaveState, b: &WaveState) -> f64 {
    a.u.values()
        .iter()
        .zip(b.u.values())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn nonlinear_time_reversal() {
    let grid = RadialGrid::new(3, 30.0, 2048).unwrap();
    let initial = DataFamily::ScaledGroundState {
        a: 0.5,
        lambda: 1.0,
        cutoff: 4.0,
    }
    .build(&grid)
    .unwrap();
    for sign in [Sign::Focusing, Sign::Defocusing] {
        let config = SolverConfig::new(0.5, 5.0, sign, CoefficientSpec::sinh_power(2.0));
        let forward = evolve(&initial, &config, &mut ()).unwrap();
        let back = evolve(&forward.final_state.reversed(), &config, &mut ()).unwrap();
        let err = sup_diff(&back.final_state.reversed(), &initial);
        assert!(err <= 1e-6, "{sign:?}: {err}");
    }
}

#[test]
fn identical_configs_give_identical_runs() {
    let grid = RadialGrid::new(3, 20.0, 1024).unwrap();
    let initial = DataFamily::scaled_ground_state(0.8).build(&grid).unwrap();
    let config = SolverConfig::new(0.5, 3.0, Sign::Focusing, CoefficientSpec::gaussian(0.1));
    let a = evolve(&initial, &config, &mut ()).unwrap();
    let b = evolve(&initial, &config, &mut ()).unwrap();
    assert_eq!(a.final_state, b.final_state);
    assert_eq!(a.sup_history, b.sup_history);
}
