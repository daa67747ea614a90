use std::sync::Arc;

use chemofluid::config::parse_config_str;
use chemofluid::fields::{ConstantScalar, ConstantVector};
use chemofluid::linsolve::SolveOptions;
use chemofluid::mesh::Mesh;
use chemofluid::mms::ManufacturedSolution;
use chemofluid::output::{series_csv, vtk_snapshot};
use chemofluid::par::{set_execution, Execution};
use chemofluid::scheme::{init_state, l2_norm, InitialData, ModelParams, Spaces, Stepper};
use chemofluid::study::{run_simulation, SimulationSetup};

const RUN: &str = "\
mode = simulate
initial = competition-2d

[mesh]
resolutions = 6

[time]
dt = 0.01
final = 0.1

[params]
a1 = 0.25
a2 = 0.3

[output]
snapshots = 0.05
";

#[test]
fn identical_configs_give_identical_outputs() {
    let config = parse_config_str(RUN).unwrap();
    let setup = SimulationSetup::from_config(&config).unwrap();
    let a = run_simulation(&setup).unwrap();
    let b = run_simulation(&setup).unwrap();
    assert!(a.failure.is_none());
    assert_eq!(a.series.len(), 10);
    assert_eq!(series_csv(&a.series), series_csv(&b.series));
    assert_eq!(a.snapshots.len(), 1);
    assert_eq!(a.snapshots[0].m, 5);
    assert_eq!(vtk_snapshot(&a.spaces, &a.snapshots[0]), vtk_snapshot(&b.spaces, &b.snapshots[0]));
}

#[test]
fn execution_mode_does_not_change_results() {
    let config = parse_config_str(RUN).unwrap();
    let setup = SimulationSetup::from_config(&config).unwrap();
    set_execution(Execution::Sequential);
    let seq = run_simulation(&setup).unwrap();
    set_execution(Execution::Parallel);
    let par = run_simulation(&setup).unwrap();
    assert_eq!(seq.final_state, par.final_state);
}

#[test]
fn densities_stay_bounded_in_short_competition_run() {
    let config = parse_config_str(RUN).unwrap();
    let traj = run_simulation(&SimulationSetup::from_config(&config).unwrap()).unwrap();
    for row in &traj.series {
        assert!(row.int_n.is_finite() && row.int_n > 0.0);
        assert!(row.int_w.is_finite() && row.int_w > 0.0);
        assert!(row.int_c.is_finite() && row.int_c > 0.0);
    }
}

#[test]
fn velocity_energy_does_not_grow_without_densities() {
    let spaces = Spaces::new(Arc::new(Mesh::unit_square(8, 8).unwrap()));
    let params = ModelParams { du: 0.05, k: 3.0, ..ModelParams::default() };
    let ms = ManufacturedSolution;
    let initial = InitialData {
        n: Arc::new(ConstantScalar(0.0)),
        w: Arc::new(ConstantScalar(0.0)),
        c: Arc::new(ConstantScalar(0.0)),
        s: Arc::new(ConstantVector([0.0, 0.0])),
        u: ms.initial_data().u,
        pi: None,
    };
    let opts = SolveOptions::default();
    let mut state = init_state(&spaces, &params, &initial, &opts).unwrap();
    let mut stepper = Stepper::new(&spaces, &params, &opts).unwrap();
    let mut energy = l2_norm(&spaces.velocity, &state.u).unwrap();
    assert!(energy > 0.1);
    for dt in [0.5, 0.01, 0.2, 1.0] {
        state = stepper.advance(&state, dt, None).unwrap();
        let next = l2_norm(&spaces.velocity, &state.u).unwrap();
        assert!(next <= energy + 1e-12, "{next} > {energy} at dt = {dt}");
        energy = next;
    }
}

#[test]
fn one_step_when_final_time_equals_dt() {
    let text = RUN.replace("final = 0.1", "final = 0.01").replace("snapshots = 0.05", "snapshots = 0, 0.01");
    let traj = run_simulation(&SimulationSetup::from_config(&parse_config_str(&text).unwrap()).unwrap()).unwrap();
    assert_eq!(traj.series.len(), 1);
    assert_eq!(traj.final_state.m, 1);
    assert_eq!(traj.snapshots.iter().map(|s| s.m).collect::<Vec<_>>(), [0, 1]);
}
