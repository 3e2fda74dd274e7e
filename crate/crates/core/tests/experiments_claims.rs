mod common;

use std::f64::consts::PI;

use common::time_average;
use jumpfeed::experiments::{sweep, run_preset_with, Axis, FigureId, InitialState, Observable, PresetData, PresetOverrides, SweepSpec};
use jumpfeed::integrator::{evolve_master, IntegrationConfig};
use jumpfeed::{Execution, MasterEquation, SystemParams};

fn short() -> IntegrationConfig {
    IntegrationConfig::new(2e-3, 4.0, 25).unwrap()
}

#[test]
fn transverse_sweep_repeats_after_pi() {
    let mut spec = SweepSpec::new(Axis::Ax, Observable::AbsRhoEg, SystemParams::default(), InitialState::PlusPlus);
    spec.n_points = 9;
    spec.integration = short();
    let first = sweep(&spec, Execution::Parallel).unwrap();
    spec.lo = PI;
    spec.hi = 2.0 * PI;
    let second = sweep(&spec, Execution::Parallel).unwrap();
    for (a, b) in first.values.iter().zip(&second.values) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn zero_row_equals_uncontrolled_run() {
    let p = SystemParams::default();
    for axis in [Axis::Ax, Axis::Ay, Axis::Az] {
        let mut spec = SweepSpec::new(axis, Observable::Concurrence, p, InitialState::Ge);
        spec.n_points = 3;
        spec.integration = short();
        let grid = sweep(&spec, Execution::Sequential).unwrap();
        let free = evolve_master(&InitialState::Ge.density(), &MasterEquation::uncontrolled(&p), &short()).unwrap();
        for (x, r) in grid.row(0).iter().zip(&free.samples) {
            assert!((x - r.concurrence).abs() <= 1e-12);
        }
    }
}

#[test]
fn sweep_rows_are_ordered_by_axis_value() {
    let mut spec = SweepSpec::new(Axis::Ay, Observable::AbsRhoEg, SystemParams::default(), InitialState::PlusPlus);
    spec.n_points = 17;
    spec.integration = IntegrationConfig::new(5e-3, 0.5, 10).unwrap();
    let par = sweep(&spec, Execution::Parallel).unwrap();
    let seq = sweep(&spec, Execution::Sequential).unwrap();
    assert_eq!(par, seq);
    assert!(par.axis_values.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn ay_near_point_nine_beats_no_feedback_late_from_ge() {
    let mut spec = SweepSpec::new(Axis::Ay, Observable::Concurrence, SystemParams::default(), InitialState::Ge);
    spec.lo = 0.0;
    spec.hi = 1.8;
    spec.n_points = 3;
    let grid = sweep(&spec, Execution::Parallel).unwrap();
    assert!((grid.axis_values[1] - 0.9).abs() < 1e-12);
    let late = |row: &[f64]| time_average(&grid.times, row, 5.0);
    let (free, tuned) = (late(grid.row(0)), late(grid.row(1)));
    assert!(tuned > free, "A_y=0.9 late mean {tuned} vs uncontrolled {free}");
}

#[test]
fn fig4b_emits_both_cuts() {
    let out = run_preset_with(FigureId::Fig4b, PresetOverrides { integration: Some(short()), n_points: None }, Execution::Parallel).unwrap();
    let PresetData::Series(runs) = out.data else { panic!("fig4b is a line preset") };
    let labels: Vec<&str> = runs.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["ay_0.5pi", "ay_0.9", "uncontrolled"]);
    assert!((runs[0].feedback.ay - PI / 2.0).abs() < 1e-15);
}

#[test]
fn presets_are_deterministic() {
    let o = PresetOverrides { integration: Some(IntegrationConfig::new(5e-3, 1.0, 10).unwrap()), n_points: Some(5) };
    for id in FigureId::ALL {
        let a = run_preset_with(id, o, Execution::Parallel).unwrap();
        let b = run_preset_with(id, o, Execution::Sequential).unwrap();
        match (&a.data, &b.data) {
            (PresetData::Grid(x), PresetData::Grid(y)) => assert_eq!(x, y),
            (PresetData::Series(x), PresetData::Series(y)) => {
                for (s, t) in x.iter().zip(y) {
                    assert_eq!(s.series.samples, t.series.samples);
                }
            }
            _ => panic!("{id}: data kind changed"),
        }
    }
}
