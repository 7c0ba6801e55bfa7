use super::*;
use crate::grid::{build_grid, Grid};
use crate::network::tests::three_node_json;
use crate::network::GasNetwork;
use crate::sim::{initialize, simulate, NewtonOptions, SteadyState};
use crate::solver::{solve, SolveStatus, SolverOptions};

fn setup() -> (GasNetwork, Grid, SteadyState<f64>) {
    let net = GasNetwork::from_json(&three_node_json()).unwrap();
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    let init = initialize(&net, &grid, &NewtonOptions::default()).unwrap();
    (net, grid, init)
}

#[test]
fn counts_cones_per_segment_and_level() {
    let text = three_node_json().replace("\"length\": 60.0,", "\"length\": 60.0, \"n_seg\": 2,");
    let net = GasNetwork::from_json(&text).unwrap();
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    let init = initialize::<f64>(&net, &grid, &NewtonOptions::default()).unwrap();
    let b = build_dsr1(&net, &grid, &init, Direction::Upper).unwrap();
    let first: Vec<_> = b.program.cone_tags.iter().filter(|t| t.pipe == 0).collect();
    assert_eq!(first.len(), 3);
    let segs = grid.n_segments();
    assert_eq!(b.program.cones.len(), segs * 3);
    let gammas: Vec<usize> = b.program.cones.iter().map(|c| c.gamma).collect();
    for (j, c) in b.program.objective.iter().enumerate() {
        assert_eq!(*c, if gammas.contains(&j) { 1.0 } else { 0.0 });
    }
}

#[test]
fn cone_tags_point_at_their_variables() {
    let (net, grid, init) = setup();
    let b = build_dsr1(&net, &grid, &init, Direction::Upper).unwrap();
    let mut seen = std::collections::HashSet::new();
    for (c, tag) in b.program.cones.iter().zip(&b.program.cone_tags) {
        assert!(seen.insert(*tag));
        let k = b.levels.iter().position(|t| *t == tag.time).unwrap();
        let point = grid.pipes[tag.pipe].offset + tag.seg;
        assert_eq!(c.rho, b.rho[k][point]);
        assert_eq!(c.flow, b.flow[k][point]);
        assert!(tag.seg + 1 < grid.pipes[tag.pipe].n_seg);
    }
}

#[test]
fn builds_are_repeatable() {
    let (net, grid, init) = setup();
    let a = build_dsr2(&net, &grid, &init, -5.0, Direction::Upper).unwrap();
    let b = build_dsr2(&net, &grid, &init, -5.0, Direction::Upper).unwrap();
    assert_eq!(a.program, b.program);
}

#[test]
fn simulated_points_are_feasible_for_the_relaxation() {
    let (net, grid, init) = setup();
    let opts = NewtonOptions::default();
    for d_g in [-20.0, 0.0, 15.0] {
        let traj = simulate(&net, &grid, &init, &net.withdrawals(d_g), &opts).unwrap();
        let b = build_dsr1(&net, &grid, &init, Direction::Upper).unwrap();
        let x = b.point_from_states(&net, &grid, &traj.states, d_g, &traj.wells);
        let v = b.program.max_violation(&x);
        assert!(v < 1e-6, "d_G = {d_g}: violation {v}");
    }
}

#[test]
fn steady_states_are_feasible_for_the_steady_program() {
    let (net, grid, init) = setup();
    let b = build_ssr(&net, &grid, &init.wells, Objective::RankMin, Direction::Lower).unwrap();
    let x = b.point_from_states(&net, &grid, std::slice::from_ref(&init.state), 0.0, &init.wells);
    assert!(b.program.max_violation(&x) < 1e-6);
}

#[test]
fn relaxed_bound_brackets_the_dispatch_point() {
    let (net, grid, init) = setup();
    let opts = SolverOptions::default();
    for dir in [Direction::Upper, Direction::Lower] {
        let b = build_relaxed_bound(&net, &grid, &init, dir).unwrap();
        let r = solve(&b.program, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.primal_objective <= 1e-6, "{dir:?}: {}", r.primal_objective);
        let cap = build_dsr2(&net, &grid, &init, 0.0, dir).unwrap();
        let r = solve(&cap.program, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
    }
}

#[test]
fn tighter_cap_never_lowers_the_rank_objective() {
    let (net, grid, init) = setup();
    let opts = SolverOptions::default();
    let b = build_relaxed_bound(&net, &grid, &init, Direction::Upper).unwrap();
    let eta_min = solve(&b.program, &opts).unwrap().primal_objective;
    let mut last = f64::NEG_INFINITY;
    for frac in [0.0, 0.5, 0.9] {
        let p = build_dsr2(&net, &grid, &init, frac * eta_min, Direction::Upper).unwrap();
        let r = match solve(&p.program, &opts) {
            Ok(r) => r,
            Err(crate::error::Error::NumericalFailure { message, trace }) => panic!("{frac} {eta_min} {message}\n{}", trace.join("\n")),
            Err(e) => panic!("{e}"),
        };
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.primal_objective >= last - 1e-6 * last.abs().max(1.0));
        last = r.primal_objective;
    }
}
