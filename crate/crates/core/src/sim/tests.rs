use super::*;
use crate::grid::build_grid;
use crate::network::tests::three_node_json;

fn three_node() -> (GasNetwork, Grid) {
    let net = GasNetwork::from_json(&three_node_json()).unwrap();
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    (net, grid)
}

fn single_pipe_json(load: f64) -> String {
    format!(
        r#"{{
          "name": "single",
          "globals": {{"sound_speed": 350.0, "linepack_min": 0.0,
                      "momentum_scaling": "sound_speed_squared",
                      "reference_node": "A", "reference_density": 50.0}},
          "nodes": [
            {{"id": "A", "density_min": 1.0, "density_max": 100.0}},
            {{"id": "B", "density_min": 1.0, "density_max": 100.0}}
          ],
          "pipes": [{{"id": "P", "from": "A", "to": "B", "length": 40.0, "diameter": 0.868, "friction": 0.01}}],
          "wells": [{{"id": "S", "node": "A"}}],
          "loads": [{{"id": "L", "node": "B", "demand": {load}}}],
          "units": []
        }}"#
    )
}

#[test]
fn zero_injection_is_a_fixed_point() {
    let net = GasNetwork::from_json(&single_pipe_json(0.0)).unwrap();
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    let x = SystemState::uniform(&net, &grid, 45.0);
    let b = Boundary {
        wells: vec![Some(0.0)],
        units: vec![],
    };
    let y = step(&net, &grid, &x, &b, &NewtonOptions::default()).unwrap();
    assert_eq!(x, y);
}

#[test]
fn single_pipe_steady_matches_recursion() {
    let net = GasNetwork::from_json(&single_pipe_json(150.0)).unwrap();
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    let b = Boundary {
        wells: vec![None],
        units: vec![],
    };
    let ss = solve_steady::<f64>(&net, &grid, &b, 50.0, &NewtonOptions::default()).unwrap();
    assert!((ss.wells[0] - 150.0).abs() < 1e-6);
    let pipe = &net.pipes[0];
    let dx = pipe.segment_length();
    let k = dx * 8.0 * 0.01 / (std::f64::consts::PI.powi(2) * 0.868f64.powi(5)) / (350.0 * 350.0);
    let mut rho = 50.0f64;
    for s in 0..pipe.n_seg {
        assert!((ss.state.rho[0][s] - rho).abs() < 1e-6 * rho, "point {s}");
        assert!((ss.state.flow[0][s] - 150.0).abs() < 1e-6);
        rho -= k * 150.0 * 150.0 / rho;
    }
}

#[test]
fn three_node_steady_state() {
    let (net, grid) = three_node();
    let ss = initialize::<f64>(&net, &grid, &NewtonOptions::default()).unwrap();
    assert!((ss.wells[0] - 170.0).abs() < 1e-6);
    let rho = &ss.state.node_rho;
    assert!((rho[2] - 50.0).abs() < 1e-9);
    assert!(rho[2] > rho[0] && rho[0] > rho[1]);
    assert!((rho[0] - 45.1).abs() < 0.2, "{rho:?}");
    assert!((rho[1] - 42.1).abs() < 0.3, "{rho:?}");
}

#[test]
fn steady_state_is_a_fixed_point_of_step() {
    let (net, grid) = three_node();
    let opts = NewtonOptions::default();
    let ss = initialize::<f64>(&net, &grid, &opts).unwrap();
    let b = Boundary {
        wells: ss.wells.iter().map(|w| Some(*w)).collect(),
        units: net.dispatch(),
    };
    let y = step(&net, &grid, &ss.state, &b, &opts).unwrap();
    for (a, c) in y.rho.iter().flatten().zip(ss.state.rho.iter().flatten()) {
        assert!((a - c).abs() <= 1e-8 * c);
    }
}

#[test]
fn mass_is_conserved_each_step() {
    let (net, grid) = three_node();
    let opts = NewtonOptions::default();
    let ss = initialize::<f64>(&net, &grid, &opts).unwrap();
    let units = net.withdrawals(25.0);
    let traj = simulate(&net, &grid, &ss, &units, &opts).unwrap();
    for t in 0..grid.steps {
        let (a, b) = (&traj.states[t], &traj.states[t + 1]);
        let change = stored_mass(&net, &grid, b) - stored_mass(&net, &grid, a);
        let expected = grid.dt * net_injection(&net, b, &units, &traj.wells);
        assert!((change - expected).abs() <= 1e-6 * expected.abs().max(1.0), "step {t}: {change} vs {expected}");
    }
}

#[test]
fn density_falls_along_flow() {
    let (net, grid) = three_node();
    let opts = NewtonOptions::default();
    let ss = initialize::<f64>(&net, &grid, &opts).unwrap();
    let traj = simulate(&net, &grid, &ss, &net.withdrawals(10.0), &opts).unwrap();
    for state in &traj.states {
        for (rho, m) in state.rho.iter().zip(&state.flow) {
            for s in 0..rho.len() - 1 {
                if m[s] > 0.0 {
                    assert!(rho[s + 1] <= rho[s]);
                }
            }
        }
    }
}

#[test]
fn simulation_is_deterministic() {
    let (net, grid) = three_node();
    let opts = NewtonOptions::default();
    let ss = initialize::<f64>(&net, &grid, &opts).unwrap();
    let u = net.withdrawals(-20.0);
    let a = simulate(&net, &grid, &ss, &u, &opts).unwrap();
    let b = simulate(&net, &grid, &ss, &u, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.states[0], ss.state);
}

#[test]
fn uniform_linepack_is_volume_times_density() {
    let net = GasNetwork::from_json(&single_pipe_json(0.0)).unwrap();
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    let x = SystemState::uniform(&net, &grid, 40.0);
    let p = &net.pipes[0];
    let expected = 40.0 * p.area() * p.length;
    assert!((linepack(&net, &grid, &x) - expected).abs() < 1e-9 * expected);
}

#[test]
fn dispatch_point_is_secure() {
    let (net, grid) = three_node();
    let opts = NewtonOptions::default();
    let ss = initialize::<f64>(&net, &grid, &opts).unwrap();
    let traj = simulate(&net, &grid, &ss, &net.dispatch(), &opts).unwrap();
    let report = check_security(&net, &traj, DEFAULT_SECURITY_TOLERANCE);
    assert!(report.is_secure(), "{report:?}");
}

#[test]
fn clamped_density_gives_one_violation() {
    let (net, grid) = three_node();
    let opts = NewtonOptions::default();
    let ss = initialize::<f64>(&net, &grid, &opts).unwrap();
    let mut traj = simulate(&net, &grid, &ss, &net.dispatch(), &opts).unwrap();
    traj.states[2].node_rho[1] = net.nodes[1].density_max + 1.0;
    let report = check_security(&net, &traj, DEFAULT_SECURITY_TOLERANCE);
    assert_eq!(report.violations.len(), 1);
    let v = &report.violations[0];
    assert_eq!(v.kind, ViolationKind::DensityBound);
    assert_eq!((v.location.as_str(), v.time), ("2", Some(2)));
    assert!((v.magnitude - 1.0).abs() < 1e-12);
}

#[test]
fn oversized_load_fails() {
    let net = GasNetwork::from_json(&single_pipe_json(5000.0)).unwrap();
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    let b = Boundary {
        wells: vec![None],
        units: vec![],
    };
    let r = solve_steady::<f64>(&net, &grid, &b, 50.0, &NewtonOptions::default());
    assert!(matches!(r, Err(Error::NewtonDivergence { .. } | Error::NonPhysical(_))), "{r:?}");
}

#[test]
fn unbalanced_steady_without_open_well_fails() {
    let net = GasNetwork::from_json(&single_pipe_json(150.0)).unwrap();
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    let b = Boundary {
        wells: vec![Some(100.0)],
        units: vec![],
    };
    let r = solve_steady::<f64>(&net, &grid, &b, 50.0, &NewtonOptions::default());
    assert!(r.is_err(), "{r:?}");
}

#[test]
fn unit_compression_burns_no_fuel() {
    let text = three_node_json().replace(
        "\"wells\":",
        "\"compressors\": [{\"node\": \"1\", \"ratio\": 1.0, \"coeff_a\": 0.05, \"exponent_k\": 0.2}], \"wells\":",
    );
    let net = GasNetwork::from_json(&text).unwrap();
    assert!(net.nodes[0].compressor.is_some());
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    let ss = initialize::<f64>(&net, &grid, &NewtonOptions::default()).unwrap();
    assert!(compressor_fuel(&net, &ss.state).iter().all(|f| *f == 0.0));
}

#[test]
fn runs_in_single_precision() {
    let (net, grid) = three_node();
    let opts = NewtonOptions {
        tolerance: 1e-5,
        ..NewtonOptions::default()
    };
    let ss = initialize::<f32>(&net, &grid, &opts).unwrap();
    assert!((ss.wells[0] - 170.0).abs() < 1e-2);
}
