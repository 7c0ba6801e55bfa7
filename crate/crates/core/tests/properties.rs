use std::path::PathBuf;
use std::sync::OnceLock;

use gas_dsr::fe::sample_points;
use gas_dsr::grid::{build_grid, Grid};
use gas_dsr::network::{load_network, GasNetwork};
use gas_dsr::plot::{render, Layer};
use gas_dsr::program::ratio::{eigenvalues, matrix_ratio, MAX_RATIO};
use gas_dsr::region::{region_contains, CellState, Containment, DSRegion, Diagnostics, Raster, RegionMode};
use gas_dsr::sim::{initialize, net_injection, simulate, stored_mass, NewtonOptions};
use gas_dsr::SteadyStateF64;
use proptest::prelude::*;

fn three_node() -> &'static (GasNetwork, Grid, SteadyStateF64) {
    static CELL: OnceLock<(GasNetwork, Grid, SteadyStateF64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/three_node/network.json");
        let net = load_network(path).unwrap();
        let grid = build_grid(&net, 300.0, 900.0).unwrap();
        let init = initialize::<f64>(&net, &grid, &NewtonOptions::default()).unwrap();
        (net, grid, init)
    })
}

fn cell_state() -> impl Strategy<Value = CellState> {
    prop_oneof![Just(CellState::Secure), Just(CellState::Insecure), Just(CellState::Diverged)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sample_points_are_sorted_with_exact_ends(lo in -1e4f64..0.0, width in 1e-6f64..1e4, n in 3usize..40) {
        let hi = lo + width;
        let p = sample_points(lo, hi, n);
        prop_assert_eq!(p.len(), n);
        prop_assert_eq!(p[0], lo);
        prop_assert_eq!(p[n - 1], hi);
        for w in p.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn unit_widths_scale_with_participation(lo in -100.0f64..0.0, hi in 0.0f64..100.0) {
        let (net, _, _) = three_node();
        let r = DSRegion::from_bounds(net, RegionMode::Dynamic, lo, hi, Diagnostics::default());
        for (u, iv) in net.units.iter().zip(&r.units) {
            prop_assert!(((iv.hi - iv.lo) - u.participation * (hi - lo)).abs() <= 1e-9 * (hi - lo).max(1.0));
        }
        let node_total: f64 = r.nodes.iter().map(|n| n.hi - n.lo).sum();
        prop_assert!((node_total - (hi - lo)).abs() <= 1e-9 * (hi - lo).max(1.0));
    }

    #[test]
    fn ray_points_inside_the_interval_are_contained(lo in -100.0f64..0.0, hi in 0.0f64..100.0, t in 0.0f64..=1.0) {
        let (net, _, _) = three_node();
        let r = DSRegion::from_bounds(net, RegionMode::Dynamic, lo, hi, Diagnostics::default());
        let d = lo + t * (hi - lo);
        prop_assert_eq!(region_contains(net, &r, &net.withdrawals(d), 1e-9), Containment::OnRay);
        prop_assert_eq!(region_contains(net, &r, &net.withdrawals(hi + 1.0), 1e-9), Containment::Outside);
    }

    #[test]
    fn region_json_round_trips(lo in -1e3f64..0.0, hi in 0.0f64..1e3, ratio in 0.0f64..12.0) {
        let (net, _, _) = three_node();
        let diag = Diagnostics { min_ratio: ratio, rounds: 3, wallclock: 0.5, certified_upper: true, certified_lower: false };
        let r = DSRegion::from_bounds(net, RegionMode::Steady, lo, hi, diag);
        prop_assert_eq!(DSRegion::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn raster_csv_round_trips(cells in proptest::collection::vec(cell_state(), 12), x0 in -10.0f64..10.0) {
        let raster = Raster {
            labels: ["a".into(), "b".into()],
            x: (0..4).map(|i| x0 + 0.5 * i as f64).collect(),
            y: (0..3).map(|j| 2.0 * j as f64).collect(),
            cells,
        };
        let back = Raster::from_csv(&raster.to_csv(), raster.labels.clone()).unwrap();
        prop_assert_eq!(back, raster);
    }

    #[test]
    fn svg_is_deterministic_and_well_formed(lo in -100.0f64..-1.0, hi in 1.0f64..100.0, lo2 in -100.0f64..-1.0, hi2 in 1.0f64..100.0) {
        let (net, _, _) = three_node();
        let d = DSRegion::from_bounds(net, RegionMode::Dynamic, lo, hi, Diagnostics::default());
        let s = DSRegion::from_bounds(net, RegionMode::Steady, lo2, hi2, Diagnostics::default());
        let layers = [Layer::new("DSR", &d), Layer::new("SSR", &s)];
        let a = render(&layers, None, &[]);
        prop_assert_eq!(&a, &render(&layers, None, &[]));
        prop_assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        prop_assert!(!a.contains("NaN") && !a.contains("inf"));
    }

    #[test]
    fn eigenvalues_reproduce_trace_and_determinant(g in 0.01f64..100.0, r in 0.01f64..100.0, t in -0.999f64..0.999) {
        // `t` keeps the matrix positive semidefinite.
        let m = t * (g * r).sqrt();
        let (l1, l2) = eigenvalues(g, m, r);
        prop_assert!(l1 >= l2 && l2 >= -1e-12 * l1);
        prop_assert!((l1 + l2 - (g + r)).abs() <= 1e-9 * (g + r));
        prop_assert!((l1 * l2 - (g * r - m * m)).abs() <= 1e-9 * l1 * l1);
    }

    #[test]
    fn ratio_is_scale_invariant_and_capped(g in 0.01f64..100.0, r in 0.01f64..100.0, t in -1.0f64..=1.0, c in 1e-3f64..1e3) {
        let m = t * (g * r).sqrt();
        let a = matrix_ratio(g, m, r);
        prop_assert!((0.0..=MAX_RATIO).contains(&a));
        if a < MAX_RATIO - 1e-6 {
            prop_assert!((a - matrix_ratio(c * g, c * m, c * r)).abs() <= 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simulator_conserves_mass(d_g in -60.0f64..60.0) {
        let (net, grid, init) = three_node();
        let units = net.withdrawals(d_g);
        let traj = simulate(net, grid, init, &units, &NewtonOptions::default()).unwrap();
        for t in 0..grid.steps {
            let change = stored_mass(net, grid, &traj.states[t + 1]) - stored_mass(net, grid, &traj.states[t]);
            let expected = grid.dt * net_injection(net, &traj.states[t + 1], &units, &traj.wells);
            prop_assert!((change - expected).abs() <= 1e-6 * expected.abs().max(grid.dt));
        }
    }

    #[test]
    fn simulator_is_deterministic(d_g in -60.0f64..60.0) {
        let (net, grid, init) = three_node();
        let a = simulate(net, grid, init, &net.withdrawals(d_g), &NewtonOptions::default()).unwrap();
        let b = simulate(net, grid, init, &net.withdrawals(d_g), &NewtonOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn more_withdrawal_means_less_linepack(d_g in -60.0f64..60.0, extra in 1.0f64..20.0) {
        let (net, grid, init) = three_node();
        let a = simulate(net, grid, init, &net.withdrawals(d_g), &NewtonOptions::default()).unwrap();
        let b = simulate(net, grid, init, &net.withdrawals(d_g + extra), &NewtonOptions::default()).unwrap();
        prop_assert!(b.linepack.last().unwrap() < a.linepack.last().unwrap());
    }
}
