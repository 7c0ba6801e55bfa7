use super::*;
use crate::grid::build_grid;
use crate::network::tests::three_node_json;
use crate::sim::initialize;

fn mock(eta: f64, rank_one: bool) -> (Sample, Option<f64>) {
    let sample = Sample {
        eta,
        outcome: if rank_one { SampleOutcome::RankOne } else { SampleOutcome::NotRankOne },
        status: Some(SolveStatus::Optimal),
        min_ratio: Some(if rank_one { 8.0 } else { 2.0 }),
        d_g: Some(-eta),
        iterations: 1,
        seconds: 0.0,
        error: None,
    };
    (sample, Some(eta))
}

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

#[test]
fn sample_points_include_both_ends() {
    let p = sample_points(-10.0, 0.0, 11);
    assert_eq!(p.len(), 11);
    assert_eq!((p[0], p[10]), (-10.0, 0.0));
    assert!((p[3] + 7.0).abs() < 1e-12);
}

#[test]
fn threshold_oracle_is_bracketed_within_epsilon() {
    let star = -3.217;
    let search = bracket_search(-10.0, 0.0, mock(-10.0, false), 1e-3, 11, 50, &pool(2), |e| mock(e, e >= star));
    let (eta, _, payload) = search.accepted.unwrap();
    assert!(eta >= star && eta - star <= 1e-3, "{eta}");
    assert_eq!(payload, eta);
    let widths: Vec<f64> = search.rounds.iter().map(|r| r.bracket[1] - r.bracket[0]).collect();
    for w in widths.windows(2) {
        assert!(w[1] < w[0]);
        assert!(w[1] <= w[0] / 10.0 + 1e-12);
    }
    for r in search.rounds.windows(2) {
        assert!(r[1].bracket[0] >= r[0].bracket[0] && r[1].bracket[1] <= r[0].bracket[1]);
    }
}

#[test]
fn first_round_solves_zero_and_later_rounds_reuse_ends() {
    let calls = std::sync::Mutex::new(Vec::new());
    let search = bracket_search(-10.0, 0.0, mock(-10.0, false), 1.0, 5, 50, &pool(3), |e| {
        calls.lock().unwrap().push(e);
        mock(e, e >= -6.0)
    });
    let calls = calls.into_inner().unwrap();
    // Round one: three interior caps and zero; round two: three interior caps.
    assert_eq!(calls.len(), 7);
    assert!(calls.contains(&0.0));
    assert_eq!(search.rounds.len(), 2);
    assert!(search.rounds.iter().all(|r| r.samples.len() == 5));
}

#[test]
fn smallest_rank_one_sample_wins_even_when_not_monotone() {
    // Rank one at -8 only and from -2 up.
    let f = |e: f64| mock(e, (e + 8.0).abs() < 1e-9 || e >= -2.0);
    let search = bracket_search(-10.0, 0.0, mock(-10.0, false), 1.0, 6, 50, &pool(2), f);
    let (eta, _, _) = search.accepted.unwrap();
    assert_eq!(eta, -8.0);
    assert_eq!(search.rounds[0].bracket, [-10.0, -8.0]);
}

#[test]
fn no_rank_one_sample_reports_nothing() {
    let search = bracket_search(-10.0, 0.0, mock(-10.0, false), 1e-3, 4, 50, &pool(2), |e| mock(e, false));
    assert!(search.accepted.is_none());
    assert_eq!(search.rounds.len(), 1);
}

#[test]
fn searches_are_deterministic() {
    let run = || {
        let s = bracket_search(-7.0, 0.0, mock(-7.0, false), 1e-4, 11, 50, &pool(4), |e| mock(e, e >= -1.234567));
        s.rounds.iter().map(|r| r.bracket).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn default_epsilon_scales_with_the_bound() {
    assert_eq!(default_epsilon(-500.0), 0.5);
    assert_eq!(default_epsilon(-0.2), 1e-3);
}

#[test]
fn rejects_too_few_samples() {
    let net = GasNetwork::from_json(&three_node_json()).unwrap();
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    let init = initialize::<f64>(&net, &grid, &NewtonOptions::default()).unwrap();
    let opts = FeOptions {
        samples: 2,
        ..FeOptions::default()
    };
    let r = evaluate_boundary(&net, &grid, &init, Direction::Upper, &opts);
    assert!(matches!(r, Err(Error::Validation { .. })));
}

#[test]
fn three_node_boundaries_are_rank_one_and_secure() {
    let net = GasNetwork::from_json(&three_node_json()).unwrap();
    let grid = build_grid(&net, 300.0, 900.0).unwrap();
    let init = initialize::<f64>(&net, &grid, &NewtonOptions::default()).unwrap();
    for dir in [Direction::Upper, Direction::Lower] {
        let r = evaluate_boundary(&net, &grid, &init, dir, &FeOptions::default()).unwrap();
        assert!(r.certified);
        assert!(r.min_ratio >= DEFAULT_RANK_ONE_THRESHOLD);
        assert!(dir.sign() * r.d_g >= 0.0);
        let v = verify_boundary(&r, &net, &grid, &init).unwrap();
        assert!(v.secure);
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

    #[test]
    fn monotone_threshold_is_found_within_epsilon(lo in -1e3f64..-1.0, t in 0.0f64..1.0, samples in 3usize..16, eps_frac in 1e-5f64..1e-1) {
        let star = lo * (1.0 - t);
        let epsilon = eps_frac * lo.abs();
        let search = bracket_search(lo, 0.0, mock(lo, lo >= star), epsilon, samples, 200, &pool(2), |e| mock(e, e >= star));
        let (eta, _, _) = search.accepted.unwrap();
        proptest::prop_assert!(eta >= star);
        proptest::prop_assert!(eta - star <= epsilon.max(0.0) + 1e-12 * lo.abs());
        for r in &search.rounds {
            proptest::prop_assert!(r.bracket[0] <= star + 1e-12 * lo.abs() && star <= r.bracket[1]);
        }
    }
}
