use proptest::prelude::*;
use tfqkd_core::verify::soundness_trial;
use tfqkd_core::{
    analyze, evaluate, expected_observables, monte_carlo_observables, optimize, BoundFault,
    ChannelModel, ProtocolParams, SearchSpace,
};

#[test]
fn simulated_data_runs_through_the_estimation_chain() {
    let params = ProtocolParams::new(0.05, 0.2, 0.5, 0.5).with_windows(4_000_000);
    let ch = ChannelModel::paper(30.0, 0.1);
    let (counts, truth) = monte_carlo_observables(&params, &ch, 11).unwrap();
    counts.check_invariants(0.0).unwrap();
    let sim = analyze(&counts, &params).unwrap();
    let exact = analyze(&expected_observables(&params, &ch).unwrap(), &params).unwrap();
    assert!(sim.n1_l <= truth.true_n1);
    assert!((sim.ez - exact.ez).abs() < 0.05);
    assert!((sim.e1ph_u - exact.e1ph_u).abs() < 0.05);
}

#[test]
fn rate_falls_with_distance() {
    let space = SearchSpace::default();
    let rates: Vec<f64> = [0.0, 100.0, 200.0, 300.0]
        .iter()
        .map(|&l| optimize(&ChannelModel::paper(l, 0.1), &space).unwrap().rate)
        .collect();
    assert!(rates.windows(2).all(|w| w[0] > w[1]), "{rates:?}");
}

#[test]
fn optimum_beats_fixed_points() {
    let ch = ChannelModel::paper(150.0, 0.1);
    let best = optimize(&ch, &SearchSpace::default()).unwrap();
    for p in [
        ProtocolParams::new(0.05, 0.2, 0.5, 0.5),
        ProtocolParams::new(0.02, 0.02, 0.05, 0.05),
        ProtocolParams::new(0.4, 0.05, 0.25, 0.3),
    ] {
        assert!(evaluate(&p, &ch).unwrap().rate <= best.rate);
    }
}

#[test]
fn fault_is_visible_in_a_single_trial() {
    let params = ProtocolParams::new(0.05, 0.2, 0.5, 0.5).with_windows(4_000_000);
    let ch = ChannelModel::paper(50.0, 0.1);
    let clean = soundness_trial(&params, &ch, 3, BoundFault::None).unwrap();
    let broken = soundness_trial(&params, &ch, 3, BoundFault::InflateCorrectClicks(0.1)).unwrap();
    assert!(clean.holds());
    assert!(!broken.holds());
    assert!(broken.e1ph_u < clean.e1ph_u);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analytic_rate_is_a_bounded_fraction(
        l in 0.0..400.0f64,
        ea in 0.0..0.5f64,
        mu in 1e-4..1.5f64,
        eps in 1e-4..0.5f64,
        px in 0.01..0.5f64,
        lambda in 0.01..2.0f64,
    ) {
        let b = evaluate(&ProtocolParams::new(mu, eps, px, lambda), &ChannelModel::paper(l, ea)).unwrap();
        prop_assert!(b.rate >= 0.0 && b.rate < 1.0);
        prop_assert!((0.0..=1.0).contains(&b.e1ph_u));
        prop_assert!(b.n1_l >= 0.0);
    }
}
