use sfpe_core::laws::LawSpec;
use sfpe_core::perpetuity::{
    build_envelope_schedule, estimate_left_tail, run_chain, simulate_marginals, simulate_series, stochastic_monotonicity_check,
    ChainConfig, RunOptions, ScheduleParams, OVERFLOW_LIMIT,
};
use sfpe_core::rng::stream;
use sfpe_core::TailScale;

#[test]
fn degenerate_examples() {
    let cfg = ChainConfig { law: LawSpec::degenerate(0.5, 1.0), x0: 0.0, n_steps: 3, replicas: 1, seed: 0, scale: TailScale::h1() };
    let run = run_chain(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(run.replicas[0].last, (3, 1.75));
    let cfg = ChainConfig { law: LawSpec::degenerate(0.0, 2.5), x0: 9.0, n_steps: 20, ..cfg };
    let run = run_chain(&cfg, &RunOptions::default()).unwrap();
    assert!(run.replicas[0].points[1..].iter().all(|&(_, x)| x == 2.5));
    let law = LawSpec::degenerate(0.5, 1.0).build().unwrap();
    let s = simulate_series(&law, 50, &mut stream(0, 0)).unwrap();
    assert!((s.sum - 2.0 * (1.0 - 0.5f64.powi(50))).abs() < 1e-15);
}

#[test]
fn independent_pqd_left_tail_has_rate_lambda_star() {
    // A ≡ 0 makes X_1 = B with P(B < ε) = exp(-γ/ε) exactly
    let law = LawSpec::PqdSynthetic { gamma: 0.8, a: 0.0, width: 0.0, rho: 1.0, b: None };
    let m = simulate_marginals(&law.build().unwrap(), 0.0, &[3], 2_000_000, 5).unwrap();
    let est = estimate_left_tail(m.at(3).unwrap(), &TailScale::h1(), &[0.5, 0.25, 0.1]).unwrap();
    for c in &est.cells {
        assert!(c.ci_lo <= 0.8 && 0.8 <= c.ci_hi, "{c:?}");
    }
}

#[test]
fn pqd_chain_is_stochastically_increasing() {
    let law = LawSpec::pqd(1.0, 0.2, 0.5, 1.0).build().unwrap();
    let r = stochastic_monotonicity_check(&law, &[0, 1, 2, 4, 8, 16], 50_000, 3, 0.01).unwrap();
    assert!(r.ok(), "{r:?}");
}

#[test]
fn marginals_mark_overflow() {
    let law = LawSpec::degenerate(1e10, 1.0).build().unwrap();
    let m = simulate_marginals(&law, 0.0, &[5, 100], 3, 1).unwrap();
    assert_eq!(m.overflows.len(), 3);
    assert!(m.overflows.iter().all(|o| o.value > OVERFLOW_LIMIT));
    assert!(m.at(100).unwrap().iter().all(|x| x.is_infinite()));
    assert!(m.at(5).unwrap().iter().all(|x| x.is_finite()));
}

#[test]
fn schedule_starts_like_the_hand_computation() {
    let p = ScheduleParams { eps_tilde: 1.0, lambda_star: 0.5, eps: 0.1, y_star: 2.0, c: 0.25 };
    let s = build_envelope_schedule(p, &TailScale::h1(), 1000).unwrap();
    assert_eq!(&s.k_seq[..6], &[4, 5, 6, 7, 9, 11]);
    assert_eq!((s.upper_burn_in, s.lower_burn_in), (1, 1));
}
