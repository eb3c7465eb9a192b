use sfpe_core::flemingviot::{
    fv_step, ratio_stream, run_fv, subgaussian_check, subgaussian_exact, FvChainState, FvOptions, MU_FIXTURE,
};
use sfpe_core::laws::fv::{marginal_cdf_a, sample_fv_step};
use sfpe_core::laws::LawSpec;
use sfpe_core::perpetuity::{run_chain, simulate_marginals, ChainConfig, RunOptions, Thinning};
use sfpe_core::rng::stream;
use sfpe_core::stats::{ks_one_sample, lag1_autocorrelation, sorted, RunningMoments};
use sfpe_core::TailScale;

#[test]
fn chain_equals_t_over_y_squared() {
    for seed in [11, 12] {
        let cfg = ChainConfig { law: LawSpec::FlemingViot, x0: 0.0, n_steps: 3000, replicas: 1, seed, scale: TailScale::h1() };
        let chain = run_chain(&cfg, &RunOptions { thinning: Thinning::All, envelope_start: 3 }).unwrap();
        let fv = run_fv(3000, seed, &FvOptions { thinning: Thinning::All, burn_in: 1000 }).unwrap();
        for (c, f) in chain.replicas[0].points.iter().zip(&fv.rows).skip(1) {
            let rel = (c.1 - f.x).abs() / c.1;
            assert!(rel <= 1e-12, "step {}: {} vs {}", c.0, c.1, f.x);
        }
    }
}

#[test]
fn one_step_has_the_joint_law() {
    let mut rng = stream(21, 0);
    let s0 = FvChainState::initial();
    let ys: Vec<f64> = (0..200_000).map(|_| fv_step(&s0, &mut rng).unwrap().y).collect();
    let mut rng = stream(21, 0);
    let direct: Vec<f64> = (0..200_000).map(|_| sample_fv_step(&mut rng).y1).collect();
    assert_eq!(ys, direct);
    let a: Vec<f64> = ys.iter().map(|y| 1.0 / (y * y)).collect();
    let d = ks_one_sample(&sorted(&a), marginal_cdf_a);
    assert!(d < 1.63 / (200_000f64).sqrt(), "{d}");
}

#[test]
fn ratio_stream_is_uncorrelated() {
    let theta: Vec<f64> = ratio_stream(1_000_000, 31).iter().map(|s| s.y1).collect();
    let logs: Vec<f64> = theta.iter().map(|y| y.ln()).collect();
    let r = lag1_autocorrelation(&logs);
    assert!(r.abs() <= 0.003, "{r}");
}

#[test]
fn monte_carlo_mu_agrees_with_quadrature() {
    let mut rng = stream(41, 0);
    let m: RunningMoments = (0..10_000_000).map(|_| sample_fv_step(&mut rng).y1.ln()).collect();
    let z = (m.mean() - MU_FIXTURE) / m.std_error();
    assert!(z.abs() <= 3.0, "mean {} se {} z {z}", m.mean(), m.std_error());
}

#[test]
fn subgaussian_band_at_two() {
    let law = LawSpec::FlemingViot.build().unwrap();
    let m = simulate_marginals(&law, 0.0, &[1], 10_000_000, 51).unwrap();
    let r = subgaussian_check(m.at(1).unwrap(), &[1.0, 1.5, 2.0, 2.5]).unwrap();
    let at2 = r.rows.iter().find(|r| r.t == 2.0).unwrap();
    assert!((at2.value + 0.25).abs() <= 0.08, "{at2:?}");
    let exact = subgaussian_exact(2.0).unwrap();
    assert!(at2.ci_lo <= exact && exact <= at2.ci_hi, "{exact} {at2:?}");
}

#[test]
fn lil_report_is_finite_after_burn_in() {
    let r = run_fv(100_000, 61, &FvOptions::default()).unwrap();
    assert!(r.report.max_after_burn_in.is_finite());
    assert!(r.report.windows.iter().filter(|w| w.from >= 1000).all(|w| w.max.is_finite()));
    assert!(r.rows.iter().filter(|row| row.n >= 1000).all(|row| row.lil_ratio.is_some()));
    assert!((r.report.slope_log_t / r.report.slope_log_y - 2.0).abs() < 0.05);
}
