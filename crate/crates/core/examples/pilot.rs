//! Pilot runs behind the fixed bands of the acceptance suite. They use
//! seeds disjoint from the acceptance seeds.
//!
//! cargo run --release --example pilot -- tail|envelope|lil|subgaussian

use std::time::Instant;

use sfpe_core::flemingviot::{run_fv, subgaussian_check, FvOptions};
use sfpe_core::laws::LawSpec;
use sfpe_core::perpetuity::{
    estimate_left_tail, kesten_right_tail, run_chain, simulate_marginals, ChainConfig, RunOptions, Thinning,
};
use sfpe_core::TailScale;

const PILOT_SEED: u64 = 0x9110_7000;

fn tail() {
    let law = LawSpec::FlemingViot.build().unwrap();
    let m = simulate_marginals(&law, 0.0, &[500], 10_000_000, PILOT_SEED).unwrap();
    let xs = m.at(500).unwrap();
    let est = estimate_left_tail(xs, &TailScale::h1(), &[0.4, 0.2, 0.1, 0.05]).unwrap();
    for c in &est.cells {
        println!("eps {} hits {} g {:.5} ci [{:.5}, {:.5}] se {:.5}", c.eps, c.hits, c.g_hat, c.ci_lo, c.ci_hi, c.se);
    }
    for (lo, hi) in [(10.0, 100.0), (100.0, 1000.0), (1000.0, 10000.0)] {
        let grid: Vec<f64> = (0..=10).map(|i| lo * (hi / lo as f64).powf(i as f64 / 10.0)).collect();
        match kesten_right_tail(xs, &grid) {
            Ok(k) => println!("kesten [{lo}, {hi}] slope {:.4} se {:.4} c1 {:.4}", k.slope, k.slope_se, k.linear_bound_sup),
            Err(e) => println!("kesten [{lo}, {hi}] {e}"),
        }
    }
}

fn envelope() {
    for s in 0..20 {
        let cfg = ChainConfig {
            law: LawSpec::FlemingViot,
            x0: 0.0,
            n_steps: 1_000_000,
            replicas: 1,
            seed: PILOT_SEED + s,
            scale: TailScale::h1(),
        };
        let r = run_chain(&cfg, &RunOptions { thinning: Thinning::Geometric(1), envelope_start: 1000 }).unwrap();
        let e = &r.replicas[0].envelope;
        println!("seed {} inf {:.4} at {}", PILOT_SEED + s, e.final_value, e.argmin);
    }
}

fn lil() {
    for s in 0..20 {
        let r = run_fv(1_000_000, PILOT_SEED + s, &FvOptions::default()).unwrap().report;
        println!(
            "seed {} max {:.4} t/y slope {:.5} loglog {:.4}",
            PILOT_SEED + s,
            r.max_after_burn_in,
            1.0 / r.slope_ratio,
            r.loglog_ratio.last().unwrap().1
        );
    }
}

fn subgaussian() {
    let law = LawSpec::FlemingViot.build().unwrap();
    let m = simulate_marginals(&law, 0.0, &[1], 10_000_000, PILOT_SEED).unwrap();
    let r = subgaussian_check(m.at(1).unwrap(), &[1.0, 1.5, 2.0, 2.5]).unwrap();
    for row in r.rows {
        println!("t {} hits {} value {:.4} ci [{:.4}, {:.4}] exact {:.4}", row.t, row.hits, row.value, row.ci_lo, row.ci_hi,
            sfpe_core::flemingviot::subgaussian_exact(row.t).unwrap());
    }
}

fn main() {
    let t = Instant::now();
    match std::env::args().nth(1).as_deref() {
        Some("tail") => tail(),
        Some("envelope") => envelope(),
        Some("lil") => lil(),
        Some("subgaussian") => subgaussian(),
        _ => eprintln!("usage: pilot tail|envelope|lil|subgaussian"),
    }
    eprintln!("{:?}", t.elapsed());
}
