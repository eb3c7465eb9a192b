use std::fs::File;

use anyhow::{anyhow, Context, Result};
use serde_json::{json, Value};

use sfpe_core::flemingviot::{run_fv, FvOptions};
use sfpe_core::laws::diagnostics::moment_diagnostics;
use sfpe_core::ldm::{estimate_g_multi, tabulate, LdmFunction, TabulatedG};
use sfpe_core::par::map_indexed;
use sfpe_core::perpetuity::{
    build_envelope_schedule, estimate_left_tail, kesten_right_tail, run_chain, simulate_marginals,
    simulate_series_replicas, ChainConfig, RunOptions, ScheduleParams, Thinning,
};
use sfpe_core::transform::{Minimizer, TransformContext};

use crate::config::{EnvelopeConfig, FvConfig, ScheduleConfig, SimulateConfig, TailConfig, TransformConfig};
use crate::output::{Cell, OutputDir, Table};

pub struct Outcome {
    /// False when a property check failed.
    pub ok: bool,
    pub results: Value,
}

const MOMENT_DRAWS: u64 = 100_000;

fn minimizer_text(m: Minimizer) -> Cell {
    match m {
        Minimizer::At(y) => Cell::F(y),
        Minimizer::Infinity => "inf".into(),
        Minimizer::LowerEnd => "lower-end".into(),
        Minimizer::Nowhere => "nowhere".into(),
    }
}

pub fn transform(cfg: &TransformConfig, hash: &str, out: &mut OutputDir) -> Result<Outcome> {
    let g = match (&cfg.law, &cfg.g_csv) {
        (Some(spec), _) => spec
            .build()?
            .metadata()
            .closed_form_ldm
            .ok_or_else(|| anyhow!("law `{}` has no closed-form g; tabulate it with `tail` and pass `g_csv`", spec.kind()))?,
        (None, Some(path)) => {
            let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
            LdmFunction::TabulatedEmpirical(TabulatedG::read_csv(f)?)
        }
        (None, None) => unreachable!("checked when parsing"),
    };
    let ctx = TransformContext::new(g, cfg.rho)?;
    let grid = cfg.lambda_grid.values();
    let mut phi = Table::new("phi", hash, &["lambda", "phi", "minimizer", "phi_lo", "phi_hi"]);
    for &l in &grid {
        let p = ctx.phi_point(l);
        let bounds = ctx.phi_bounds(l);
        phi.push(vec![l.into(), p.value.into(), minimizer_text(p.minimizer), bounds.map(|b| b.0).into(), bounds.map(|b| b.1).into()]);
    }
    let star = ctx.lambda_star_point();
    let it = cfg.iterate.clone().unwrap_or(crate::config::IterateConfig { lambda1: None, max_steps: 200, tol: 1e-10 });
    let lambda1 = it.lambda1.unwrap_or_else(|| ctx.g.at_zero_plus());
    let trace = ctx.iterate(lambda1, it.max_steps, it.tol);
    let mut tr = Table::new("trace", hash, &["step", "lambda"]);
    for (i, &l) in trace.lambdas.iter().enumerate() {
        tr.push(vec![(i + 1).into(), l.into()]);
    }
    let report = ctx.property_report(&grid);
    out.table(&phi)?;
    out.dat(&phi, &["lambda", "phi"])?;
    out.table(&tr)?;
    let trace_ok = !trace.guaranteed || trace.nondecreasing;
    Ok(Outcome {
        ok: report.passed() && trace_ok,
        results: json!({
            "lambda_star": star.value,
            "lambda_star_minimizer": format!("{:?}", star.minimizer),
            "trace": {
                "lambda1": lambda1,
                "steps": trace.lambdas.len(),
                "limit": trace.limit,
                "converged": trace.converged,
                "nondecreasing": trace.nondecreasing,
                "monotone_by_theory": trace.guaranteed,
            },
            "properties": {
                "passed": report.passed(),
                "phi_at_zero": report.phi_at_zero,
                "g_at_zero_plus": report.g_at_zero_plus,
                "monotonicity_violations": report.monotonicity_violations,
                "concavity_violations": report.concavity_violations.len(),
                "sign_violations": report.sign_violations,
                "crossing": report.crossing,
            },
        }),
    })
}

pub fn simulate(cfg: &SimulateConfig, hash: &str, out: &mut OutputDir) -> Result<Outcome> {
    let chain = ChainConfig {
        law: cfg.law.clone(),
        x0: cfg.x0,
        n_steps: cfg.n_steps,
        replicas: cfg.replicas,
        seed: cfg.seed,
        scale: cfg.scale,
    };
    let run = run_chain(&chain, &RunOptions { thinning: cfg.thinning, envelope_start: 3 })?;
    let mut traj = Table::new("trajectory", hash, &["seed", "replica", "n", "x"]);
    let mut finals = Vec::new();
    for r in &run.replicas {
        for &(n, x) in &r.points {
            traj.push(vec![cfg.seed.into(), r.replica.into(), n.into(), x.into()]);
        }
        finals.push(json!({
            "replica": r.replica,
            "n": r.last.0,
            "x": r.last.1,
            "overflow": r.overflow,
            "envelope_inf": r.envelope.final_value,
        }));
    }
    out.table(&traj)?;
    out.dat(&traj, &["replica", "n", "x"])?;
    let law = cfg.law.build()?;
    let moments = moment_diagnostics(&law, MOMENT_DRAWS, cfg.seed)?;
    let mut results = json!({ "replicas": finals, "moments": moments });
    if let Some(terms) = cfg.series_terms {
        let s = simulate_series_replicas(&law, terms, cfg.replicas, cfg.seed)?;
        let mut t = Table::new("series", hash, &["seed", "replica", "terms", "s"]);
        for (r, &v) in s.iter().enumerate() {
            t.push(vec![cfg.seed.into(), r.into(), terms.into(), v.into()]);
        }
        out.table(&t)?;
        results["series_terms"] = json!(terms);
    }
    let overflowed = run.replicas.iter().filter(|r| r.overflow.is_some()).count();
    results["overflowed_replicas"] = json!(overflowed);
    Ok(Outcome { ok: overflowed == 0, results })
}

pub fn tail(cfg: &TailConfig, hash: &str, out: &mut OutputDir) -> Result<Outcome> {
    let law = cfg.law.build()?;
    let m = simulate_marginals(&law, cfg.x0, &[cfg.n], cfg.replicas, cfg.seed)?;
    let samples = m.at(cfg.n).expect("requested checkpoint");
    let est = estimate_left_tail(samples, &cfg.scale, &cfg.eps_grid)?;
    let mut t = Table::new(
        "tail",
        hash,
        &["seed", "n", "eps", "hits", "replicas", "p_hat", "exponent", "ci_lo", "ci_hi", "se", "censored"],
    );
    for c in &est.cells {
        t.push(vec![
            cfg.seed.into(),
            cfg.n.into(),
            c.eps.into(),
            c.hits.into(),
            c.n.into(),
            c.p_hat.into(),
            c.g_hat.into(),
            c.ci_lo.into(),
            c.ci_hi.into(),
            c.se.into(),
            c.censored.into(),
        ]);
    }
    out.table(&t)?;
    out.dat(&t, &["eps", "exponent", "ci_lo", "ci_hi"])?;
    let mut results = json!({
        "n": cfg.n,
        "replicas": cfg.replicas,
        "overflowed_replicas": m.overflows.len(),
        "exponent_nondecreasing": est.nondecreasing(),
        "final_exponent": est.last().g_hat,
    });
    if let Some(grid) = &cfg.kesten_grid {
        let finite: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
        match kesten_right_tail(&finite, &grid.values()) {
            Ok(k) => {
                let mut kt = Table::new("kesten", hash, &["x", "count", "p", "used"]);
                for c in &k.cells {
                    kt.push(vec![c.x.into(), c.count.into(), c.p.into(), c.used.into()]);
                }
                out.table(&kt)?;
                results["kesten"] =
                    json!({ "slope": k.slope, "slope_se": k.slope_se, "linear_bound_sup": k.linear_bound_sup });
            }
            Err(e) => results["kesten"] = json!({ "error": e.to_string() }),
        }
    }
    if let Some(l) = &cfg.ldm {
        let ests = estimate_g_multi(&law, &l.ys, &cfg.scale, &l.eps_grid, l.n, cfg.seed)?;
        let mut lt = Table::new("ldm", hash, &["y", "eps", "hits", "n", "g_hat", "ci_lo", "ci_hi", "se", "censored"]);
        for e in &ests {
            for c in &e.cells {
                lt.push(vec![
                    e.y.into(),
                    c.eps.into(),
                    c.hits.into(),
                    c.n.into(),
                    c.g_hat.into(),
                    c.ci_lo.into(),
                    c.ci_hi.into(),
                    c.se.into(),
                    c.censored.into(),
                ]);
            }
        }
        out.table(&lt)?;
        let g = tabulate(&ests)?;
        out.raw("g.csv", |w| Ok(g.write_csv(w)?))?;
    }
    Ok(Outcome { ok: m.overflows.is_empty(), results })
}

pub fn envelope(cfg: &EnvelopeConfig, hash: &str, out: &mut OutputDir) -> Result<Outcome> {
    let runs = map_indexed(cfg.seeds.len(), |i| {
        let chain = ChainConfig {
            law: cfg.law.clone(),
            x0: cfg.x0,
            n_steps: cfg.n_steps,
            replicas: 1,
            seed: cfg.seeds[i],
            scale: cfg.scale,
        };
        run_chain(&chain, &RunOptions { thinning: Thinning::Geometric(1), envelope_start: cfg.start })
    });
    let mut t = Table::new("envelope", hash, &["seed", "n", "running_inf"]);
    let mut per_seed = Vec::new();
    let mut overflowed = 0;
    for (seed, run) in cfg.seeds.iter().zip(runs) {
        let r = run?.replicas.remove(0);
        for &(n, v) in &r.envelope.records {
            t.push(vec![(*seed).into(), n.into(), v.into()]);
        }
        overflowed += usize::from(r.overflow.is_some());
        per_seed.push(json!({
            "seed": seed,
            "final": r.envelope.final_value,
            "argmin": r.envelope.argmin,
            "overflow": r.overflow,
        }));
    }
    out.table(&t)?;
    out.dat(&t, &["seed", "n", "running_inf"])?;
    Ok(Outcome { ok: overflowed == 0, results: json!({ "start": cfg.start, "seeds": per_seed }) })
}

pub fn schedule(cfg: &ScheduleConfig, hash: &str, out: &mut OutputDir) -> Result<Outcome> {
    let p = ScheduleParams { eps_tilde: cfg.eps_tilde, lambda_star: cfg.lambda_star, eps: cfg.eps, y_star: cfg.y_star, c: cfg.c };
    let s = build_envelope_schedule(p, &cfg.scale, cfg.n_max)?;
    let mut t = Table::new("schedule", hash, &["n", "a", "k", "upper", "lower"]);
    for (n, (&a, &k)) in s.a_seq.iter().zip(&s.k_seq).enumerate() {
        let (up, lo) = match n.checked_sub(1) {
            Some(i) if i < s.upper_values.len() => (Cell::F(s.upper_values[i]), Cell::F(s.lower_values[i])),
            _ => (Cell::Empty, Cell::Empty),
        };
        t.push(vec![n.into(), a.into(), k.into(), up, lo]);
    }
    out.table(&t)?;
    out.dat(&t, &["n", "a", "k"])?;
    Ok(Outcome {
        ok: s.step_at_least_one && s.k_strictly_increasing,
        results: json!({
            "a0": s.a0,
            "upper_burn_in": s.upper_burn_in,
            "lower_burn_in": s.lower_burn_in,
            "step_at_least_one": s.step_at_least_one,
            "k_strictly_increasing": s.k_strictly_increasing,
            "gamma": s.gamma,
            "k_bound": s.k_bound(),
            "k_bound_history": s.k_bound_history,
        }),
    })
}

pub fn fv(cfg: &FvConfig, hash: &str, out: &mut OutputDir) -> Result<Outcome> {
    let opts = FvOptions { thinning: cfg.thinning, burn_in: cfg.burn_in };
    let runs = map_indexed(cfg.seeds.len(), |i| run_fv(cfg.n_steps, cfg.seeds[i], &opts));
    let mut t = Table::new("fv", hash, &["seed", "n", "y", "t", "x", "lil_ratio", "log_y", "log_t"]);
    let mut reports = Vec::new();
    for run in runs {
        let run = run?;
        for r in &run.rows {
            t.push(vec![
                run.seed.into(),
                r.n.into(),
                r.log_y.exp().into(),
                r.log_t.exp().into(),
                r.x.into(),
                r.lil_ratio.into(),
                r.log_y.into(),
                r.log_t.into(),
            ]);
        }
        reports.push(json!({ "seed": run.seed, "lil": run.report }));
    }
    out.table(&t)?;
    out.dat(&t, &["seed", "n", "lil_ratio"])?;
    Ok(Outcome { ok: true, results: json!({ "runs": reports }) })
}
