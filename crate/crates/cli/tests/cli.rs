use std::fs;
use std::path::Path;
use std::process::Command;

fn sfpe(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sfpe"))
        .args(args)
        .env("SFPE_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn transform_fv_reports_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.json",
        r#"{"subcommand": "transform", "law": {"kind": "fleming-viot"}, "lambda_grid": {"from": 0, "to": 1, "steps": 10}}"#,
    );
    let out = dir.path().join("out");
    let o = sfpe(&["run", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert!((s["results"]["lambda_star"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    let csv = fs::read_to_string(out.join("phi.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert!(csv.starts_with("config_hash,lambda,phi"));
    let hash = s["config_hash"].as_str().unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with(hash)));
}

#[test]
fn fv_writes_rows_and_lil_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fv.json", r#"{"n_steps": 1000, "seeds": [1]}"#);
    let out = dir.path().join("out");
    let o = sfpe(&["fv", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("fv.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1001);
    assert!(summary(&out)["results"]["runs"][0]["lil"]["max_after_burn_in"].is_number());
    assert!(out.join("fv.dat").exists());
}

#[test]
fn missing_law_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"subcommand": "simulate", "n_steps": 10, "seed": 1}"#);
    let o = sfpe(&["run", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`law`"));
}

#[test]
fn unknown_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"n_steps": 1000, "seeds": [1], "nsteps": 5}"#);
    let o = sfpe(&["fv", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nsteps"));
}

#[test]
fn overflow_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "grow.json",
        r#"{"law": {"kind": "pqd-synthetic", "a": 10, "width": 0, "b": 1}, "n_steps": 1000, "seed": 1}"#,
    );
    let o = sfpe(&["simulate", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.json",
        r#"{"law": {"kind": "fleming-viot"}, "n_steps": 200, "replicas": 3, "seed": 5, "series_terms": 50}"#,
    );
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let o = sfpe(&["simulate", "--config", &cfg, "--seed", seed], out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trajectory.csv", "series.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert_ne!(fs::read(a.join(f)).unwrap(), fs::read(c.join(f)).unwrap());
    }
}

#[test]
fn jsonl_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"eps_tilde": 1, "lambda_star": 0.5, "eps": 0.1, "y_star": 2, "c": 0.25, "n_max": 100}"#,
    );
    let out = dir.path().join("out");
    let o = sfpe(&["schedule", "--config", &cfg, "--format", "jsonl"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("schedule.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 101);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["k"].is_u64());
    }
}

#[test]
fn tail_exports_g_table_for_transform() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tail.json",
        r#"{"law": {"kind": "pqd-synthetic", "a": 0.25}, "n": 20, "replicas": 20000, "seed": 2,
            "eps_grid": [0.5, 0.3], "kesten_grid": [1, 2, 4, 8],
            "ldm": {"ys": [0, 0.5, 1, 2], "n": 200000, "eps_grid": [0.5, 0.3]}}"#,
    );
    let out = dir.path().join("out");
    let o = sfpe(&["tail", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g = fs::read_to_string(out.join("g.csv")).unwrap();
    assert!(g.starts_with("y,g,ci_lo,ci_hi"));
    let g_path = out.join("g.csv");
    let tcfg = format!(
        r#"{{"g_csv": {}, "lambda_grid": [0, 0.5, 1]}}"#,
        serde_json::to_string(&g_path.to_string_lossy()).unwrap()
    );
    let tcfg = write_config(dir.path(), "tr.json", &tcfg);
    let o = sfpe(&["transform", "--config", &tcfg], &dir.path().join("out2"));
    assert!(o.status.code() == Some(0) || o.status.code() == Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("out2/phi.csv").exists());
}

#[test]
fn laws_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let o = sfpe(&["laws"], dir.path());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("fleming-viot") && text.contains("A=Y_1^{-2} and B=T_1Y_1^{-2}"));
    assert!(text.contains("pqd-synthetic") && text.contains("gamma") && text.contains("rho"));
    assert!(text.contains("discontinuous-ldm") && text.contains("lambda1") && text.contains("lambda2"));
}
