// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs of the `cnd` binary.

use std::process::{Command, Output};

fn cnd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnd"))
        .args(args)
        .env_remove("FDP_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Header comment as JSON, then the numeric rows of a CSV artifact.
fn parse_csv(text: &str) -> (serde_json::Value, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .strip_prefix("# ")
        .expect("provenance line");
    let prov = serde_json::from_str(header).unwrap();
    lines.next().expect("column names");
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (prov, rows)
}

/// `Φ(x)` by composite Simpson quadrature of the normal density from -12.
fn phi(x: f64) -> f64 {
    if x <= -12.0 {
        return 0.0;
    }
    let m = 4000;
    let h = (x + 12.0) / m as f64;
    let dens = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = dens(-12.0) + dens(x);
    for i in 1..m {
        s += dens(-12.0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn phi_inv(p: f64) -> f64 {
    let (mut lo, mut hi) = (-12.0, 12.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn gdp_table_matches_quadrature() {
    let (prov, rows) = parse_csv(&stdout(&cnd(&[
        "tradeoff",
        "--family",
        "gdp",
        "--mu",
        "1",
        "--grid-points",
        "41",
    ])));
    assert_eq!(prov["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(rows.len(), 41);
    for r in &rows[1..40] {
        let want = phi(phi_inv(r[0]) - 1.0);
        assert!(
            (r[1] - want).abs() < 1e-8,
            "alpha {}: {} vs {want}",
            r[0],
            r[1]
        );
    }
}

#[test]
fn laplace_table_matches_closed_form() {
    let (_, rows) = parse_csv(&stdout(&cnd(&[
        "tradeoff", "--family", "laplace", "--eps", "2",
    ])));
    let cdf = |x: f64| {
        if x < 0.0 {
            0.5 * x.exp()
        } else {
            1.0 - 0.5 * (-x).exp()
        }
    };
    let quantile = |a: f64| {
        if a < 0.5 {
            (2.0 * a).ln()
        } else {
            -(2.0 * (1.0 - a)).ln()
        }
    };
    for r in &rows[1..rows.len() - 1] {
        let want = cdf(quantile(r[0]) - 2.0);
        assert!(
            (r[1] - want).abs() < 1e-12,
            "alpha {}: {} vs {want}",
            r[0],
            r[1]
        );
    }
}

#[test]
fn output_dir_uses_fixed_names_and_records_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = cnd(&[
        "--output-dir",
        d,
        "--seed",
        "5",
        "cnd",
        "sample",
        "--kind",
        "tulap",
        "--eps",
        "1",
        "--n",
        "1000",
    ]);
    stdout(&out);
    let text = std::fs::read_to_string(dir.path().join("cnd_samples.csv")).unwrap();
    let (prov, rows) = parse_csv(&text);
    assert_eq!(prov["seed"], 5);
    assert_eq!(prov["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(rows.len(), 1000);
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_cnd"))
            .args([
                "cnd", "sample", "--kind", "laplace", "--eps", "1", "--n", "1000",
            ])
            .env("FDP_SEED", seed)
            .output()
            .unwrap()
    };
    let (a, b, c) = (stdout(&run("11")), stdout(&run("11")), stdout(&run("12")));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(parse_csv(&a).0["seed"], 11);
}

#[test]
fn invalid_input_exits_with_two() {
    assert_eq!(
        cnd(&["tradeoff", "--family", "bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(
        cnd(&["tradeoff", "--family", "gdp", "--mu", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        cnd(&["--n", "999", "cnd", "sample", "--kind", "tulap", "--eps", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn mv_sample_has_one_column_per_coordinate() {
    let text = stdout(&cnd(&[
        "mv", "sample", "--kind", "linf", "--eps", "1", "--dim", "2", "--n", "1000",
    ]));
    assert!(text.lines().nth(1) == Some("x1,x2"));
    let (_, rows) = parse_csv(&text);
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r.len() == 2));
}

#[test]
fn mv_build_reports_worst_shift() {
    let text = stdout(&cnd(&[
        "mv", "build", "--kind", "gauss", "--dim", "2", "--norm", "linf",
    ]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["result"]["v_star"], serde_json::json!([1.0, 1.0]));
    let mu = v["result"]["target_f"]["params"]["mu"].as_f64().unwrap();
    assert!((mu - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn constructed_pure_dp_matches_tulap() {
    let grid = ["--xmax", "4", "--points", "161"];
    let built = stdout(&cnd(&[
        &[
            "cnd",
            "build",
            "--f",
            "eps-delta",
            "--eps",
            "1",
            "--delta",
            "0",
        ][..],
        &grid,
    ]
    .concat()));
    let tul = stdout(&cnd(&[
        &["cnd", "build", "--kind", "tulap", "--eps", "1"][..],
        &grid,
    ]
    .concat()));
    let (a, b) = (parse_csv(&built).1, parse_csv(&tul).1);
    assert_eq!(a.len(), b.len());
    for (r, s) in a.iter().zip(&b) {
        assert!(
            (r[1] - s[1]).abs() < 1e-9,
            "x {}: {} vs {}",
            r[0],
            r[1],
            s[1]
        );
    }
}

#[test]
fn json_format_wraps_tables() {
    let text = stdout(&cnd(&[
        "--format",
        "json",
        "tradeoff",
        "--family",
        "gdp",
        "--mu",
        "1",
        "--grid-points",
        "3",
    ]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["result"]["columns"], serde_json::json!(["alpha", "beta"]));
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn cnd_verify_passes_for_tulap() {
    let out = cnd(&[
        "--n", "20000", "cnd", "verify", "--kind", "tulap", "--eps", "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}
