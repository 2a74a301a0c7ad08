use std::path::PathBuf;
use std::process::{Command, Output};

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bigglm"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn gaussian_fit_equals_ols() {
    let path = data("gaussian_sample.csv");
    let out = run(&[
        "fit",
        "--data",
        path.to_str().unwrap(),
        "--response",
        "y",
        "--family",
        "gaussian",
        "--estimator",
        "mbr",
        "--chunk-size",
        "3",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    for key in [
        "beta",
        "se",
        "phi",
        "iterations",
        "converged",
        "adjusted_score_norm",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect();
    let n = rows.len();
    let x = DMatrix::from_fn(n, 3, |i, j| if j == 0 { 1.0 } else { rows[i][j] });
    let y = DVector::from_fn(n, |i, _| rows[i][0]);
    let qr = x.clone().qr();
    let beta = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &y))
        .unwrap();
    let got = floats(&v["beta"]);
    for j in 0..3 {
        assert!((got[j] - beta[j]).abs() < 1e-10, "{got:?} vs {beta}");
    }
    let resid = &y - &x * &beta;
    assert!((v["phi"].as_f64().unwrap() - resid.dot(&resid) / (n - 3) as f64).abs() < 1e-12);
}

#[test]
fn mjpl_on_separated_sample_is_finite() {
    let path = data("separated_sample.csv");
    let out = run(&[
        "fit",
        "--data",
        path.to_str().unwrap(),
        "--response",
        "y",
        "--estimator",
        "mjpl",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["converged"].as_bool().unwrap());
    assert!(floats(&v["beta"])
        .iter()
        .all(|b| b.is_finite() && b.abs() < 10.0));
}

#[test]
fn non_convergence_exits_2_with_a_reason() {
    let path = data("separated_sample.csv");
    let out = run(&[
        "fit",
        "--data",
        path.to_str().unwrap(),
        "--response",
        "y",
        "--estimator",
        "ml",
        "--max-iter",
        "25",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["converged"], Value::Bool(false));
    assert!(v["reason"].as_str().unwrap().contains("25"));
}

#[test]
fn unknown_link_exits_1_naming_the_flag() {
    let path = data("separated_sample.csv");
    let out = run(&[
        "fit",
        "--data",
        path.to_str().unwrap(),
        "--response",
        "y",
        "--link",
        "tanh",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--link") && err.contains("tanh"), "{err}");
}

#[test]
fn inadmissible_link_and_missing_column_exit_1() {
    let path = data("gaussian_sample.csv");
    let p = path.to_str().unwrap();
    let out = run(&[
        "fit",
        "--data",
        p,
        "--response",
        "y",
        "--family",
        "poisson",
        "--link",
        "probit",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&[
        "fit",
        "--data",
        p,
        "--response",
        "y",
        "--covariates",
        "x1,nope",
        "--family",
        "gaussian",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    let out = run(&["fit", "--response", "y"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn text_and_csv_outputs() {
    let path = data("separated_sample.csv");
    let p = path.to_str().unwrap();
    let out = run(&["fit", "--data", p, "--response", "y", "--output", "text"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("(intercept)") && text.contains('(') && text.contains("converged"),
        "{text}"
    );
    let out = run(&["fit", "--data", p, "--response", "y", "--output", "csv"]);
    let csv = String::from_utf8_lossy(&out.stdout);
    assert!(csv.starts_with("name,estimate,se\n(intercept),"), "{csv}");
    assert_eq!(csv.lines().count(), 3);
}

const GRID_HEADER: &str = "kappa,n,rho2,gamma,shape,reps,seed,mle_exists\n";

#[test]
fn simulate_small_grid_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    std::fs::write(
        &grid,
        format!("{GRID_HEADER}0.01,2000,0,1.0,equispaced,5,99,true\n"),
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "2"].iter().enumerate() {
        let csv = dir.path().join(format!("s{k}.csv"));
        let js = dir.path().join(format!("s{k}.json"));
        let out = run(&[
            "simulate",
            "--grid",
            grid.to_str().unwrap(),
            "--summary-csv",
            csv.to_str().unwrap(),
            "--summary-json",
            js.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push((std::fs::read(&csv).unwrap(), std::fs::read(&js).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let v: Value = serde_json::from_slice(&outputs[0].1).unwrap();
    let mean = v[0]["summary"]["iterations_mean"].as_f64().unwrap();
    assert!((3.0..=8.0).contains(&mean), "mean iterations {mean}");
}

#[test]
fn simulate_rejects_empty_and_malformed_grids() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, GRID_HEADER).unwrap();
    assert_eq!(
        run(&["simulate", "--grid", empty.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        format!(
            "{GRID_HEADER}0.01,2000,0,1.0,equispaced,5,1,true\n0.3,2000,0,x,equispaced,5,1,false\n"
        ),
    )
    .unwrap();
    let out = run(&["simulate", "--grid", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("record 2"));
}

#[test]
fn shipped_grid_parses() {
    let grid = bigglm::sim::read_grid(data("table2_grid.csv")).unwrap();
    assert_eq!(grid.len(), 30);
    assert_eq!(grid.iter().filter(|s| s.mle_exists).count(), 7);
    let p: Vec<usize> = grid.iter().map(|s| s.p()).collect();
    assert_eq!(p[0], 20);
    assert_eq!(p[14], 600);
    assert_eq!(p[29], 1100);
}
