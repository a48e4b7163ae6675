use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ifs_core::experiments::{estimate, FitConfig};
use ifs_core::{IfsModel, MapKind, Sample, SupportInterval};

fn ifs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifs")).args(args).output().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const DYADIC: &str = r#"{"support":[0,1],"kind":"w1","maps":[[0,0.5],[0.5,0.5]],"p":[0.5,0.5],"n":100}"#;

fn eval_values(out: &Output) -> Vec<Vec<f64>> {
    stdout(out)
        .lines()
        .map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fit_uniform_fixture_with_two_dyadic_maps() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    let out = ifs(&[
        "fit",
        fixture("uniform.csv").to_str().unwrap(),
        "--family",
        "w1",
        "--i-star",
        "1",
        "--out",
        model_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("p = (0.5"));
    assert!(stderr(&out).contains("S(p*) = "));
    let model = IfsModel::from_json(&fs::read_to_string(&model_path).unwrap()).unwrap();
    assert_eq!(model.sample_size(), Some(200));
    for p in model.probabilities().iter() {
        assert!((p - 0.5).abs() < 1e-4);
    }
}

#[test]
fn fit_then_eval_reproduces_the_library_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("m.json");
    let input = fixture("uniform.csv");
    let out = ifs(&["fit", input.to_str().unwrap(), "--family", "q2", "--out", model_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));

    let points = ["0.05", "0.3", "0.5", "0.77", "0.999"];
    let mut args = vec!["eval", model_path.to_str().unwrap()];
    for p in &points {
        args.extend(["--at", p]);
    }
    let out = ifs(&args);
    assert!(out.status.success(), "{}", stderr(&out));

    let values = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
    let sample = Sample::new(values, SupportInterval::UNIT).unwrap();
    let fit = estimate(&sample, MapKind::Q2, &FitConfig::default()).unwrap();
    for (row, p) in eval_values(&out).iter().zip(points) {
        let x: f64 = p.parse().unwrap();
        assert_eq!(row[0], x);
        assert!((row[1] - fit.cdf_at(x)).abs() < 1e-12);
    }
}

#[test]
fn q1_reports_fixed_probabilities() {
    let out = ifs(&["fit", fixture("uniform.csv").to_str().unwrap(), "--family", "q1"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("quantile family: p fixed at 1/N"));
    let model = IfsModel::from_json(&stdout(&out)).unwrap();
    assert_eq!(model.family().len(), 100);
}

#[test]
fn eval_dyadic_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dyadic.json");
    fs::write(&path, DYADIC).unwrap();
    let out = ifs(&["eval", path.to_str().unwrap(), "--at", "0", "--at", "0.25"]);
    assert!(out.status.success());
    assert_eq!(eval_values(&out), vec![vec![0.0, 0.0], vec![0.25, 0.25]]);

    let curve = dir.path().join("curve.csv");
    let out = ifs(&["eval", path.to_str().unwrap(), "--density", "--grid-out", curve.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&curve).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,cdf,density"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 513);
    for r in rows.iter().filter(|r| (0.1..=0.9).contains(&r[0])) {
        assert!((r[1] - r[0]).abs() < 1e-12);
        assert!((r[2] - 1.0).abs() < 0.4, "density {} at {}", r[2], r[0]);
    }
}

#[test]
fn unknown_family_is_a_usage_error() {
    let out = ifs(&["fit", fixture("uniform.csv").to_str().unwrap(), "--family", "w3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    for name in ["w1", "w2", "q1", "q2"] {
        assert!(err.contains(name), "{err}");
    }

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    fs::write(&cfg, "families = [\"w9\"]\n").unwrap();
    let out = ifs(&["benchmark", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("w1"));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "value\n0.1\n0.2\nnot-a-number\n").unwrap();
    let out = ifs(&["fit", bad.to_str().unwrap(), "--family", "w1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 4"));

    let corrupt = dir.path().join("model.json");
    fs::write(&corrupt, r#"{"support":[0,1],"kind":"w1","maps":[[0,0.5]],"p":[0.5,0.5]}"#).unwrap();
    let out = ifs(&["eval", corrupt.to_str().unwrap(), "--at", "0.5"]);
    assert_eq!(out.status.code(), Some(2));

    let out = ifs(&["fit", fixture("uniform.csv").to_str().unwrap(), "--family", "w1", "--support", "0.2,0.4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn support_falls_back_to_the_sample_range() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("wide.csv");
    let text: String = (0..40).map(|i| format!("{}\n", 2.0 + 3.0 * i as f64 / 39.0)).collect();
    fs::write(&data, text).unwrap();
    let out = ifs(&["fit", data.to_str().unwrap(), "--family", "w1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("warning: no --support given"));
    assert!(stderr(&out).contains("exactly that support"));
    let model = IfsModel::from_json(&stdout(&out)).unwrap();
    assert_eq!((model.support().alpha(), model.support().beta()), (2.0, 5.0));

    let out = ifs(&["fit", data.to_str().unwrap(), "--family", "w1", "--support", "0,10"]);
    assert!(out.status.success());
    assert!(!stderr(&out).contains("warning"));
}

#[test]
fn benchmark_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    fs::write(
        &cfg,
        "distributions = [[2.0, 2.0], [1.0, 1.0]]\nsample_sizes = [10, 20]\nfamilies = [\"w2\", \"q1\"]\n",
    )
    .unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = ifs(&[
            "benchmark",
            "--config",
            cfg.to_str().unwrap(),
            "--replications",
            "1",
            "--seed",
            "7",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("w2 AMSE"));
        fs::read_to_string(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    assert!(a.starts_with("distribution,n,family,metric,ratio_percent,failures\n"));
    assert_eq!(a.lines().count(), 1 + 2 * 2 * 2 * 2);
}

#[test]
fn missing_demo_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("nested/out");
    let out = ifs(&["missing-demo", "--seed", "3", "--out-dir", target.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("AMSE ratio"));
    assert!(stdout(&out).contains("SUP ratio"));
    let cdf = fs::read_to_string(target.join("cdf.csv")).unwrap();
    assert!(cdf.starts_with("x,true_cdf,edf,ifs_cdf\n"));
    let pdf = fs::read_to_string(target.join("pdf.csv")).unwrap();
    assert!(pdf.starts_with("x,true_pdf,kernel,ifs_pdf\n"));
    assert!(target.join("summary.txt").exists());

    let again = ifs(&["missing-demo", "--seed", "3", "--out-dir", target.to_str().unwrap()]);
    assert_eq!(stdout(&out), stdout(&again));
}

#[test]
fn option_misuse_is_a_usage_error() {
    let input = fixture("uniform.csv");
    let out = ifs(&["fit", input.to_str().unwrap(), "--family", "q1", "--i-star", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ifs(&["fit", input.to_str().unwrap(), "--family", "w1", "--support", "1,0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ifs(&["missing-demo", "--support", "0,1"]);
    assert_eq!(out.status.code(), Some(1));
}
