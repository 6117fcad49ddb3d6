use std::path::Path;
use std::process::{Command, Output};

use cowlib::io::read_csv;
use serde_json::Value;

fn cowlib(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cowlib"))
        .current_dir(dir)
        .env_remove("COWLIB_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn toy(dir: &Path) {
    let o = cowlib(dir, &["generate", "-o", "toy.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn fit_converges_on_generated_toy() {
    let d = tempfile::tempdir().unwrap();
    toy(d.path());
    let o = cowlib(d.path(), &["fit", "-d", "toy.csv", "-o", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&d.path().join("out/fit.json"));
    assert_eq!(v["converged"], true);
    assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    let p: Vec<f64> = serde_json::from_value(v["params"].clone()).unwrap();
    // 2500 events, 20% signal
    assert!((p[0] - 500.0).abs() < 5.0 * 500f64.sqrt(), "{p:?}");
    assert!((p[0] + p[1] - 2500.0).abs() < 1e-3 * 2500.0);
}

#[test]
fn input_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    let o = cowlib(d.path(), &["fit", "-d", "missing.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.csv"));

    std::fs::write(d.path().join("bad.csv"), "m,t\n0.1,0.2\n0.4,0.5\n0.3,oops\n").unwrap();
    let o = cowlib(d.path(), &["fit", "-d", "bad.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let o = cowlib(d.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pipeline_outputs_are_self_consistent_and_reproducible() {
    let d = tempfile::tempdir().unwrap();
    toy(d.path());
    let o = cowlib(d.path(), &["pipeline", "-d", "toy.csv", "-o", "a"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&d.path().join("a/summary.json"));
    let sum_w = s["sum_w"].as_f64().unwrap();
    let n_hat = s["yields"]["yields_only"].as_f64().unwrap();
    assert!((sum_w - n_hat).abs() < 1e-9 * n_hat, "{sum_w} vs {n_hat}");
    assert!(s["n_eq"].as_f64().unwrap() < n_hat);
    assert!(s["independence"]["tau"].is_number());
    let w = read_csv(&d.path().join("a/weights.csv")).unwrap();
    assert_eq!(w.names, ["m", "t", "w_sig"]);
    assert_eq!(w.n_rows(), 2500);
    let cov = json(&d.path().join("a/covariance.json"));
    assert!(cov["corrected_error"][0].as_f64().unwrap() > 0.0);

    let o = cowlib(d.path(), &["pipeline", "-d", "toy.csv", "-o", "b"]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["weights.csv", "covariance.json"] {
        let a = std::fs::read(d.path().join("a").join(f)).unwrap();
        let b = std::fs::read(d.path().join("b").join(f)).unwrap();
        // only the output directory in the hashed config differs
        let strip = |x: &[u8]| {
            String::from_utf8_lossy(x)
                .lines()
                .filter(|l| !l.contains("config_hash"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(&a), strip(&b), "{f}");
    }
}

#[test]
fn reruns_are_bit_identical() {
    let d = tempfile::tempdir().unwrap();
    toy(d.path());
    let first: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let o = cowlib(d.path(), &["pipeline", "-d", "toy.csv", "-o", "out"]);
            assert_eq!(o.status.code(), Some(0));
            std::fs::read(d.path().join("out/summary.json")).unwrap()
        })
        .collect();
    assert_eq!(first[0], first[1]);
}

#[test]
fn cow_pipeline_on_nonfactorising_toy() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("toy.json"),
        r#"{"study": "nonfactorising", "n_events": 2000, "efficiency": true, "seed": 3}"#,
    )
    .unwrap();
    let o = cowlib(d.path(), &["generate", "-c", "toy.json", "-o", "toy.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    std::fs::write(
        d.path().join("cfg.json"),
        r#"{
            "data": "toy.csv",
            "method": {"method": "cow", "poly_order": 3, "variance": {"kind": "qm", "bins": 50}},
            "efficiency": {"bilinear": {"coeffs": [0.5, 0.3, 0.15, -0.1]}}
        }"#,
    )
    .unwrap();
    let o = cowlib(d.path(), &["pipeline", "-c", "cfg.json", "-o", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&d.path().join("out/summary.json"));
    assert_eq!(s["method"], "cow-qm50-p3");
    assert!(s["n_eq"].as_f64().unwrap() < s["sum_w"].as_f64().unwrap());
}

#[test]
fn sweights_with_efficiency_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    toy(d.path());
    std::fs::write(
        d.path().join("cfg.json"),
        r#"{"data": "toy.csv", "efficiency": {"bilinear": {"coeffs": [0.5, 0.3, 0.15, -0.1]}}}"#,
    )
    .unwrap();
    let o = cowlib(d.path(), &["pipeline", "-c", "cfg.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("efficiency"));
    assert!(!d.path().join("summary.json").exists());
}

#[test]
fn sweights_and_cow_commands_write_weights() {
    let d = tempfile::tempdir().unwrap();
    toy(d.path());
    let o = cowlib(d.path(), &["sweights", "-d", "toy.csv", "-o", "sw", "--variant", "A"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let w = read_csv(&d.path().join("sw/weights.csv")).unwrap();
    assert_eq!(w.names, ["m", "w_sig", "w_bkg"]);
    let sums: Vec<f64> = (0..w.n_rows()).map(|i| w.columns[1][i] + w.columns[2][i]).collect();
    assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-9));
    let mat = json(&d.path().join("sw/matrix.json"));
    assert_eq!(mat["variant"], "A");

    let o = cowlib(d.path(), &["cow", "-d", "toy.csv", "-o", "cw", "--order", "2", "--unity"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let w = read_csv(&d.path().join("cw/weights.csv")).unwrap();
    assert_eq!(w.names, ["m", "t", "w_sig", "w_b0", "w_b1", "w_b2"]);
}

#[test]
fn correct_accepts_external_weights() {
    let d = tempfile::tempdir().unwrap();
    toy(d.path());
    let o = cowlib(d.path(), &["sweights", "-d", "toy.csv", "-o", "sw"]);
    assert_eq!(o.status.code(), Some(0));
    let o = cowlib(
        d.path(),
        &["correct", "-d", "toy.csv", "-o", "c", "--weights", "sw/weights.csv"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let c = json(&d.path().join("c/covariance.json"));
    assert_eq!(c["method"], "weights:w_sig");
    assert!(c["corrected_error"][0].as_f64().unwrap() > 0.0);

    let o = cowlib(d.path(), &["correct", "-d", "toy.csv", "-o", "c2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&d.path().join("c2/covariance.json"))["method"], "sweights-B");
}

#[test]
fn check_independence_reports_tau() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("x.csv"), "a,b\n1,2\n2,4\n3,8\n4,16\n").unwrap();
    let o = cowlib(d.path(), &["check-independence", "-d", "x.csv", "--out", "tau.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["tau"], 1.0);
    assert!(json(&d.path().join("tau.json"))["provenance"].is_object());
    let o = cowlib(d.path(), &["check-independence", "-d", "x.csv", "--x", "zzz"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn echo_config_expands_defaults_and_is_idempotent() {
    let d = tempfile::tempdir().unwrap();
    let o = cowlib(d.path(), &["echo-config"]);
    assert_eq!(o.status.code(), Some(0));
    let full: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(full["method"]["method"], "sweights");
    assert_eq!(full["seed"], 1);

    std::fs::write(d.path().join("p.json"), r#"{"seed": 9, "method": {"method": "cow"}}"#).unwrap();
    let o = cowlib(d.path(), &["echo-config", "-c", "p.json"]);
    let merged: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(merged["seed"], 9);
    assert_eq!(merged["method"]["poly_order"], 3);
    assert_eq!(merged["model"], full["model"]);

    std::fs::write(d.path().join("e.json"), &o.stdout).unwrap();
    let again = cowlib(d.path(), &["echo-config", "-c", "e.json"]);
    assert_eq!(again.stdout, o.stdout);

    for kind in ["ensemble", "toy"] {
        let o = cowlib(d.path(), &["echo-config", "--kind", kind]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::write(d.path().join("k.json"), &o.stdout).unwrap();
        let again = cowlib(d.path(), &["echo-config", "--kind", kind, "-c", "k.json"]);
        assert_eq!(again.stdout, o.stdout);
    }

    std::fs::write(d.path().join("u.json"), r#"{"sed": 9}"#).unwrap();
    assert_eq!(cowlib(d.path(), &["echo-config", "-c", "u.json"]).status.code(), Some(1));
}

#[test]
fn seed_env_overrides_config() {
    let d = tempfile::tempdir().unwrap();
    let run = |seed: Option<&str>, out: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_cowlib"));
        c.current_dir(d.path()).env_remove("COWLIB_SEED").args(["generate", "-o", out]);
        if let Some(s) = seed {
            c.env("COWLIB_SEED", s);
        }
        assert!(c.status().unwrap().success());
        std::fs::read_to_string(d.path().join(out)).unwrap()
    };
    let a = run(None, "a.csv");
    let b = run(Some("1"), "b.csv");
    let c = run(Some("2"), "c.csv");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(c.lines().next().unwrap().ends_with("seed=2"));

    let o = Command::new(env!("CARGO_BIN_EXE_cowlib"))
        .current_dir(d.path())
        .env("COWLIB_SEED", "abc")
        .args(["generate"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn toys_report_and_invalid_ensemble_exit_code() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("ens.json"),
        r#"{"toy": {"n_events": 1500}, "n_toys": 6, "base_seed": 11}"#,
    )
    .unwrap();
    let o = cowlib(d.path(), &["toys", "-c", "ens.json", "-o", "r1.json", "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = cowlib(d.path(), &["toys", "-c", "ens.json", "-o", "r2.json", "--jobs", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let r1 = std::fs::read(d.path().join("r1.json")).unwrap();
    let r2 = std::fs::read(d.path().join("r2.json")).unwrap();
    let (v1, v2): (Value, Value) = (serde_json::from_slice(&r1).unwrap(), serde_json::from_slice(&r2).unwrap());
    assert_eq!(v1["records"], v2["records"]);
    assert_eq!(v1["provenance"], v2["provenance"]);
    assert_eq!(v1["seeds"][0], 11);

    // a single event cannot be fitted
    std::fs::write(
        d.path().join("bad.json"),
        r#"{"toy": {"n_events": 1}, "n_toys": 3}"#,
    )
    .unwrap();
    let o = cowlib(d.path(), &["toys", "-c", "bad.json", "-o", "r3.json"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_eq!(json(&d.path().join("r3.json"))["valid"], false);
}

#[test]
fn model_out_and_mode_flags() {
    let d = tempfile::tempdir().unwrap();
    toy(d.path());
    let o = cowlib(d.path(), &["echo-config"]);
    let cfg: Value = serde_json::from_slice(&o.stdout).unwrap();
    std::fs::write(d.path().join("model.json"), cfg["model"].to_string()).unwrap();
    std::fs::write(d.path().join("hs.json"), cfg["control"].to_string()).unwrap();

    let o = cowlib(
        d.path(),
        &["sweights", "-d", "toy.csv", "--model", "model.json", "--variant", "B", "--out", "w.csv"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let w = read_csv(&d.path().join("w.csv")).unwrap();
    assert_eq!(w.names, ["m", "w_sig", "w_bkg"]);

    let mut err = Vec::new();
    for mode in ["fixed", "full", "none"] {
        let out = format!("cov_{mode}.json");
        let o = cowlib(
            d.path(),
            &["correct", "-d", "toy.csv", "--control", "hs.json", "--mode", mode, "--out", &out],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        err.push(json(&d.path().join(&out))["corrected_error"][0].as_f64().unwrap());
    }
    // the uncorrected error misses the weight uncertainty
    assert!(err[2] < err[0] && err[2] < err[1], "{err:?}");

    let o = cowlib(
        d.path(),
        &["correct", "-d", "toy.csv", "--weights", "w.csv", "--mode", "full"],
    );
    assert_eq!(o.status.code(), Some(1));
}
