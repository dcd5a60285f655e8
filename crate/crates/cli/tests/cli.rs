use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use multigen_cli::commands::figure2_points;
use multigen_cli::config::{RunConfig, VerifyConfig};

fn multigen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multigen")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn moments_json_uses_field_names() {
    let o = multigen(&["moments", "--format", "json", "--k-max", "4"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["beta_k", "beta_p", "beta_gp_same", "beta_gp_cross", "beta_gp_both", "lambda_eff", "var_y"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert!((v["beta_k"]["1"].as_f64().unwrap() - 0.465696).abs() < 1e-12);
    assert!((v["beta_k"]["2"].as_f64().unwrap() - 0.30735936).abs() < 1e-12);
    assert!((v["beta_gp_same"].as_f64().unwrap() - 0.1156).abs() < 5e-4);
}

#[test]
fn assortative_moments_extend_past_lag_two() {
    let o = multigen(&[
        "moments",
        "--format",
        "json",
        "--variant",
        "latent_factor_direct_am",
        "--lambda",
        "0.8",
        "--m",
        "0.5",
        "--rho",
        "0.9",
        "--normalize-y",
        "true",
        "--k-max",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let b3 = v["beta_k"]["3"].as_f64().unwrap();
    // One-lineage projection: ρ² λ³ with λ = λ̃(1+m)/2 = 0.6.
    assert!((b3 - 0.81 * 0.216).abs() < 1e-10, "{b3}");
    assert!((v["spousal_corr_e"].as_f64().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn exit_codes() {
    assert_eq!(
        code(&multigen(&["moments", "--variant", "original_bt", "--gamma", "2", "--lambda", "0.5", "--rho", "1"])),
        2
    );
    assert_eq!(code(&multigen(&["moments", "--lambda", "0.5", "--m", "0.3"])), 2);
    assert_eq!(code(&multigen(&["fit"])), 2);
    assert_eq!(code(&multigen(&["no-such-command"])), 2);
    assert_eq!(code(&multigen(&["moments", "--format", "yaml"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\nunknown = 2\n").unwrap();
    assert_eq!(code(&multigen(&["moments", "--config", p(&cfg)])), 2);

    let csv = dir.path().join("broken.csv");
    fs::write(&csv, "family_id,child_id,y_child\nf0,c0,1.0\n").unwrap();
    assert_eq!(code(&multigen(&["fit", "--input", p(&csv)])), 3);
    assert_eq!(code(&multigen(&["fit", "--input", p(&dir.path().join("missing.csv"))])), 3);

    assert_eq!(code(&multigen(&["reproduce-table2-check"])), 0);
}

#[test]
fn simulate_then_fit_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let common = [
        "--variant",
        "latent_factor_family_am",
        "--lambda",
        "0.8",
        "--m",
        "0.5",
        "--rho",
        "0.9",
        "--normalize-y",
        "true",
        "--n",
        "3000",
    ];
    for out in [&a, &b] {
        let mut args = vec!["simulate", "--seed", "5", "--out", p(out)];
        args.extend(common);
        let o = multigen(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let panel_a = fs::read(a.join("panel.csv")).unwrap();
    assert_eq!(panel_a, fs::read(b.join("panel.csv")).unwrap());
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(a.join("panel.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["schema"], "mg-panel/1");
    assert_eq!(meta["generator"]["config"]["seed"], 5);
    assert_eq!(meta["generator"]["model"]["variant"], "latent_factor_family_am");

    let fit = |out: &Path| {
        let o = multigen(&[
            "fit",
            "--input",
            p(&a.join("panel.csv")),
            "--template",
            "lineage:mother+mat_gm",
            "--out",
            p(out),
            "--format",
            "json",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let (fa, fb) = (dir.path().join("fa"), dir.path().join("fb"));
    assert_eq!(fit(&fa), fit(&fb));
    assert!(fa.join("fit.csv").exists());
    assert_eq!(fs::read(fa.join("fit.json")).unwrap(), fs::read(fb.join("fit.json")).unwrap());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 7\n[model]\nvariant = \"latent_factor\"\nlambda = 0.5\nrho = 0.9\nnormalize_y = true\n")
        .unwrap();
    let out = dir.path().join("out");
    let o = multigen(&["moments", "--config", p(&cfg), "--seed", "9", "--lambda", "0.6", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(out.join("moments.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 9);
    assert_eq!(meta["config"]["model"]["lambda"], 0.6);
    assert_eq!(meta["config"]["model"]["rho"], 0.9);
    let echoed = RunConfig::from_toml(&toml_from_json(&meta["config"])).unwrap();
    assert_eq!(echoed.seed, 9);
}

fn toml_from_json(v: &serde_json::Value) -> String {
    let cfg: RunConfig = serde_json::from_value(v.clone()).unwrap();
    cfg.to_toml()
}

#[test]
fn figure_csv_rereads_to_the_plotted_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig");
    let o = multigen(&["reproduce-figure2", "--out", p(&out), "--quick"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(out.join("figure2.svg")).unwrap().starts_with("<svg"));

    let cfg = RunConfig { verify: VerifyConfig::quick(), ..Default::default() };
    let pts = figure2_points(&cfg).unwrap();
    let mut rdr = csv::Reader::from_path(out.join("figure2.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), pts.len());
    for (row, pt) in rows.iter().zip(&pts) {
        assert_eq!(row[0].parse::<u32>().unwrap(), pt.k);
        assert_eq!(&row[1], pt.process);
        assert_eq!(&row[2], pt.source);
        assert_eq!(row[3].parse::<f64>().unwrap(), pt.correlation);
    }
    let analytic = |process: &str, k: u32| {
        pts.iter().find(|q| q.process == process && q.source == "analytic" && q.k == k).unwrap().correlation
    };
    assert!((analytic("blue_latent_factor", 1) - 0.4657).abs() < 5e-5);
    assert!((analytic("blue_latent_factor", 2) - 0.3074).abs() < 5e-5);
    for k in 1..5 {
        let r = analytic("blue_latent_factor", k + 1) / analytic("blue_latent_factor", k);
        assert!((r - 0.66).abs() < 1e-12);
    }
    assert!(analytic("red_becker_tomes", 1) > analytic("blue_latent_factor", 1));
    assert!(analytic("red_becker_tomes", 5) < analytic("blue_latent_factor", 5));
}

#[test]
fn quick_verify_reports_are_byte_identical() {
    let run = || multigen(&["verify", "--quick", "--seed", "3", "--format", "csv"]);
    let (a, b) = (run(), run());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(code(&a), code(&b));
    // Exit status follows the table.
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let failed = text.lines().any(|l| l.contains(",FAIL,"));
    assert_eq!(code(&a), if failed { 1 } else { 0 });
}
