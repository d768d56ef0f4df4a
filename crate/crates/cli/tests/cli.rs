mod common;

use common::*;
use tempfile::tempdir;

#[test]
fn fk_zero_potential_unit_function_is_one() {
    let dir = tempdir().unwrap();
    run_suite("fk", dir.path(), 3, &["--set", "n_paths=2000"], 0);
    let recs = ndjson(&dir.path().join("fk.records.ndjson"));
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    for key in ["x", "t", "value", "stderr", "n_paths", "epsilon", "grid_step", "seed"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(f(r, "value"), 1.0);
    assert_eq!(f(r, "stderr"), 0.0);
    let rows = csv(&dir.path().join("fk.csv"));
    assert_eq!(num(&rows[0], "value"), 1.0);
}

#[test]
fn couple_row_matches_reflection_closed_form() {
    let dir = tempdir().unwrap();
    run_suite(
        "couple",
        dir.path(),
        11,
        &["--set", "t_grid=[1.0]", "--set", "grid_step=0.5"],
        0,
    );
    let rows = csv(&dir.path().join("couple.csv"));
    assert_eq!(rows.len(), 1);
    let p = num(&rows[0], "p_tau_gt_t");
    let se = num(&rows[0], "stderr");
    assert_eq!(num(&rows[0], "separation"), 2.0);
    assert!((p - 0.520_50).abs() <= 3.0 * se + 1e-3, "{p} ± {se}");
}

#[test]
fn kato_sweep_matches_coulomb_closed_form() {
    let dir = tempdir().unwrap();
    run_suite("kato", dir.path(), 1, &[], 0);
    let rows = csv(&dir.path().join("kato.csv"));
    let alphas = [0.0, 0.25, 0.5, 0.75, 0.9];
    assert_eq!(rows.len(), alphas.len());
    for (row, a) in rows.iter().zip(alphas) {
        let exact = 2.0 / std::f64::consts::PI.sqrt() / (1.0 - a);
        assert_eq!(num(row, "alpha"), a);
        assert_eq!(row["method"], "quadrature");
        assert!(((num(row, "bound") - exact) / exact).abs() < 1e-6);
    }
    let recs = ndjson(&dir.path().join("kato.records.ndjson"));
    assert!(recs.iter().filter(|r| r.get("status").is_some()).all(|r| r["status"] == "member"));
}

#[test]
fn invalid_config_exits_2_with_line_and_column() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"t\": 0.5,\n  \"unknown_key\": 1\n}\n").unwrap();
    let o = kato(&["duhamel", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("bad.json:3:"), "{err}");
    assert!(err.contains("unknown_key"), "{err}");

    std::fs::write(&cfg, "{\n  \"t\": 0.5,\n").unwrap();
    let o = kato(&["duhamel", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.json:3:"));
}

#[test]
fn validation_runs_before_any_output() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("out");
    let o = kato(&["duhamel", "--seed", "1", "--out", out.to_str().unwrap(), "--set", "panels=[4,6]"]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    let o = kato(&["theorem", "--seed", "1", "--set", "route=exact_kernel", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = kato(&["fk", "--seed", "1", "--set", "potential.kind.kind=nonsense", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn seed_is_mandatory() {
    let dir = tempdir().unwrap();
    let o = kato(&["duhamel", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("seed"));
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"run": {"seed": 5}}"#).unwrap();
    let o = kato(&["duhamel", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn flags_override_config_fields() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"run": {"seed": 5, "workers": 3}, "panels": [2, 4, 8], "t": 0.25}"#).unwrap();
    let out = dir.path().join("o");
    let o = kato(&[
        "duhamel",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--workers",
        "1",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "t=0.5",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("duhamel.metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 9);
    assert_eq!(meta["config"]["workers"], 1);
    assert_eq!(meta["config"]["resolved"]["t"], 0.5);
    assert_eq!(meta["config"]["resolved"]["panels"], serde_json::json!([2, 4, 8]));
    assert_eq!(csv(&out.join("duhamel.csv")).len(), 3);
}

#[test]
fn report_on_empty_directory_exits_2() {
    let dir = tempdir().unwrap();
    let o = kato(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = kato(&["report", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_passes_and_names_violations() {
    let dir = tempdir().unwrap();
    run_suite("duhamel", dir.path(), 1, &[], 0);
    run_suite("holder", dir.path(), 1, &["--set", "t_grid=[1.0]"], 0);
    let o = kato(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.lines().last() == Some("PASS"), "{text}");
    assert!(text.contains("duhamel: reports=3 violated=0"));
    assert!(text.contains("holder:"));

    // a ratio the second-order rule cannot reach
    run_suite("duhamel", dir.path(), 1, &["--set", "min_ratio=8"], 1);
    let o = kato(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    assert!(text.contains("VIOLATED duhamel/duhamel_convergence"), "{text}");
    assert!(text.lines().last() == Some("FAIL"));
}

#[test]
fn report_skips_records_and_rejects_corrupt_lines() {
    let dir = tempdir().unwrap();
    run_suite("duhamel", dir.path(), 1, &[], 0);
    assert!(dir.path().join("duhamel.records.ndjson").exists());
    let o = kato(&["report", dir.path().to_str().unwrap()]);
    assert!(!stdout(&o).contains("duhamel.records"));
    std::fs::write(dir.path().join("broken.ndjson"), "{not json\n").unwrap();
    let o = kato(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("broken.ndjson:1:"));
}

#[test]
fn molecule_from_file_and_bad_file() {
    let dir = tempdir().unwrap();
    let mol = dir.path().join("h.json");
    std::fs::write(&mol, r#"{"m": 1, "nuclei": [{"R": [0.0, 0.0, 0.0], "Z": 1.0}]}"#).unwrap();
    let set = format!("molecule_file={}", mol.display());
    run_suite("molecule", dir.path(), 1, &["--set", &set], 0);
    let reps = reports(dir.path(), "molecule");
    let slope = named(&reps, "molecule_c_blowup_slope");
    assert_eq!(slope.len(), 1);
    assert!((param(slope[0], "measured") + 1.0).abs() < 0.1);

    std::fs::write(&mol, "{\"m\": 1,\n \"nuclei\": [{\"R\": [0, 0], \"Z\": 1}]}").unwrap();
    let o = kato(&["molecule", "--seed", "1", "--set", &set, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn molecule_calibration_records_prediction() {
    let dir = tempdir().unwrap();
    run_suite(
        "molecule",
        dir.path(),
        1,
        &[
            "--set",
            r#"molecule={"m":1,"nuclei":[{"R":[0,0,0],"Z":1}]}"#,
            "--set",
            "calibration.measurements=[[0.5,3.0],[1.0,2.5]]",
        ],
        0,
    );
    let recs = ndjson(&dir.path().join("molecule.records.ndjson"));
    let cal = recs.iter().find(|r| r.get("calibration").is_some()).expect("calibration record");
    assert_eq!(cal["predictions"][0]["t"], 2.0);
    assert!(cal["predictions"][0]["bound"].as_f64().unwrap() > 0.0);
    assert_eq!(named(&reports(dir.path(), "molecule"), "molecular_calibration").len(), 2);
}

#[test]
fn khashminskii_rejects_mixed_sign_potential() {
    let dir = tempdir().unwrap();
    let set = r#"potential={"space":{"kind":"euclidean","dim":3},"kind":{"kind":"sum","terms":[{"kind":"coulomb","center":[0,0,0],"coefficient":-1},{"kind":"coulomb","center":[1,0,0],"coefficient":1}]}}"#;
    let o = kato(&["khashminskii", "--seed", "1", "--set", set, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("fixed sign") || stderr(&o).contains("V ≥ 0"), "{}", stderr(&o));
}

#[test]
fn fk_eigen_oracle_for_oscillator() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("osc.json");
    std::fs::write(
        &cfg,
        r#"{
  "potential": {"space": {"kind": "euclidean", "dim": 1}, "kind": {"kind": "harmonic", "coefficient": 1.0}},
  "psi": {"kind": "gaussian", "center": [0.0], "width": 1.0},
  "x": [0.5],
  "n_paths": 20000,
  "eigenvalue": 1.0,
  "relative_tolerance": 0.02
}"#,
    )
    .unwrap();
    run_suite("fk", dir.path(), 4, &["--config", cfg.to_str().unwrap()], 0);
    let reps = reports(dir.path(), "fk");
    let r = named(&reps, "fk_eigen_oracle");
    assert_eq!(r.len(), 1);
    let exact = (-0.5f64).exp() * (-0.125f64).exp();
    assert!((param(r[0], "reference") - exact).abs() < 1e-15);
}

#[test]
fn reruns_are_byte_identical_and_worker_independent() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    let extra = ["--set", "n_runs=10000", "--set", "t_grid=[0.5]"];
    run_suite("couple", a.path(), 8, &[&extra[..], &["--workers", "1"]].concat(), 0);
    run_suite("couple", b.path(), 8, &[&extra[..], &["--workers", "4"]].concat(), 0);
    for file in ["couple.csv", "couple.ndjson", "couple.records.ndjson"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
    run_suite("couple", b.path(), 9, &extra, 0);
    assert_ne!(
        std::fs::read(a.path().join("couple.csv")).unwrap(),
        std::fs::read(b.path().join("couple.csv")).unwrap()
    );
}
