use std::path::Path;
use std::process::{Command, Output};

use mesospec_cli::{parse_config, run, Experiment, Overrides, RunConfig};
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mesospec"));
    cmd.env_remove("MESOSPEC_SEED");
    cmd
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn mesospec")
}

fn config(experiment: Experiment, file: &str, flags: &Overrides, out: &Path) -> RunConfig {
    let mut flags = flags.clone();
    flags.output_dir = Some(out.to_path_buf());
    parse_config(experiment, Some(file), &flags, None).expect("valid config")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn flags_only_fluct_config_fills_defaults() {
    let flags = Overrides {
        n: Some(512),
        alpha: Some(0.25),
        c: Some(2.0),
        m: Some(2000),
        ..Overrides::default()
    };
    let cfg = parse_config(Experiment::Fluct, Some(""), &flags, None).unwrap();
    assert_eq!(cfg.ensemble.n, 512);
    assert_eq!(cfg.m, 2000);
    let grid = cfg.grid.unwrap();
    assert_eq!(grid.alpha, 0.25);
    assert_eq!(grid.lambda0, 3.0);
    assert_eq!(grid.offsets, vec![0.0, 1.0, 2.0, 4.0]);
    assert_eq!(cfg.ensemble.sample_count(), 1024);
}

#[test]
fn out_of_range_values_exit_with_validation_code() {
    for (args, field) in [
        (&["density", "--alpha", "1.0"][..], "alpha"),
        (&["fluct", "--c", "0"][..], "c"),
        (&["fluct", "--M", "29"][..], "M"),
        (&["density", "--lambdas", "0.05"][..], "lambdas"),
        (&["oracle-check", "--N", "129"][..], "N"),
    ] {
        let out = exec(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(&format!("`{field}`")), "{args:?}: {err}");
    }
}

#[test]
fn unknown_and_mistyped_file_keys_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "N = 64\nwidth = 3\n").unwrap();
    let out = exec(&["laws", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`width`: unknown key"));

    std::fs::write(&cfg, "M = \"many\"\n").unwrap();
    let out = exec(&["density", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`M`"));
}

#[test]
fn seed_precedence_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 11\n").unwrap();
    let out_dir = dir.path().join("out");
    let manifest_seed = |extra: &[&str], env: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["laws", "-o", out_dir.to_str().unwrap()])
            .args(extra);
        if let Some(s) = env {
            cmd.env("MESOSPEC_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        let m: Value =
            serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
        m["master_seed"].as_u64().unwrap()
    };
    assert_eq!(manifest_seed(&[], None), 0);
    assert_eq!(manifest_seed(&[], Some("5")), 5);
    assert_eq!(
        manifest_seed(&["--config", cfg.to_str().unwrap()], Some("5")),
        11
    );
    assert_eq!(
        manifest_seed(
            &["--config", cfg.to_str().unwrap(), "--seed", "3"],
            Some("5")
        ),
        3
    );
}

#[test]
fn laws_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        Experiment::Laws,
        "c = 1\nscale = 1",
        &Overrides::default(),
        dir.path(),
    );
    run(&cfg).unwrap();

    let density = read_csv(&dir.path().join("law_density.csv"));
    let at_two = density.iter().find(|r| num(&r[0]) == 2.0).unwrap();
    assert!((num(&at_two[1]) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);

    let kernel = read_csv(&dir.path().join("kernel.csv"));
    let expect = [0.25, 0.12, 0.0, -5.0 / 169.0, -0.03];
    for (row, want) in kernel.iter().zip(expect) {
        assert!((num(&row[1]) - want).abs() < 1e-15, "{row:?}");
    }
    let at_20 = kernel.iter().find(|r| num(&r[0]) == 20.0).unwrap();
    assert!((num(&at_20[2]) - 0.0294).abs() < 2e-4);

    let support = read_csv(&dir.path().join("law_support.csv"));
    assert_eq!(num(&support[0][0]), 0.0);
    assert_eq!(num(&support[0][1]), 4.0);
}

#[test]
fn density_semicircle_centre_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        Experiment::Density,
        "ensemble = \"wigner\"\nN = 64\nM = 2\nlambdas = [-0.5, 0.0, 0.5]",
        &Overrides::default(),
        dir.path(),
    );
    run(&cfg).unwrap();
    let rows = read_csv(&dir.path().join("density.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(num(&rows[1][0]), 0.0);
    assert!((num(&rows[1][3]) - 1.0).abs() < 1e-15);
}

#[test]
fn fluct_predictions_at_special_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        Experiment::Fluct,
        "N = 32\nM = 30\noffsets = [0, 2]",
        &Overrides::default(),
        dir.path(),
    );
    run(&cfg).unwrap();
    let rows = read_csv(&dir.path().join("covariance.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let predicted = num(&r[6]);
        if r[0] == r[1] {
            assert_eq!(predicted, 0.25);
        } else {
            assert_eq!(predicted, 0.0);
        }
    }
    let gauss = read_csv(&dir.path().join("gaussianity.csv"));
    assert_eq!(gauss.len(), 2);
    let summary: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["pass"].is_boolean());
}

#[test]
fn scaling_reference_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        Experiment::Scaling,
        "ensemble = \"wigner\"\nN_list = [16, 32, 64]\nM = 10\nalphas = [0.5, 0.25]",
        &Overrides::default(),
        dir.path(),
    );
    run(&cfg).unwrap();
    let fit = read_csv(&dir.path().join("scaling_fit.csv"));
    assert_eq!(num(&fit[0][1]), -1.0);
    assert_eq!(num(&fit[1][1]), -1.5);
    let points = read_csv(&dir.path().join("scaling.csv"));
    assert_eq!(points.len(), 6);
    assert!(points.iter().all(|r| num(&r[5]) > 0.0));
}

#[test]
fn oracle_check_cases() {
    let dir = tempfile::tempdir().unwrap();
    for (file, sub) in [
        ("N = 8", "n8"),
        ("N = 64\nensemble = \"wigner\"", "n64"),
        ("N = 1", "n1"),
    ] {
        let out = dir.path().join(sub);
        let cfg = config(Experiment::OracleCheck, file, &Overrides::default(), &out);
        let report = run(&cfg).unwrap();
        assert_eq!(report.passed, Some(true), "{file}");
        for r in read_csv(&out.join("oracle.csv")) {
            assert!(num(&r[5]) <= num(&r[6]), "{file}: {r:?}");
        }
    }
    // A single eigenvalue a gives R = η / ((λ − a)² + η²) exactly.
    let cfg = config(
        Experiment::OracleCheck,
        "N = 1",
        &Overrides::default(),
        dir.path(),
    );
    for r in read_csv(&dir.path().join("n1").join("oracle.csv")) {
        let trial: u64 = r[0].parse().unwrap();
        let a = mesospec::generate(&cfg.ensemble.with_stream(trial))
            .unwrap()
            .get(0, 0);
        let (lambda, eta) = (num(&r[1]), num(&r[2]));
        let cauchy = eta / ((lambda - a).powi(2) + eta * eta);
        assert!(
            (num(&r[3]) - cauchy).abs() <= 1e-15 * cauchy.max(1.0),
            "{r:?}"
        );
        assert!(
            (num(&r[4]) - cauchy).abs() <= 1e-15 * cauchy.max(1.0),
            "{r:?}"
        );
    }
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let file = "N = 48\nM = 40\nensemble = \"wigner\"\nentry_dist = \"rademacher\"\nseed = 99";
    let mut outputs = Vec::new();
    for (workers, sub) in [(1, "a"), (4, "b"), (4, "c")] {
        let flags = Overrides {
            workers: Some(workers),
            ..Overrides::default()
        };
        let out = dir.path().join(sub);
        run(&config(Experiment::Fluct, file, &flags, &out)).unwrap();
        outputs.push(
            ["covariance.csv", "gaussianity.csv", "summary.json"]
                .map(|f| std::fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn json_format_and_single_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let flags = Overrides {
        format: Some(mesospec_cli::OutputFormat::Json),
        ..Overrides::default()
    };
    let cfg = config(
        Experiment::Density,
        "N = 32\nM = 3\ngrid_points = 5",
        &flags,
        dir.path(),
    );
    run(&cfg).unwrap();
    let rows: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("density.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5);
    assert!(rows[0]["rel_error"].is_f64());

    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.iter().filter(|n| n.contains("manifest")).count(), 1);
    assert_eq!(names.len(), 3, "{names:?}");

    let manifest: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["realized_m"], 64);
    assert_eq!(manifest["realized_ratio"], 2.0);
    assert_eq!(manifest["config"]["M"], 3);
    assert_eq!(manifest["phases"].as_array().unwrap().len(), 2);
}

#[test]
fn manifest_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let cfg = config(
        Experiment::Density,
        "N = 40\nM = 4\nseed = 7",
        &Overrides::default(),
        &first,
    );
    run(&cfg).unwrap();
    let manifest: Value =
        serde_json::from_slice(&std::fs::read(first.join("manifest.json")).unwrap()).unwrap();
    let c = &manifest["config"];
    let second = dir.path().join("second");
    let file = format!(
        "N = {}\nM = {}\nalpha = {}\nc = {}\nseed = {}",
        c["ensemble"]["n"], c["M"], c["alpha"], c["ensemble"]["c"], manifest["master_seed"]
    );
    run(&config(
        Experiment::Density,
        &file,
        &Overrides::default(),
        &second,
    ))
    .unwrap();
    assert_eq!(
        std::fs::read(first.join("density.csv")).unwrap(),
        std::fs::read(second.join("density.csv")).unwrap()
    );
}

#[test]
fn strict_mode_reports_tolerance_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(&[
        "density",
        "--N",
        "8",
        "--M",
        "1",
        "--strict",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("manifest.json").exists());

    let out = exec(&[
        "density",
        "--N",
        "8",
        "--M",
        "1",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
}
