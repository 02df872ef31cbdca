use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mtica::sim::{mix, sample_sources};
use mtica::{SeedStream, SourceFamily, SourceSpec};
use nalgebra::DMatrix;

fn mtica(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtica"))
        .args(args)
        .env_remove("MTICA_SEED")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> DMatrix<f64> {
    let text = fs::read_to_string(path).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c])
}

fn write_uniform_mixture(dir: &Path, n: usize, p: usize) -> PathBuf {
    let specs = vec![SourceSpec::new(SourceFamily::Uniform); p];
    let s = sample_sources(&specs, n, &mut SeedStream::new(5).stream("sources", 0)).unwrap();
    let x = mix(&DMatrix::identity(p, p), &s).unwrap();
    let path = dir.join("input.csv");
    let text: String = x
        .as_matrix()
        .row_iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(&path, text).unwrap();
    path
}

fn correlation(s: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let a = s.column(i).add_scalar(-s.column(i).mean());
    let b = s.column(j).add_scalar(-s.column(j).mean());
    a.dot(&b) / (a.norm() * b.norm())
}

#[test]
fn empty_invocation_prints_help_and_exits_2() {
    let out = mtica(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(mtica(&["experiment", "--bogus"]).status.code(), Some(2));
}

#[test]
fn separate_writes_artifacts_that_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_uniform_mixture(dir.path(), 10_000, 3);
    let out_dir = dir.path().join("out");
    let out = mtica(&[
        "separate",
        "--input",
        input.to_str().unwrap(),
        "--outdir",
        out_dir.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let b = read_csv(&out_dir.join("B.csv"));
    let s = read_csv(&out_dir.join("sources.csv"));
    let x = read_csv(&input);
    assert_eq!(b.shape(), (3, 3));
    assert!((&x * b.transpose() - &s).amax() < 1e-12);
    for i in 0..3 {
        for j in i + 1..3 {
            assert!(correlation(&s, i, j).abs() < 0.1);
        }
    }
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["seed"], 3);
    assert_eq!(diag["algorithm"], "gmtica");
    assert!(diag["jd_residual"].is_number());
}

#[test]
fn separate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_uniform_mixture(dir.path(), 2000, 3);
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = mtica(&[
            "separate",
            "--input",
            input.to_str().unwrap(),
            "--outdir",
            out_dir.to_str().unwrap(),
            "--algo",
            "emtica",
            "--seed",
            "9",
        ]);
        assert!(out.status.success());
        ["B.csv", "sources.csv", "diagnostics.json"].map(|f| fs::read(out_dir.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn separate_reports_parse_errors_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "1,2\n3,4\n5,x\n").unwrap();
    let out = mtica(&[
        "separate",
        "--input",
        input.to_str().unwrap(),
        "--outdir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3, column 2"), "{err}");
}

#[test]
fn separate_rejects_fewer_rows_than_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("wide.csv");
    fs::write(&input, "1,2,3,4,5\n2,1,3,5,4\n0,1,0,1,0\n").unwrap();
    let out = mtica(&[
        "separate",
        "--input",
        input.to_str().unwrap(),
        "--outdir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn separate_skips_a_header_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_uniform_mixture(dir.path(), 500, 2);
    let with_header = dir.path().join("header.csv");
    fs::write(&with_header, format!("a,b\n{}", fs::read_to_string(&input).unwrap())).unwrap();
    let out_dir = dir.path().join("out");
    let args = [
        "separate",
        "--input",
        with_header.to_str().unwrap(),
        "--outdir",
        out_dir.to_str().unwrap(),
    ];
    assert_eq!(mtica(&args).status.code(), Some(1));
    let mut with_flag = args.to_vec();
    with_flag.push("--header");
    assert!(mtica(&with_flag).status.success());
}

#[test]
fn experiment_output_is_reproducible_and_echoes_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let out_dir = dir.path().join(name);
        let out = mtica(&[
            "experiment",
            "--experiment",
            "outliers",
            "--outliers",
            "0,10",
            "--n",
            "300",
            "--p",
            "3",
            "--m",
            "8",
            "--trials",
            "3",
            "--seed",
            "7",
            "--jobs",
            jobs,
            "--outdir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let a = run("a", "1");
    let b = run("b", "2");
    let trials = fs::read_to_string(a.join("trials.csv")).unwrap();
    assert_eq!(trials, fs::read_to_string(b.join("trials.csv")).unwrap());
    assert!(trials.starts_with("# config: "));
    assert_eq!(trials.lines().count(), 2 + 2 * 3 * 2);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["master_seed"], 7);
    assert_eq!(summary["summary"].as_array().unwrap().len(), 4);

    // Rerunning from the echo alone reproduces the file.
    let c = dir.path().join("c");
    let out = mtica(&[
        "experiment",
        "--config",
        a.join("trials.csv").to_str().unwrap(),
        "--outdir",
        c.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(trials, fs::read_to_string(c.join("trials.csv")).unwrap());
}

#[test]
fn mismatch_default_grid_has_seven_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtica(&[
        "experiment",
        "--experiment",
        "mismatch",
        "--n",
        "200",
        "--p",
        "2",
        "--m",
        "5",
        "--trials",
        "1",
        "--outdir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"].as_array().unwrap().len(), 7 * 2);
    assert_eq!(
        fs::read_to_string(dir.path().join("trials.csv"))
            .unwrap()
            .lines()
            .count(),
        2 + 7 * 2
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("campaign.toml");
    fs::write(
        &cfg,
        "experiment = \"sensitivity-random\"\nn = 250\np = 2\nm = 6\ntrials = 2\nseed = 11\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = mtica(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "1",
        "--outdir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["n"], 250);
    assert_eq!(summary["config"]["trials"], 1);
    assert_eq!(summary["master_seed"], 11);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mtica"))
        .args([
            "experiment",
            "--n",
            "200",
            "--p",
            "2",
            "--m",
            "4",
            "--trials",
            "1",
            "--families",
            "uniform",
        ])
        .arg("--outdir")
        .arg(dir.path())
        .env("MTICA_SEED", "123")
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["master_seed"], 123);
}

#[test]
fn config_errors_name_the_offending_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "trails = 5\n").unwrap();
    let out = mtica(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--outdir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));
}

#[test]
fn conflicting_source_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtica(&[
        "experiment",
        "--p",
        "5",
        "--sources",
        "uniform,laplace,beta,rice",
        "--outdir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sources"));
}

#[test]
fn single_trial_gives_a_single_row_per_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtica(&[
        "experiment",
        "--experiment",
        "sensitivity-random",
        "--algo",
        "gmtica",
        "--n",
        "200",
        "--p",
        "3",
        "--m",
        "5",
        "--trials",
        "1",
        "--outdir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(
        fs::read_to_string(dir.path().join("trials.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn demo_prints_both_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtica(&[
        "demo",
        "--n",
        "1500",
        "--p",
        "3",
        "--seed",
        "1",
        "--outdir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("emtica") && stdout.contains("gmtica"), "{stdout}");
    assert_eq!(read_csv(&dir.path().join("mixed.csv")).shape(), (1500, 3));
}
