mod common;

use std::path::Path;
use std::process::{Command, Output};

use commbench::concordance::{Cell, ResultsCube, TestPoint};
use commbench::metrics::Metric;

fn commbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commbench")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn seed_identical_cube() -> ResultsCube {
    let tests = vec![TestPoint::new("toy", Metric::Nmi), TestPoint::new("toy", Metric::Conductance)];
    let mut b = ResultsCube::builder(vec!["a".into(), "b".into(), "c".into()], vec![42, 24, 976], tests);
    for a in 0..3 {
        for s in 0..3 {
            for t in 0..2 {
                b.set(a, s, t, Cell::Value(0.1 * (a + t) as f64));
            }
        }
    }
    b.build().unwrap()
}

fn write_csv(cube: &ResultsCube, path: &Path) {
    cube.to_csv(std::fs::File::create(path).unwrap()).unwrap();
}

#[test]
fn stats_on_karate() {
    let o = commbench(&["stats", common::KARATE]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("nodes=34\n") && text.contains("edges=78\n"), "{text}");
    let o = commbench(&["--json", "stats", common::KARATE]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // Reference value for Zachary's karate club.
    assert!((v["avg_clustering_coefficient"].as_f64().unwrap() - 0.570638).abs() < 1e-6);
}

#[test]
fn rank_of_seed_identical_results_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    write_csv(&seed_identical_cube(), &csv);
    let o = commbench(&["rank", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("W Randomness Coefficient: 0.000\n"), "{}", stdout(&o));
}

#[test]
fn compare_identical_cubes_is_even() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    write_csv(&seed_identical_cube(), &csv);
    let p = csv.to_str().unwrap();
    let o = commbench(&["--json", "compare", p, p]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["fcr_mean_over_seeds", "fcr_per_seed"] {
        assert_eq!(v[key]["mean"], serde_json::json!([1.5, 1.5]));
    }
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.toml");
    std::fs::write(
        &config,
        r#"
[resources]
seeds = [1, 2, 3]
max_trials = 4

[hpo]
n_startup = 2

[[datasets]]
path = "karate"

[[runners]]
builtin = "label-propagation"

[[runners]]
builtin = "random"
"#,
    )
    .unwrap();
    std::os::unix::fs::symlink(common::KARATE, dir.path().join("karate")).unwrap();
    let cube = dir.path().join("out.cube.json");
    let o = commbench(&["--json", "run", config.to_str().unwrap(), "--out", cube.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((v["algorithms"].as_u64(), v["seeds"].as_u64(), v["tests"].as_u64()), (Some(2), Some(3), Some(4)));

    let report = dir.path().join("report");
    let o = commbench(&["report", cube.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(report.join(commbench::store::METRIC_SUMMARY_FILE)).unwrap();
    assert!(summary.contains("label-propagation"));
    assert!(report.join(commbench::store::PLOT_DATA_FILE).exists());
}

#[test]
fn exit_codes() {
    assert_eq!(commbench(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(commbench(&["rank", "/nonexistent.csv"]).status.code(), Some(4));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "mode = \"sometimes\"\n").unwrap();
    assert_eq!(commbench(&["run", bad.to_str().unwrap()]).status.code(), Some(3));

    let spec = dir.path().join("runner.toml");
    std::fs::write(
        &spec,
        format!(
            "name = \"sloppy\"\nkind = \"external\"\nlaunch = [\"{}\", \"serve-builtin\", \"random\", \"--inject\", \"accept-bad-params\"]\n",
            env!("CARGO_BIN_EXE_commbench")
        ),
    )
    .unwrap();
    assert_eq!(commbench(&["validate-runner", spec.to_str().unwrap()]).status.code(), Some(5));
    assert_eq!(commbench(&["validate-runner", "kmeans"]).status.code(), Some(0));
}
