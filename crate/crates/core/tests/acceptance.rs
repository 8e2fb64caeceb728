//! Acceptance suite: one line per criterion, nonzero exit on any FAIL.
//!
//! Criteria whose inputs are not available locally report BLOCKED instead
//! of passing. Set `COMMBENCH_REQUIRE_DATASETS=1` to turn BLOCKED into FAIL.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use commbench::concordance::{
    framework_comparison_rank, rank_matrix, w_randomness_coefficient, Cell, FailureReason, ResultsCube, SeedReduction,
    TestPoint,
};
use commbench::graph::{avg_clustering_coefficient, load_dataset, mean_closeness_centrality, BundleFormat, Graph};
use commbench::metrics::{conductance, macro_f1, modularity, nmi, Metric, Partition};
use commbench::orchestrator::{compare_regimes, run_benchmark, BenchmarkConfig, Mode, RunnerRef};
use commbench::runner::Builtin;
use commbench::store::{emit_report, to_bytes, StoredCube, METRIC_SUMMARY_FILE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Blocked(String),
}

type Check = Result<Verdict, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Check {
    if elapsed < limit {
        Ok(Verdict::Pass(format!("{detail}; {:.1}s", elapsed.as_secs_f64())))
    } else {
        Ok(Verdict::Fail(format!("{detail}; took {:.1}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs())))
    }
}

fn one_test_cube(ranks: &[&[f64]]) -> ResultsCube {
    let (n, a) = (ranks.len(), ranks[0].len());
    let mut b = ResultsCube::builder(
        (0..a).map(|i| format!("alg{i}")).collect(),
        (0..n as u64).collect(),
        vec![TestPoint::new("d", Metric::Modularity)],
    );
    for (s, row) in ranks.iter().enumerate() {
        for (i, &r) in row.iter().enumerate() {
            // Higher modularity is better, so rank r gets value -r.
            b.set(i, s, 0, Cell::Value(-r));
        }
    }
    b.build().unwrap()
}

fn oracle_equivalence() -> Check {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..200 {
        let cube = common::random_cube(seed, 6);
        let got = w_randomness_coefficient(&cube).map_err(|e| e.to_string())?.w_randomness;
        let diff = (got - common::naive_w_randomness(&cube)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-12, || format!("cube {seed}: off by {diff:e}"))?;
    }
    within(started.elapsed(), Duration::from_secs(10), format!("200 cubes, max diff {worst:.1e}"))
}

fn concordance_anchors() -> Check {
    let row: &[f64] = &[1.0, 2.0, 3.0, 4.0];
    let identical = one_test_cube(&[row; 5]);
    let zero = w_randomness_coefficient(&identical).map_err(|e| e.to_string())?.w_randomness;
    ensure(zero == 0.0, || format!("identical rankings gave {zero}"))?;

    let mut b = ResultsCube::builder(
        vec!["a".into(), "b".into(), "c".into()],
        vec![1, 2],
        Metric::ALL.iter().map(|&m| TestPoint::new("d", m)).collect(),
    );
    for t in 0..4 {
        for a in 0..3 {
            b.set(a, 0, t, Cell::Value(a as f64));
            b.set(a, 1, t, Cell::Value(-(a as f64)));
        }
    }
    let one = w_randomness_coefficient(&b.build().unwrap()).map_err(|e| e.to_string())?.w_randomness;
    ensure(one == 1.0, || format!("reversed rankings gave {one}"))?;

    let (m, _) = rank_matrix(&one_test_cube(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]), 0).map_err(|e| e.to_string())?;
    let s = m.squared_deviations();
    let w = commbench::concordance::kendall_w(&m);
    ensure(12.0 * s == 96.0 && w == 1.0, || format!("12S={} W={w}", 12.0 * s))?;
    Ok(Verdict::Pass("identical=0, reversed=1, 12S/(n^2(a^3-a))=96/96".into()))
}

fn fcr_structure() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..200 {
        let x = common::random_cube(seed, 5);
        let other = common::random_cube(seed + 10_000, 5);
        let cells = (0..x.cells().len()).map(|i| other.cells()[i % other.cells().len()]).collect();
        let y = ResultsCube::new(x.algorithms().to_vec(), x.seeds().to_vec(), x.tests().to_vec(), cells).unwrap();
        for reduction in [SeedReduction::MeanOverSeeds, SeedReduction::PerSeed] {
            let r = framework_comparison_rank(&x, &y, reduction).map_err(|e| e.to_string())?;
            let diff = (r.mean[0] + r.mean[1] - 3.0).abs();
            worst = worst.max(diff);
            ensure(diff <= 1e-12, || format!("pair {seed} {reduction:?}: sum off by {diff:e}"))?;
        }
    }
    Ok(Verdict::Pass(format!("200 cube pairs x 2 reductions, max |sum-3| {worst:.1e}")))
}

fn random_graph(rng: &mut ChaCha8Rng) -> (Graph, Vec<usize>) {
    loop {
        let n = rng.random_range(2..=20);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random_bool(0.3) {
                    edges.push((u, v, rng.random_range(0.05..=1.0)));
                }
            }
        }
        if edges.is_empty() {
            continue;
        }
        let k = rng.random_range(1..=5);
        let assignment = (0..n).map(|_| rng.random_range(0..k)).collect();
        return (Graph::builder(n).edges(edges).build().unwrap(), assignment);
    }
}

fn metric_oracles() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..100 {
        let (g, assignment) = random_graph(&mut rng);
        let fast = modularity(&g, &Partition::from_assignment(assignment.clone())).map_err(|e| e.to_string())?.value;
        let slow = common::brute_modularity(&g, &assignment);
        ensure((fast - slow).abs() <= 1e-9, || format!("graph {i}: modularity {fast} vs {slow}"))?;
    }

    let bridge = Graph::builder(6)
        .unit_edges([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
        .build()
        .unwrap();
    let halves = Partition::from_assignment(vec![0, 0, 0, 1, 1, 1]);
    let q = modularity(&bridge, &halves).map_err(|e| e.to_string())?.value;
    let c = conductance(&bridge, &halves).map_err(|e| e.to_string())?.value;
    ensure((q - 5.0 / 14.0).abs() <= 1e-15 && (c - 1.0 / 7.0).abs() <= 1e-15, || {
        format!("bridge gave Q={q} conductance={c}")
    })?;

    for i in 0..300 {
        let k = rng.random_range(1..=6);
        let n = rng.random_range(1..40);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let subset: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.7)).collect();
        if subset.is_empty() {
            continue;
        }
        let fast = macro_f1(&Partition::from_assignment(pred.clone()), &labels, &subset).map_err(|e| e.to_string())?.value;
        let slow = common::brute_macro_f1(&pred, &labels, &subset);
        ensure((fast - slow).abs() <= 1e-12, || format!("case {i}: macro-F1 {fast} vs {slow}"))?;
    }

    for i in 0..500 {
        let n = rng.random_range(1..50);
        let (ka, kb) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
        let all: Vec<usize> = (0..n).collect();
        let ab = nmi(&Partition::from_assignment(a.clone()), &b, &all).map_err(|e| e.to_string())?.value;
        let ba = nmi(&Partition::from_assignment(b), &a, &all).map_err(|e| e.to_string())?.value;
        ensure((0.0..=1.0).contains(&ab) && (ab - ba).abs() <= 1e-12, || format!("pair {i}: NMI {ab} / {ba}"))?;
    }
    within(
        started.elapsed(),
        Duration::from_secs(30),
        "modularity x100, bridge 5/14 and 1/7, macro-F1 x300, NMI x500".into(),
    )
}

fn dataset_dirs(name: &str) -> Vec<PathBuf> {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let mut dirs = Vec::new();
    if let Ok(root) = std::env::var("COMMBENCH_DATA_DIR") {
        dirs.push(Path::new(&root).join(name));
    }
    dirs.push(crate_dir.join("data").join(name));
    dirs.push(crate_dir.join("../../data").join(name));
    dirs
}

fn dataset_statistics() -> Check {
    let triangle = Graph::builder(3).unit_edges([(0, 1), (1, 2), (0, 2)]).build().unwrap();
    let path = Graph::builder(3).unit_edges([(0, 1), (1, 2)]).build().unwrap();
    let stats = |g: &Graph| -> Result<(f64, f64), String> {
        Ok((
            avg_clustering_coefficient(g).map_err(|e| e.to_string())?,
            mean_closeness_centrality(g).map_err(|e| e.to_string())?,
        ))
    };
    let (tc, tcl) = stats(&triangle)?;
    ensure(tc == 1.0 && tcl == 1.0, || format!("triangle gave {tc}, {tcl}"))?;
    let (pc, pcl) = stats(&path)?;
    ensure(pc == 0.0 && (pcl - 7.0 / 9.0).abs() <= 1e-15, || format!("path gave {pc}, {pcl}"))?;

    let published = [("texas", 0.198, 0.344), ("wisc", 0.208, 0.32), ("cornell", 0.167, 0.326)];
    let mut measured = Vec::new();
    let mut missing = Vec::new();
    for (name, cc, closeness) in published {
        let Some(dir) = dataset_dirs(name).into_iter().find(|d| d.join("meta.txt").exists()) else {
            missing.push(name);
            continue;
        };
        let g = load_dataset(&dir, BundleFormat::EdgeListBundle).map_err(|e| e.to_string())?;
        let (c, cl) = stats(&g)?;
        if (c - cc).abs() > 0.0005 || (cl - closeness).abs() > 0.0005 {
            return Ok(Verdict::Fail(format!(
                "{name}: clustering {c:.4} (want {cc}), closeness {cl:.4} (want {closeness})"
            )));
        }
        measured.push(format!("{name} {c:.3}/{cl:.3}"));
    }
    let hand = "triangle and path exact";
    if missing.is_empty() {
        Ok(Verdict::Pass(format!("{hand}; {}", measured.join(", "))))
    } else {
        Ok(Verdict::Blocked(format!(
            "{hand}; {} not present, run `commbench fetch-datasets --out crates/core/data`",
            missing.join(", ")
        )))
    }
}

fn hpo_quality() -> Check {
    let started = Instant::now();
    let tpe: Vec<f64> = (0..20).map(|s| common::bandit_tpe(100, s)).collect();
    let random: Vec<f64> = (0..20).map(|s| common::bandit_random(100, s)).collect();
    let (t, r) = (common::median(tpe), common::median(random));
    if t <= r {
        return Ok(Verdict::Fail(format!("bandit median: tpe {t:.2} vs random {r:.2}")));
    }
    let sphere: Vec<f64> = (0..20).map(|s| common::sphere_tpe(100, s)).collect();
    let worst = sphere.iter().cloned().fold(0.0, f64::max);
    if worst > 0.05 {
        return Ok(Verdict::Fail(format!("sphere best-found {worst:.4} above 0.05")));
    }
    within(
        started.elapsed(),
        Duration::from_secs(120),
        format!("bandit median tpe {t:.2} > random {r:.2}; sphere worst {worst:.4}"),
    )
}

fn desk_config() -> Result<BenchmarkConfig, String> {
    BenchmarkConfig::from_file(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml")).map_err(|e| e.to_string())
}

fn end_to_end() -> Check {
    let started = Instant::now();
    let hpo = desk_config()?;
    ensure(hpo.mode == Mode::Hpo && hpo.resources.max_trials == 30, || "desk config is not 30-trial HPO".into())?;
    ensure(hpo.resources.seeds.len() == 10 && hpo.datasets.len() == 3 && hpo.runners.len() == 4, || {
        "desk config is not 4 runners x 3 datasets x 10 seeds".into()
    })?;
    let default = hpo.clone().with_mode(Mode::DefaultParams);
    let (comparison, _, tuned) = compare_regimes(&default, &hpo).map_err(|e| e.to_string())?;
    let cube = &tuned.cube;
    ensure(cube.cells().len() == 4 * 3 * 4 * 10, || format!("{} cells", cube.cells().len()))?;

    let again = run_benchmark(&hpo).map_err(|e| e.to_string())?;
    let bytes = |c: &ResultsCube| to_bytes(&StoredCube::new(c.clone(), Some(&hpo)));
    ensure(bytes(cube) == bytes(&again.cube), || "rerun produced different cube bytes".into())?;

    let sums = [comparison.fcr_mean_over_seeds.mean, comparison.fcr_per_seed.mean];
    for m in sums {
        ensure((m[0] + m[1] - 3.0).abs() <= 1e-12, || format!("FCR means {m:?}"))?;
    }

    let t = cube
        .tests()
        .iter()
        .position(|t| t.dataset == "planted-separable" && t.metric == Metric::Nmi)
        .ok_or("no planted-separable NMI test")?;
    let mut recovery = Vec::new();
    for name in [Builtin::Kmeans.name(), Builtin::LabelPropagation.name()] {
        let a = cube.algorithms().iter().position(|x| x == name).ok_or(format!("{name} missing"))?;
        let worst = (0..cube.seeds().len())
            .map(|s| cube.get(a, s, t).value().unwrap_or(f64::NAN))
            .fold(f64::INFINITY, f64::min);
        ensure(worst >= 0.9, || format!("{name} NMI {worst:.3} on planted-separable"))?;
        recovery.push(format!("{name} NMI>={worst:.3}"));
    }
    within(
        started.elapsed(),
        Duration::from_secs(600),
        format!(
            "480 cells, identical bytes on rerun, FCR {:.3}+{:.3}, {}",
            sums[0][0],
            sums[0][1],
            recovery.join(", ")
        ),
    )
}

fn failure_policy() -> Check {
    let mut cfg = desk_config()?;
    cfg.runners.truncate(2);
    cfg.datasets.truncate(2);
    cfg.resources.max_trials = 8;
    let clean = run_benchmark(&cfg).map_err(|e| e.to_string())?;
    cfg.runners.push(RunnerRef::from(common::served(Builtin::Kmeans, Some("crash"))));
    let out = run_benchmark(&cfg).map_err(|e| e.to_string())?;
    let cube = &out.cube;
    let crashed = cube.algorithms().len() - 1;

    for t in 0..cube.tests().len() {
        for s in 0..cube.seeds().len() {
            ensure(cube.get(crashed, s, t) == Cell::Failed(FailureReason::Crash), || {
                format!("crashing runner produced {} at seed {s}, test {t}", cube.get(crashed, s, t))
            })?;
            for a in 0..crashed {
                ensure(cube.get(a, s, t) == clean.cube.get(a, s, t), || {
                    format!("{} changed at seed {s}, test {t}", cube.algorithms()[a])
                })?;
            }
        }
        let (ranks, _) = rank_matrix(cube, t).map_err(|e| e.to_string())?;
        ensure(ranks.rows().iter().all(|r| r[crashed] == (crashed + 1) as f64), || {
            format!("failed cells not ranked last on test {t}")
        })?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let concord = w_randomness_coefficient(cube).map_err(|e| e.to_string())?;
    emit_report(cube, &concord, None, dir.path()).map_err(|e| e.to_string())?;
    let summary = std::fs::read_to_string(dir.path().join(METRIC_SUMMARY_FILE)).map_err(|e| e.to_string())?;
    let name = &cube.algorithms()[crashed];
    let annotated = summary
        .lines()
        .filter(|l| l.starts_with(&format!("| {name} |")))
        .all(|l| l.ends_with("| 10 (10 crash) |"));
    ensure(annotated, || "report rows lack failure counts".into())?;
    Ok(Verdict::Pass(format!(
        "{} FAILED cells ranked last, report annotated, other algorithms unchanged",
        cube.failure_count()
    )))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("concordance oracle equivalence", oracle_equivalence),
        ("concordance anchors", concordance_anchors),
        ("comparison rank sums to 3", fcr_structure),
        ("metric oracles", metric_oracles),
        ("dataset statistics", dataset_statistics),
        ("hpo quality", hpo_quality),
        ("end-to-end desk benchmark", end_to_end),
        ("failure policy", failure_policy),
    ];
    // Panics become FAIL lines; the default hook would interleave backtraces.
    std::panic::set_hook(Box::new(|_| {}));
    let require_data = std::env::var("COMMBENCH_REQUIRE_DATASETS").is_ok_and(|v| v == "1");
    let mut failed = 0;
    for (name, check) in criteria {
        let verdict = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(Ok(v)) => v,
            Ok(Err(msg)) => Verdict::Fail(msg),
            Err(panic) => Verdict::Fail(
                panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into()),
            ),
        };
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Blocked(d) if require_data => ("FAIL", d),
            Verdict::Blocked(d) => ("BLOCKED", d),
            Verdict::Fail(d) => ("FAIL", d),
        };
        failed += usize::from(tag == "FAIL");
        println!("{tag:<7} {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
