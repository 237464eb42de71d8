//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use runtime_oracle::estimate::{fit, FitOptions, FittedModel, NormalParams};
use runtime_oracle::ingest::{parse_event_log, IngestError, IngestOptions};
use runtime_oracle::online::{run_trajectory, OnlineState, TrajectoryOptions, Variant};
use runtime_oracle::predict::{ks_distance, position_rng, sample_app, ModelKind};
use runtime_oracle::synth::{generate, GcSpec, GeneratorSpec};
use runtime_oracle::trace::{ApplicationRun, IterativeWindow, JobKind, JobRecord, TraceSet};

const SEEDS: u64 = 100;

type Criterion = (&'static str, fn() -> Outcome);
type ErrorCase<'a> = (&'a str, &'a str, fn(&IngestError) -> bool);

struct Outcome {
    passed: bool,
    detail: String,
}

fn np(loc: f64, scale: f64) -> NormalParams {
    NormalParams { loc, scale }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Seven non-iterative jobs ahead of nineteen iterative ones.
fn kmeans_like(noniter_scale: f64, app_offset_scale: f64, overhead: NormalParams, gc: Option<GcSpec>) -> GeneratorSpec {
    GeneratorSpec {
        n_runs: 200,
        noniter: (0..7).map(|k| np(3.0 + k as f64, noniter_scale)).collect(),
        iterative_start: None,
        n_iter: 19,
        iter_base: np(8.0, 0.5),
        app_offset_scale,
        overhead_true: overhead,
        gc,
        seed: 0,
        duration_floor: 0.001,
    }
}

fn moment_fidelity() -> Outcome {
    let started = Instant::now();
    let model = FittedModel {
        noniter: (0..7)
            .map(|k| (k, np(3.0 + k as f64, 0.3 + 0.1 * k as f64)))
            .collect::<BTreeMap<_, _>>(),
        iter_pooled: np(8.0, 0.6),
        a_mean: np(8.0, 0.4),
        iter_scale_dep: 0.6,
        overhead: np(2.0, 0.5),
        n_iter_jobs: 19,
        n_runs: 200,
    };
    let ni = model.n_iter_jobs as f64;
    let base_mean: f64 = model.noniter.values().map(|p| p.loc).sum::<f64>() + model.overhead.loc + ni * 8.0;
    let base_var: f64 =
        model.noniter.values().map(|p| p.scale * p.scale).sum::<f64>() + model.overhead.scale.powi(2) + ni * 0.36;
    let s = 100_000usize;
    let mut lines = Vec::new();
    let mut ok = true;
    for (kind, var) in [
        (ModelKind::Independent, base_var),
        (ModelKind::Dependent, base_var + ni * ni * 0.16),
    ] {
        let hits = (0..SEEDS)
            .filter(|&seed| {
                let sample = sample_app(&model, kind, s, seed).unwrap();
                let (m, v) = mean_var(&sample.values);
                let se_mean = (var / s as f64).sqrt();
                let se_var = var * (2.0 / (s as f64 - 1.0)).sqrt();
                (m - base_mean).abs() <= 3.0 * se_mean && (v - var).abs() <= 3.0 * se_var
            })
            .count();
        ok &= hits >= 95;
        lines.push(format!("{kind} {hits}/{SEEDS}"));
    }
    let elapsed = started.elapsed();
    ok &= elapsed < Duration::from_secs(30);
    Outcome {
        passed: ok,
        detail: format!(
            "{} seeds within 3 SE, need 95; {:.1} s, limit 30 s",
            lines.join(", "),
            elapsed.as_secs_f64()
        ),
    }
}

/// Fits on one synthetic set and scores both models against a holdout.
fn holdout_scores(spec: &GeneratorSpec, seed: u64) -> (f64, f64, f64, f64) {
    let train = generate(&spec.reseeded(2 * seed)).unwrap().traces;
    let holdout = generate(&spec.reseeded(2 * seed + 1)).unwrap().traces;
    let model = fit(&train, &FitOptions::default()).unwrap().model;
    let actual: Vec<f64> = holdout.runs().iter().map(|r| r.wall_time_s).collect();
    let ind = sample_app(&model, ModelKind::Independent, 10_000, seed).unwrap();
    let dep = sample_app(&model, ModelKind::Dependent, 10_000, seed).unwrap();
    let ind_std = mean_var(&ind.values).1.sqrt();
    let actual_std = mean_var(&actual).1.sqrt();
    (
        ks_distance(&ind.values, &actual).unwrap(),
        ks_distance(&dep.values, &actual).unwrap(),
        ind_std,
        actual_std,
    )
}

fn variance_gap() -> Outcome {
    let started = Instant::now();
    let gc = GcSpec {
        probability: 0.5,
        delay: np(2.0, 0.2),
    };
    let spec = kmeans_like(0.3, 0.25, np(2.0, 0.5), Some(gc));
    let mut hits = 0;
    let mut ratio_sum = 0.0;
    for seed in 0..SEEDS {
        let (ks_ind, ks_dep, ind_std, actual_std) = holdout_scores(&spec, seed);
        ratio_sum += ind_std / actual_std;
        if ind_std < 0.6 * actual_std && ks_dep < ks_ind {
            hits += 1;
        }
    }
    let elapsed = started.elapsed();
    Outcome {
        passed: hits >= 90 && elapsed < Duration::from_secs(120),
        detail: format!(
            "{hits}/{SEEDS} seeds with std ratio < 0.6 and dependent KS < independent KS, need 90; mean ratio {:.3}; {:.1} s, limit 120 s",
            ratio_sum / SEEDS as f64,
            elapsed.as_secs_f64()
        ),
    }
}

fn clean_regime() -> Outcome {
    let spec = kmeans_like(1.0, 0.05, np(2.0, 0.5), None);
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..SEEDS {
        let (ks_ind, ks_dep, _, _) = holdout_scores(&spec, seed);
        worst = worst.max(ks_ind).max(ks_dep);
        if ks_ind < 0.15 && ks_dep < 0.15 {
            hits += 1;
        }
    }
    Outcome {
        passed: hits >= 90,
        detail: format!("{hits}/{SEEDS} seeds with both KS < 0.15, need 90; worst KS {worst:.4}"),
    }
}

fn online_variance() -> Outcome {
    let spec = kmeans_like(0.3, 0.5, np(2.0, 0.5), None).reseeded(4);
    let traces = generate(&spec).unwrap().traces;
    let model = fit(&traces, &FitOptions::default()).unwrap().model;
    let run = &traces.runs()[0];
    let mut state = OnlineState::new(model, Variant::FixedAMean);
    let mut previous = f64::INFINITY;
    let mut decreasing = true;
    let mut worst_rel: f64 = 0.0;
    for step in 0..=run.jobs.len() {
        if step > 0 {
            state = state.advance(&run.jobs[step - 1]).unwrap();
        }
        let analytic = state.analytic_variance();
        decreasing &= analytic < previous;
        previous = analytic;
        let sample = state.predict_total(100_000, step as u64).unwrap();
        let (_, mc) = mean_var(&sample.values);
        worst_rel = worst_rel.max((mc - analytic).abs() / analytic);
    }
    Outcome {
        passed: decreasing && worst_rel < 0.05,
        detail: format!(
            "{} steps, analytic variance {}, worst MC deviation {:.2}%, limit 5%",
            run.jobs.len() + 1,
            if decreasing {
                "strictly decreasing"
            } else {
                "NOT strictly decreasing"
            },
            100.0 * worst_rel
        ),
    }
}

fn adaptive_recentering() -> Outcome {
    let base = GeneratorSpec {
        overhead_true: np(0.0, 0.0),
        ..kmeans_like(0.3, 1.0, np(0.0, 0.0), None)
    };
    let options = TrajectoryOptions {
        structure: ModelKind::Dependent,
        include_overhead: false,
    };
    let first_iter = base.window().first;
    let mut closer = 0;
    let mut covered = 0;
    let mut hits = 0;
    for seed in 0..SEEDS {
        let spec = base.reseeded(seed);
        let model = fit(&generate(&spec).unwrap().traces, &FitOptions::default())
            .unwrap()
            .model;
        let offset = spec.iter_base.loc + 2.0 * spec.app_offset_scale;
        let mut rng = position_rng(seed ^ 0x5eed, 0);
        let run = spec.run_with_offset("shifted".into(), offset, &mut rng);
        let fixed = run_trajectory(&model, &run, Variant::FixedAMean, 10_000, seed, &options).unwrap();
        let adaptive = run_trajectory(&model, &run, Variant::AdaptiveAMean, 10_000, seed, &options).unwrap();
        // point k + 1 is the prediction after job k
        let at = first_iter + 1;
        let actual = adaptive.actual_total;
        let c = (adaptive.points[at].p50 - actual).abs() < (fixed.points[at].p50 - actual).abs();
        let cov = adaptive.points[at..].iter().all(|p| p.contains(actual));
        closer += c as usize;
        covered += cov as usize;
        hits += (c && cov) as usize;
    }
    Outcome {
        passed: hits >= 90,
        detail: format!(
            "{hits}/{SEEDS} seeds pass, need 90 (adaptive closer {closer}, actual inside [p10, p90] {covered})"
        ),
    }
}

fn estimator_example() -> Outcome {
    let run = |id: &str, d: [f64; 3], overhead: f64| {
        let mut t = 0.0;
        let jobs = d
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let kind = if i == 0 {
                    JobKind::NonIterative
                } else {
                    JobKind::Iterative
                };
                let j = JobRecord::new(i, kind, t, t + x);
                t += x;
                j
            })
            .collect();
        ApplicationRun {
            app_id: id.into(),
            wall_time_s: t + overhead,
            jobs,
        }
    };
    let set = TraceSet::new(
        vec![run("run1", [1.0, 2.0, 4.0], 1.0), run("run2", [3.0, 4.0, 6.0], 1.0)],
        Some(IterativeWindow { first: 1, last: 2 }),
    )
    .unwrap();
    let m = fit(&set, &FitOptions::default()).unwrap().model;
    let expected = [
        ("iter", m.iter_pooled, np(4.0, (8.0f64 / 3.0).sqrt())),
        ("noniter[0]", m.noniter[&0], np(2.0, 2f64.sqrt())),
        ("a_mean", m.a_mean, np(4.0, 2f64.sqrt())),
        ("overhead", m.overhead, np(1.0, 0.0)),
    ];
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for (name, got, want) in expected {
        let err = (got.loc - want.loc).abs().max((got.scale - want.scale).abs());
        worst = worst.max(err);
        if err > 1e-9 {
            bad.push(format!("{name} = ({}, {})", got.loc, got.scale));
        }
    }
    Outcome {
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("all four parameters within {worst:.1e} of the hand computation, limit 1e-9")
        } else {
            format!("mismatch: {}", bad.join(", "))
        },
    }
}

fn ingestion() -> Outcome {
    let ingest = |text: &str| parse_event_log(text.as_bytes(), &IngestOptions::default());
    let fixture = r#"{"Event":"SparkListenerApplicationStart","App Name":"fixture","Timestamp":0}
{"Event":"SparkListenerJobStart","Job ID":0,"Submission Time":1000}
{"Event":"SparkListenerJobEnd","Job ID":0,"Completion Time":5000,"Job Result":{"Result":"JobSucceeded"}}
{"Event":"SparkListenerApplicationEnd","Timestamp":6000}
"#;
    let mut problems = Vec::new();
    match ingest(fixture) {
        Ok(run) => {
            if run.jobs.len() != 1 || run.jobs[0].duration() != 4.0 || run.wall_time_s != 6.0 {
                problems.push(format!("fixture gave {run:?}"));
            }
        }
        Err(e) => problems.push(format!("fixture failed: {e}")),
    }

    let incomplete = r#"{"Event":"SparkListenerApplicationStart","Timestamp":0}
{"Event":"SparkListenerJobStart","Job ID":0,"Submission Time":1000}
{"Event":"SparkListenerJobEnd","Job ID":0,"Completion Time":2000,"Job Result":{"Result":"JobSucceeded"}}
{"Event":"SparkListenerJobStart","Job ID":1,"Submission Time":2500}
{"Event":"SparkListenerApplicationEnd","Timestamp":6000}
"#;
    let garbled = "{\"Event\":\"SparkListenerApplicationStart\",\"Timestamp\":0}\n{not json\n";
    let cases: [ErrorCase; 3] = [
        (
            "missing JobEnd",
            incomplete,
            |e| matches!(e, IngestError::IncompleteJobs(ids) if ids == &[1]),
        ),
        ("empty stream", "", |e| matches!(e, IngestError::Structure(_))),
        ("unparseable line", garbled, |e| {
            matches!(e, IngestError::Line { line: 2, .. })
        }),
    ];
    for (name, text, expected) in cases {
        match ingest(text) {
            Err(e) if expected(&e) => {}
            other => problems.push(format!("{name}: got {other:?}")),
        }
    }
    Outcome {
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            "fixture gives duration 4.0 s and wall time 6.0 s; 3 malformed fixtures give the expected errors".into()
        } else {
            problems.join("; ")
        },
    }
}

fn cli(dir: &Path, threads: &str, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_runtime-oracle"))
        .current_dir(dir)
        .env("RAYON_NUM_THREADS", threads)
        .env_remove("RUNTIME_ORACLE_SERVER")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn pipeline(dir: &Path, threads: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let spec = kmeans_like(0.3, 0.5, np(2.0, 0.5), None);
    std::fs::write(dir.join("spec.json"), serde_json::to_vec(&spec).unwrap()).map_err(|e| e.to_string())?;
    let steps: [&[&str]; 6] = [
        &["synth", "--input", "spec.json", "--output", "train", "--seed", "42"],
        &["synth", "--input", "spec.json", "--output", "holdout", "--seed", "43"],
        &["fit", "--input", "train/traces.json", "--output", "model.json"],
        &[
            "predict",
            "--input",
            "model.json",
            "--output",
            "pred",
            "--model",
            "dependent",
            "--samples",
            "20000",
            "--seed",
            "7",
        ],
        &[
            "online",
            "--input",
            "model.json",
            "--run",
            "holdout/traces.json",
            "--app-id",
            "synth-0000",
            "--output",
            "trajectory.csv",
            "--variant",
            "adaptive",
            "--samples",
            "20000",
            "--seed",
            "7",
        ],
        &[
            "compare",
            "--input",
            "pred/samples.txt",
            "--actual",
            "holdout/traces.json",
            "--output",
            "cmp",
            "--svg",
        ],
    ];
    for args in steps {
        cli(dir, threads, args)?;
    }
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, std::fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let runs = [("4", "first"), ("4", "second"), ("1", "one thread")];
    let mut outputs = Vec::new();
    for (threads, label) in runs {
        let dir = tempfile::tempdir().unwrap();
        match pipeline(dir.path(), threads) {
            Ok(files) => outputs.push((label, files)),
            Err(e) => {
                return Outcome {
                    passed: false,
                    detail: format!("{label} pipeline failed: {e}"),
                }
            }
        }
    }
    let (_, reference) = &outputs[0];
    let mut diffs = Vec::new();
    for (label, files) in &outputs[1..] {
        if files.keys().ne(reference.keys()) {
            diffs.push(format!("{label}: different file set"));
            continue;
        }
        for (name, bytes) in files {
            if bytes != &reference[name] {
                diffs.push(format!("{label}: {name} differs"));
            }
        }
    }
    Outcome {
        passed: diffs.is_empty(),
        detail: if diffs.is_empty() {
            format!(
                "{} output files byte-identical across two runs and 4 vs 1 threads",
                reference.len()
            )
        } else {
            diffs.join("; ")
        },
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("moment fidelity", moment_fidelity),
        ("variance gap under GC contamination", variance_gap),
        ("clean-regime fit", clean_regime),
        ("online variance monotonicity", online_variance),
        ("adaptive recentering", adaptive_recentering),
        ("estimator worked example", estimator_example),
        ("event-log ingestion", ingestion),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        if !outcome.passed {
            failed += 1;
        }
        println!(
            "acceptance {}: {} {name}: {}",
            i + 1,
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
