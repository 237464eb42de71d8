use proptest::prelude::*;

use runtime_oracle::estimate::{fit, FitOptions, NormalParams};
use runtime_oracle::ingest::{ingest_directory, ingest_sources, IngestOptions, LogSource};
use runtime_oracle::online::{OnlineState, Variant};
use runtime_oracle::predict::{analytic_moments, ModelKind};
use runtime_oracle::trace::{
    classify_jobs, parse_traces, serialize_traces, ApplicationRun, IterativeWindow, JobKind, JobRecord, TraceSet,
};

fn serial(app_id: &str, kinds: &[JobKind], durations: &[f64], overhead: f64) -> ApplicationRun {
    let mut t = 0.0;
    let jobs = kinds
        .iter()
        .zip(durations)
        .enumerate()
        .map(|(i, (&k, &d))| {
            let j = JobRecord::new(i, k, t, t + d);
            t += d;
            j
        })
        .collect();
    ApplicationRun {
        app_id: app_id.to_string(),
        wall_time_s: t + overhead,
        jobs,
    }
}

prop_compose! {
    /// Runs sharing one layout: `n_jobs` jobs, iterative window `[first, last]`.
    fn trace_sets()(n_jobs in 2usize..8, n_runs in 2usize..6)
        (first in 0..n_jobs, span in 0..n_jobs, n_jobs in Just(n_jobs),
         durations in prop::collection::vec(prop::collection::vec(0.001f64..50.0, n_jobs), n_runs),
         overheads in prop::collection::vec(0.0f64..5.0, n_runs))
        -> TraceSet
    {
        let window = IterativeWindow::new(first, (first + span).min(n_jobs - 1)).unwrap();
        let kinds: Vec<JobKind> = (0..n_jobs).map(|i| window.kind_of(i)).collect();
        let runs = durations.iter().zip(&overheads).enumerate()
            .map(|(r, (d, &o))| serial(&format!("run-{r}"), &kinds, d, o))
            .collect();
        TraceSet::new(runs, Some(window)).unwrap()
    }
}

proptest! {
    #[test]
    fn canonical_format_round_trips(set in trace_sets()) {
        let back = parse_traces(&serialize_traces(&set)).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn classification_is_idempotent(set in trace_sets(), a in 0usize..8, b in 0usize..8) {
        let run = &set.runs()[0];
        let n = run.jobs.len();
        let window = IterativeWindow::new(a.min(b) % n, a.max(b) % n).unwrap_or(IterativeWindow { first: 0, last: 0 });
        if let Ok(once) = classify_jobs(run, window) {
            prop_assert_eq!(classify_jobs(&once, window).unwrap(), once);
        }
    }

    #[test]
    fn fitted_scales_are_non_negative(set in trace_sets()) {
        let m = fit(&set, &FitOptions::default()).unwrap().model;
        prop_assert!(m.noniter.values().all(|p| p.scale >= 0.0));
        prop_assert!(m.iter_pooled.scale >= 0.0 && m.a_mean.scale >= 0.0);
        prop_assert!(m.overhead.scale >= 0.0 && m.iter_scale_dep >= 0.0);
        prop_assert_eq!(m.n_iter_jobs, set.iterative_window().unwrap().width());
        prop_assert_eq!(m.n_runs, set.len());
    }

    #[test]
    fn pooled_mean_equals_mean_of_run_means(set in trace_sets()) {
        let m = fit(&set, &FitOptions::default()).unwrap().model;
        prop_assert!((m.iter_pooled.loc - m.a_mean.loc).abs() <= 1e-9 * m.iter_pooled.loc.abs().max(1.0));
    }

    #[test]
    fn iterative_shift_equivariance(set in trace_sets(), c in 0.0f64..20.0) {
        let before = fit(&set, &FitOptions::default()).unwrap().model;
        let shifted: Vec<ApplicationRun> = set.runs().iter().map(|r| {
            let kinds = r.kinds();
            let d: Vec<f64> = r.jobs.iter().map(|j| if j.is_iterative() { j.duration() + c } else { j.duration() }).collect();
            serial(&r.app_id, &kinds, &d, r.overhead())
        }).collect();
        let after = fit(&TraceSet::new(shifted, set.iterative_window()).unwrap(), &FitOptions::default()).unwrap().model;
        let tol = 1e-9 * (1.0 + before.iter_pooled.loc.abs() + c);
        prop_assert!((after.iter_pooled.loc - before.iter_pooled.loc - c).abs() < tol);
        prop_assert!((after.a_mean.loc - before.a_mean.loc - c).abs() < tol);
        prop_assert!((after.iter_pooled.scale - before.iter_pooled.scale).abs() < 1e-7 * (1.0 + before.iter_pooled.scale));
        prop_assert!((after.a_mean.scale - before.a_mean.scale).abs() < 1e-7 * (1.0 + before.a_mean.scale));
    }

    #[test]
    fn dependent_variance_gap_is_exact(set in trace_sets()) {
        let m = fit(&set, &FitOptions::default()).unwrap().model;
        let (_, vi) = analytic_moments(&m, ModelKind::Independent);
        let (_, vd) = analytic_moments(&m, ModelKind::Dependent);
        let ni = m.n_iter_jobs as f64;
        prop_assert!((vd - vi - ni * ni * m.a_mean.variance()).abs() <= 1e-9 * vd.max(1.0));
    }

    #[test]
    fn online_mean_never_below_elapsed(set in trace_sets(), adaptive in any::<bool>()) {
        let m = fit(&set, &FitOptions::default()).unwrap().model;
        let variant = if adaptive { Variant::AdaptiveAMean } else { Variant::FixedAMean };
        let mut state = OnlineState::new(m.clone(), variant);
        let mut previous_var = state.analytic_variance();
        for job in &set.runs()[1].jobs {
            state = state.advance(job).unwrap();
            // fitted locations are means of positive durations, so the remaining expectation is positive
            prop_assert!(state.analytic_mean() >= state.elapsed() - 1e-9);
            if !adaptive {
                prop_assert!(state.analytic_variance() <= previous_var + 1e-9);
            }
            previous_var = state.analytic_variance();
        }
    }

    #[test]
    fn online_mean_grows_with_observed_durations(set in trace_sets(), extra in 0.0f64..10.0) {
        let m = fit(&set, &FitOptions::default()).unwrap().model;
        let job = &set.runs()[0].jobs[0];
        let longer = JobRecord::new(job.index, job.kind, job.start_s, job.end_s + extra);
        for variant in [Variant::FixedAMean, Variant::AdaptiveAMean] {
            let s = OnlineState::new(m.clone(), variant);
            prop_assert!(s.advance(&longer).unwrap().analytic_mean() >= s.advance(job).unwrap().analytic_mean());
        }
    }
}

#[test]
fn run_overhead_exact_for_dyadic_components() {
    let run = serial("r", &[JobKind::NonIterative, JobKind::Iterative], &[1.5, 2.25], 0.125);
    assert_eq!(run.overhead(), 0.125);
    assert_eq!(run.wall_time_s - run.job_sum(), 0.125);
}

#[test]
fn normal_params_reject_bad_scale() {
    assert!(NormalParams::new(1.0, -0.5).is_err());
    assert!(NormalParams::new(f64::NAN, 0.5).is_err());
    assert!(NormalParams::new(1.0, 0.0).is_ok());
}

fn event_log(jobs: &[(u64, u64)], app_end: u64) -> String {
    let mut lines =
        vec![r#"{"Event":"SparkListenerApplicationStart","App Name":"kmeans","Timestamp":1700000000000}"#.to_string()];
    for (id, &(s, e)) in jobs.iter().enumerate() {
        lines.push(format!(
            r#"{{"Event":"SparkListenerJobStart","Job ID":{id},"Submission Time":{}}}"#,
            1_700_000_000_000 + s
        ));
        lines.push(format!(r#"{{"Event":"SparkListenerTaskEnd","Stage ID":{id}}}"#));
        lines.push(format!(
            r#"{{"Event":"SparkListenerJobEnd","Job ID":{id},"Completion Time":{},"Job Result":{{"Result":"JobSucceeded"}}}}"#,
            1_700_000_000_000 + e
        ));
    }
    lines.push(format!(
        r#"{{"Event":"SparkListenerApplicationEnd","Timestamp":{}}}"#,
        1_700_000_000_000 + app_end
    ));
    lines.join("\n") + "\n"
}

#[test]
fn ingest_files_matches_direct_construction() {
    let dir = tempfile::tempdir().unwrap();
    let logs = [
        (
            "app-b",
            vec![(100, 1100), (1200, 3200), (3300, 5300), (5400, 5900)],
            6000,
        ),
        (
            "app-a",
            vec![(50, 1050), (1100, 3000), (3050, 5150), (5200, 5500)],
            5600,
        ),
        ("app-c", vec![(10, 910), (1000, 3100), (3150, 5000), (5100, 5700)], 5800),
    ];
    let mut paths = Vec::new();
    for (name, jobs, end) in &logs {
        let path = dir.path().join(format!("{name}.log"));
        std::fs::write(&path, event_log(jobs, *end)).unwrap();
        paths.push(path);
    }
    let window = IterativeWindow::new(1, 2).unwrap();
    let set = ingest_directory(&paths, window, &IngestOptions::default()).unwrap();
    assert!(set.warnings().is_empty());

    let mut expected_runs = Vec::new();
    let mut sorted = logs.to_vec();
    sorted.sort_by_key(|l| l.0);
    for (name, jobs, end) in sorted {
        let jobs = jobs
            .iter()
            .enumerate()
            .map(|(i, &(s, e))| JobRecord::new(i, window.kind_of(i), s as f64 / 1000.0, e as f64 / 1000.0))
            .collect();
        expected_runs.push(ApplicationRun {
            app_id: name.to_string(),
            wall_time_s: end as f64 / 1000.0,
            jobs,
        });
    }
    let expected = TraceSet::new(expected_runs, Some(window)).unwrap();
    assert_eq!(set, expected);
    assert_eq!(parse_traces(&serialize_traces(&set)).unwrap(), expected);

    // duration is (completion - submission) / 1000 within half a millisecond
    for (run, (_, jobs, _)) in set.runs().iter().zip([&logs[1], &logs[0], &logs[2]]) {
        for (job, &(s, e)) in run.jobs.iter().zip(jobs) {
            assert!((job.duration() - (e - s) as f64 / 1000.0).abs() <= 0.0005);
        }
    }

    let sources: Vec<LogSource> = paths
        .iter()
        .map(|p| LogSource {
            name: p.display().to_string(),
            content: std::fs::read_to_string(p).unwrap(),
        })
        .collect();
    assert_eq!(
        ingest_sources(&sources, window, &IngestOptions::default()).unwrap(),
        expected
    );
}
