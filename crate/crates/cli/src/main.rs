use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use runtime_oracle::estimate::{FitOptions, FittedModel, NormalParams, OverheadMode};
use runtime_oracle::ingest::{IngestOptions, LogSource, WallClock};
use runtime_oracle::online::{TrajectoryOptions, Variant};
use runtime_oracle::predict::{read_values, write_values, ModelKind, DEFAULT_SAMPLES};
use runtime_oracle::synth::GeneratorSpec;
use runtime_oracle::trace::{parse_traces, serialize_traces, IterativeWindow, TraceSet};
use runtime_oracle::ErrorClass;
use runtime_oracle_client::{Client, ClientError};

mod svg;

#[derive(Parser, Debug)]
#[command(
    name = "runtime-oracle",
    version,
    about = "Run-time prediction for iterative Spark applications"
)]
struct Cli {
    /// Base URL of a running runtime-oracle-server. Without it the commands
    /// run against an in-process service.
    #[arg(long, global = true, env = "RUNTIME_ORACLE_SERVER")]
    server: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert Spark event logs (files or directories of files) into a trace file.
    Ingest {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Iterative job indices, inclusive.
        #[arg(long, value_name = "FIRST:LAST")]
        window: IterativeWindow,
        #[arg(long)]
        output: PathBuf,
        /// application | jobs
        #[arg(long, default_value = "application")]
        wall_clock: WallClock,
    },
    /// Fit both models to a trace file.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// fitted | zero
        #[arg(long, default_value = "fitted")]
        overhead: OverheadMode,
    },
    /// Sample application run times; writes samples.txt, ecdf.csv and summary.json.
    Predict {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// independent | dependent
        #[arg(long, default_value = "dependent")]
        model: ModelKind,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// fitted | zero
        #[arg(long, default_value = "fitted")]
        overhead: OverheadMode,
    },
    /// Replay a recorded run and re-predict after every job; writes a CSV.
    Online {
        /// Fitted model.
        #[arg(long)]
        input: PathBuf,
        /// Trace file holding the run to replay.
        #[arg(long)]
        run: PathBuf,
        /// Run to replay when the trace file holds several.
        #[arg(long)]
        app_id: Option<String>,
        #[arg(long)]
        output: PathBuf,
        /// fixed | adaptive
        #[arg(long, default_value = "fixed")]
        variant: Variant,
        /// Structure of the remaining iterative jobs: independent | dependent
        #[arg(long, default_value = "dependent")]
        model: ModelKind,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// fitted | zero
        #[arg(long, default_value = "fitted")]
        overhead: OverheadMode,
    },
    /// Generate synthetic traces; writes traces.json and truth.json.
    Synth {
        /// Generator spec (JSON).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Overrides the seed in the generator spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare predicted samples with observed runs.
    Compare {
        /// Sample file written by `predict`.
        #[arg(long)]
        input: PathBuf,
        /// Trace file of observed runs.
        #[arg(long)]
        actual: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// With `zero`, observed totals are job sums rather than wall times.
        #[arg(long, default_value = "fitted")]
        overhead: OverheadMode,
        /// Also write overlay.svg.
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Missing(PathBuf),
    Parse { path: PathBuf, reason: String },
    Invariant(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Other(_) => 1,
            Failure::Missing(_) => 2,
            Failure::Parse { .. } => 3,
            Failure::Invariant(_) => 4,
        }
    }

    fn parse(path: &Path, reason: impl ToString) -> Self {
        Failure::Parse {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Invariant(m) | Failure::Other(m) => f.write_str(m),
            Failure::Missing(p) => write!(f, "{}: no such file", p.display()),
            Failure::Parse { path, reason } => write!(f, "{}: {reason}", path.display()),
        }
    }
}

impl From<ClientError> for Failure {
    fn from(err: ClientError) -> Self {
        match err.class() {
            Some(ErrorClass::Parse) => Failure::parse(Path::new("<request>"), err),
            Some(ErrorClass::Invariant) => Failure::Invariant(err.to_string()),
            _ => Failure::Other(err.to_string()),
        }
    }
}

fn io_failure(path: &Path, err: io::Error) -> Failure {
    if err.kind() == io::ErrorKind::NotFound {
        Failure::Missing(path.to_path_buf())
    } else {
        Failure::Other(format!("{}: {err}", path.display()))
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| io_failure(path, e))
}

fn load_traces(path: &Path) -> Result<TraceSet, Failure> {
    let set = parse_traces(&read(path)?).map_err(|e| Failure::parse(path, e))?;
    for w in set.warnings() {
        tracing::warn!("{}: {w}", path.display());
    }
    Ok(set)
}

fn load_model(path: &Path) -> Result<FittedModel, Failure> {
    FittedModel::from_json(&read(path)?).map_err(|e| Failure::parse(path, e))
}

/// Writes through a temporary file in the same directory so readers never
/// see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: io::Error| Failure::Other(format!("{}: {e}", path.display()));
    fs::create_dir_all(dir).map_err(fail)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn csv_bytes<E: std::fmt::Display>(write: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| Failure::Other(e.to_string()))?;
    Ok(buf)
}

fn log_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in inputs {
        let meta = fs::metadata(p).map_err(|e| io_failure(p, e))?;
        if meta.is_dir() {
            let mut inner = Vec::new();
            for entry in fs::read_dir(p).map_err(|e| io_failure(p, e))? {
                let path = entry.map_err(|e| io_failure(p, e))?.path();
                if path.is_file() {
                    inner.push(path);
                }
            }
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn print_param(name: &str, p: NormalParams) {
    println!("{name:<16} loc {:>12.6}  scale {:>12.6}", p.loc, p.scale);
}

async fn connect(server: Option<String>) -> Result<Client, Failure> {
    if let Some(url) = server {
        return Ok(Client::new(url));
    }
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(|e| Failure::Other(format!("cannot start in-process service: {e}")))?;
    let addr = listener.local_addr().map_err(|e| Failure::Other(e.to_string()))?;
    tokio::spawn(runtime_oracle_server::serve(listener));
    tracing::debug!(%addr, "in-process service");
    Ok(Client::direct(format!("http://{addr}")))
}

async fn run(cli: Cli) -> Result<(), Failure> {
    let client = connect(cli.server).await?;
    match cli.command {
        Command::Ingest {
            input,
            window,
            output,
            wall_clock,
        } => {
            let mut logs = Vec::new();
            for path in log_files(&input)? {
                let content = String::from_utf8(read(&path)?).map_err(|e| Failure::parse(&path, e))?;
                logs.push(LogSource {
                    name: path.display().to_string(),
                    content,
                });
            }
            let options = IngestOptions {
                wall_clock,
                app_id: None,
            };
            let set = client.ingest(logs, window, options).await?;
            for w in set.warnings() {
                tracing::warn!("{w}");
            }
            write_atomic(&output, &serialize_traces(&set))?;
            println!("{} runs, {} flagged", set.len(), set.warnings().len());
        }
        Command::Fit {
            input,
            output,
            overhead,
        } => {
            let traces = load_traces(&input)?;
            let options = FitOptions {
                overhead,
                ..FitOptions::default()
            };
            let fit = client.fit(traces, options).await?;
            for id in &fit.excluded_from_overhead {
                tracing::warn!("{id}: negative overhead, left out of the overhead estimate");
            }
            let m = &fit.model;
            write_atomic(&output, &m.to_json())?;
            for (i, p) in &m.noniter {
                print_param(&format!("noniter[{i}]"), *p);
            }
            print_param("iter_pooled", m.iter_pooled);
            print_param("a_mean", m.a_mean);
            println!("{:<16} {:>29.6}", "iter_scale_dep", m.iter_scale_dep);
            print_param("overhead", m.overhead);
            println!("n_runs {}, NI {}", m.n_runs, m.n_iter_jobs);
        }
        Command::Predict {
            input,
            output,
            model,
            samples,
            seed,
            overhead,
        } => {
            let mut fitted = load_model(&input)?;
            if overhead == OverheadMode::Zero {
                fitted = fitted.without_overhead();
            }
            let resp = client.predict(fitted, model, samples, seed).await?;
            let mut values = Vec::new();
            write_values(&resp.sample.values, &mut values).map_err(|e| Failure::Other(e.to_string()))?;
            write_atomic(&output.join("samples.txt"), &values)?;
            write_atomic(&output.join("ecdf.csv"), &csv_bytes(|b| resp.ecdf.write_csv(b))?)?;
            let mut summary = serde_json::to_vec_pretty(&resp.summary).expect("summary serializes");
            summary.push(b'\n');
            write_atomic(&output.join("summary.json"), &summary)?;
            if resp.summary.negative > 0 {
                tracing::warn!("{} of {} samples are negative", resp.summary.negative, resp.summary.n);
            }
            println!("{}", resp.summary);
        }
        Command::Online {
            input,
            run,
            app_id,
            output,
            variant,
            model,
            samples,
            seed,
            overhead,
        } => {
            let fitted = load_model(&input)?;
            let traces = load_traces(&run)?;
            let actual = match (&app_id, traces.runs()) {
                (Some(id), _) => traces
                    .find_run(id)
                    .ok_or_else(|| Failure::Usage(format!("{}: no run `{id}`", run.display())))?
                    .clone(),
                (None, [only]) => only.clone(),
                (None, runs) => {
                    return Err(Failure::Usage(format!(
                        "{} holds {} runs; choose one with --app-id",
                        run.display(),
                        runs.len()
                    )))
                }
            };
            let options = TrajectoryOptions {
                structure: model,
                include_overhead: overhead == OverheadMode::Fitted,
            };
            let t = client
                .trajectory(fitted, actual, variant, samples, seed, options)
                .await?;
            write_atomic(&output, &csv_bytes(|b| t.write_csv(b))?)?;
            if let Some(last) = t.points.last() {
                println!(
                    "{} points, final p50 {} s, actual {} s",
                    t.points.len(),
                    last.p50,
                    t.actual_total
                );
            }
        }
        Command::Synth { input, output, seed } => {
            let bytes = read(&input)?;
            let mut spec: GeneratorSpec = serde_json::from_slice(&bytes).map_err(|e| Failure::parse(&input, e))?;
            if let Some(seed) = seed {
                spec = spec.reseeded(seed);
            }
            let out = client.synth(spec).await?;
            write_atomic(&output.join("traces.json"), &serialize_traces(&out.traces))?;
            write_atomic(&output.join("truth.json"), &out.truth.to_json())?;
            println!("{} runs of {} jobs", out.traces.len(), out.truth.spec.n_jobs());
        }
        Command::Compare {
            input,
            actual,
            output,
            overhead,
            svg,
        } => {
            let predicted = read_values(&read(&input)?[..]).map_err(|e| Failure::parse(&input, e))?;
            let traces = load_traces(&actual)?;
            let observed: Vec<f64> = traces
                .runs()
                .iter()
                .map(|r| match overhead {
                    OverheadMode::Fitted => r.wall_time_s,
                    OverheadMode::Zero => r.job_sum(),
                })
                .collect();
            let resp = client.compare(predicted, observed).await?;
            write_atomic(
                &output.join("predicted_ecdf.csv"),
                &csv_bytes(|b| resp.predicted_ecdf.write_csv(b))?,
            )?;
            write_atomic(
                &output.join("actual_ecdf.csv"),
                &csv_bytes(|b| resp.actual_ecdf.write_csv(b))?,
            )?;
            write_atomic(&output.join("ks.txt"), format!("{}\n", resp.ks).as_bytes())?;
            if svg {
                let doc = svg::overlay(&resp.predicted_ecdf, &resp.actual_ecdf);
                write_atomic(&output.join("overlay.svg"), doc.as_bytes())?;
            }
            println!("KS {}", resp.ks);
            println!("predicted: {}", resp.predicted_summary);
            println!("actual:    {}", resp.actual_summary);
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .without_time()
        .with_env_filter(EnvFilter::try_from_env("RUNTIME_ORACLE_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .init();

    // clap's own exit code for bad flags is 2, which is taken by "missing file"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("runtime-oracle: error: {f}");
            ExitCode::from(f.code())
        }
    }
}
