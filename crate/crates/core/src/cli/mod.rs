//! Command-line interface.

pub mod config;

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{load_benchmark, run_benchmark, BenchConfig};
use crate::orchestrator::run_session;
use crate::task::UserRequest;
use crate::trace::load_trace;

use config::{split_command, BackendLayer, CliConfig, ConfigLayer, ModelsLayer, CONFIG_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "plotgen",
    version,
    about = "Generate scientific plots from natural-language requests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one session and print the figure path on the last line.
    Run {
        /// File containing the request text; its stem is the session id.
        #[arg(long)]
        request: PathBuf,
        /// CSV data file.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the benchmark harness over a dataset directory.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        workers: u32,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Inspect session traces.
    Trace {
        #[command(subcommand)]
        command: TraceCommand,
    },
}

#[derive(Debug, Subcommand)]
enum TraceCommand {
    /// Print one line per event.
    Show { path: PathBuf },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML config file (overridden by PLOTGEN_CONFIG).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Answer model calls from this cassette directory only.
    #[arg(long, conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Call the live model and store cassettes in this directory.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    max_debug_iterations: Option<u32>,
    #[arg(long)]
    max_feedback_iterations: Option<u32>,
    #[arg(long)]
    time_limit_secs: Option<f64>,
    /// Runner command line; the job file path is appended.
    #[arg(long)]
    runner: Option<String>,
}

impl CommonArgs {
    fn flag_layer(&self) -> ConfigLayer {
        let backend = match (&self.replay, &self.record) {
            (Some(dir), _) => BackendLayer {
                mode: Some("replay".into()),
                cassette_dir: Some(dir.clone()),
                ..Default::default()
            },
            (None, Some(dir)) => BackendLayer {
                mode: Some("record".into()),
                cassette_dir: Some(dir.clone()),
                ..Default::default()
            },
            (None, None) => BackendLayer::default(),
        };
        ConfigLayer {
            max_debug_iterations: self.max_debug_iterations,
            max_feedback_iterations: self.max_feedback_iterations,
            time_limit_secs: self.time_limit_secs,
            runner: self.runner.as_deref().map(split_command),
            models: ModelsLayer::default(),
            backend,
            ..Default::default()
        }
    }

    fn resolve(&self, env: &HashMap<String, String>) -> Result<CliConfig, String> {
        let mut layers = Vec::new();
        let file = env
            .get(CONFIG_ENV)
            .map(PathBuf::from)
            .or_else(|| self.config.clone());
        if let Some(path) = file {
            layers.push(ConfigLayer::load(&path).map_err(|e| e.to_string())?);
        }
        layers.push(self.flag_layer());
        layers.push(ConfigLayer::from_env(env).map_err(|e| e.to_string())?);
        CliConfig::resolve(&layers).map_err(|e| e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command; returns
/// the process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env: HashMap<String, String> = std::env::vars().collect();
    dispatch_with_env(args, &env)
}

pub fn dispatch_with_env<I, T>(args: I, env: &HashMap<String, String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run {
            request,
            data,
            out,
            common,
        } => run_command(&request, &data, &out, &common, env),
        Command::Bench {
            dataset,
            out,
            workers,
            common,
        } => bench_command(&dataset, &out, workers as usize, &common, env),
        Command::Trace {
            command: TraceCommand::Show { path },
        } => trace_show(&path),
    }
}

fn usage_error(message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    EXIT_USAGE
}

fn run_command(
    request_path: &Path,
    data: &Path,
    out: &Path,
    common: &CommonArgs,
    env: &HashMap<String, String>,
) -> i32 {
    let config = match common.resolve(env) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    let text = match std::fs::read_to_string(request_path) {
        Ok(t) => t,
        Err(e) => return usage_error(format!("cannot read {}: {e}", request_path.display())),
    };
    let Some(id) = request_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
    else {
        return usage_error(format!("{} has no file name", request_path.display()));
    };
    let request = UserRequest::new(id, text.trim(), data, out);
    let backend = config.backend.connect();
    let (result, trace) = run_session(backend.as_ref(), &request, &config.pipeline);
    println!("outcome: {}", result.outcome);
    println!("trace: {}", request.trace_path().display());
    match result.figure_path {
        Some(figure) if result.outcome.has_figure() => {
            println!("{}", figure.display());
            EXIT_OK
        }
        _ => {
            if let Some(crate::trace::Event::SessionEnded { detail, .. }) = trace.events().last() {
                if !detail.is_empty() {
                    eprintln!("{detail}");
                }
            }
            EXIT_FAILURE
        }
    }
}

fn bench_command(
    dataset: &Path,
    out: &Path,
    workers: usize,
    common: &CommonArgs,
    env: &HashMap<String, String>,
) -> i32 {
    let config = match common.resolve(env) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    let items = match load_benchmark(dataset) {
        Ok(items) => items,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let backend = config.backend.connect();
    let bench = BenchConfig {
        pipeline: config.pipeline,
        out_dir: out.to_path_buf(),
        workers,
    };
    match run_benchmark(backend.as_ref(), &items, &bench) {
        Ok(run) => {
            print!("{}", run.report);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn trace_show(path: &Path) -> i32 {
    match load_trace(path) {
        Ok(trace) => {
            for record in &trace.records {
                println!("{:>3} {} {}", record.seq, record.ts, record.event);
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
