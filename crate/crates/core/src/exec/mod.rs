//! Execution controller: runs a draft in a fresh runner process and turns the
//! runner's report into an [`ExecutionOutcome`].
//!
//! The runner is any executable that accepts one argument, the path of a job
//! spec JSON file, and prints exactly one result block (see [`protocol`]).
//! Each execution gets its own process group, which is killed on timeout and
//! swept after exit.

pub mod protocol;
mod supervise;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::CodeDraft;
use crate::plot::DerenderedPlot;
use crate::task::UserRequest;

pub use protocol::{
    parse_runner_result, ExecStatus, ProtocolError, RunnerPayload, RunnerReport, RESULT_BEGIN,
    RESULT_END,
};

pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(60);
pub const DEFAULT_RUNNER: &str = "plotgen-runner";
const PNG_SIGNATURE: [u8; 8] = [0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A];
const STDERR_TAIL: usize = 4000;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("cannot prepare scratch directory {path}: {source}")]
    Scratch {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The job spec handed to the runner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerJob {
    pub code_path: PathBuf,
    pub data_path: PathBuf,
    pub figure_out_path: PathBuf,
    pub derender: bool,
    #[serde(skip)]
    pub time_limit: Duration,
}

impl RunnerJob {
    fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("code_path", &self.code_path),
            ("data_path", &self.data_path),
            ("figure_out_path", &self.figure_out_path),
        ] {
            if !p.is_absolute() {
                return Err(format!("{name} {} is not absolute", p.display()));
            }
        }
        if self.time_limit.is_zero() {
            return Err("time limit must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecConfig {
    /// Runner program followed by any leading arguments; the job path is appended.
    pub runner: Vec<String>,
    pub time_limit: Duration,
    pub derender: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            runner: vec![DEFAULT_RUNNER.to_string()],
            time_limit: DEFAULT_TIME_LIMIT,
            derender: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    /// Empty exactly when `status` is success.
    pub traceback: String,
    pub figure_path: Option<PathBuf>,
    pub derendered: Option<DerenderedPlot>,
    pub wall_time: Duration,
    /// Runner stdout outside the result block.
    pub program_output: String,
    pub stderr: String,
}

impl ExecutionOutcome {
    pub fn is_success(&self) -> bool {
        self.status == ExecStatus::Success
    }

    fn failure(status: ExecStatus, traceback: String, wall_time: Duration) -> Self {
        Self {
            status,
            traceback,
            figure_path: None,
            derendered: None,
            wall_time,
            program_output: String::new(),
            stderr: String::new(),
        }
    }

    pub fn runner_crash(message: impl Into<String>) -> Self {
        Self::failure(ExecStatus::RunnerCrash, message.into(), Duration::ZERO)
    }
}

/// True when the file starts with the PNG signature and decodes.
pub fn is_decodable_png(path: &Path) -> bool {
    let Ok(bytes) = std::fs::read(path) else {
        return false;
    };
    if !bytes.starts_with(&PNG_SIGNATURE) {
        return false;
    }
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let Ok(mut reader) = decoder.read_info() else {
        return false;
    };
    let Some(size) = reader.output_buffer_size() else {
        return false;
    };
    let mut buf = vec![0; size];
    reader.next_frame(&mut buf).is_ok()
}

fn tail(text: &str, max: usize) -> &str {
    if text.len() <= max {
        return text;
    }
    let mut start = text.len() - max;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    &text[start..]
}

/// Writes the draft and job spec into the session directory, runs the runner,
/// and classifies the result. Scratch files are left in place.
pub fn execute_draft(
    draft: &CodeDraft,
    request: &UserRequest,
    config: &ExecConfig,
) -> Result<ExecutionOutcome, ExecError> {
    let dir = request.session_dir();
    let scratch = |source| ExecError::Scratch {
        path: dir.clone(),
        source,
    };
    std::fs::create_dir_all(&dir).map_err(scratch)?;
    let dir = dir.canonicalize().map_err(scratch)?;
    let data_path = std::path::absolute(&request.data_path).map_err(scratch)?;

    let job = RunnerJob {
        code_path: dir.join(format!("draft_v{}.py", draft.version)),
        data_path,
        figure_out_path: dir.join(format!("figure_v{}.png", draft.version)),
        derender: config.derender,
        time_limit: config.time_limit,
    };
    if let Err(msg) = job.validate() {
        return Ok(ExecutionOutcome::runner_crash(format!(
            "invalid runner job: {msg}"
        )));
    }
    std::fs::write(&job.code_path, &draft.source).map_err(scratch)?;
    // A stale figure from an earlier run must not pass for this draft's output.
    match std::fs::remove_file(&job.figure_out_path) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(scratch(e)),
    }
    let job_path = dir.join(format!("job_v{}.json", draft.version));
    let spec = serde_json::to_vec_pretty(&job).expect("job spec serializes");
    std::fs::write(&job_path, spec).map_err(scratch)?;

    let run = match supervise::run_supervised(&config.runner, &job_path, &dir, job.time_limit) {
        Ok(run) => run,
        Err(e) => {
            return Ok(ExecutionOutcome::runner_crash(format!(
                "failed to start runner {:?}: {e}",
                config.runner
            )))
        }
    };
    let stderr = String::from_utf8_lossy(&run.stderr).into_owned();

    let exit_status = match run.exit {
        supervise::Exit::TimedOut => {
            let mut outcome = ExecutionOutcome::failure(
                ExecStatus::Timeout,
                format!(
                    "TimeoutError: execution exceeded the {:.1} s time limit",
                    job.time_limit.as_secs_f64()
                ),
                run.elapsed,
            );
            outcome.stderr = stderr;
            return Ok(outcome);
        }
        supervise::Exit::Finished(status) => status,
    };

    let report = match parse_runner_result(&run.stdout) {
        Ok(report) => report,
        Err(e) => {
            let mut outcome = ExecutionOutcome::failure(
                ExecStatus::RunnerCrash,
                format!(
                    "runner exited with {exit_status} without a valid result: {e}\n{}",
                    tail(&stderr, STDERR_TAIL)
                ),
                run.elapsed,
            );
            outcome.program_output = String::from_utf8_lossy(&run.stdout).into_owned();
            outcome.stderr = stderr;
            return Ok(outcome);
        }
    };

    let mut outcome = ExecutionOutcome {
        status: report.payload.status,
        traceback: report.payload.traceback,
        figure_path: None,
        derendered: report.payload.derendered,
        wall_time: run.elapsed,
        program_output: report.program_output,
        stderr,
    };
    match outcome.status {
        ExecStatus::Success => {
            let figure = report
                .payload
                .figure_path
                .map(PathBuf::from)
                .unwrap_or_else(|| job.figure_out_path.clone());
            if !is_decodable_png(&figure) {
                outcome.status = ExecStatus::RuntimeError;
                outcome.traceback = format!(
                    "FigureError: no decodable PNG figure was written to {}",
                    figure.display()
                );
                outcome.derendered = None;
            } else if config.derender && outcome.derendered.is_none() {
                outcome.status = ExecStatus::RunnerCrash;
                outcome.traceback = "runner reported success without de-rendered data".into();
            } else {
                outcome.traceback.clear();
                outcome.figure_path = Some(figure);
            }
        }
        _ => {
            outcome.derendered = None;
            if outcome.traceback.trim().is_empty() {
                outcome.traceback = format!("{} without details", outcome.status);
            }
        }
    }
    Ok(outcome)
}
