//! Runner result protocol: one sentinel-delimited JSON block on stdout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plot::DerenderedPlot;

pub const RESULT_BEGIN: &str = "---PLOTGEN-RESULT-BEGIN---";
pub const RESULT_END: &str = "---PLOTGEN-RESULT-END---";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("no result block in runner output")]
    MissingBlock,
    #[error("result block is not terminated")]
    Unterminated,
    #[error("runner output contains {0} result blocks")]
    MultipleBlocks(usize),
    #[error("malformed result payload: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecStatus {
    Success,
    #[serde(alias = "runtime_error")]
    RuntimeError,
    Timeout,
    #[serde(alias = "runner_crash")]
    RunnerCrash,
}

impl ExecStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecStatus::Success => "success",
            ExecStatus::RuntimeError => "runtime-error",
            ExecStatus::Timeout => "timeout",
            ExecStatus::RunnerCrash => "runner-crash",
        }
    }
}

impl std::fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The JSON payload between the sentinels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerPayload {
    pub status: ExecStatus,
    #[serde(default)]
    pub traceback: String,
    #[serde(default)]
    pub figure_path: Option<String>,
    #[serde(default)]
    pub derendered: Option<DerenderedPlot>,
}

/// A parsed runner result plus whatever the program printed around it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunnerReport {
    pub payload: RunnerPayload,
    pub program_output: String,
}

/// Renders a payload as the runner would print it.
pub fn render_result_block(payload: &RunnerPayload) -> String {
    format!(
        "{RESULT_BEGIN}\n{}\n{RESULT_END}\n",
        serde_json::to_string(payload).expect("payload serializes")
    )
}

/// Parses runner stdout. Pure function of the bytes.
pub fn parse_runner_result(stdout: &[u8]) -> Result<RunnerReport, ProtocolError> {
    let text = String::from_utf8_lossy(stdout);
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let is = |line: &str, sentinel: &str| line.trim_end_matches(['\n', '\r']) == sentinel;

    let begins: Vec<usize> = (0..lines.len())
        .filter(|&i| is(lines[i], RESULT_BEGIN))
        .collect();
    let begin = match begins.as_slice() {
        [] => return Err(ProtocolError::MissingBlock),
        [b] => *b,
        many => return Err(ProtocolError::MultipleBlocks(many.len())),
    };
    let end = (begin + 1..lines.len())
        .find(|&i| is(lines[i], RESULT_END))
        .ok_or(ProtocolError::Unterminated)?;
    if lines.iter().filter(|l| is(l, RESULT_END)).count() > 1 {
        return Err(ProtocolError::MultipleBlocks(2));
    }

    let body: String = lines[begin + 1..end].concat();
    let payload: RunnerPayload =
        serde_json::from_str(&body).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    if let Some(plot) = &payload.derendered {
        plot.validate().map_err(ProtocolError::Malformed)?;
    }
    let program_output = lines[..begin].concat() + &lines[end + 1..].concat();
    Ok(RunnerReport {
        payload,
        program_output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SUCCESS: &str = r#"{"status":"success","traceback":"","figure_path":"/tmp/f.png","derendered":{"series":[{"name":"y","x":[0,1,2],"y":[1,2,3],"kind":"line"}],"title":"T"}}"#;

    fn block(payload: &str) -> String {
        format!("{RESULT_BEGIN}\n{payload}\n{RESULT_END}\n")
    }

    #[test]
    fn parses_success_payload() {
        let report = parse_runner_result(block(SUCCESS).as_bytes()).unwrap();
        assert_eq!(report.payload.status, ExecStatus::Success);
        assert_eq!(report.payload.figure_path.as_deref(), Some("/tmp/f.png"));
        assert_eq!(
            report.payload.derendered.unwrap().series[0].y,
            [1.0, 2.0, 3.0]
        );
        assert_eq!(report.program_output, "");
    }

    #[test]
    fn preserves_program_output_around_block() {
        let out = format!("hello\nworld\n{}bye\n", block(SUCCESS));
        let report = parse_runner_result(out.as_bytes()).unwrap();
        assert_eq!(report.program_output, "hello\nworld\nbye\n");
    }

    #[test]
    fn runtime_error_payload() {
        let payload = r#"{"status":"runtime-error","traceback":"ZeroDivisionError: division by zero","figure_path":null,"derendered":null}"#;
        let report = parse_runner_result(block(payload).as_bytes()).unwrap();
        assert_eq!(report.payload.status, ExecStatus::RuntimeError);
        assert!(report.payload.traceback.contains("ZeroDivisionError"));
    }

    #[test]
    fn malformed_outputs_are_protocol_errors() {
        assert_eq!(
            parse_runner_result(b"just prints\n"),
            Err(ProtocolError::MissingBlock)
        );
        let truncated = format!("{RESULT_BEGIN}\n{{\"status\":\"succ");
        assert_eq!(
            parse_runner_result(truncated.as_bytes()),
            Err(ProtocolError::Unterminated)
        );
        let cut = format!("{RESULT_BEGIN}\n{{\"status\":\"succ\n{RESULT_END}\n");
        assert!(matches!(
            parse_runner_result(cut.as_bytes()),
            Err(ProtocolError::Malformed(_))
        ));
        let twice = block(SUCCESS) + &block(SUCCESS);
        assert!(matches!(
            parse_runner_result(twice.as_bytes()),
            Err(ProtocolError::MultipleBlocks(_))
        ));
        let bad_plot =
            r#"{"status":"success","derendered":{"series":[{"x":[1],"y":[1,2],"kind":"line"}]}}"#;
        assert!(matches!(
            parse_runner_result(block(bad_plot).as_bytes()),
            Err(ProtocolError::Malformed(_))
        ));
    }

    #[test]
    fn render_round_trips() {
        let payload = RunnerPayload {
            status: ExecStatus::Timeout,
            traceback: "slow".into(),
            figure_path: None,
            derendered: None,
        };
        let report = parse_runner_result(render_result_block(&payload).as_bytes()).unwrap();
        assert_eq!(report.payload, payload);
    }

    proptest! {
        #[test]
        fn surrounding_output_never_changes_payload(
            before in "[a-z ]{0,40}(\n[a-z ]{0,40}){0,3}",
            after in "[a-z ]{0,40}",
        ) {
            let stdout = format!("{before}\n{}{after}", block(SUCCESS));
            let a = parse_runner_result(stdout.as_bytes()).unwrap();
            let b = parse_runner_result(stdout.as_bytes()).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.payload.status, ExecStatus::Success);
            prop_assert_eq!(a.program_output, format!("{before}\n{after}"));
        }
    }
}
