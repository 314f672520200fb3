//! Session trace: an ordered event log persisted as JSON lines.
//!
//! Each line is one object `{"session", "seq", "ts", "event", ...fields}`.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::Provenance;
use crate::exec::ExecStatus;
use crate::report::{AgentKind, Verdict};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace io on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("trace line {line} belongs to session {found:?}, expected {expected:?}")]
    MixedSessions {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("trace file {0} is empty")]
    Empty(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionOutcome {
    Success,
    PlanFailure,
    CodeFailure,
    FeedbackExhaustedWithFigure,
}

impl SessionOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionOutcome::Success => "success",
            SessionOutcome::PlanFailure => "plan-failure",
            SessionOutcome::CodeFailure => "code-failure",
            SessionOutcome::FeedbackExhaustedWithFigure => "feedback-exhausted-with-figure",
        }
    }

    pub fn has_figure(self) -> bool {
        matches!(
            self,
            SessionOutcome::Success | SessionOutcome::FeedbackExhaustedWithFigure
        )
    }
}

impl fmt::Display for SessionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    PlanMade {
        steps: Vec<String>,
    },
    DraftCreated {
        version: u32,
        provenance: Provenance,
    },
    Executed {
        version: u32,
        status: ExecStatus,
        wall_time_ms: u64,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        traceback: String,
    },
    FeedbackIssued {
        agent: AgentKind,
        verdict: Verdict,
        iteration: u32,
        message: String,
    },
    /// A revision could not be made to run; the session continues from
    /// `to_version`.
    RolledBack {
        agent: AgentKind,
        iteration: u32,
        to_version: u32,
        reason: String,
    },
    /// The verifier itself failed; counted as a failing verdict.
    VerifierError {
        agent: AgentKind,
        iteration: u32,
        error: String,
    },
    SessionEnded {
        outcome: SessionOutcome,
        figure: Option<PathBuf>,
        llm_calls: u64,
        prompt_tokens: u64,
        completion_tokens: u64,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        detail: String,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::PlanMade { .. } => "plan_made",
            Event::DraftCreated { .. } => "draft_created",
            Event::Executed { .. } => "executed",
            Event::FeedbackIssued { .. } => "feedback_issued",
            Event::RolledBack { .. } => "rolled_back",
            Event::VerifierError { .. } => "verifier_error",
            Event::SessionEnded { .. } => "session_ended",
        }
    }
}

fn first_line(s: &str) -> &str {
    s.lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("")
        .trim()
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::PlanMade { steps } => write!(f, "plan with {} step(s)", steps.len()),
            Event::DraftCreated {
                version,
                provenance,
            } => {
                write!(f, "draft v{version} ")?;
                match provenance {
                    Provenance::Initial => f.write_str("(initial)"),
                    Provenance::DebugFix { iteration } => write!(f, "(debug fix {iteration})"),
                    Provenance::FeedbackFix { agent, iteration } => {
                        write!(f, "({agent} feedback fix {iteration})")
                    }
                }
            }
            Event::Executed {
                version,
                status,
                wall_time_ms,
                traceback,
            } => {
                write!(f, "executed v{version}: {status} in {wall_time_ms} ms")?;
                if !traceback.is_empty() {
                    let last = traceback
                        .lines()
                        .rev()
                        .find(|l| !l.trim().is_empty())
                        .unwrap_or("");
                    write!(f, " ({})", last.trim())?;
                }
                Ok(())
            }
            Event::FeedbackIssued {
                agent,
                verdict,
                iteration,
                message,
            } => {
                write!(f, "{agent} feedback #{iteration}: {verdict}")?;
                if !message.is_empty() {
                    write!(f, " ({})", first_line(message))?;
                }
                Ok(())
            }
            Event::RolledBack {
                agent,
                iteration,
                to_version,
                reason,
            } => write!(
                f,
                "{agent} revision #{iteration} rolled back to v{to_version}: {}",
                first_line(reason)
            ),
            Event::VerifierError {
                agent,
                iteration,
                error,
            } => {
                write!(f, "{agent} verifier error #{iteration}: {error}")
            }
            Event::SessionEnded {
                outcome,
                figure,
                llm_calls,
                prompt_tokens,
                completion_tokens,
                ..
            } => {
                write!(f, "session ended: {outcome}")?;
                if let Some(figure) = figure {
                    write!(f, ", figure {}", figure.display())?;
                }
                write!(
                    f,
                    ", {llm_calls} LLM call(s), {prompt_tokens}+{completion_tokens} tokens"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub session: String,
    pub seq: u32,
    /// RFC 3339 UTC timestamp.
    pub ts: String,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub session_id: String,
    pub records: Vec<TraceRecord>,
}

impl SessionTrace {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, event: Event) {
        tracing::debug!(session = %self.session_id, "{event}");
        self.records.push(TraceRecord {
            session: self.session_id.clone(),
            seq: self.records.len() as u32,
            ts: Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true),
            event,
        });
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().map(|r| &r.event)
    }

    fn ended(&self) -> Option<&Event> {
        match self.records.last().map(|r| &r.event) {
            Some(e @ Event::SessionEnded { .. }) => Some(e),
            _ => None,
        }
    }

    /// Exactly one `SessionEnded`, and it is the last event.
    pub fn is_complete(&self) -> bool {
        self.ended().is_some()
            && self
                .events()
                .filter(|e| matches!(e, Event::SessionEnded { .. }))
                .count()
                == 1
    }

    pub fn outcome(&self) -> Option<SessionOutcome> {
        match self.ended()? {
            Event::SessionEnded { outcome, .. } => Some(*outcome),
            _ => None,
        }
    }

    pub fn final_figure(&self) -> Option<&Path> {
        match self.ended()? {
            Event::SessionEnded { figure, .. } => figure.as_deref(),
            _ => None,
        }
    }

    pub fn llm_calls(&self) -> u64 {
        match self.ended() {
            Some(Event::SessionEnded { llm_calls, .. }) => *llm_calls,
            _ => 0,
        }
    }

    /// Checks the ordering invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.is_complete() {
            return Err("trace must contain exactly one session_ended event, last".into());
        }
        let mut pending: Option<u32> = None;
        for (i, event) in self.events().enumerate() {
            match event {
                Event::DraftCreated { version, .. } => {
                    if let Some(p) = pending {
                        return Err(format!("draft v{p} never executed before event {i}"));
                    }
                    pending = Some(*version);
                }
                Event::Executed { version, .. } => {
                    if pending != Some(*version) {
                        return Err(format!(
                            "event {i} executes v{version} without a matching draft"
                        ));
                    }
                    pending = None;
                }
                _ => {}
            }
        }
        match pending {
            Some(v) => Err(format!("draft v{v} never executed")),
            None => Ok(()),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }

    /// JSON lines with timestamps and wall times zeroed, for comparing runs.
    pub fn canonical_jsonl(&self) -> String {
        let mut masked = self.clone();
        for record in &mut masked.records {
            record.ts = String::new();
            if let Event::Executed { wall_time_ms, .. } = &mut record.event {
                *wall_time_ms = 0;
            }
        }
        masked.to_jsonl()
    }
}

/// Writes the trace as JSON lines. The trace must be complete.
pub fn persist_trace(trace: &SessionTrace, path: &Path) -> Result<(), TraceError> {
    assert!(
        trace.is_complete(),
        "persist_trace requires a completed trace"
    );
    let io = |source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io)?;
    file.write_all(trace.to_jsonl().as_bytes()).map_err(io)?;
    file.flush().map_err(io)
}

pub fn load_trace(path: &Path) -> Result<SessionTrace, TraceError> {
    let io = |source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut records: Vec<TraceRecord> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord =
            serde_json::from_str(&line).map_err(|source| TraceError::Parse {
                line: i + 1,
                source,
            })?;
        if let Some(first) = records.first() {
            if first.session != record.session {
                return Err(TraceError::MixedSessions {
                    line: i + 1,
                    expected: first.session.clone(),
                    found: record.session,
                });
            }
        }
        records.push(record);
    }
    let session_id = records
        .first()
        .map(|r| r.session.clone())
        .ok_or_else(|| TraceError::Empty(path.to_path_buf()))?;
    Ok(SessionTrace {
        session_id,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SessionTrace {
        let mut t = SessionTrace::new("s1");
        t.push(Event::PlanMade {
            steps: vec!["load".into(), "plot".into()],
        });
        t.push(Event::DraftCreated {
            version: 1,
            provenance: Provenance::Initial,
        });
        t.push(Event::Executed {
            version: 1,
            status: ExecStatus::Success,
            wall_time_ms: 12,
            traceback: String::new(),
        });
        t.push(Event::FeedbackIssued {
            agent: AgentKind::Numeric,
            verdict: Verdict::Pass,
            iteration: 1,
            message: "ok".into(),
        });
        t.push(Event::SessionEnded {
            outcome: SessionOutcome::Success,
            figure: Some("/out/s1/figure_v1.png".into()),
            llm_calls: 3,
            prompt_tokens: 10,
            completion_tokens: 5,
            detail: String::new(),
        });
        t
    }

    #[test]
    fn round_trip_and_line_count() {
        let t = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        persist_trace(&t, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text
            .lines()
            .next()
            .unwrap()
            .contains("\"event\":\"plan_made\""));
        assert_eq!(load_trace(&path).unwrap(), t);
        assert_eq!(t.check_invariants(), Ok(()));
        assert_eq!(t.final_figure(), Some(Path::new("/out/s1/figure_v1.png")));
    }

    #[test]
    #[should_panic(expected = "completed trace")]
    fn incomplete_trace_is_rejected() {
        let mut t = sample();
        t.records.pop();
        let dir = tempfile::tempdir().unwrap();
        let _ = persist_trace(&t, &dir.path().join("t.jsonl"));
    }

    #[test]
    fn invariants_catch_unexecuted_drafts() {
        let mut t = SessionTrace::new("s");
        t.push(Event::DraftCreated {
            version: 1,
            provenance: Provenance::Initial,
        });
        t.push(Event::DraftCreated {
            version: 2,
            provenance: Provenance::DebugFix { iteration: 1 },
        });
        t.push(Event::SessionEnded {
            outcome: SessionOutcome::CodeFailure,
            figure: None,
            llm_calls: 0,
            prompt_tokens: 0,
            completion_tokens: 0,
            detail: String::new(),
        });
        assert!(t.check_invariants().is_err());
    }

    #[test]
    fn canonical_form_masks_time() {
        let a = sample();
        let mut b = sample();
        b.records[0].ts = "2000-01-01T00:00:00Z".into();
        if let Event::Executed { wall_time_ms, .. } = &mut b.records[2].event {
            *wall_time_ms = 999;
        }
        assert_ne!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.canonical_jsonl(), b.canonical_jsonl());
    }
}
