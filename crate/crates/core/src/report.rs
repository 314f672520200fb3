//! Feedback reports exchanged between verifiers and the code agent.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Numeric,
    Lexical,
    Visual,
    Debug,
}

impl AgentKind {
    pub const FEEDBACK: [AgentKind; 3] =
        [AgentKind::Numeric, AgentKind::Lexical, AgentKind::Visual];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Numeric => "numeric",
            AgentKind::Lexical => "lexical",
            AgentKind::Visual => "visual",
            AgentKind::Debug => "debug",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" => Ok(AgentKind::Numeric),
            "lexical" => Ok(AgentKind::Lexical),
            "visual" => Ok(AgentKind::Visual),
            "debug" => Ok(AgentKind::Debug),
            other => Err(format!("unknown agent kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// One verifier's judgement of a draft figure. A failing report always
/// carries a non-empty message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub agent: AgentKind,
    pub verdict: Verdict,
    pub message: String,
    pub iteration: u32,
}

impl FeedbackReport {
    pub fn pass(agent: AgentKind, iteration: u32, message: impl Into<String>) -> Self {
        Self {
            agent,
            verdict: Verdict::Pass,
            message: message.into(),
            iteration,
        }
    }

    pub fn fail(agent: AgentKind, iteration: u32, message: impl Into<String>) -> Self {
        let mut message = message.into();
        if message.trim().is_empty() {
            message = format!("unspecified {agent} issue");
        }
        Self {
            agent,
            verdict: Verdict::Fail,
            message,
            iteration,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}
