//! Verifiers that inspect a draft figure and report what to fix.

pub mod derender;
pub mod lexical;
pub mod numeric;
pub mod spearman;
pub mod verdict;
pub mod visual;

use std::path::PathBuf;

use thiserror::Error;

use crate::gateway::GatewayError;

pub use derender::derender_with_model;
pub use lexical::lexical_check;
pub use numeric::{
    infer_expected_kind, numeric_check, trend_check, ExpectedChartKind, NumericCheckConfig,
    TrendCheckResult,
};
pub use spearman::{spearman_rank_correlation, CorrelationError};
pub use verdict::{parse_feedback_verdict, VerdictParseError};
pub use visual::visual_review;

/// Failures of a verifier itself, as opposed to a failing verdict.
#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Verdict(#[from] VerdictParseError),
    #[error("could not read figure {path}: {source}")]
    Figure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model de-rendering failed: {0}")]
    Derender(String),
    #[error("no de-rendered data available for the figure")]
    MissingDerender,
}
