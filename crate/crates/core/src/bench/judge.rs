use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::is_decodable_png;
use crate::gateway::{
    chat_complete, ChatBackend, ChatMessage, ChatRequest, GatewayError, ModelSettings,
};

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("judge response has no valid SCORE line")]
    ScoreParse,
    #[error("judge score {0} is outside 0..=100")]
    ScoreOutOfRange(i64),
    #[error("{0} is not a decodable PNG")]
    InvalidImage(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub value: u8,
    pub rationale: String,
}

static SCORE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"SCORE:\s*(-?\d+)(\.\d*)?").unwrap());

const RUBRIC: &str = "You are grading a generated scientific plot against a ground-truth plot. \
The first image is the generated plot, the second is the ground truth. Compare them on three \
dimensions: (1) data: are the same values plotted with the same trends and chart type; \
(2) labels: do the title, axis labels, tick labels and legend match; (3) visual style: do \
colors, layout and markers resemble the ground truth. Explain briefly, then end with a final \
line of the form\nSCORE: <integer from 0 to 100>";

pub fn build_judge_prompt(
    generated: Vec<u8>,
    ground_truth: Vec<u8>,
    settings: &ModelSettings,
) -> ChatRequest {
    ChatRequest::new(
        settings,
        vec![ChatMessage::user(RUBRIC)
            .with_png(generated)
            .with_png(ground_truth)],
    )
}

/// Reads the last `SCORE: <n>` in the text. Non-integer scores do not parse.
pub fn parse_score(text: &str) -> Result<JudgeScore, JudgeError> {
    let caps = SCORE_LINE
        .captures_iter(text)
        .last()
        .ok_or(JudgeError::ScoreParse)?;
    if caps.get(2).is_some() {
        return Err(JudgeError::ScoreParse);
    }
    let value: i64 = match caps[1].parse() {
        Ok(v) => v,
        Err(_) if caps[1].starts_with('-') => i64::MIN,
        Err(_) => i64::MAX,
    };
    if !(0..=100).contains(&value) {
        return Err(JudgeError::ScoreOutOfRange(value));
    }
    let whole = caps.get(0).unwrap();
    let rationale = format!("{}{}", &text[..whole.start()], &text[whole.end()..]);
    Ok(JudgeScore {
        value: value as u8,
        rationale: rationale.trim().to_string(),
    })
}

/// Grades `generated` against `ground_truth`; retries once when the reply has
/// no parseable score. Out-of-range scores are not retried.
pub fn judge_figure(
    backend: &dyn ChatBackend,
    generated: &Path,
    ground_truth: &Path,
    settings: &ModelSettings,
) -> Result<JudgeScore, JudgeError> {
    let mut images = Vec::with_capacity(2);
    for path in [generated, ground_truth] {
        if !is_decodable_png(path) {
            return Err(JudgeError::InvalidImage(path.to_path_buf()));
        }
        images.push(std::fs::read(path).map_err(|_| JudgeError::InvalidImage(path.to_path_buf()))?);
    }
    let ground_truth = images.pop().unwrap();
    let generated = images.pop().unwrap();
    let mut prompt = build_judge_prompt(generated, ground_truth, settings);
    let first = chat_complete(backend, &prompt)?;
    match parse_score(&first.text) {
        Err(JudgeError::ScoreParse) => {
            prompt.messages.push(ChatMessage::assistant(first.text));
            prompt.messages.push(ChatMessage::user(
                "Your answer did not end with a valid score line. Reply again and finish with\nSCORE: <integer from 0 to 100>",
            ));
            let second = chat_complete(backend, &prompt)?;
            parse_score(&second.text)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_last_score() {
        assert_eq!(
            parse_score("the plot matches well. SCORE: 85")
                .unwrap()
                .value,
            85
        );
        assert_eq!(
            parse_score("SCORE: 10\nrevised\nSCORE: 40").unwrap().value,
            40
        );
        assert_eq!(parse_score("SCORE:100").unwrap().value, 100);
        assert_eq!(parse_score("ok SCORE: 7").unwrap().rationale, "ok");
    }

    #[test]
    fn rejects_bad_scores() {
        assert!(matches!(
            parse_score("SCORE: 150"),
            Err(JudgeError::ScoreOutOfRange(150))
        ));
        assert!(matches!(
            parse_score("SCORE: -1"),
            Err(JudgeError::ScoreOutOfRange(-1))
        ));
        assert!(matches!(
            parse_score("SCORE: 85.5"),
            Err(JudgeError::ScoreParse)
        ));
        assert!(matches!(
            parse_score("score: 85"),
            Err(JudgeError::ScoreParse)
        ));
        assert!(matches!(
            parse_score("great plot"),
            Err(JudgeError::ScoreParse)
        ));
        assert!(matches!(
            parse_score("SCORE: 99999999999999999999"),
            Err(JudgeError::ScoreOutOfRange(i64::MAX))
        ));
    }
}
