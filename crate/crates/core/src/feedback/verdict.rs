//! The structured verdict grammar used by model-backed reviewers.
//!
//! ```text
//! VERDICT: PASS|FAIL
//! FEEDBACK: <one instruction per line>
//! ```

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::report::Verdict;

pub const UNSPECIFIED_VISUAL_ISSUE: &str = "unspecified visual issue";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no VERDICT line in reviewer response")]
pub struct VerdictParseError;

// Leading markdown decoration (bullets, headings, emphasis, quotes) is ignored.
static VERDICT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[\s*#>_`-]*VERDICT[*_`]*\s*:\s*[*_`]*\s*(PASS|FAIL)\b").unwrap()
});
static FEEDBACK_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[\s*#>_`-]*FEEDBACK[*_`]*\s*:(.*)$").unwrap());

pub fn parse_feedback_verdict(text: &str) -> Result<(Verdict, String), VerdictParseError> {
    let verdict = text
        .lines()
        .find_map(|line| VERDICT_LINE.captures(line))
        .map(|caps| {
            if caps[1].eq_ignore_ascii_case("pass") {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        })
        .ok_or(VerdictParseError)?;
    let message = text
        .lines()
        .filter_map(|line| FEEDBACK_LINE.captures(line))
        .map(|caps| caps[1].trim().to_string())
        .filter(|m| !m.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    if verdict == Verdict::Fail && message.is_empty() {
        return Ok((verdict, UNSPECIFIED_VISUAL_ISSUE.to_string()));
    }
    Ok((verdict, message))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        assert_eq!(
            parse_feedback_verdict("VERDICT: pass"),
            Ok((Verdict::Pass, String::new()))
        );
        assert_eq!(
            parse_feedback_verdict(
                "VERDICT: FAIL\nFEEDBACK: wrong palette\nFEEDBACK: title clipped"
            ),
            Ok((Verdict::Fail, "wrong palette\ntitle clipped".into()))
        );
        assert_eq!(
            parse_feedback_verdict("looks fine to me"),
            Err(VerdictParseError)
        );
    }

    #[test]
    fn first_verdict_wins_and_decoration_is_ignored() {
        assert_eq!(
            parse_feedback_verdict("**VERDICT:** FAIL\nVERDICT: PASS"),
            Ok((Verdict::Fail, UNSPECIFIED_VISUAL_ISSUE.into()))
        );
        assert_eq!(
            parse_feedback_verdict("The chart is clean.\n- verdict: Pass\n"),
            Ok((Verdict::Pass, String::new()))
        );
        assert_eq!(
            parse_feedback_verdict("VERDICT: PASSABLE"),
            Err(VerdictParseError)
        );
    }
}
