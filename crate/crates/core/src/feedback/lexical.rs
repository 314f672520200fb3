//! Lexical feedback: checks that the strings a request asks for appear among
//! the figure's labels.

use std::sync::LazyLock;

use regex::Regex;

use super::numeric::mentions_word;
use crate::planner::VisualizationPlan;
use crate::plot::LabelSet;
use crate::report::{AgentKind, FeedbackReport};
use crate::table::DataTable;
use crate::task::UserRequest;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequiredString {
    pub text: String,
    /// Human-readable description of where the string was expected.
    pub expected_in: String,
}

static QUOTED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#""([^"\n]+)"|(?:^|[^\w])'([^'\n]+)'(?:$|[^\w])"#).unwrap());

/// Case-fold, trim and collapse internal whitespace.
pub fn normalize_label(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Double- or single-quoted literals in the request text. Apostrophes inside
/// words ("don't") do not open a literal.
pub fn quoted_literals(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut at = 0;
    while let Some(caps) = QUOTED.captures_at(text, at) {
        let whole = caps.get(0).unwrap();
        let inner = caps.get(1).or_else(|| caps.get(2)).unwrap();
        let literal = inner.as_str().trim();
        if !literal.is_empty() {
            out.push(literal.to_string());
        }
        // Resume right after the closing quote so an adjacent literal can
        // reuse the separating character.
        at = inner.end() + 1;
        debug_assert!(at > whole.start());
    }
    out
}

/// Column names the plan assigns to an axis: any column mentioned on a plan
/// line that talks about an axis.
pub fn axis_columns(plan: &VisualizationPlan, table: &DataTable) -> Vec<String> {
    let axis_lines: Vec<&String> = plan
        .steps
        .iter()
        .chain(&plan.visual_notes)
        .filter(|line| line.to_lowercase().contains("axis"))
        .collect();
    table
        .columns()
        .iter()
        .filter(|col| axis_lines.iter().any(|line| mentions_word(line, col)))
        .cloned()
        .collect()
}

pub fn required_strings(
    request: &UserRequest,
    plan: Option<&VisualizationPlan>,
    table: &DataTable,
) -> Vec<RequiredString> {
    let mut out: Vec<RequiredString> = Vec::new();
    let mut push = |text: String, expected_in: &str| {
        if !out
            .iter()
            .any(|r| normalize_label(&r.text) == normalize_label(&text))
        {
            out.push(RequiredString {
                text,
                expected_in: expected_in.to_string(),
            });
        }
    };
    for literal in quoted_literals(&request.text) {
        push(
            literal,
            "a title, axis label, tick label or legend entry (quoted in the request)",
        );
    }
    if let Some(plan) = plan {
        for column in axis_columns(plan, table) {
            push(
                column,
                "an axis label or tick labels (the plan maps this column to an axis)",
            );
        }
    }
    out
}

pub fn lexical_check(
    labels: &LabelSet,
    request: &UserRequest,
    plan: Option<&VisualizationPlan>,
    table: &DataTable,
    iteration: u32,
) -> FeedbackReport {
    let required = required_strings(request, plan, table);
    let present: Vec<String> = labels
        .all()
        .into_iter()
        .map(|(_, text)| normalize_label(text))
        .filter(|t| !t.is_empty())
        .collect();
    let missing: Vec<&RequiredString> = required
        .iter()
        .filter(|r| {
            let want = normalize_label(&r.text);
            !present.iter().any(|label| label.contains(&want))
        })
        .collect();
    if missing.is_empty() {
        return FeedbackReport::pass(
            AgentKind::Lexical,
            iteration,
            format!("all {} required label(s) present", required.len()),
        );
    }
    let lines: Vec<String> = missing
        .iter()
        .map(|r| {
            format!(
                "Missing text \"{}\": expected in {}.",
                r.text, r.expected_in
            )
        })
        .collect();
    FeedbackReport::fail(AgentKind::Lexical, iteration, lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plot::AxisPair;
    use crate::report::Verdict;

    fn table() -> DataTable {
        DataTable::from_csv_reader("month,sales\nJan,1\nFeb,2\n".as_bytes()).unwrap()
    }

    fn request(text: &str) -> UserRequest {
        UserRequest::new("r", text, "/d/data.csv", "/o")
    }

    fn labels(title: &str, x: &str, y: &str) -> LabelSet {
        LabelSet {
            title: title.into(),
            axis_labels: AxisPair {
                x: x.into(),
                y: y.into(),
            },
            tick_labels: AxisPair::default(),
            legend_entries: vec![],
        }
    }

    fn plan(steps: &[&str]) -> VisualizationPlan {
        VisualizationPlan {
            steps: steps.iter().map(|s| s.to_string()).collect(),
            language: "python".into(),
            data_note: String::new(),
            visual_notes: vec![],
        }
    }

    #[test]
    fn quoted_literals_in_order() {
        assert_eq!(
            quoted_literals(r#"use 'A' then "B" then 'C D'"#),
            ["A", "B", "C D"]
        );
        assert!(quoted_literals("it's Bob's data").is_empty());
    }

    #[test]
    fn title_matches_case_insensitively() {
        let report = lexical_check(
            &labels("sales over time", "", ""),
            &request("plot it with title 'Sales over Time'"),
            None,
            &table(),
            1,
        );
        assert_eq!(report.verdict, Verdict::Pass, "{}", report.message);
    }

    #[test]
    fn missing_axis_column_fails() {
        let p = plan(&["Put month on the x-axis and sales on the y-axis"]);
        let report = lexical_check(
            &labels("", "", "Sales"),
            &request("plot"),
            Some(&p),
            &table(),
            1,
        );
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.message.contains("month"));
        assert!(!report.message.contains("\"sales\""));
    }

    #[test]
    fn empty_requirements_pass() {
        let report = lexical_check(
            &labels("", "", ""),
            &request("plot my data"),
            Some(&plan(&["load"])),
            &table(),
            1,
        );
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn normalization_collapses_whitespace() {
        assert_eq!(
            normalize_label("  Sales \t over\n TIME "),
            "sales over time"
        );
    }
}
