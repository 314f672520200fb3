use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::judge::JudgeScore;

/// One item's result before aggregation; `score` is `None` for failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemEntry {
    pub id: String,
    pub score: Option<JudgeScore>,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryItem {
    pub id: String,
    pub score: u8,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub n: usize,
    pub n_failures: usize,
    pub items: Vec<SummaryItem>,
}

/// Mean score with failures counted as zero.
pub fn aggregate_scores(entries: &[ItemEntry]) -> Summary {
    let items: Vec<SummaryItem> = entries
        .iter()
        .map(|e| SummaryItem {
            id: e.id.clone(),
            score: e.score.as_ref().map_or(0, |s| s.value),
            outcome: e.outcome.clone(),
        })
        .collect();
    let total: u64 = items.iter().map(|i| u64::from(i.score)).sum();
    let mean = if items.is_empty() {
        0.0
    } else {
        total as f64 / items.len() as f64
    };
    Summary {
        mean,
        n: items.len(),
        n_failures: entries.iter().filter(|e| e.score.is_none()).count(),
        items,
    }
}

impl Summary {
    /// Markdown report: the mean line followed by a per-item table.
    pub fn render_markdown(&self, method: &str, backbone: &str) -> String {
        let mut table = ComparisonTable::new(vec![backbone.to_string()]);
        table.add_row(method, vec![Some(self.mean)]);
        let mut out = table.render_markdown();
        let _ = write!(
            out,
            "\nItems: {}, failures: {}, mean score: {:.2}\n\n| Item | Score | Outcome |\n|---|---:|---|\n",
            self.n, self.n_failures, self.mean
        );
        for item in &self.items {
            let _ = writeln!(out, "| {} | {} | {} |", item.id, item.score, item.outcome);
        }
        out
    }
}

/// Mean scores of methods (rows) across code-model backbones (columns).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub backbones: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl ComparisonTable {
    pub fn new(backbones: Vec<String>) -> Self {
        Self {
            backbones,
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, method: impl Into<String>, scores: Vec<Option<f64>>) {
        assert_eq!(scores.len(), self.backbones.len(), "one score per backbone");
        self.rows.push((method.into(), scores));
    }

    pub fn get(&self, method: &str, backbone: &str) -> Option<f64> {
        let col = self.backbones.iter().position(|b| b == backbone)?;
        let (_, scores) = self.rows.iter().find(|(m, _)| m == method)?;
        scores[col]
    }

    /// Markdown with two-decimal scores; missing cells print as `-`.
    pub fn render_markdown(&self) -> String {
        let mut out = String::from("| Method |");
        for b in &self.backbones {
            let _ = write!(out, " {b} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.backbones.len()));
        out.push('\n');
        for (method, scores) in &self.rows {
            let _ = write!(out, "| {method} |");
            for s in scores {
                match s {
                    Some(v) => {
                        let _ = write!(out, " {v:.2} |");
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, score: Option<u8>) -> ItemEntry {
        ItemEntry {
            id: id.into(),
            score: score.map(|value| JudgeScore {
                value,
                rationale: String::new(),
            }),
            outcome: if score.is_some() {
                "success"
            } else {
                "code-failure"
            }
            .into(),
        }
    }

    #[test]
    fn mean_with_failures_as_zero() {
        let s = aggregate_scores(&[
            entry("a", Some(60)),
            entry("b", Some(70)),
            entry("c", Some(80)),
        ]);
        assert_eq!(format!("{:.2}", s.mean), "70.00");
        let s = aggregate_scores(&[entry("a", Some(85)), entry("b", None)]);
        assert_eq!(format!("{:.2}", s.mean), "42.50");
        assert_eq!(s.n_failures, 1);
        assert_eq!(s.items[1].score, 0);
        assert_eq!(aggregate_scores(&[]).mean, 0.0);
    }

    #[test]
    fn summary_json_shape() {
        let s = aggregate_scores(&[entry("a", Some(50))]);
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["n"], 1);
        assert_eq!(v["n_failures"], 0);
        assert_eq!(v["items"][0]["id"], "a");
        assert_eq!(v["items"][0]["score"], 50);
        assert_eq!(v["items"][0]["outcome"], "success");
    }

    #[test]
    fn renders_missing_cells() {
        let mut t = ComparisonTable::new(vec!["A".into(), "B".into()]);
        t.add_row("m", vec![Some(1.0), None]);
        assert_eq!(
            t.render_markdown(),
            "| Method | A | B |\n|---|---:|---:|\n| m | 1.00 | - |\n"
        );
    }
}
