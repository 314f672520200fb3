//! Numeric feedback: checks that the plotted data follows the trends of the
//! source table and that the chart kind matches the request.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::spearman::spearman_rank_correlation;
use crate::plot::{DerenderedPlot, SeriesKind};
use crate::report::{AgentKind, FeedbackReport};
use crate::table::DataTable;

pub const DEFAULT_TREND_THRESHOLD: f64 = 0.8;
const X_MATCH_TOLERANCE: f64 = 1e-9;

/// The chart kind a request asks for; `None` when it names none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedChartKind {
    pub kind: Option<SeriesKind>,
    pub evidence: String,
}

impl ExpectedChartKind {
    pub fn unspecified() -> Self {
        Self {
            kind: None,
            evidence: String::new(),
        }
    }

    pub fn of(kind: SeriesKind, evidence: impl Into<String>) -> Self {
        Self {
            kind: Some(kind),
            evidence: evidence.into(),
        }
    }
}

static KIND_PATTERNS: LazyLock<Vec<(SeriesKind, Regex)>> = LazyLock::new(|| {
    let suffix = r"(?:\s+(?:charts?|graphs?|plots?|diagrams?))?";
    [
        (SeriesKind::Heatmap, r"heat[\s-]?maps?".to_string()),
        (SeriesKind::Scatter, format!(r"scatter(?:plots?)?{suffix}")),
        (SeriesKind::Pie, format!(r"pie{suffix}")),
        (SeriesKind::Bar, format!(r"(?:bars?|histograms?){suffix}")),
        (SeriesKind::Line, format!(r"lines?{suffix}")),
    ]
    .into_iter()
    .map(|(kind, p)| (kind, Regex::new(&format!(r"(?i)\b{p}\b")).unwrap()))
    .collect()
});

/// Case-insensitive keyword scan in priority order heatmap, scatter, pie,
/// bar (or histogram), line. The first kind with a hit wins.
pub fn infer_expected_kind(request_text: &str) -> ExpectedChartKind {
    for (kind, re) in KIND_PATTERNS.iter() {
        if let Some(m) = re.find(request_text) {
            return ExpectedChartKind::of(*kind, m.as_str());
        }
    }
    ExpectedChartKind::unspecified()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub column: String,
    pub series: String,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendCheckResult {
    pub matched_pairs: Vec<MatchedPair>,
    pub unmatched_columns: Vec<String>,
    /// Minimum correlation over matched pairs; 0 when nothing matched.
    pub min_correlation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericCheckConfig {
    pub threshold: f64,
    /// Numeric columns the figure must show. `None` means every numeric
    /// column that is not used as x coordinates.
    pub required_columns: Option<Vec<String>>,
}

impl Default for NumericCheckConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_TREND_THRESHOLD,
            required_columns: None,
        }
    }
}

/// Numeric columns whose name occurs as a whole word in any of `texts`
/// (case-insensitive; underscores may be written as spaces).
pub fn referenced_numeric_columns(table: &DataTable, texts: &[&str]) -> Vec<String> {
    let haystack = texts.join("\n");
    table
        .numeric_columns()
        .into_iter()
        .map(|(name, _)| name)
        .filter(|name| mentions_word(&haystack, name))
        .collect()
}

pub(crate) fn mentions_word(haystack: &str, word: &str) -> bool {
    let variants = [word.to_string(), word.replace('_', " ")];
    variants.iter().any(|w| {
        let pattern = format!(r"(?i)(?:^|[^\w]){}(?:$|[^\w])", regex::escape(w.trim()));
        !w.trim().is_empty()
            && Regex::new(&pattern)
                .map(|re| re.is_match(haystack))
                .unwrap_or(false)
    })
}

fn same_values(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= X_MATCH_TOLERANCE * x.abs().max(1.0))
}

/// Greedy matching of required columns to de-rendered series by descending
/// rank correlation; ties go to the earlier column, then the earlier series.
pub fn trend_check(
    plot: &DerenderedPlot,
    table: &DataTable,
    required_columns: Option<&[String]>,
) -> TrendCheckResult {
    let x_like: Vec<Vec<f64>> = plot.series.iter().filter_map(|s| s.numeric_x()).collect();
    let columns: Vec<(String, Vec<f64>)> = table
        .numeric_columns()
        .into_iter()
        .filter(|(name, values)| match required_columns {
            Some(required) => required.contains(name),
            None => !x_like.iter().any(|x| same_values(x, values)),
        })
        .collect();

    let mut candidates = Vec::new();
    for (ci, (_, values)) in columns.iter().enumerate() {
        for (si, series) in plot.series.iter().enumerate() {
            if let Ok(rho) = spearman_rank_correlation(values, &series.y) {
                candidates.push((rho, ci, si));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut column_taken = vec![false; columns.len()];
    let mut series_taken = vec![false; plot.series.len()];
    let mut matched: Vec<(usize, MatchedPair)> = Vec::new();
    for (rho, ci, si) in candidates {
        if column_taken[ci] || series_taken[si] {
            continue;
        }
        column_taken[ci] = true;
        series_taken[si] = true;
        let series = &plot.series[si];
        let name = if series.name.is_empty() {
            format!("series {}", si + 1)
        } else {
            series.name.clone()
        };
        matched.push((
            ci,
            MatchedPair {
                column: columns[ci].0.clone(),
                series: name,
                correlation: rho,
            },
        ));
    }
    matched.sort_by_key(|(ci, _)| *ci);
    let matched_pairs: Vec<MatchedPair> = matched.into_iter().map(|(_, p)| p).collect();
    let unmatched_columns = columns
        .iter()
        .zip(&column_taken)
        .filter(|(_, taken)| !**taken)
        .map(|((name, _), _)| name.clone())
        .collect();
    let min_correlation = matched_pairs
        .iter()
        .map(|p| p.correlation)
        .reduce(f64::min)
        .unwrap_or(0.0);
    TrendCheckResult {
        matched_pairs,
        unmatched_columns,
        min_correlation,
    }
}

pub fn numeric_check(
    plot: &DerenderedPlot,
    table: &DataTable,
    expected: &ExpectedChartKind,
    config: &NumericCheckConfig,
    iteration: u32,
) -> FeedbackReport {
    if plot.series.is_empty() {
        return FeedbackReport::fail(
            AgentKind::Numeric,
            iteration,
            format!(
                "The figure contains no plotted data series. Plot the data columns ({}) from the data file.",
                table.columns().join(", ")
            ),
        );
    }

    let trend = trend_check(plot, table, config.required_columns.as_deref());
    let mut problems = Vec::new();
    for column in &trend.unmatched_columns {
        let len = table
            .column_index(column)
            .and_then(|i| table.numeric_column(i))
            .map_or(0, |v| v.len());
        problems.push(format!(
            "Column '{column}' ({len} values) does not appear in the figure as a plotted series of the same length."
        ));
    }
    if let Some(worst) = trend
        .matched_pairs
        .iter()
        .min_by(|a, b| a.correlation.total_cmp(&b.correlation))
        .filter(|p| p.correlation < config.threshold)
    {
        problems.push(format!(
            "Plotted series '{}' does not follow the trend of column '{}' (rank correlation {:.2}, expected at least {:.2}); check the data order, sorting, and which column is plotted.",
            worst.series, worst.column, worst.correlation, config.threshold
        ));
    }
    if let Some(kind) = expected.kind {
        let observed = plot.observed_kinds();
        if !observed.contains(&kind) {
            let shown: Vec<&str> = observed.iter().map(|k| k.as_str()).collect();
            problems.push(format!(
                "The request asks for a {kind} chart (\"{}\") but the figure shows {}. Use a {kind} chart.",
                expected.evidence,
                shown.join(", ")
            ));
        }
    }

    if problems.is_empty() {
        FeedbackReport::pass(
            AgentKind::Numeric,
            iteration,
            format!(
                "{} column(s) matched, minimum rank correlation {:.2}",
                trend.matched_pairs.len(),
                trend.min_correlation
            ),
        )
    } else {
        FeedbackReport::fail(AgentKind::Numeric, iteration, problems.join("\n"))
    }
}
