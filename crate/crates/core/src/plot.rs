//! Data and labels recovered from a rendered figure.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Line,
    Bar,
    Scatter,
    Pie,
    Heatmap,
    Other,
}

impl SeriesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::Line => "line",
            SeriesKind::Bar => "bar",
            SeriesKind::Scatter => "scatter",
            SeriesKind::Pie => "pie",
            SeriesKind::Heatmap => "heatmap",
            SeriesKind::Other => "other",
        }
    }
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum XValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub x: Vec<XValue>,
    pub y: Vec<f64>,
    pub kind: SeriesKind,
}

impl Series {
    /// The x coordinates when all of them are numeric.
    pub fn numeric_x(&self) -> Option<Vec<f64>> {
        if self.x.is_empty() {
            return None;
        }
        self.x
            .iter()
            .map(|v| match v {
                XValue::Number(n) => Some(*n),
                XValue::Text(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisPair<T> {
    #[serde(default)]
    pub x: T,
    #[serde(default)]
    pub y: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerenderedPlot {
    #[serde(default)]
    pub series: Vec<Series>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub axis_labels: AxisPair<String>,
    #[serde(default)]
    pub tick_labels: AxisPair<Vec<String>>,
    #[serde(default)]
    pub legend_entries: Vec<String>,
    /// Artists the extractor could not interpret.
    #[serde(default)]
    pub skipped_artists: u32,
}

impl DerenderedPlot {
    pub fn validate(&self) -> Result<(), String> {
        for (i, s) in self.series.iter().enumerate() {
            if !s.x.is_empty() && s.x.len() != s.y.len() {
                return Err(format!(
                    "series {i} ({:?}) has {} x values and {} y values",
                    s.name,
                    s.x.len(),
                    s.y.len()
                ));
            }
            if s.kind == SeriesKind::Pie && s.y.iter().any(|v| *v < 0.0) {
                return Err(format!("pie series {i} has a negative wedge"));
            }
        }
        Ok(())
    }

    pub fn observed_kinds(&self) -> Vec<SeriesKind> {
        let mut kinds: Vec<SeriesKind> = Vec::new();
        for s in &self.series {
            if !kinds.contains(&s.kind) {
                kinds.push(s.kind);
            }
        }
        kinds
    }

    pub fn labels(&self) -> LabelSet {
        LabelSet {
            title: self.title.clone(),
            axis_labels: self.axis_labels.clone(),
            tick_labels: self.tick_labels.clone(),
            legend_entries: self.legend_entries.clone(),
        }
    }
}

/// The textual elements of a figure.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub title: String,
    pub axis_labels: AxisPair<String>,
    pub tick_labels: AxisPair<Vec<String>>,
    pub legend_entries: Vec<String>,
}

impl LabelSet {
    /// Every label string, tagged with where it was found.
    pub fn all(&self) -> Vec<(&'static str, &str)> {
        let mut out = vec![
            ("title", self.title.as_str()),
            ("x-axis label", self.axis_labels.x.as_str()),
            ("y-axis label", self.axis_labels.y.as_str()),
        ];
        out.extend(
            self.tick_labels
                .x
                .iter()
                .map(|t| ("x tick label", t.as_str())),
        );
        out.extend(
            self.tick_labels
                .y
                .iter()
                .map(|t| ("y tick label", t.as_str())),
        );
        out.extend(
            self.legend_entries
                .iter()
                .map(|t| ("legend entry", t.as_str())),
        );
        out
    }
}
