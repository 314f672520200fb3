//! Shared fixtures for the integration tests: a stub runner, a small sales
//! table, and builders for scripted model replies.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::Duration;

use plotgen::gateway::{CassetteStore, Recorder, ReplayBackend, ScriptedBackend};
use plotgen::{PipelineConfig, UserRequest};
use tempfile::TempDir;

pub const SALES_CSV: &str = "month,sales\nJan,10\nFeb,20\nMar,15\nApr,30\n";
pub const SALES_REQUEST: &str = "Draw a bar chart of monthly sales titled 'Monthly Sales' in blue.";
pub const PLAN: &str = "STEP 1: Load data.csv with pandas\n\
STEP 2: Draw a bar chart of sales per month with month on the x-axis and sales on the y-axis\n\
STEP 3: Title the figure and save it as PNG\n\
DATA: data.csv, CSV with columns month and sales\n\
VISUAL: use a blue palette";
pub const VISUAL_PASS: &str = "VERDICT: PASS";
pub const VISUAL_FAIL: &str = "VERDICT: FAIL\nFEEDBACK: the legend overlaps the bars";

pub fn stub_runner() -> Vec<String> {
    vec![env!("CARGO_BIN_EXE_plotgen-stub-runner").to_string()]
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
}

pub struct Workspace {
    pub dir: TempDir,
    pub data: PathBuf,
    pub out: PathBuf,
    pub cassettes: PathBuf,
}

impl Workspace {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().canonicalize().unwrap();
        let data = root.join("data.csv");
        std::fs::write(&data, SALES_CSV).unwrap();
        let out = root.join("out");
        let cassettes = root.join("cassettes");
        Workspace {
            dir,
            data,
            out,
            cassettes,
        }
    }

    pub fn request(&self, id: &str) -> UserRequest {
        UserRequest::new(id, SALES_REQUEST, &self.data, &self.out)
    }

    pub fn recorder(&self, script: Vec<String>) -> Recorder<ScriptedBackend> {
        Recorder::new(
            ScriptedBackend::new(script),
            CassetteStore::new(&self.cassettes),
        )
    }

    pub fn replay(&self) -> ReplayBackend {
        ReplayBackend::new(CassetteStore::new(&self.cassettes))
    }
}

pub fn config(max_debug: u32, max_feedback: u32) -> PipelineConfig {
    PipelineConfig {
        max_debug_iterations: max_debug,
        max_feedback_iterations: max_feedback,
        time_limit: Duration::from_secs(20),
        runner: stub_runner(),
        ..PipelineConfig::default()
    }
}

/// A de-rendered bar chart of `ys` with the given title and axis labels.
pub fn plot_json(ys: &[f64], title: &str, x_label: &str, y_label: &str) -> String {
    let months = ["Jan", "Feb", "Mar", "Apr", "May", "Jun"];
    serde_json::json!({
        "series": [{
            "name": "sales",
            "x": months[..ys.len()],
            "y": ys,
            "kind": "bar",
        }],
        "title": title,
        "axis_labels": {"x": x_label, "y": y_label},
        "tick_labels": {"x": months[..ys.len()], "y": []},
        "legend_entries": [],
    })
    .to_string()
}

/// The figure every verifier accepts for [`SALES_CSV`] and [`SALES_REQUEST`].
pub fn good_plot() -> String {
    plot_json(&[10.0, 20.0, 15.0, 30.0], "Monthly Sales", "Month", "Sales")
}

/// Data plotted in the wrong order: fails the numeric check only.
pub fn misordered_plot() -> String {
    plot_json(&[30.0, 15.0, 20.0, 10.0], "Monthly Sales", "Month", "Sales")
}

/// Wrong order and missing title: fails numeric and lexical checks.
pub fn bad_plot() -> String {
    plot_json(&[30.0, 15.0, 20.0, 10.0], "Sales", "", "Sales")
}

/// A fenced code reply whose stub directives decide the execution result.
/// `tag` keeps otherwise identical drafts distinct.
pub fn code_reply(tag: &str, directives: &[String]) -> String {
    let mut body = format!("```python\n# draft {tag}\nimport matplotlib.pyplot as plt\n");
    for d in directives {
        body.push_str(&format!("# stub: {d}\n"));
    }
    body.push_str("plt.savefig(FIGURE_PATH)\n```");
    body
}

pub fn runs_with(tag: &str, plot: &str) -> String {
    code_reply(tag, &[format!("derender {plot}")])
}

pub fn raises(tag: &str) -> String {
    code_reply(
        tag,
        &["error NameError: name 'pd' is not defined".to_string()],
    )
}

pub fn s(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub const BENCH_PLAN: &str = "STEP 1: Load data.csv with pandas\nSTEP 2: Plot the requested chart\nSTEP 3: Save the figure as PNG\nDATA: data.csv, CSV";

pub fn bench_dataset() -> PathBuf {
    fixture_dir().join("bench")
}

/// A de-rendering that reproduces a bench item's table exactly, with the
/// chart kind its query asks for.
pub fn faithful_plot(item: &plotgen::bench::BenchmarkItem) -> String {
    let table = plotgen::DataTable::from_csv_path(&item.data_path).unwrap();
    let (name, ys) = table.numeric_columns().into_iter().next().unwrap();
    let xs: Vec<String> = table.rows().iter().map(|r| r[0].to_string()).collect();
    let kind = plotgen::feedback::infer_expected_kind(&item.query)
        .kind
        .map_or("bar".to_string(), |k| k.to_string());
    let quoted = item.query.split('\'').nth(1).unwrap_or("").to_string();
    serde_json::json!({
        "series": [{"name": name, "x": xs, "y": ys, "kind": kind}],
        "title": quoted,
        "axis_labels": {"x": table.columns()[0], "y": name},
        "tick_labels": {"x": xs, "y": []},
        "legend_entries": [],
    })
    .to_string()
}

/// Model replies for a sequential run over `items`: each session passes
/// every verifier on its first draft, then the judge awards `scores[i]`.
pub fn bench_script(items: &[plotgen::bench::BenchmarkItem], scores: &[u8]) -> Vec<String> {
    let mut script = Vec::new();
    for (item, score) in items.iter().zip(scores) {
        script.push(BENCH_PLAN.to_string());
        script.push(runs_with(&item.id, &faithful_plot(item)));
        script.push(VISUAL_PASS.to_string());
        script.push(format!(
            "The figures agree on data and labels.\nSCORE: {score}"
        ));
    }
    script
}
