//! Benchmark harness: load a dataset of plotting tasks, run sessions over it,
//! grade each figure against its ground truth with a judge model, and report.

mod dataset;
mod judge;
mod runner;
mod summary;

pub use dataset::{
    load_benchmark, BenchError, BenchmarkItem, DATA_FILE, GROUND_TRUTH_FILE, QUERY_FILE,
};
pub use judge::{build_judge_prompt, judge_figure, parse_score, JudgeError, JudgeScore};
pub use runner::{run_benchmark, BenchConfig, BenchRun};
pub use summary::{aggregate_scores, ComparisonTable, ItemEntry, Summary, SummaryItem};
