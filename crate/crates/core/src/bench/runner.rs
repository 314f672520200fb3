use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::dataset::{BenchError, BenchmarkItem};
use super::judge::judge_figure;
use super::summary::{aggregate_scores, ItemEntry, Summary};
use crate::gateway::{ChatBackend, ModelSettings};
use crate::orchestrator::{run_session, PipelineConfig};
use crate::task::UserRequest;
use crate::trace::SessionTrace;

pub const METHOD_NAME: &str = "PlotGen";

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub pipeline: PipelineConfig,
    pub out_dir: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub summary: Summary,
    /// Session traces in item order.
    pub traces: Vec<(String, SessionTrace)>,
    pub report: String,
}

fn run_item(
    backend: &dyn ChatBackend,
    item: &BenchmarkItem,
    config: &BenchConfig,
) -> (ItemEntry, SessionTrace) {
    let request = UserRequest::new(&item.id, &item.query, &item.data_path, &config.out_dir);
    let (result, trace) = run_session(backend, &request, &config.pipeline);
    let outcome = result.outcome.to_string();
    let Some(figure) = result.figure_path else {
        return (
            ItemEntry {
                id: item.id.clone(),
                score: None,
                outcome,
            },
            trace,
        );
    };
    let settings = ModelSettings {
        model: config.pipeline.models.judge.clone(),
        max_output_tokens: config.pipeline.max_output_tokens,
    };
    let entry = match judge_figure(backend, &figure, &item.ground_truth, &settings) {
        Ok(score) => ItemEntry {
            id: item.id.clone(),
            score: Some(score),
            outcome,
        },
        Err(e) => {
            tracing::warn!(item = %item.id, error = %e, "judging failed");
            ItemEntry {
                id: item.id.clone(),
                score: None,
                outcome: "judge-error".into(),
            }
        }
    };
    (entry, trace)
}

/// Runs every item with at most `workers` sessions in flight, then writes
/// `summary.json` and `report.md` into the output directory.
pub fn run_benchmark(
    backend: &dyn ChatBackend,
    items: &[BenchmarkItem],
    config: &BenchConfig,
) -> Result<BenchRun, BenchError> {
    if items.is_empty() {
        return Err(BenchError::NoItems);
    }
    let io = |source| BenchError::Io {
        path: config.out_dir.clone(),
        source,
    };
    std::fs::create_dir_all(&config.out_dir).map_err(io)?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<(ItemEntry, SessionTrace)>>> =
        Mutex::new(vec![None; items.len()]);
    let workers = config.workers.clamp(1, items.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let result = run_item(backend, item, config);
                results.lock().expect("no worker panicked holding the lock")[i] = Some(result);
            });
        }
    });

    let (entries, traces): (Vec<ItemEntry>, Vec<(String, SessionTrace)>) = results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| {
            let (entry, trace) = r.expect("every item ran");
            let id = entry.id.clone();
            (entry, (id, trace))
        })
        .unzip();
    let summary = aggregate_scores(&entries);
    let report = summary.render_markdown(METHOD_NAME, &config.pipeline.models.coder);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(config.out_dir.join("summary.json"), json + "\n").map_err(io)?;
    std::fs::write(config.out_dir.join("report.md"), &report).map_err(io)?;
    Ok(BenchRun {
        summary,
        traces,
        report,
    })
}
