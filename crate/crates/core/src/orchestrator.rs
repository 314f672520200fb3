//! The session state machine: plan, generate, execute with a bounded debug
//! loop, then run each feedback agent in turn with its own revision budget.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::{CodeAgent, CodeDraft};
use crate::exec::{
    execute_draft, ExecConfig, ExecutionOutcome, DEFAULT_RUNNER, DEFAULT_TIME_LIMIT,
};
use crate::feedback::lexical::lexical_check;
use crate::feedback::numeric::{
    infer_expected_kind, numeric_check, referenced_numeric_columns, NumericCheckConfig,
    DEFAULT_TREND_THRESHOLD,
};
use crate::feedback::{derender_with_model, visual_review, FeedbackError};
use crate::gateway::{ChatBackend, Metered, ModelSettings, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::planner::{make_plan, VisualizationPlan};
use crate::plot::DerenderedPlot;
use crate::report::{AgentKind, FeedbackReport, Verdict};
use crate::table::DataTable;
use crate::task::UserRequest;
use crate::trace::{persist_trace, Event, SessionTrace};

pub use crate::trace::SessionOutcome;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0} must be at least 1")]
    ZeroBudget(&'static str),
    #[error("agent order must list numeric, lexical and visual exactly once, got {0:?}")]
    AgentOrder(Vec<AgentKind>),
    #[error("numeric threshold must lie in [-1, 1], got {0}")]
    Threshold(String),
    #[error("time limit must be positive")]
    TimeLimit,
    #[error("runner command is empty")]
    EmptyRunner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerenderMode {
    /// The runner introspects the live figure.
    #[default]
    Programmatic,
    /// A vision model reads the rendered image.
    Multimodal,
}

impl std::str::FromStr for DerenderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "programmatic" => Ok(DerenderMode::Programmatic),
            "multimodal" => Ok(DerenderMode::Multimodal),
            other => Err(format!("unknown derender mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelIds {
    pub planner: String,
    pub coder: String,
    /// Vision model for the visual agent and multimodal de-rendering.
    pub feedback: String,
    pub judge: String,
}

impl Default for ModelIds {
    fn default() -> Self {
        Self {
            planner: "gpt-4".into(),
            coder: "gpt-4".into(),
            feedback: "gpt-4-vision-preview".into(),
            judge: "gpt-4-vision-preview".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub max_debug_iterations: u32,
    pub max_feedback_iterations: u32,
    pub agent_order: Vec<AgentKind>,
    pub models: ModelIds,
    pub derender_mode: DerenderMode,
    pub time_limit: Duration,
    pub numeric_threshold: f64,
    pub max_output_tokens: u32,
    /// Runner program and leading arguments.
    pub runner: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_debug_iterations: 3,
            max_feedback_iterations: 2,
            agent_order: AgentKind::FEEDBACK.to_vec(),
            models: ModelIds::default(),
            derender_mode: DerenderMode::Programmatic,
            time_limit: DEFAULT_TIME_LIMIT,
            numeric_threshold: DEFAULT_TREND_THRESHOLD,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            runner: vec![DEFAULT_RUNNER.to_string()],
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_debug_iterations == 0 {
            return Err(ConfigError::ZeroBudget("max_debug_iterations"));
        }
        if self.max_feedback_iterations == 0 {
            return Err(ConfigError::ZeroBudget("max_feedback_iterations"));
        }
        let mut sorted = self.agent_order.clone();
        sorted.sort();
        if sorted != AgentKind::FEEDBACK {
            return Err(ConfigError::AgentOrder(self.agent_order.clone()));
        }
        if !(-1.0..=1.0).contains(&self.numeric_threshold) {
            return Err(ConfigError::Threshold(self.numeric_threshold.to_string()));
        }
        if self.time_limit.is_zero() {
            return Err(ConfigError::TimeLimit);
        }
        if self.runner.is_empty() || self.runner[0].is_empty() {
            return Err(ConfigError::EmptyRunner);
        }
        Ok(())
    }

    /// Upper bound on runner invocations in one session.
    pub fn execution_cap(&self) -> u32 {
        let per_loop = 1 + self.max_debug_iterations;
        per_loop + self.agent_order.len() as u32 * self.max_feedback_iterations * per_loop
    }

    fn settings(&self, model: &str) -> ModelSettings {
        ModelSettings {
            model: model.to_string(),
            max_output_tokens: self.max_output_tokens,
        }
    }

    fn exec_config(&self) -> ExecConfig {
        ExecConfig {
            runner: self.runner.clone(),
            time_limit: self.time_limit,
            derender: self.derender_mode == DerenderMode::Programmatic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResult {
    pub outcome: SessionOutcome,
    pub figure_path: Option<PathBuf>,
}

/// A draft that executed successfully, with its outcome.
struct GoodDraft {
    draft: CodeDraft,
    outcome: ExecutionOutcome,
}

struct Session<'a> {
    backend: &'a dyn ChatBackend,
    request: &'a UserRequest,
    config: &'a PipelineConfig,
    exec: ExecConfig,
    coder: CodeAgent<'a>,
    trace: SessionTrace,
    next_version: u32,
    /// Model de-renderings by draft version.
    derendered: HashMap<u32, DerenderedPlot>,
}

impl Session<'_> {
    fn execute(&mut self, draft: &CodeDraft) -> ExecutionOutcome {
        let outcome = execute_draft(draft, self.request, &self.exec)
            .unwrap_or_else(|e| ExecutionOutcome::runner_crash(e.to_string()));
        self.trace.push(Event::Executed {
            version: draft.version,
            status: outcome.status,
            wall_time_ms: outcome.wall_time.as_millis() as u64,
            traceback: outcome.traceback.clone(),
        });
        outcome
    }

    fn record_draft(&mut self, draft: &CodeDraft) {
        self.trace.push(Event::DraftCreated {
            version: draft.version,
            provenance: draft.provenance.clone(),
        });
    }

    fn take_version(&mut self) -> u32 {
        self.next_version += 1;
        self.next_version
    }

    /// Executes `draft`, repairing from tracebacks up to the debug budget.
    /// Returns the first draft that runs, or the reason none did.
    fn debug_loop(&mut self, mut draft: CodeDraft) -> Result<GoodDraft, String> {
        let budget = self.config.max_debug_iterations;
        for repair in 0..=budget {
            let outcome = self.execute(&draft);
            if outcome.is_success() {
                return Ok(GoodDraft { draft, outcome });
            }
            if repair == budget {
                return Err(format!(
                    "draft v{} still fails after {budget} repair(s): {}",
                    draft.version, outcome.status
                ));
            }
            let traceback = if outcome.traceback.trim().is_empty() {
                format!("execution ended with status {}", outcome.status)
            } else {
                outcome.traceback.clone()
            };
            let version = self.take_version();
            draft = self
                .coder
                .repair_from_traceback(&draft, &traceback, version, repair + 1)
                .map_err(|e| format!("repair of v{} failed: {e}", draft.version))?;
            self.record_draft(&draft);
        }
        unreachable!("the loop returns on its last iteration")
    }

    fn derendered(&mut self, good: &GoodDraft) -> Result<DerenderedPlot, FeedbackError> {
        match self.config.derender_mode {
            DerenderMode::Programmatic => good
                .outcome
                .derendered
                .clone()
                .ok_or(FeedbackError::MissingDerender),
            DerenderMode::Multimodal => {
                if let Some(plot) = self.derendered.get(&good.draft.version) {
                    return Ok(plot.clone());
                }
                let figure = good
                    .outcome
                    .figure_path
                    .as_ref()
                    .ok_or(FeedbackError::MissingDerender)?;
                let settings = self.config.settings(&self.config.models.feedback);
                let plot = derender_with_model(self.backend, &settings, figure)?;
                self.derendered.insert(good.draft.version, plot.clone());
                Ok(plot)
            }
        }
    }

    fn verify(
        &mut self,
        agent: AgentKind,
        good: &GoodDraft,
        plan: &VisualizationPlan,
        table: &DataTable,
        iteration: u32,
    ) -> Result<FeedbackReport, FeedbackError> {
        match agent {
            AgentKind::Numeric => {
                let plot = self.derendered(good)?;
                let plan_text = plan.full_text();
                let referenced =
                    referenced_numeric_columns(table, &[&self.request.text, &plan_text]);
                let config = NumericCheckConfig {
                    threshold: self.config.numeric_threshold,
                    required_columns: (!referenced.is_empty()).then_some(referenced),
                };
                let expected = infer_expected_kind(&self.request.text);
                Ok(numeric_check(&plot, table, &expected, &config, iteration))
            }
            AgentKind::Lexical => {
                let plot = self.derendered(good)?;
                Ok(lexical_check(
                    &plot.labels(),
                    self.request,
                    Some(plan),
                    table,
                    iteration,
                ))
            }
            AgentKind::Visual => {
                let figure = good
                    .outcome
                    .figure_path
                    .as_ref()
                    .ok_or(FeedbackError::MissingDerender)?;
                let settings = self.config.settings(&self.config.models.feedback);
                visual_review(
                    self.backend,
                    &settings,
                    figure,
                    self.request,
                    &plan.visual_notes,
                    iteration,
                )
            }
            AgentKind::Debug => unreachable!("debug is not a feedback agent"),
        }
    }

    /// Runs one agent's feedback loop starting from `good`; returns the
    /// current good draft afterwards and the agent's last verdict.
    fn feedback_loop(
        &mut self,
        agent: AgentKind,
        mut good: GoodDraft,
        plan: &VisualizationPlan,
        table: &DataTable,
    ) -> (GoodDraft, Verdict) {
        for iteration in 1..=self.config.max_feedback_iterations {
            let report = match self.verify(agent, &good, plan, table, iteration) {
                Ok(report) => report,
                Err(e) => {
                    self.trace.push(Event::VerifierError {
                        agent,
                        iteration,
                        error: e.to_string(),
                    });
                    return (good, Verdict::Fail);
                }
            };
            self.trace.push(Event::FeedbackIssued {
                agent,
                verdict: report.verdict,
                iteration,
                message: report.message.clone(),
            });
            if report.passed() {
                return (good, Verdict::Pass);
            }
            let version = self.take_version();
            let revised = match self
                .coder
                .revise_from_feedback(&good.draft, &report, version)
            {
                Ok(draft) => draft,
                Err(e) => {
                    self.trace.push(Event::RolledBack {
                        agent,
                        iteration,
                        to_version: good.draft.version,
                        reason: format!("revision failed: {e}"),
                    });
                    return (good, Verdict::Fail);
                }
            };
            self.record_draft(&revised);
            match self.debug_loop(revised) {
                Ok(next) => good = next,
                Err(reason) => {
                    self.trace.push(Event::RolledBack {
                        agent,
                        iteration,
                        to_version: good.draft.version,
                        reason,
                    });
                    return (good, Verdict::Fail);
                }
            }
        }
        (good, Verdict::Fail)
    }
}

/// Runs one session to a terminal state. Every failure becomes an outcome;
/// the trace is also written to the session directory.
///
/// # Panics
///
/// If `config` does not pass [`PipelineConfig::validate`].
pub fn run_session(
    backend: &dyn ChatBackend,
    request: &UserRequest,
    config: &PipelineConfig,
) -> (SessionResult, SessionTrace) {
    if let Err(e) = config.validate() {
        panic!("invalid pipeline config: {e}");
    }
    let metered = Metered::new(backend);
    let (outcome, figure, detail, trace) = drive(&metered, request, config);
    let mut trace = trace;
    trace.push(Event::SessionEnded {
        outcome,
        figure: figure.clone(),
        llm_calls: metered.calls(),
        prompt_tokens: metered.prompt_tokens(),
        completion_tokens: metered.completion_tokens(),
        detail,
    });
    if std::fs::create_dir_all(request.session_dir()).is_ok() {
        if let Err(e) = persist_trace(&trace, &request.trace_path()) {
            tracing::warn!(error = %e, "could not write trace");
        }
    }
    (
        SessionResult {
            outcome,
            figure_path: figure,
        },
        trace,
    )
}

fn drive(
    backend: &dyn ChatBackend,
    request: &UserRequest,
    config: &PipelineConfig,
) -> (SessionOutcome, Option<PathBuf>, String, SessionTrace) {
    let mut trace = SessionTrace::new(&request.id);
    let table = match request.load_table() {
        Ok(table) => table,
        Err(e) => return (SessionOutcome::PlanFailure, None, e.to_string(), trace),
    };
    let plan = match make_plan(
        backend,
        request,
        &table,
        &config.settings(&config.models.planner),
    ) {
        Ok(plan) => plan,
        Err(e) => return (SessionOutcome::PlanFailure, None, e.to_string(), trace),
    };
    trace.push(Event::PlanMade {
        steps: plan.steps.clone(),
    });

    let mut session = Session {
        backend,
        request,
        config,
        exec: config.exec_config(),
        coder: CodeAgent::new(backend, config.settings(&config.models.coder), request),
        trace,
        next_version: 0,
        derendered: HashMap::new(),
    };
    let first = match session.coder.initial_draft(&plan, &table) {
        Ok(draft) => draft,
        Err(e) => {
            return (
                SessionOutcome::CodeFailure,
                None,
                format!("initial code generation failed: {e}"),
                session.trace,
            )
        }
    };
    session.next_version = first.version;
    session.record_draft(&first);
    let mut good = match session.debug_loop(first) {
        Ok(good) => good,
        Err(reason) => return (SessionOutcome::CodeFailure, None, reason, session.trace),
    };

    let mut all_passed = true;
    for &agent in &config.agent_order {
        let (next, verdict) = session.feedback_loop(agent, good, &plan, &table);
        good = next;
        all_passed &= verdict == Verdict::Pass;
    }
    let figure = good.outcome.figure_path.clone();
    let outcome = if all_passed {
        SessionOutcome::Success
    } else {
        SessionOutcome::FeedbackExhaustedWithFigure
    };
    (outcome, figure, String::new(), session.trace)
}
