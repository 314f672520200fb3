mod common;

use common::*;
use plotgen::exec::ExecStatus;
use plotgen::gateway::ScriptedBackend;
use plotgen::orchestrator::DerenderMode;
use plotgen::report::{AgentKind, Verdict};
use plotgen::trace::{load_trace, Event};
use plotgen::{run_session, PipelineConfig, SessionOutcome, SessionResult, SessionTrace};

fn run(
    script: Vec<String>,
    config: &PipelineConfig,
) -> (Workspace, SessionResult, SessionTrace, ScriptedBackend) {
    let ws = Workspace::new();
    let backend = ScriptedBackend::new(script);
    let (result, trace) = run_session(&backend, &ws.request("s1"), config);
    check_common_invariants(&trace, config);
    (ws, result, trace, backend)
}

fn check_common_invariants(trace: &SessionTrace, config: &PipelineConfig) {
    trace.check_invariants().unwrap();
    let executed = trace
        .events()
        .filter(|e| matches!(e, Event::Executed { .. }))
        .count() as u32;
    assert!(executed <= config.execution_cap());
    let agents: Vec<AgentKind> = trace
        .events()
        .filter_map(|e| match e {
            Event::FeedbackIssued { agent, .. } | Event::VerifierError { agent, .. } => {
                Some(*agent)
            }
            _ => None,
        })
        .collect();
    for kind in AgentKind::FEEDBACK {
        assert!(
            agents.iter().filter(|a| **a == kind).count() as u32 <= config.max_feedback_iterations
        );
    }
    let positions: Vec<usize> = agents
        .iter()
        .map(|a| config.agent_order.iter().position(|k| k == a).unwrap())
        .collect();
    assert!(
        positions.windows(2).all(|w| w[0] <= w[1]),
        "agents out of order: {agents:?}"
    );
}

fn count(trace: &SessionTrace, pred: impl Fn(&Event) -> bool) -> usize {
    trace.events().filter(|e| pred(e)).count()
}

fn feedback(trace: &SessionTrace, kind: AgentKind, verdict: Verdict) -> usize {
    count(
        trace,
        |e| matches!(e, Event::FeedbackIssued { agent, verdict: v, .. } if *agent == kind && *v == verdict),
    )
}

#[test]
fn happy_path() {
    let (ws, result, trace, backend) = run(
        s(&[PLAN, &runs_with("v1", &good_plot()), VISUAL_PASS]),
        &config(3, 2),
    );
    assert_eq!(result.outcome, SessionOutcome::Success);
    assert_eq!(
        result.figure_path,
        Some(ws.out.join("s1").join("figure_v1.png"))
    );
    assert_eq!(count(&trace, |e| matches!(e, Event::Executed { .. })), 1);
    for kind in AgentKind::FEEDBACK {
        assert_eq!(feedback(&trace, kind, Verdict::Pass), 1);
    }
    assert_eq!(trace.llm_calls(), 3);
    assert_eq!(backend.remaining(), 0);
    assert_eq!(
        load_trace(&ws.out.join("s1").join("trace.jsonl")).unwrap(),
        trace
    );
}

#[test]
fn one_repair_then_success() {
    let (_ws, result, trace, _) = run(
        s(&[
            PLAN,
            &raises("v1"),
            &runs_with("v2", &good_plot()),
            VISUAL_PASS,
        ]),
        &config(3, 2),
    );
    assert_eq!(result.outcome, SessionOutcome::Success);
    assert_eq!(
        count(&trace, |e| matches!(e, Event::DraftCreated { .. })),
        2
    );
    assert_eq!(count(&trace, |e| matches!(e, Event::Executed { .. })), 2);
    let statuses: Vec<ExecStatus> = trace
        .events()
        .filter_map(|e| match e {
            Event::Executed { status, .. } => Some(*status),
            _ => None,
        })
        .collect();
    assert_eq!(statuses, [ExecStatus::RuntimeError, ExecStatus::Success]);
}

#[test]
fn numeric_failing_twice_exhausts_feedback() {
    let mis = misordered_plot();
    let (ws, result, trace, _) = run(
        s(&[
            PLAN,
            &runs_with("v1", &mis),
            &runs_with("v2", &mis),
            &runs_with("v3", &mis),
            VISUAL_PASS,
        ]),
        &config(3, 2),
    );
    assert_eq!(result.outcome, SessionOutcome::FeedbackExhaustedWithFigure);
    assert_eq!(feedback(&trace, AgentKind::Numeric, Verdict::Fail), 2);
    assert_eq!(feedback(&trace, AgentKind::Lexical, Verdict::Pass), 1);
    assert_eq!(feedback(&trace, AgentKind::Visual, Verdict::Pass), 1);
    assert_eq!(
        result.figure_path,
        Some(ws.out.join("s1").join("figure_v3.png"))
    );
    let message = trace
        .events()
        .find_map(|e| match e {
            Event::FeedbackIssued {
                agent: AgentKind::Numeric,
                message,
                ..
            } => Some(message.clone()),
            _ => None,
        })
        .unwrap();
    assert!(message.contains("'sales'"), "{message}");
}

#[test]
fn broken_revision_rolls_back_to_last_good_draft() {
    let (ws, result, trace, _) = run(
        s(&[
            PLAN,
            &runs_with("v1", &misordered_plot()),
            &raises("v2"),
            &raises("v3"),
            VISUAL_PASS,
        ]),
        &config(1, 1),
    );
    assert_eq!(result.outcome, SessionOutcome::FeedbackExhaustedWithFigure);
    assert_eq!(
        result.figure_path,
        Some(ws.out.join("s1").join("figure_v1.png"))
    );
    assert_eq!(
        count(&trace, |e| matches!(
            e,
            Event::RolledBack {
                to_version: 1,
                agent: AgentKind::Numeric,
                ..
            }
        )),
        1
    );
    assert_eq!(feedback(&trace, AgentKind::Lexical, Verdict::Pass), 1);
}

#[test]
fn verifier_errors_count_as_failures() {
    let (_ws, result, trace, _) = run(
        s(&[
            PLAN,
            &runs_with("v1", &good_plot()),
            "looks nice",
            "really nice",
        ]),
        &config(3, 2),
    );
    assert_eq!(result.outcome, SessionOutcome::FeedbackExhaustedWithFigure);
    assert_eq!(
        count(&trace, |e| matches!(
            e,
            Event::VerifierError {
                agent: AgentKind::Visual,
                ..
            }
        )),
        1
    );
}

#[test]
fn plan_failure_is_terminal() {
    let (_ws, result, trace, _) = run(s(&["no plan", "still no plan"]), &config(3, 2));
    assert_eq!(result.outcome, SessionOutcome::PlanFailure);
    assert!(result.figure_path.is_none());
    assert_eq!(trace.records.len(), 1);
}

#[test]
fn code_failure_after_debug_budget() {
    let (_ws, result, trace, backend) = run(
        s(&[PLAN, &raises("v1"), &raises("v2"), &raises("v3"), "unused"]),
        &config(2, 2),
    );
    assert_eq!(result.outcome, SessionOutcome::CodeFailure);
    assert!(result.figure_path.is_none());
    assert_eq!(count(&trace, |e| matches!(e, Event::Executed { .. })), 3);
    assert_eq!(backend.remaining(), 1);
}

#[test]
fn multimodal_derendering_asks_the_model_once_per_draft() {
    let config = PipelineConfig {
        derender_mode: DerenderMode::Multimodal,
        ..config(3, 2)
    };
    let (_ws, result, trace, backend) = run(
        s(&[PLAN, &code_reply("v1", &[]), &good_plot(), VISUAL_PASS]),
        &config,
    );
    assert_eq!(result.outcome, SessionOutcome::Success, "{trace:#?}");
    assert_eq!(backend.calls(), 4);
    assert_eq!(backend.requests()[2].image_count(), 1);
}

#[test]
fn custom_agent_order_is_respected() {
    let config = PipelineConfig {
        agent_order: vec![AgentKind::Visual, AgentKind::Lexical, AgentKind::Numeric],
        ..config(3, 2)
    };
    let (_ws, result, trace, _) = run(
        s(&[PLAN, &runs_with("v1", &good_plot()), VISUAL_PASS]),
        &config,
    );
    assert_eq!(result.outcome, SessionOutcome::Success);
    let first = trace
        .events()
        .find_map(|e| match e {
            Event::FeedbackIssued { agent, .. } => Some(*agent),
            _ => None,
        })
        .unwrap();
    assert_eq!(first, AgentKind::Visual);
}
