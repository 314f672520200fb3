//! Code generation agent: turns a plan into a complete plotting program and
//! revises it from tracebacks or verifier feedback.
//!
//! Every revision asks for a whole new program rather than a patch, and every
//! prompt carries the complete current source.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{
    chat_complete, ChatBackend, ChatMessage, ChatRequest, GatewayError, ModelSettings,
};
use crate::planner::VisualizationPlan;
use crate::report::{AgentKind, FeedbackReport, Verdict};
use crate::table::DataTable;
use crate::task::UserRequest;

#[derive(Debug, Error)]
pub enum CodegenError {
    #[error("model response contained no code")]
    EmptyCode,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Initial,
    DebugFix { iteration: u32 },
    FeedbackFix { agent: AgentKind, iteration: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDraft {
    pub version: u32,
    pub source: String,
    pub provenance: Provenance,
}

const CODER_SYSTEM: &str = "You are an expert Python data visualization programmer. \
You write complete, self-contained matplotlib programs that run without user interaction. \
Never call plt.show().";

const ONE_BLOCK: &str = "Reply with exactly one fenced ```python code block containing the \
complete program and nothing else.";

/// Returns the body of the first ``` fenced block, or the whole text when
/// there is no fence.
pub fn extract_code_block(text: &str) -> Result<String, CodegenError> {
    let mut lines = text.lines();
    let mut body: Option<Vec<&str>> = None;
    for line in lines.by_ref() {
        if line.trim_start().starts_with("```") {
            body = Some(Vec::new());
            break;
        }
    }
    let code = match body {
        Some(mut collected) => {
            for line in lines {
                if line.trim_start().starts_with("```") {
                    break;
                }
                collected.push(line);
            }
            collected.join("\n")
        }
        None => text.to_string(),
    };
    let code = code.trim_matches(|c| c == '\n' || c == '\r').trim_end();
    if code.trim().is_empty() {
        return Err(CodegenError::EmptyCode);
    }
    Ok(code.to_string())
}

pub fn build_codegen_prompt(
    plan: &VisualizationPlan,
    request: &UserRequest,
    table: &DataTable,
    settings: &ModelSettings,
) -> ChatRequest {
    let mut user = format!("User request:\n{}\n\nPlan:\n", request.text);
    for (i, step) in plan.steps.iter().enumerate() {
        user.push_str(&format!("{}. {}\n", i + 1, step));
    }
    if !plan.data_note.is_empty() {
        user.push_str(&format!("\nData note: {}\n", plan.data_note));
    }
    if !plan.visual_notes.is_empty() {
        user.push_str("\nVisual requirements:\n");
        for note in &plan.visual_notes {
            user.push_str(&format!("- {note}\n"));
        }
    }
    user.push_str(&format!(
        "\nData file path: {} (CSV with header; columns: {})\n\
Save the final figure as PNG to: {}\n\n{ONE_BLOCK}",
        request.data_path.display(),
        table.columns().join(", "),
        request.figure_path(1).display(),
    ));
    ChatRequest::new(
        settings,
        vec![ChatMessage::system(CODER_SYSTEM), ChatMessage::user(user)],
    )
}

pub fn build_repair_prompt(
    draft: &CodeDraft,
    traceback: &str,
    figure_path: &std::path::Path,
    settings: &ModelSettings,
) -> ChatRequest {
    let user = format!(
        "The following program failed.\n\nProgram:\n```python\n{source}\n```\n\n\
Error output:\n```\n{traceback}\n```\n\n\
Fix the problem and return the complete corrected program, not a diff. \
Save the figure as PNG to: {figure}\n\n{ONE_BLOCK}",
        source = draft.source,
        figure = figure_path.display(),
    );
    ChatRequest::new(
        settings,
        vec![ChatMessage::system(CODER_SYSTEM), ChatMessage::user(user)],
    )
}

pub fn build_revision_prompt(
    draft: &CodeDraft,
    report: &FeedbackReport,
    figure_path: &std::path::Path,
    settings: &ModelSettings,
) -> ChatRequest {
    let user = format!(
        "The program below runs, but the {agent} reviewer of its figure reported a problem.\n\n\
Program:\n```python\n{source}\n```\n\n\
Reviewer feedback:\n{message}\n\n\
Change only what the feedback requires and keep everything else as it is. \
Return the complete revised program. Save the figure as PNG to: {figure}\n\n{ONE_BLOCK}",
        agent = report.agent,
        source = draft.source,
        message = report.message,
        figure = figure_path.display(),
    );
    ChatRequest::new(
        settings,
        vec![ChatMessage::system(CODER_SYSTEM), ChatMessage::user(user)],
    )
}

/// The code agent bound to one session.
pub struct CodeAgent<'a> {
    backend: &'a dyn ChatBackend,
    settings: ModelSettings,
    request: &'a UserRequest,
}

impl<'a> CodeAgent<'a> {
    pub fn new(
        backend: &'a dyn ChatBackend,
        settings: ModelSettings,
        request: &'a UserRequest,
    ) -> Self {
        Self {
            backend,
            settings,
            request,
        }
    }

    fn figure_path(&self, version: u32) -> PathBuf {
        self.request.figure_path(version)
    }

    fn ask(&self, prompt: &ChatRequest) -> Result<String, CodegenError> {
        let response = chat_complete(self.backend, prompt)?;
        extract_code_block(&response.text)
    }

    pub fn initial_draft(
        &self,
        plan: &VisualizationPlan,
        table: &DataTable,
    ) -> Result<CodeDraft, CodegenError> {
        let prompt = build_codegen_prompt(plan, self.request, table, &self.settings);
        Ok(CodeDraft {
            version: 1,
            source: self.ask(&prompt)?,
            provenance: Provenance::Initial,
        })
    }

    /// `version` is the number the new draft will carry.
    pub fn repair_from_traceback(
        &self,
        draft: &CodeDraft,
        traceback: &str,
        version: u32,
        debug_iteration: u32,
    ) -> Result<CodeDraft, CodegenError> {
        assert!(!traceback.trim().is_empty(), "repair requires a traceback");
        let prompt =
            build_repair_prompt(draft, traceback, &self.figure_path(version), &self.settings);
        Ok(CodeDraft {
            version,
            source: self.ask(&prompt)?,
            provenance: Provenance::DebugFix {
                iteration: debug_iteration,
            },
        })
    }

    pub fn revise_from_feedback(
        &self,
        draft: &CodeDraft,
        report: &FeedbackReport,
        version: u32,
    ) -> Result<CodeDraft, CodegenError> {
        assert_eq!(
            report.verdict,
            Verdict::Fail,
            "revision requires a failing report"
        );
        let prompt =
            build_revision_prompt(draft, report, &self.figure_path(version), &self.settings);
        Ok(CodeDraft {
            version,
            source: self.ask(&prompt)?,
            provenance: Provenance::FeedbackFix {
                agent: report.agent,
                iteration: report.iteration,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;
    use crate::planner::PLAN_LANGUAGE;

    fn plan(steps: &[&str], visual: &[&str]) -> VisualizationPlan {
        VisualizationPlan {
            steps: steps.iter().map(|s| s.to_string()).collect(),
            language: PLAN_LANGUAGE.into(),
            data_note: "sales.csv (CSV)".into(),
            visual_notes: visual.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn request() -> UserRequest {
        UserRequest::new("s1", "plot sales", "/data/sales.csv", "/tmp/out")
    }

    fn table() -> DataTable {
        DataTable::from_csv_reader("month,sales\nJan,1\n".as_bytes()).unwrap()
    }

    fn draft(source: &str) -> CodeDraft {
        CodeDraft {
            version: 1,
            source: source.into(),
            provenance: Provenance::Initial,
        }
    }

    #[test]
    fn extracts_first_fenced_block() {
        assert_eq!(
            extract_code_block("```\nprint(1)\n```").unwrap(),
            "print(1)"
        );
        assert_eq!(
            extract_code_block("here is code:\n```python\nX=1\n```\nnotes\n```\nY=2\n```").unwrap(),
            "X=1"
        );
        assert_eq!(extract_code_block("  import os\n").unwrap(), "  import os");
        assert_eq!(
            extract_code_block("```py\nif x:\n    y()\n").unwrap(),
            "if x:\n    y()"
        );
        assert!(matches!(
            extract_code_block("   "),
            Err(CodegenError::EmptyCode)
        ));
        assert!(matches!(
            extract_code_block("```python\n\n```"),
            Err(CodegenError::EmptyCode)
        ));
    }

    #[test]
    fn codegen_prompt_preserves_plan_and_paths() {
        let text = build_codegen_prompt(
            &plan(&["load the csv", "draw bars"], &["dark background"]),
            &request(),
            &table(),
            &ModelSettings::new("coder"),
        )
        .prompt_text();
        let s1 = text.find("load the csv").unwrap();
        let s2 = text.find("draw bars").unwrap();
        assert!(s1 < s2);
        assert!(text.contains("/data/sales.csv"));
        assert!(text.contains("/tmp/out/s1/figure_v1.png"));
        assert!(text.contains("dark background"));
        assert!(text.contains("exactly one fenced"));
    }

    #[test]
    fn repair_bumps_version_and_embeds_traceback() {
        let backend = ScriptedBackend::new(["```python\nprint('fixed')\n```"]);
        let req = request();
        let agent = CodeAgent::new(&backend, ModelSettings::new("coder"), &req);
        let tb = "Traceback (most recent call last):\nNameError: name 'pd' is not defined";
        let source = "import matplotlib\n".repeat(400) + "pd.read_csv('x')";
        let fixed = agent
            .repair_from_traceback(&draft(&source), tb, 2, 1)
            .unwrap();
        assert_eq!(fixed.version, 2);
        assert_eq!(fixed.provenance, Provenance::DebugFix { iteration: 1 });
        let prompt = backend.requests()[0].prompt_text();
        assert!(prompt.contains(tb));
        assert!(prompt.contains(&source));
        assert!(prompt.contains("figure_v2.png"));
    }

    #[test]
    fn repair_may_return_identical_source() {
        let backend = ScriptedBackend::new(["```python\nx = 1\n```"]);
        let req = request();
        let agent = CodeAgent::new(&backend, ModelSettings::new("coder"), &req);
        let fixed = agent
            .repair_from_traceback(&draft("x = 1"), "Error", 2, 1)
            .unwrap();
        assert_eq!(fixed.source, "x = 1");
        assert_eq!(fixed.version, 2);
    }

    #[test]
    fn revision_records_feedback_provenance() {
        let backend = ScriptedBackend::new(["```python\nplt.ylabel('sales')\n```"]);
        let req = request();
        let agent = CodeAgent::new(&backend, ModelSettings::new("coder"), &req);
        let report = FeedbackReport::fail(AgentKind::Numeric, 2, "y-axis label missing: 'sales'");
        let revised = agent
            .revise_from_feedback(&draft("plt.plot([1])"), &report, 3)
            .unwrap();
        assert_eq!(
            revised.provenance,
            Provenance::FeedbackFix {
                agent: AgentKind::Numeric,
                iteration: 2
            }
        );
        let prompt = backend.requests()[0].prompt_text();
        assert!(prompt.contains("y-axis label missing: 'sales'"));
        assert!(prompt.contains("plt.plot([1])"));
        assert!(prompt.contains("Change only what the feedback requires"));
    }

    #[test]
    #[should_panic(expected = "failing report")]
    fn revision_from_passing_report_is_a_caller_bug() {
        let backend = ScriptedBackend::new(["```\nx\n```"]);
        let req = request();
        let agent = CodeAgent::new(&backend, ModelSettings::new("coder"), &req);
        let report = FeedbackReport::pass(AgentKind::Visual, 1, "");
        let _ = agent.revise_from_feedback(&draft("x"), &report, 2);
    }

    #[test]
    fn empty_code_response_is_an_error() {
        let backend = ScriptedBackend::new(["```python\n```"]);
        let req = request();
        let agent = CodeAgent::new(&backend, ModelSettings::new("coder"), &req);
        assert!(matches!(
            agent.initial_draft(&plan(&["a"], &[]), &table()),
            Err(CodegenError::EmptyCode)
        ));
    }
}
