//! Query planning agent: decomposes a request into numbered executable steps.
//!
//! The model is asked to think step by step and answer in a line grammar:
//!
//! ```text
//! STEP 1: <instruction>
//! STEP 2: <instruction>
//! DATA: <data file and format note>
//! VISUAL: <aesthetic requirement>
//! ```
//!
//! Steps must be numbered 1..N without gaps; every other line is ignored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{
    chat_complete, ChatBackend, ChatMessage, ChatRequest, GatewayError, ModelSettings,
};
use crate::table::DataTable;
use crate::task::UserRequest;

pub const SAMPLE_ROWS: usize = 5;
pub const PLAN_LANGUAGE: &str = "python";

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("could not parse plan: {0}")]
    Parse(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualizationPlan {
    pub steps: Vec<String>,
    pub language: String,
    pub data_note: String,
    pub visual_notes: Vec<String>,
}

impl VisualizationPlan {
    /// Renders the plan back into the line grammar accepted by [`parse_plan`].
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, step) in self.steps.iter().enumerate() {
            out.push_str(&format!("STEP {}: {}\n", i + 1, step));
        }
        if !self.data_note.is_empty() {
            out.push_str(&format!("DATA: {}\n", self.data_note));
        }
        for note in &self.visual_notes {
            out.push_str(&format!("VISUAL: {note}\n"));
        }
        out
    }

    /// Steps, data note and visual notes as one block of text.
    pub fn full_text(&self) -> String {
        let mut parts = self.steps.clone();
        parts.push(self.data_note.clone());
        parts.extend(self.visual_notes.iter().cloned());
        parts.join("\n")
    }
}

const PLANNER_SYSTEM: &str = "You are a query planning agent for scientific data visualization. \
Think step by step and break the user's request into a sequence of explicit, executable \
instructions for a Python code generator that uses matplotlib. Each step should name the \
function calls, parameters and return values it needs.";

fn grammar_instructions() -> &'static str {
    "Answer using exactly this line format and nothing else:\n\
STEP 1: <first instruction>\n\
STEP 2: <second instruction>\n\
... (number the steps 1, 2, 3, ... without gaps)\n\
DATA: <the data file name and its format>\n\
VISUAL: <one visual or aesthetic requirement from the user per line>"
}

pub fn build_plan_prompt(
    request: &UserRequest,
    table: &DataTable,
    settings: &ModelSettings,
) -> ChatRequest {
    let sample = table.sample_rows(SAMPLE_ROWS);
    let user = format!(
        "User request:\n{request}\n\n\
Data file: {file} (CSV with a header row)\n\
Columns: {columns}\n\
First {n} data rows:\n{rows}\n\n\
Programming language: {PLAN_LANGUAGE}\n\n{grammar}",
        request = request.text,
        file = request.data_file_name(),
        columns = table.columns().join(", "),
        n = sample.len(),
        rows = table.render_rows(sample),
        grammar = grammar_instructions(),
    );
    ChatRequest::new(
        settings,
        vec![ChatMessage::system(PLANNER_SYSTEM), ChatMessage::user(user)],
    )
}

pub fn parse_plan(text: &str) -> Result<VisualizationPlan, PlanError> {
    let mut steps = Vec::new();
    let mut data_notes = Vec::new();
    let mut visual_notes = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("STEP ") {
            let Some((number, instruction)) = rest.split_once(':') else {
                continue;
            };
            let Ok(number) = number.trim().parse::<usize>() else {
                continue;
            };
            let expected = steps.len() + 1;
            if number != expected {
                return Err(PlanError::Parse(format!(
                    "expected STEP {expected}, found STEP {number}"
                )));
            }
            let instruction = instruction.trim();
            if instruction.is_empty() {
                return Err(PlanError::Parse(format!("STEP {number} is empty")));
            }
            steps.push(instruction.to_string());
        } else if let Some(rest) = line.strip_prefix("DATA:") {
            data_notes.push(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("VISUAL:") {
            let note = rest.trim();
            if !note.is_empty() {
                visual_notes.push(note.to_string());
            }
        }
    }
    if steps.is_empty() {
        return Err(PlanError::Parse("no STEP lines found".into()));
    }
    Ok(VisualizationPlan {
        steps,
        language: PLAN_LANGUAGE.to_string(),
        data_note: data_notes.join(" "),
        visual_notes,
    })
}

/// Asks the model for a plan; re-prompts once with the parse error if the
/// first answer does not follow the grammar.
pub fn make_plan(
    backend: &dyn ChatBackend,
    request: &UserRequest,
    table: &DataTable,
    settings: &ModelSettings,
) -> Result<VisualizationPlan, PlanError> {
    let mut prompt = build_plan_prompt(request, table, settings);
    let first = chat_complete(backend, &prompt)?;
    match parse_plan(&first.text) {
        Ok(plan) => Ok(plan),
        Err(err) => {
            tracing::debug!(error = %err, "plan unparseable, re-prompting once");
            prompt.messages.push(ChatMessage::assistant(first.text));
            prompt.messages.push(ChatMessage::user(format!(
                "Your previous answer could not be parsed: {err}.\n{}",
                grammar_instructions()
            )));
            let second = chat_complete(backend, &prompt)?;
            parse_plan(&second.text)
        }
    }
}
