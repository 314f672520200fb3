//! Visual feedback: a multimodal model looks at the figure and judges layout,
//! colors and placement against the request.

use std::path::Path;

use super::verdict::{parse_feedback_verdict, VerdictParseError};
use super::FeedbackError;
use crate::gateway::{chat_complete, ChatBackend, ChatMessage, ChatRequest, ModelSettings};
use crate::report::{AgentKind, FeedbackReport, Verdict};
use crate::task::UserRequest;

const VISUAL_SYSTEM: &str = "You are a visual feedback agent for scientific plots. Look at the \
figure the way a careful human reader would: color scheme, layout, placement of the title, \
legend, labels and annotations, overlapping or clipped elements, and whether the figure fits \
the user's aesthetic requirements.";

const VERDICT_INSTRUCTIONS: &str = "Answer in this format:\n\
VERDICT: PASS or VERDICT: FAIL\n\
FEEDBACK: <one concrete fix instruction per line, only when failing>";

pub fn build_visual_prompt(
    figure_png: Vec<u8>,
    request: &UserRequest,
    visual_notes: &[String],
    settings: &ModelSettings,
) -> ChatRequest {
    let notes = if visual_notes.is_empty() {
        "(none stated)".to_string()
    } else {
        visual_notes
            .iter()
            .map(|n| format!("- {n}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let text = format!(
        "User request:\n{}\n\nVisual requirements:\n{notes}\n\n\
The attached image is the current draft figure. Decide whether its visual presentation \
satisfies the request.\n\n{VERDICT_INSTRUCTIONS}",
        request.text
    );
    ChatRequest::new(
        settings,
        vec![
            ChatMessage::system(VISUAL_SYSTEM),
            ChatMessage::user(text).with_png(figure_png),
        ],
    )
}

/// Reviews the figure; re-prompts once if the answer has no VERDICT line.
pub fn visual_review(
    backend: &dyn ChatBackend,
    settings: &ModelSettings,
    figure_path: &Path,
    request: &UserRequest,
    visual_notes: &[String],
    iteration: u32,
) -> Result<FeedbackReport, FeedbackError> {
    let png = std::fs::read(figure_path).map_err(|source| FeedbackError::Figure {
        path: figure_path.to_path_buf(),
        source,
    })?;
    let mut prompt = build_visual_prompt(png, request, visual_notes, settings);
    let first = chat_complete(backend, &prompt)?;
    let parsed = match parse_feedback_verdict(&first.text) {
        Ok(parsed) => parsed,
        Err(VerdictParseError) => {
            prompt.messages.push(ChatMessage::assistant(first.text));
            prompt.messages.push(ChatMessage::user(format!(
                "Your answer did not contain a VERDICT line.\n{VERDICT_INSTRUCTIONS}"
            )));
            let second = chat_complete(backend, &prompt)?;
            parse_feedback_verdict(&second.text)?
        }
    };
    Ok(match parsed {
        (Verdict::Pass, message) => FeedbackReport::pass(AgentKind::Visual, iteration, message),
        (Verdict::Fail, message) => FeedbackReport::fail(AgentKind::Visual, iteration, message),
    })
}
