//! Multimodal de-rendering: a vision model reads the figure image and returns
//! the same JSON document the runner produces by introspection.

use std::path::Path;

use super::FeedbackError;
use crate::gateway::{chat_complete, ChatBackend, ChatMessage, ChatRequest, ModelSettings};
use crate::plot::DerenderedPlot;

const DERENDER_SYSTEM: &str = "You read data back out of rendered charts. Report the plotted \
values as precisely as you can from the image.";

const SCHEMA: &str = r#"Reply with one JSON object and nothing else:
{"series": [{"name": str, "x": [number or str], "y": [number], "kind": "line"|"bar"|"scatter"|"pie"|"heatmap"|"other"}],
 "title": str, "axis_labels": {"x": str, "y": str},
 "tick_labels": {"x": [str], "y": [str]}, "legend_entries": [str]}"#;

pub fn build_derender_prompt(figure_png: Vec<u8>, settings: &ModelSettings) -> ChatRequest {
    ChatRequest::new(
        settings,
        vec![
            ChatMessage::system(DERENDER_SYSTEM),
            ChatMessage::user(format!(
                "Extract the data and labels from this figure.\n{SCHEMA}"
            ))
            .with_png(figure_png),
        ],
    )
}

/// Parses the first JSON object in `text`, tolerating code fences and prose
/// around it.
pub fn parse_derender_reply(text: &str) -> Result<DerenderedPlot, String> {
    let start = text.find('{').ok_or("no JSON object in reply")?;
    let end = text.rfind('}').ok_or("no JSON object in reply")?;
    if end < start {
        return Err("no JSON object in reply".into());
    }
    let plot: DerenderedPlot =
        serde_json::from_str(&text[start..=end]).map_err(|e| format!("invalid plot JSON: {e}"))?;
    plot.validate()?;
    Ok(plot)
}

/// Asks the model to de-render the figure; retries once with the parse error.
pub fn derender_with_model(
    backend: &dyn ChatBackend,
    settings: &ModelSettings,
    figure_path: &Path,
) -> Result<DerenderedPlot, FeedbackError> {
    let png = std::fs::read(figure_path).map_err(|source| FeedbackError::Figure {
        path: figure_path.to_path_buf(),
        source,
    })?;
    let mut prompt = build_derender_prompt(png, settings);
    let first = chat_complete(backend, &prompt)?;
    match parse_derender_reply(&first.text) {
        Ok(plot) => Ok(plot),
        Err(err) => {
            prompt.messages.push(ChatMessage::assistant(first.text));
            prompt.messages.push(ChatMessage::user(format!(
                "That reply could not be used: {err}.\n{SCHEMA}"
            )));
            let second = chat_complete(backend, &prompt)?;
            parse_derender_reply(&second.text).map_err(FeedbackError::Derender)
        }
    }
}
