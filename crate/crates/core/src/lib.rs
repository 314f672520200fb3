//! Multi-agent pipeline that turns a natural-language plotting request and a
//! data table into a rendered figure.
//!
//! A session plans the request, generates plotting code, executes it in an
//! isolated runner process with a bounded self-debugging loop, and then passes
//! the draft figure through numeric, lexical, and visual feedback agents in
//! sequence. The [`bench`] module scores finished figures with a multimodal
//! judge and aggregates results across a dataset.

pub mod bench;
pub mod cli;
pub mod codegen;
pub mod exec;
pub mod feedback;
pub mod gateway;
pub mod orchestrator;
pub mod planner;
pub mod plot;
pub mod report;
pub mod table;
pub mod task;
pub mod trace;

pub use gateway::{BackendKind, ChatBackend, ChatMessage, ChatRequest, ChatResponse, GatewayError};
pub use orchestrator::{run_session, PipelineConfig, SessionOutcome, SessionResult};
pub use table::{Cell, DataTable};
pub use task::UserRequest;
pub use trace::SessionTrace;
