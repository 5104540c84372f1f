//! LLM baseline for per-window complex-event labeling: prompts, a
//! tolerant response parser, a chat-completion client and an evaluation
//! harness with transcript replay.

pub mod client;
pub mod harness;
pub mod parse;
pub mod prompt;

use std::path::PathBuf;

use thiserror::Error;

pub use client::{
    ChatClient, Completion, HttpChatClient, LlmRunConfig, RequestFailure, RetryPolicy,
    TransportError,
};
pub use harness::{read_transcripts, replay, run_eval, score, EvalOptions, EvalReport, Transcript};
pub use parse::{parse_response, ParseError, ParsedResponse};
pub use prompt::{build_prompt, few_shot_examples, Example, Prompt, PromptBundle, DEFAULT_CLASSES};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Archive {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("all {failed} requests failed")]
    AllFailed { failed: usize },
    #[error(transparent)]
    Metrics(#[from] ced_core::metrics::MetricsError),
}
