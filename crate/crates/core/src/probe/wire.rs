//! JSON bodies exchanged with a scoring endpoint (`POST /v1/score`).

use serde::{Deserialize, Serialize};

pub const SCORE_PATH: &str = "/v1/score";

pub const CODE_CAPABILITY: &str = "capability";
pub const CODE_UNSCOREABLE: &str = "unscoreable_candidate";
pub const CODE_BAD_REQUEST: &str = "bad_request";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

/// Replacement input-embedding row for one vocabulary token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingOverride {
    pub token: String,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub messages: Vec<ChatMessage>,
    pub prefill: String,
    pub candidates: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub embedding_overrides: Vec<EmbeddingOverride>,
    /// Score only each candidate's first token instead of the full sequence.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub first_token_only: bool,
}

impl ScoreRequest {
    /// The word probed by a request built from the standard question, if any.
    pub fn probed_word(&self) -> Option<&str> {
        let content = &self.messages.iter().find(|m| m.role == "user")?.content;
        let rest = content.strip_prefix("Do you associate ")?;
        rest.find(" more with ").map(|i| &rest[..i])
    }
}

/// Successful response: one log-probability per candidate, `null` for
/// probability zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub logprobs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    #[serde(default)]
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
}

/// Joins a base URL and the scoring path, tolerating a trailing slash or an
/// already complete URL.
pub fn score_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with(SCORE_PATH) {
        base.to_string()
    } else {
        format!("{base}{SCORE_PATH}")
    }
}
