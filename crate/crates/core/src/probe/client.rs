use std::time::Duration;

use super::wire::{score_url, ErrorBody, ScoreRequest, ScoreResponse, CODE_CAPABILITY, CODE_UNSCOREABLE};
use super::LogitsClient;
use crate::error::{Error, Result};

/// Blocking HTTP client for a scoring endpoint.
///
/// Transport failures and 5xx responses (other than 501) are retried with
/// exponential backoff; 4xx responses are not.
#[derive(Debug, Clone)]
pub struct HttpLogitsClient {
    url: String,
    agent: ureq::Agent,
    pub max_retries: u32,
    pub backoff: Duration,
    pub first_token_only: bool,
}

impl HttpLogitsClient {
    pub fn new(endpoint: &str) -> Self {
        Self::with_timeout(endpoint, Duration::from_secs(120))
    }

    pub fn with_timeout(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: score_url(endpoint),
            agent,
            max_retries: 3,
            backoff: Duration::from_millis(250),
            first_token_only: false,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, request: &ScoreRequest) -> Result<Vec<f64>, Attempt> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(request)
            .map_err(|e| Attempt::Retry(Error::Transport(format!("{}: {e}", self.url))))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(Error::Transport(format!("reading response: {e}"))))?;
        if status == 200 {
            let parsed: ScoreResponse = serde_json::from_str(&body)
                .map_err(|e| Attempt::Fatal(Error::Protocol(format!("malformed response body: {e}"))))?;
            if parsed.logprobs.len() != request.candidates.len() {
                return Err(Attempt::Fatal(Error::Protocol(format!(
                    "expected {} log-probabilities, got {}",
                    request.candidates.len(),
                    parsed.logprobs.len()
                ))));
            }
            return Ok(parsed.logprobs.into_iter().map(|l| l.unwrap_or(f64::NEG_INFINITY)).collect());
        }
        let detail = serde_json::from_str::<ErrorBody>(&body).ok().map(|b| b.error);
        let message = detail.as_ref().map(|d| d.message.clone()).unwrap_or_else(|| body.trim().to_string());
        let code = detail.as_ref().map(|d| d.code.as_str()).unwrap_or("");
        if status == 501 || code == CODE_CAPABILITY {
            return Err(Attempt::Fatal(Error::Capability(message)));
        }
        if code == CODE_UNSCOREABLE {
            let candidate = detail.and_then(|d| d.candidate).unwrap_or_default();
            return Err(Attempt::Fatal(Error::Protocol(format!("candidate `{candidate}` cannot be scored: {message}"))));
        }
        if (500..600).contains(&status) {
            return Err(Attempt::Retry(Error::Transport(format!("HTTP {status}: {message}"))));
        }
        Err(Attempt::Fatal(Error::Protocol(format!("HTTP {status}: {message}"))))
    }
}

enum Attempt {
    Retry(Error),
    Fatal(Error),
}

impl LogitsClient for HttpLogitsClient {
    fn score(&self, request: &ScoreRequest) -> Result<Vec<f64>> {
        let owned;
        let request = if self.first_token_only && !request.first_token_only {
            owned = ScoreRequest { first_token_only: true, ..request.clone() };
            &owned
        } else {
            request
        };
        let mut delay = self.backoff;
        let mut tries = 0;
        loop {
            match self.attempt(request) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) if tries >= self.max_retries => return Err(e),
                Err(Attempt::Retry(_)) => {
                    tries += 1;
                    std::thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
            }
        }
    }
}
