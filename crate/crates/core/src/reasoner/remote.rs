//! OpenAI-compatible chat-completions backend.

use std::time::Duration;

use serde_json::json;

use super::prompt::parse_reply;
use super::replay::ReplayRecorder;
use super::{
    DecisionSource, Prompt, Reasoner, ReasonerBackendConfig, ReasonerDecision, ReasonerRequest,
};

pub struct RemoteReasoner {
    config: ReasonerBackendConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    failures: usize,
    recorder: Option<ReplayRecorder>,
}

impl RemoteReasoner {
    /// Reads the API key from the configured environment variable once.
    pub fn new(config: ReasonerBackendConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout)))
            .http_status_as_error(true)
            .build()
            .into();
        let api_key = std::env::var(&config.api_key_env_var).ok();
        if api_key.is_none() {
            log::warn!(
                "environment variable {} is not set; sending requests without a key",
                config.api_key_env_var
            );
        }
        Self {
            config,
            agent,
            api_key,
            failures: 0,
            recorder: None,
        }
    }

    /// Records every raw reply (or its absence) for later replay.
    pub fn with_recorder(mut self, recorder: ReplayRecorder) -> Self {
        self.recorder = Some(recorder);
        self
    }

    pub fn take_recorder(&mut self) -> Option<ReplayRecorder> {
        self.recorder.take()
    }

    fn request_body(&self, prompt: &Prompt) -> serde_json::Value {
        json!({
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": 0,
        })
    }

    /// One HTTP round trip; returns the first choice's message content.
    fn call_once(&self, body: &serde_json::Value) -> Result<String, String> {
        let mut req = self.agent.post(&self.config.endpoint_url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| format!("invalid response body: {e}"))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_owned)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }

    /// Queries with retries. Returns the decision and the raw reply that
    /// produced it, if any.
    pub fn query(&mut self, prompt: &Prompt) -> (ReasonerDecision, Option<String>) {
        let body = self.request_body(prompt);
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            match self.call_once(&body) {
                Ok(content) => match parse_reply(&content) {
                    Ok((speed, rationale)) => {
                        return (
                            ReasonerDecision::new(speed, rationale, DecisionSource::RemoteLlm),
                            Some(content),
                        )
                    }
                    Err(e) => last_error = format!("unusable reply: {e}"),
                },
                Err(e) => last_error = e,
            }
            log::debug!("reasoner attempt {} failed: {last_error}", attempt + 1);
        }
        self.failures += 1;
        log::warn!(
            "reasoner gave up after {} attempts: {last_error}",
            self.config.max_retries + 1
        );
        (ReasonerDecision::fallback(last_error), None)
    }
}

impl Reasoner for RemoteReasoner {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn decide(&mut self, request: &ReasonerRequest<'_>) -> ReasonerDecision {
        let (decision, reply) = self.query(request.prompt);
        if let Some(rec) = &mut self.recorder {
            rec.record(request.step, request.prompt, reply);
        }
        decision
    }

    fn failures(&self) -> usize {
        self.failures
    }
}
