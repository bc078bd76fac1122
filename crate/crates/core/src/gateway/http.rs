//! Client for an OpenAI-compatible text-completion endpoint
//! (`POST {endpoint}/v1/completions`).
//!
//! The prompt string goes over the wire verbatim; the Llama-2 instruction
//! markers are already rendered into it, so the plain completions route is
//! used rather than a chat-message array. One retry on transport-level
//! failure, none on HTTP errors.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CompletionResponse, FinishReason, Gateway, GatewayError, SamplingParams};
use crate::prompt::RenderedPrompt;

/// How the repetition penalty is spelled on the wire. Serving stacks that
/// lack the multiplicative `repetition_penalty` extension accept the
/// additive OpenAI `frequency_penalty` instead; both are neutral-centered
/// (1.0 resp. 0.0), so the fallback maps `x` to `x - 1.0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    #[default]
    RepetitionPenalty,
    FrequencyPenalty,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpGatewayConfig {
    /// Base URL, e.g. `http://localhost:8000`.
    pub endpoint: String,
    #[serde(default)]
    pub api_key: Option<String>,
    pub model: String,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    #[serde(default)]
    pub penalty_mode: PenaltyMode,
}

fn default_timeout_s() -> f64 {
    120.0
}

/// Wire shape of one completion request.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub repetition_penalty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub frequency_penalty: Option<f64>,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl CompletionRequest {
    pub fn build(
        model: &str,
        prompt: &str,
        params: &SamplingParams,
        penalty_mode: PenaltyMode,
    ) -> Self {
        let (repetition_penalty, frequency_penalty) = match penalty_mode {
            PenaltyMode::RepetitionPenalty => (Some(params.repetition_penalty), None),
            PenaltyMode::FrequencyPenalty => (None, Some(params.repetition_penalty - 1.0)),
        };
        Self {
            model: model.to_string(),
            prompt: prompt.to_string(),
            temperature: params.temperature,
            repetition_penalty,
            frequency_penalty,
            max_tokens: params.max_new_tokens,
            seed: params.seed,
        }
    }
}

pub struct HttpGateway {
    config: HttpGatewayConfig,
    agent: ureq::Agent,
}

impl HttpGateway {
    pub fn new(config: HttpGatewayConfig) -> Result<Self, GatewayError> {
        if config.endpoint.trim().is_empty() {
            return Err(GatewayError::Misconfigured("endpoint is empty".into()));
        }
        let timeout = Duration::from_secs_f64(config.timeout_s);
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(10))
            .timeout(timeout)
            .build();
        Ok(Self { config, agent })
    }

    /// Fill endpoint/key/model from the `SLT_LLM_*` environment variables
    /// where the config leaves them unset.
    pub fn from_env() -> Result<Self, GatewayError> {
        let endpoint = std::env::var(super::ENV_ENDPOINT).map_err(|_| {
            GatewayError::Misconfigured(format!("{} not set", super::ENV_ENDPOINT))
        })?;
        let model = std::env::var(super::ENV_MODEL)
            .unwrap_or_else(|_| "codellama-13b-instruct".to_string());
        Self::new(HttpGatewayConfig {
            endpoint,
            api_key: std::env::var(super::ENV_API_KEY).ok(),
            model,
            timeout_s: default_timeout_s(),
            penalty_mode: PenaltyMode::default(),
        })
    }

    fn url(&self) -> String {
        format!(
            "{}/v1/completions",
            self.config.endpoint.trim_end_matches('/')
        )
    }

    fn post_once(&self, body: &Value) -> Result<Value, Box<ureq::Error>> {
        let mut request = self
            .agent
            .post(&self.url())
            .set("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            request = request.set("Authorization", &format!("Bearer {key}"));
        }
        let response = request.send_json(body.clone()).map_err(Box::new)?;
        response.into_json::<Value>().map_err(|e| Box::new(e.into()))
    }

    fn post_with_retry(&self, body: &Value) -> Result<Value, String> {
        match self.post_once(body).map_err(|e| *e) {
            Ok(value) => Ok(value),
            // One retry on transport failure; HTTP status errors are
            // configuration problems and not retried.
            Err(ureq::Error::Transport(first)) => match self.post_once(body) {
                Ok(value) => Ok(value),
                Err(second) => Err(format!("transport failure (retried): {first}; {second}")),
            },
            Err(ureq::Error::Status(code, response)) => {
                let body = response.into_string().unwrap_or_default();
                Err(format!(
                    "HTTP {code}: {}",
                    body.chars().take(512).collect::<String>()
                ))
            }
        }
    }

    fn parse_response(value: &Value) -> Result<(String, FinishReason), String> {
        let choice = value
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or("response has no choices")?;
        let text = choice
            .get("text")
            .and_then(Value::as_str)
            .ok_or("choice has no text")?
            .to_string();
        let finish = match choice.get("finish_reason").and_then(Value::as_str) {
            Some("length") => FinishReason::Length,
            // "stop" or any server-specific completion reason
            _ => FinishReason::Stop,
        };
        Ok((text, finish))
    }
}

impl Gateway for HttpGateway {
    fn name(&self) -> &'static str {
        "http"
    }

    fn complete(
        &self,
        prompt: &RenderedPrompt,
        params: &SamplingParams,
    ) -> Result<CompletionResponse, GatewayError> {
        params.validate()?;
        let request = CompletionRequest::build(
            &self.config.model,
            &prompt.text,
            params,
            self.config.penalty_mode,
        );
        let body = serde_json::to_value(&request)
            .map_err(|e| GatewayError::Misconfigured(format!("cannot encode request: {e}")))?;

        let started = Instant::now();
        let result = self.post_with_retry(&body);
        let latency_ms = started.elapsed().as_secs_f64() * 1000.0;

        Ok(match result.and_then(|value| Self::parse_response(&value)) {
            Ok((text, finish_reason)) => CompletionResponse {
                text,
                finish_reason,
                latency_ms,
                diagnostic: None,
            },
            Err(diagnostic) => CompletionResponse {
                text: String::new(),
                finish_reason: FinishReason::Error,
                latency_ms,
                diagnostic: Some(diagnostic),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    #[test]
    fn request_encoding_preserves_params() {
        let params = SamplingParams {
            temperature: 0.31,
            repetition_penalty: 1.17,
            max_new_tokens: 700,
            seed: Some(8),
        };
        let request =
            CompletionRequest::build("m", "p", &params, PenaltyMode::RepetitionPenalty);
        let json = serde_json::to_value(&request).unwrap();
        assert_eq!(json["temperature"], 0.31);
        assert_eq!(json["repetition_penalty"], 1.17);
        assert_eq!(json["max_tokens"], 700);
        assert_eq!(json["seed"], 8);
        assert!(json.get("frequency_penalty").is_none());
        // lossless round trip
        let back: CompletionRequest = serde_json::from_value(json).unwrap();
        assert_eq!(back, request);
    }

    #[test]
    fn frequency_penalty_fallback_recentres() {
        let params = SamplingParams {
            repetition_penalty: 1.4,
            ..SamplingParams::default()
        };
        let request = CompletionRequest::build("m", "p", &params, PenaltyMode::FrequencyPenalty);
        assert!(request.repetition_penalty.is_none());
        assert!((request.frequency_penalty.unwrap() - 0.4).abs() < 1e-12);
    }

    /// One-shot HTTP server returning a canned body; hands back the raw
    /// request it saw.
    fn serve_once(status_line: &str, body: &str) -> (String, mpsc::Receiver<String>) {
        let reply = format!(
            "HTTP/1.1 {status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len(),
        );
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(rest) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = rest.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut request_body = vec![0u8; content_length];
            reader.read_exact(&mut request_body).unwrap();
            tx.send(String::from_utf8_lossy(&request_body).into_owned())
                .unwrap();
            stream.write_all(reply.as_bytes()).unwrap();
        });
        (format!("http://{addr}"), rx)
    }

    fn gateway_for(endpoint: String) -> HttpGateway {
        HttpGateway::new(HttpGatewayConfig {
            endpoint,
            api_key: Some("sekrit".into()),
            model: "codellama-13b-instruct".into(),
            timeout_s: 5.0,
            penalty_mode: PenaltyMode::default(),
        })
        .unwrap()
    }

    fn rendered(text: &str) -> RenderedPrompt {
        RenderedPrompt {
            text: text.to_string(),
            approx_tokens: text.split_whitespace().count(),
        }
    }

    #[test]
    fn prompt_goes_over_wire_verbatim() {
        let body = r#"{"choices":[{"text":"```c\nint main(){}\n```","finish_reason":"stop"}]}"#;
        let (endpoint, rx) = serve_once("200 OK", body);
        let gateway = gateway_for(endpoint);
        let prompt = rendered("<s>[INST]<<SYS>>\nsys\n<</SYS>>\n\nuser[/INST]");
        let response = gateway
            .complete(&prompt, &SamplingParams::default())
            .unwrap();
        assert_eq!(response.finish_reason, FinishReason::Stop);
        assert!(response.text.contains("int main"));
        let seen: serde_json::Value = serde_json::from_str(&rx.recv().unwrap()).unwrap();
        assert_eq!(seen["prompt"], prompt.text);
        assert_eq!(seen["model"], "codellama-13b-instruct");
    }

    #[test]
    fn length_finish_reason_mapped() {
        let body = r#"{"choices":[{"text":"int main(){","finish_reason":"length"}]}"#;
        let (endpoint, _rx) = serve_once("200 OK", body);
        let gateway = gateway_for(endpoint);
        let response = gateway
            .complete(&rendered("p"), &SamplingParams::default())
            .unwrap();
        assert_eq!(response.finish_reason, FinishReason::Length);
    }

    #[test]
    fn http_error_maps_to_error_response() {
        let (endpoint, _rx) = serve_once("500 Internal Server Error", "oops!");
        let gateway = gateway_for(endpoint);
        let response = gateway
            .complete(&rendered("p"), &SamplingParams::default())
            .unwrap();
        assert_eq!(response.finish_reason, FinishReason::Error);
        assert!(response.diagnostic.unwrap().contains("500"));
    }

    #[test]
    fn unreachable_endpoint_is_error_response_not_panic() {
        // Reserved TEST-NET address: connection refused/timeout quickly.
        let gateway = HttpGateway::new(HttpGatewayConfig {
            endpoint: "http://127.0.0.1:1".into(),
            api_key: None,
            model: "m".into(),
            timeout_s: 2.0,
            penalty_mode: PenaltyMode::default(),
        })
        .unwrap();
        let response = gateway
            .complete(&rendered("p"), &SamplingParams::default())
            .unwrap();
        assert_eq!(response.finish_reason, FinishReason::Error);
    }

    #[test]
    fn out_of_bounds_params_rejected_before_request() {
        let gateway = gateway_for("http://127.0.0.1:1".into());
        let params = SamplingParams {
            temperature: 2.1,
            ..SamplingParams::default()
        };
        assert!(matches!(
            gateway.complete(&rendered("p"), &params),
            Err(GatewayError::InvalidParams(_))
        ));
    }

    #[test]
    fn malformed_body_is_error_response() {
        let (endpoint, _rx) = serve_once("200 OK", r#"{"no_choices_here":true}"#);
        let gateway = gateway_for(endpoint);
        let response = gateway
            .complete(&rendered("p"), &SamplingParams::default())
            .unwrap();
        assert_eq!(response.finish_reason, FinishReason::Error);
        assert!(response.diagnostic.unwrap().contains("choices"));
    }

    #[test]
    fn transport_failure_is_retried_once() {
        // First connection is dropped mid-request (transport error);
        // the retry is served properly.
        let body = r#"{"choices":[{"text":"ok","finish_reason":"stop"}]}"#;
        let reply = format!(
            "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            drop(stream); // slam the door
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(rest) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = rest.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut request_body = vec![0u8; content_length];
            reader.read_exact(&mut request_body).unwrap();
            stream.write_all(reply.as_bytes()).unwrap();
        });
        let gateway = gateway_for(format!("http://{addr}"));
        let response = gateway
            .complete(&rendered("p"), &SamplingParams::default())
            .unwrap();
        assert_eq!(response.finish_reason, FinishReason::Stop);
        assert_eq!(response.text, "ok");
    }

    #[test]
    fn silent_server_hits_timeout_bound() {
        // Accept the connection but never answer; complete must give up
        // near the configured timeout instead of hanging.
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            std::thread::sleep(std::time::Duration::from_secs(20));
            drop(stream);
        });
        let gateway = HttpGateway::new(HttpGatewayConfig {
            endpoint: format!("http://{addr}"),
            api_key: None,
            model: "m".into(),
            timeout_s: 1.0,
            penalty_mode: PenaltyMode::default(),
        })
        .unwrap();
        let started = std::time::Instant::now();
        let response = gateway
            .complete(&rendered("p"), &SamplingParams::default())
            .unwrap();
        assert_eq!(response.finish_reason, FinishReason::Error);
        // one attempt + one retry at 1 s each, plus slack
        assert!(started.elapsed() < std::time::Duration::from_secs(5));
    }
}
