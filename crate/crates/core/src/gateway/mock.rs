//! Scripted gateway for offline runs and tests.

use std::sync::Mutex;

use super::{CompletionResponse, Gateway, GatewayError, SamplingParams};
use crate::prompt::RenderedPrompt;

/// Replays a fixed script of responses, cycling when exhausted, and
/// records every request it receives for later assertions.
pub struct MockGateway {
    script: Vec<CompletionResponse>,
    cursor: Mutex<usize>,
    requests: Mutex<Vec<(String, SamplingParams)>>,
}

impl MockGateway {
    /// `script` must be non-empty.
    pub fn new(script: Vec<CompletionResponse>) -> Result<Self, GatewayError> {
        if script.is_empty() {
            return Err(GatewayError::Misconfigured(
                "mock script must not be empty".into(),
            ));
        }
        Ok(Self {
            script,
            cursor: Mutex::new(0),
            requests: Mutex::new(Vec::new()),
        })
    }

    /// Convenience script of plain stopped responses.
    pub fn scripted_texts<S: Into<String>>(
        texts: impl IntoIterator<Item = S>,
    ) -> Result<Self, GatewayError> {
        Self::new(
            texts
                .into_iter()
                .map(|t| CompletionResponse::stopped(t))
                .collect(),
        )
    }

    /// Every (prompt text, params) pair seen so far, in call order.
    pub fn requests(&self) -> Vec<(String, SamplingParams)> {
        self.requests.lock().unwrap().clone()
    }
}

impl Gateway for MockGateway {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn complete(
        &self,
        prompt: &RenderedPrompt,
        params: &SamplingParams,
    ) -> Result<CompletionResponse, GatewayError> {
        params.validate()?;
        self.requests
            .lock()
            .unwrap()
            .push((prompt.text.clone(), params.clone()));
        let mut cursor = self.cursor.lock().unwrap();
        let response = self.script[*cursor % self.script.len()].clone();
        *cursor += 1;
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::FinishReason;

    fn rendered(text: &str) -> RenderedPrompt {
        RenderedPrompt {
            text: text.to_string(),
            approx_tokens: 1,
        }
    }

    #[test]
    fn empty_script_rejected() {
        assert!(MockGateway::new(vec![]).is_err());
    }

    #[test]
    fn script_cycles_in_order() {
        let gateway = MockGateway::scripted_texts(["one", "two", "three"]).unwrap();
        let got: Vec<String> = (0..5)
            .map(|_| {
                gateway
                    .complete(&rendered("p"), &SamplingParams::default())
                    .unwrap()
                    .text
            })
            .collect();
        assert_eq!(got, ["one", "two", "three", "one", "two"]);
    }

    #[test]
    fn requests_are_recorded() {
        let gateway = MockGateway::scripted_texts(["x"]).unwrap();
        let params = SamplingParams {
            temperature: 0.2,
            ..SamplingParams::default()
        };
        gateway.complete(&rendered("alpha"), &params).unwrap();
        gateway.complete(&rendered("beta"), &params).unwrap();
        let log = gateway.requests();
        assert_eq!(log.len(), 2);
        assert_eq!(log[0].0, "alpha");
        assert_eq!(log[1].0, "beta");
        assert_eq!(log[0].1.temperature, 0.2);
    }

    #[test]
    fn scripted_error_passes_through() {
        let gateway =
            MockGateway::new(vec![CompletionResponse::error("scripted failure")]).unwrap();
        let response = gateway
            .complete(&rendered("p"), &SamplingParams::default())
            .unwrap();
        assert_eq!(response.finish_reason, FinishReason::Error);
    }

    #[test]
    fn mock_scripted_fence_echoes() {
        let gateway = MockGateway::scripted_texts(["```c int main(){return 0;} ```"]).unwrap();
        let response = gateway
            .complete(&rendered("p"), &SamplingParams::default())
            .unwrap();
        assert!(response.text.contains("int main"));
    }

    #[test]
    fn bounds_checked_before_recording() {
        let gateway = MockGateway::scripted_texts(["x"]).unwrap();
        let params = SamplingParams {
            temperature: 2.1,
            ..SamplingParams::default()
        };
        assert!(gateway.complete(&rendered("p"), &params).is_err());
        assert!(gateway.requests().is_empty());
    }
}
