//! Campaign configuration: one JSON document selecting the gateway,
//! simulator backend, compile profile, sampler strategy and loop sizes.
//!
//! Strategies are chosen by registry name (`gateway.kind`, `backend.kind`,
//! `sampler`), so an offline run is just a config whose gateway is `mock`
//! and whose backend is `reference`. Unknown names and fields are rejected
//! at parse time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campaign::CampaignError;
use crate::eval::{CompileSpec, Gem5Backend, Gem5Config, ReferenceBackend, SimulatorBackend};
use crate::gateway::{
    CompletionResponse, FinishReason, Gateway, HttpGateway, HttpGatewayConfig, MockGateway,
    PenaltyMode, SamplingParams, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};
use crate::optimize::{Lexicon, OptAlgorithm, OptPlan};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub gateway: GatewayConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub compile: CompileConfig,
    /// Path to a prompt-spec JSON; the built-in prompt when absent.
    #[serde(default)]
    pub prompt_spec: Option<PathBuf>,
    /// Fixed optimization plan for `generate`; campaigns derive plans from
    /// each trial instead.
    #[serde(default)]
    pub prompt_opt: Option<PromptOptConfig>,
    #[serde(default)]
    pub include_examples: bool,
    #[serde(default)]
    pub lexicon: Option<LexiconPaths>,
    /// Sampling defaults for `generate`; campaigns take temperature and
    /// repetition penalty from each trial.
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default = "default_n_trials")]
    pub n_trials: u64,
    #[serde(default = "default_snippets_per_trial")]
    pub snippets_per_trial: u64,
    #[serde(default)]
    pub objective_aggregation: Aggregation,
    /// Trial-suggestion strategy: `tpe` or `random`.
    #[serde(default = "default_sampler")]
    pub sampler: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Evaluation worker-pool size; host CPU count when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_n_trials() -> u64 {
    1000
}

fn default_snippets_per_trial() -> u64 {
    5
}

fn default_sampler() -> String {
    "tpe".to_string()
}

fn default_seed() -> u64 {
    42
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("campaign-out")
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CampaignError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: CampaignConfig = serde_json::from_str(&text)
            .map_err(|e| CampaignError::Config(format!("cannot parse {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.n_trials < 1 {
            return Err(CampaignError::Config("n_trials must be at least 1".into()));
        }
        if self.snippets_per_trial < 1 {
            return Err(CampaignError::Config(
                "snippets_per_trial must be at least 1".into(),
            ));
        }
        self.sampling
            .validate()
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        self.compile
            .resolve()?
            .validate()
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        if let Some(plan) = &self.prompt_opt {
            plan.to_plan(0)
                .map_err(|e| CampaignError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn build_gateway(&self) -> Result<Box<dyn Gateway>, CampaignError> {
        self.gateway.build()
    }

    pub fn build_backend(&self) -> Box<dyn SimulatorBackend> {
        self.backend.build()
    }

    pub fn load_lexicon(&self) -> Result<Lexicon, CampaignError> {
        match &self.lexicon {
            None => Ok(Lexicon::bundled().clone()),
            Some(paths) => {
                Lexicon::from_files(&paths.stopwords, &paths.thesaurus, &paths.frequencies)
                    .map_err(|e| CampaignError::Config(format!("cannot load lexicon: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GatewayConfig {
    Http {
        /// Base URL; `SLT_LLM_ENDPOINT` when absent.
        #[serde(default)]
        endpoint: Option<String>,
        /// Bearer token; `SLT_LLM_API_KEY` when absent.
        #[serde(default)]
        api_key: Option<String>,
        /// Model name; `SLT_LLM_MODEL` when absent.
        #[serde(default)]
        model: Option<String>,
        #[serde(default = "default_http_timeout")]
        timeout_s: f64,
        #[serde(default)]
        penalty_mode: PenaltyMode,
    },
    Mock {
        script: Vec<MockResponseConfig>,
    },
}

fn default_http_timeout() -> f64 {
    120.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockResponseConfig {
    pub text: String,
    #[serde(default = "default_finish_reason")]
    pub finish_reason: FinishReason,
}

fn default_finish_reason() -> FinishReason {
    FinishReason::Stop
}

impl GatewayConfig {
    pub fn build(&self) -> Result<Box<dyn Gateway>, CampaignError> {
        match self {
            GatewayConfig::Http {
                endpoint,
                api_key,
                model,
                timeout_s,
                penalty_mode,
            } => {
                let endpoint = endpoint
                    .clone()
                    .or_else(|| std::env::var(ENV_ENDPOINT).ok())
                    .ok_or_else(|| {
                        CampaignError::Config(format!(
                            "no endpoint: set gateway.endpoint or {ENV_ENDPOINT}"
                        ))
                    })?;
                let model = model
                    .clone()
                    .or_else(|| std::env::var(ENV_MODEL).ok())
                    .unwrap_or_else(|| "codellama-13b-instruct".to_string());
                let api_key = api_key.clone().or_else(|| std::env::var(ENV_API_KEY).ok());
                let gateway = HttpGateway::new(HttpGatewayConfig {
                    endpoint,
                    api_key,
                    model,
                    timeout_s: *timeout_s,
                    penalty_mode: *penalty_mode,
                })
                .map_err(|e| CampaignError::Config(e.to_string()))?;
                Ok(Box::new(gateway))
            }
            GatewayConfig::Mock { script } => {
                let responses: Vec<CompletionResponse> = script
                    .iter()
                    .map(|r| CompletionResponse {
                        text: r.text.clone(),
                        finish_reason: r.finish_reason,
                        latency_ms: 0.0,
                        diagnostic: None,
                    })
                    .collect();
                let gateway = MockGateway::new(responses)
                    .map_err(|e| CampaignError::Config(e.to_string()))?;
                Ok(Box::new(gateway))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Reference {
        #[serde(default = "default_reference_timeout")]
        timeout_s: f64,
    },
    Gem5(Gem5Config),
}

fn default_reference_timeout() -> f64 {
    2.0
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Reference {
            timeout_s: default_reference_timeout(),
        }
    }
}

impl BackendConfig {
    pub fn build(&self) -> Box<dyn SimulatorBackend> {
        match self {
            BackendConfig::Reference { timeout_s } => {
                Box::new(ReferenceBackend::with_timeout_s(*timeout_s))
            }
            BackendConfig::Gem5(config) => Box::new(Gem5Backend::new(config.clone())),
        }
    }
}

/// Compile settings: a named profile (`host`, `riscv`) with optional
/// template/timeout overrides.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileConfig {
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub command_template: Option<String>,
    #[serde(default)]
    pub timeout_s: Option<f64>,
}

impl CompileConfig {
    pub fn resolve(&self) -> Result<CompileSpec, CampaignError> {
        let mut spec = match self.profile.as_deref() {
            None | Some("host") => CompileSpec::host_default(),
            Some("riscv") => CompileSpec::riscv_default(),
            Some(other) => {
                return Err(CampaignError::Config(format!(
                    "unknown compile profile '{other}' (expected host or riscv)"
                )))
            }
        };
        if let Some(template) = &self.command_template {
            spec.command_template = template.clone();
        }
        if let Some(timeout_s) = self.timeout_s {
            spec.timeout_s = timeout_s;
        }
        Ok(spec)
    }
}

/// Fixed plan used by `generate`. The closed algorithm set is enforced by
/// serde: unknown names fail the parse.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptOptConfig {
    pub algorithms: Vec<OptAlgorithm>,
    #[serde(default)]
    pub optimize_system_prompt: bool,
}

impl PromptOptConfig {
    pub fn to_plan(&self, seed: u64) -> Result<OptPlan, crate::optimize::OptimizeError> {
        OptPlan::new(self.algorithms.clone(), self.optimize_system_prompt, seed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconPaths {
    pub stopwords: PathBuf,
    pub thesaurus: PathBuf,
    pub frequencies: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}
