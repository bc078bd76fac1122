//! From-scratch Tree-structured Parzen Estimator over a mixed
//! continuous/categorical search space, maximizing a scalar objective.
//!
//! The history is split at the gamma-quantile into "good" and "bad"
//! trials; per parameter, a density is fit to each group (truncated-normal
//! kernel mixtures for continuous parameters, add-one smoothed frequencies
//! for categorical ones) and the next trial is the candidate maximizing
//! the density ratio l_good / l_bad. Before `n_startup` observations the
//! sampler is uniform.
//!
//! `suggest` is a pure function of the state: the generator is re-derived
//! from `(seed, history length)` on every call, so identical states yield
//! identical suggestions and a replayed history resumes exactly.

pub mod parzen;
pub mod sampler;
pub mod study;

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{REPETITION_PENALTY_RANGE, TEMPERATURE_RANGE};
use crate::hash::derive_seed;
use crate::optimize::algorithm_subsets;
use parzen::{SmoothedCategorical, TruncatedNormalMixture};
pub use sampler::{sampler_by_name, RandomSampler, Sampler, TpeSampler};
pub use study::{run_study, run_study_with_sampler, StudyOutcome};

#[derive(Debug, Error)]
pub enum TpeError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("config outside the search space: {0}")]
    BoundsViolation(String),
}

/// One dimension of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamDef {
    Continuous { name: String, lo: f64, hi: f64 },
    Categorical { name: String, choices: Vec<String> },
}

impl ParamDef {
    pub fn name(&self) -> &str {
        match self {
            ParamDef::Continuous { name, .. } | ParamDef::Categorical { name, .. } => name,
        }
    }

    fn validate(&self) -> Result<(), TpeError> {
        match self {
            ParamDef::Continuous { name, lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(TpeError::InvalidSpace(format!(
                        "parameter '{name}': lo {lo} must be below hi {hi}"
                    )));
                }
            }
            ParamDef::Categorical { name, choices } => {
                if choices.is_empty() {
                    return Err(TpeError::InvalidSpace(format!(
                        "parameter '{name}': no choices"
                    )));
                }
                let mut seen = std::collections::HashSet::new();
                for choice in choices {
                    if !seen.insert(choice) {
                        return Err(TpeError::InvalidSpace(format!(
                            "parameter '{name}': duplicate choice '{choice}'"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ParamDef>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamDef>) -> Result<Self, TpeError> {
        if params.is_empty() {
            return Err(TpeError::InvalidSpace("no parameters".into()));
        }
        let mut names = std::collections::HashSet::new();
        for param in &params {
            param.validate()?;
            if !names.insert(param.name().to_string()) {
                return Err(TpeError::InvalidSpace(format!(
                    "duplicate parameter name '{}'",
                    param.name()
                )));
            }
        }
        Ok(Self { params })
    }
}

/// A parameter value: a real within bounds or a chosen atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Real(f64),
    Atom(String),
}

impl ParamValue {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Atom(_) => None,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            ParamValue::Atom(a) => Some(a),
            ParamValue::Real(_) => None,
        }
    }
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Real(v) => write!(f, "{v:.6}"),
            ParamValue::Atom(a) => f.write_str(a),
        }
    }
}

/// One point in the search space: exactly one assignment per parameter.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialConfig {
    pub assignments: BTreeMap<String, ParamValue>,
}

impl TrialConfig {
    pub fn real(&self, name: &str) -> Option<f64> {
        self.assignments.get(name).and_then(ParamValue::as_real)
    }

    pub fn atom(&self, name: &str) -> Option<&str> {
        self.assignments.get(name).and_then(ParamValue::as_atom)
    }

    /// Categorical atoms "true"/"false" as a boolean.
    pub fn flag(&self, name: &str) -> Option<bool> {
        match self.atom(name) {
            Some("true") => Some(true),
            Some("false") => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub config: TrialConfig,
    pub objective: f64,
    pub status: TrialStatus,
}

impl TrialResult {
    pub fn completed(config: TrialConfig, objective: f64) -> Self {
        Self {
            config,
            objective,
            status: TrialStatus::Completed,
        }
    }

    /// Failed trials score 0.0 by convention so crash-heavy configurations
    /// are penalized in the good/bad split rather than ignored.
    pub fn failed(config: TrialConfig) -> Self {
        Self {
            config,
            objective: 0.0,
            status: TrialStatus::Failed,
        }
    }
}

/// TPE knobs; the defaults are conventional and config-overridable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    /// Quantile splitting good from bad observations.
    pub gamma: f64,
    /// Uniform trials before the model kicks in.
    pub n_startup: usize,
    /// Candidates drawn from the good density per suggestion.
    pub n_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub space: SearchSpace,
    pub history: Vec<TrialResult>,
    pub seed: u64,
    pub config: TpeConfig,
}

impl OptimizerState {
    pub fn new(space: SearchSpace, seed: u64) -> Self {
        Self {
            space,
            history: Vec::new(),
            seed,
            config: TpeConfig::default(),
        }
    }

    pub fn with_config(mut self, config: TpeConfig) -> Self {
        self.config = config;
        self
    }

    /// Resume from a replayed history (e.g. a campaign log).
    pub fn with_history(mut self, history: Vec<TrialResult>) -> Self {
        self.history = history;
        self
    }
}

/// The 6-parameter space the campaign tunes: the two sampling knobs plus
/// the four prompt-shaping switches.
pub fn default_slt_space() -> SearchSpace {
    let bools = || vec!["true".to_string(), "false".to_string()];
    SearchSpace::new(vec![
        ParamDef::Continuous {
            name: "temperature".into(),
            lo: TEMPERATURE_RANGE.0,
            hi: TEMPERATURE_RANGE.1,
        },
        ParamDef::Continuous {
            name: "repetition_penalty".into(),
            lo: REPETITION_PENALTY_RANGE.0,
            hi: REPETITION_PENALTY_RANGE.1,
        },
        ParamDef::Categorical {
            name: "prompt_opt_enabled".into(),
            choices: bools(),
        },
        ParamDef::Categorical {
            name: "prompt_opt_algorithms".into(),
            choices: algorithm_subsets(),
        },
        ParamDef::Categorical {
            name: "optimize_system_prompt".into(),
            choices: bools(),
        },
        ParamDef::Categorical {
            name: "include_examples".into(),
            choices: bools(),
        },
    ])
    .expect("default space is well-formed")
}

/// Uniform draw over the space, used for startup trials and the random
/// baseline sampler.
pub fn uniform_config(space: &SearchSpace, rng: &mut StdRng) -> TrialConfig {
    let mut assignments = BTreeMap::new();
    for param in &space.params {
        let value = match param {
            ParamDef::Continuous { lo, hi, .. } => ParamValue::Real(rng.gen_range(*lo..*hi)),
            ParamDef::Categorical { choices, .. } => {
                ParamValue::Atom(choices[rng.gen_range(0..choices.len())].clone())
            }
        };
        assignments.insert(param.name().to_string(), value);
    }
    TrialConfig { assignments }
}

/// Check a config against the space: every parameter assigned exactly
/// once, values within bounds/choices.
pub fn validate_config(space: &SearchSpace, config: &TrialConfig) -> Result<(), TpeError> {
    if config.assignments.len() != space.params.len() {
        return Err(TpeError::BoundsViolation(format!(
            "expected {} assignments, got {}",
            space.params.len(),
            config.assignments.len()
        )));
    }
    for param in &space.params {
        let value = config.assignments.get(param.name()).ok_or_else(|| {
            TpeError::BoundsViolation(format!("parameter '{}' missing", param.name()))
        })?;
        match (param, value) {
            (ParamDef::Continuous { name, lo, hi }, ParamValue::Real(v)) => {
                if !(v >= lo && v <= hi) {
                    return Err(TpeError::BoundsViolation(format!(
                        "parameter '{name}': {v} outside [{lo}, {hi}]"
                    )));
                }
            }
            (ParamDef::Categorical { name, choices }, ParamValue::Atom(atom)) => {
                if !choices.contains(atom) {
                    return Err(TpeError::BoundsViolation(format!(
                        "parameter '{name}': '{atom}' not a choice"
                    )));
                }
            }
            (param, _) => {
                return Err(TpeError::BoundsViolation(format!(
                    "parameter '{}': wrong value kind",
                    param.name()
                )));
            }
        }
    }
    Ok(())
}

/// Per-parameter good/bad densities.
enum ParamModel<'a> {
    Continuous {
        good: TruncatedNormalMixture,
        bad: TruncatedNormalMixture,
    },
    Categorical {
        good: SmoothedCategorical,
        bad: SmoothedCategorical,
        choices: &'a [String],
    },
}

impl ParamModel<'_> {
    fn sample_good(&self, rng: &mut StdRng) -> ParamValue {
        match self {
            ParamModel::Continuous { good, .. } => ParamValue::Real(good.sample(rng)),
            ParamModel::Categorical { good, choices, .. } => {
                ParamValue::Atom(choices[good.sample(rng)].clone())
            }
        }
    }

    /// log(l_good(x)) - log(l_bad(x)); both densities are strictly
    /// positive inside the domain, so the logs are finite.
    fn log_ratio(&self, value: &ParamValue) -> f64 {
        match (self, value) {
            (ParamModel::Continuous { good, bad }, ParamValue::Real(x)) => {
                good.pdf(*x).ln() - bad.pdf(*x).ln()
            }
            (ParamModel::Categorical { good, bad, choices }, ParamValue::Atom(atom)) => {
                let index = choices
                    .iter()
                    .position(|c| c == atom)
                    .expect("sampled atom is a choice");
                good.pmf(index).ln() - bad.pmf(index).ln()
            }
            _ => unreachable!("value kind matches its model"),
        }
    }
}

fn split_history(history: &[TrialResult], gamma: f64) -> (Vec<&TrialResult>, Vec<&TrialResult>) {
    let mut order: Vec<usize> = (0..history.len()).collect();
    // Higher objective first; ties keep the earlier trial first.
    order.sort_by(|&a, &b| {
        history[b]
            .objective
            .partial_cmp(&history[a].objective)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let n_good = ((gamma * history.len() as f64).ceil() as usize)
        .max(1)
        .min(history.len());
    let good = order[..n_good].iter().map(|&i| &history[i]).collect();
    let bad = order[n_good..].iter().map(|&i| &history[i]).collect();
    (good, bad)
}

fn fit_models<'a>(
    space: &'a SearchSpace,
    good: &[&TrialResult],
    bad: &[&TrialResult],
) -> Vec<ParamModel<'a>> {
    space
        .params
        .iter()
        .map(|param| match param {
            ParamDef::Continuous { name, lo, hi } => {
                let values = |group: &[&TrialResult]| -> Vec<f64> {
                    group.iter().filter_map(|t| t.config.real(name)).collect()
                };
                ParamModel::Continuous {
                    good: TruncatedNormalMixture::fit(*lo, *hi, &values(good)),
                    bad: TruncatedNormalMixture::fit(*lo, *hi, &values(bad)),
                }
            }
            ParamDef::Categorical { name, choices } => {
                let indices = |group: &[&TrialResult]| -> Vec<usize> {
                    group
                        .iter()
                        .filter_map(|t| t.config.atom(name))
                        .filter_map(|atom| choices.iter().position(|c| c == atom))
                        .collect()
                };
                ParamModel::Categorical {
                    good: SmoothedCategorical::fit(choices.len(), &indices(good)),
                    bad: SmoothedCategorical::fit(choices.len(), &indices(bad)),
                    choices,
                }
            }
        })
        .collect()
}

/// Propose the next trial. Uniform during startup; afterwards the best of
/// `n_candidates` draws from the good density, ranked by density ratio.
pub fn suggest(state: &OptimizerState) -> TrialConfig {
    let mut rng = StdRng::seed_from_u64(derive_seed(state.seed, state.history.len() as u64));
    if state.history.len() < state.config.n_startup {
        return uniform_config(&state.space, &mut rng);
    }

    let (good, bad) = split_history(&state.history, state.config.gamma);
    let models = fit_models(&state.space, &good, &bad);

    let mut best: Option<(f64, TrialConfig)> = None;
    for _ in 0..state.config.n_candidates.max(1) {
        let mut assignments = BTreeMap::new();
        let mut score = 0.0;
        for (param, model) in state.space.params.iter().zip(&models) {
            let value = model.sample_good(&mut rng);
            score += model.log_ratio(&value);
            assignments.insert(param.name().to_string(), value);
        }
        let candidate = TrialConfig { assignments };
        match &best {
            Some((best_score, _)) if score <= *best_score => {}
            _ => best = Some((score, candidate)),
        }
    }
    best.expect("n_candidates >= 1").1
}

/// Append a result to the history after bounds-checking its config.
pub fn observe(state: &mut OptimizerState, result: TrialResult) -> Result<(), TpeError> {
    validate_config(&state.space, &result.config)?;
    state.history.push(result);
    Ok(())
}
