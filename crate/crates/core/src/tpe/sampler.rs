//! Trial-suggestion strategies behind a common trait: the TPE model and a
//! uniform-random baseline, selectable by name.

use rand::rngs::StdRng;
use rand::SeedableRng;

use super::{
    observe, suggest, uniform_config, validate_config, OptimizerState, SearchSpace, TpeConfig,
    TpeError, TrialConfig, TrialResult,
};
use crate::hash::derive_seed;

pub trait Sampler: Send {
    /// Registry name (`tpe`, `random`).
    fn name(&self) -> &'static str;
    fn space(&self) -> &SearchSpace;
    fn suggest(&self) -> TrialConfig;
    fn observe(&mut self, result: TrialResult) -> Result<(), TpeError>;
    fn history(&self) -> &[TrialResult];
}

/// The Tree-structured Parzen Estimator strategy.
pub struct TpeSampler {
    pub state: OptimizerState,
}

impl TpeSampler {
    pub fn new(space: SearchSpace, seed: u64) -> Self {
        Self {
            state: OptimizerState::new(space, seed),
        }
    }

    pub fn with_config(space: SearchSpace, seed: u64, config: TpeConfig) -> Self {
        Self {
            state: OptimizerState::new(space, seed).with_config(config),
        }
    }

    pub fn resume(space: SearchSpace, seed: u64, history: Vec<TrialResult>) -> Self {
        Self {
            state: OptimizerState::new(space, seed).with_history(history),
        }
    }
}

impl Sampler for TpeSampler {
    fn name(&self) -> &'static str {
        "tpe"
    }

    fn space(&self) -> &SearchSpace {
        &self.state.space
    }

    fn suggest(&self) -> TrialConfig {
        suggest(&self.state)
    }

    fn observe(&mut self, result: TrialResult) -> Result<(), TpeError> {
        observe(&mut self.state, result)
    }

    fn history(&self) -> &[TrialResult] {
        &self.state.history
    }
}

/// Uniform-random baseline; the oracle TPE must beat.
pub struct RandomSampler {
    space: SearchSpace,
    seed: u64,
    history: Vec<TrialResult>,
}

impl RandomSampler {
    pub fn new(space: SearchSpace, seed: u64) -> Self {
        Self {
            space,
            seed,
            history: Vec::new(),
        }
    }
}

impl Sampler for RandomSampler {
    fn name(&self) -> &'static str {
        "random"
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn suggest(&self) -> TrialConfig {
        let mut rng = StdRng::seed_from_u64(derive_seed(self.seed, self.history.len() as u64));
        uniform_config(&self.space, &mut rng)
    }

    fn observe(&mut self, result: TrialResult) -> Result<(), TpeError> {
        validate_config(&self.space, &result.config)?;
        self.history.push(result);
        Ok(())
    }

    fn history(&self) -> &[TrialResult] {
        &self.history
    }
}

/// Look up a strategy by its registry name.
pub fn sampler_by_name(name: &str, space: SearchSpace, seed: u64) -> Option<Box<dyn Sampler>> {
    match name {
        "tpe" => Some(Box::new(TpeSampler::new(space, seed))),
        "random" => Some(Box::new(RandomSampler::new(space, seed))),
        _ => None,
    }
}
