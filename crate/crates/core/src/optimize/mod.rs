//! Prompt optimization: compression and rewriting passes applied to the
//! user prompt (and optionally the system prompt) before rendering.
//!
//! A plan picks one or two algorithms from the registry in
//! [`transforms`]; the algorithms run in order over the prompt text,
//! backed by the word tables in [`lexicon`].

pub mod lexicon;
pub mod transforms;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptSpec;
pub use lexicon::{Lexicon, LexiconError};
pub use transforms::{TextTransform, SURPRISAL_THRESHOLD_BITS};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("unknown algorithm '{0}'")]
    UnknownAlgorithm(String),
    #[error("plan must name 1 or 2 algorithms, got {0}")]
    BadPlanLength(usize),
    #[error("duplicate algorithm '{0}' in plan")]
    DuplicateAlgorithm(String),
}

/// The closed set of prompt-optimization algorithms. Unknown names are
/// rejected when configs are parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptAlgorithm {
    StopwordPrune,
    PunctuationPrune,
    EntropyPrune,
    SynonymReplace,
}

impl OptAlgorithm {
    pub const ALL: [OptAlgorithm; 4] = [
        OptAlgorithm::StopwordPrune,
        OptAlgorithm::PunctuationPrune,
        OptAlgorithm::EntropyPrune,
        OptAlgorithm::SynonymReplace,
    ];

    pub fn name(self) -> &'static str {
        self.transform().name()
    }

    pub fn from_name(name: &str) -> Result<Self, OptimizeError> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| OptimizeError::UnknownAlgorithm(name.to_string()))
    }

    fn transform(self) -> &'static dyn TextTransform {
        // Registry order matches declaration order.
        transforms::registry()[self as usize]
    }
}

impl std::fmt::Display for OptAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An ordered selection of one or two algorithms plus the scope flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptPlan {
    pub algorithms: Vec<OptAlgorithm>,
    pub optimize_system_prompt: bool,
    pub seed: u64,
}

impl OptPlan {
    pub fn new(
        algorithms: Vec<OptAlgorithm>,
        optimize_system_prompt: bool,
        seed: u64,
    ) -> Result<Self, OptimizeError> {
        let plan = Self {
            algorithms,
            optimize_system_prompt,
            seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.algorithms.is_empty() || self.algorithms.len() > 2 {
            return Err(OptimizeError::BadPlanLength(self.algorithms.len()));
        }
        if self.algorithms.len() == 2 && self.algorithms[0] == self.algorithms[1] {
            return Err(OptimizeError::DuplicateAlgorithm(
                self.algorithms[0].name().to_string(),
            ));
        }
        Ok(())
    }
}

/// Run one algorithm over a text. Unknown words pass through unchanged;
/// the empty text maps to itself.
pub fn optimize_text(text: &str, algorithm: OptAlgorithm, lexicon: &Lexicon, seed: u64) -> String {
    transforms::apply(algorithm.transform(), text, lexicon, seed)
}

/// Apply a plan to a prompt spec: the user text always, the system text
/// only when the plan says so. Examples and the chat template are never
/// touched.
pub fn apply_plan(
    spec: &PromptSpec,
    plan: &OptPlan,
    lexicon: &Lexicon,
) -> Result<PromptSpec, OptimizeError> {
    plan.validate()?;
    let run_all = |text: &str| {
        plan.algorithms
            .iter()
            .fold(text.to_string(), |acc, &algorithm| {
                optimize_text(&acc, algorithm, lexicon, plan.seed)
            })
    };
    let mut optimized = spec.clone();
    optimized.user_text = run_all(&spec.user_text);
    if plan.optimize_system_prompt {
        optimized.system_text = run_all(&spec.system_text);
    }
    Ok(optimized)
}

/// Every legal `prompt_opt_algorithms` atom: the 4 single algorithms and
/// the 6 unordered pairs, pairs joined with `+` in registry order.
pub fn algorithm_subsets() -> Vec<String> {
    let all = OptAlgorithm::ALL;
    let mut atoms: Vec<String> = all.iter().map(|a| a.name().to_string()).collect();
    for i in 0..all.len() {
        for j in (i + 1)..all.len() {
            atoms.push(format!("{}+{}", all[i].name(), all[j].name()));
        }
    }
    atoms
}

/// Parse a subset atom (`"entropy-prune"` or `"stopword-prune+synonym-replace"`)
/// back into the algorithm list.
pub fn parse_algorithm_atom(atom: &str) -> Result<Vec<OptAlgorithm>, OptimizeError> {
    let algorithms: Vec<OptAlgorithm> = atom
        .split('+')
        .map(OptAlgorithm::from_name)
        .collect::<Result<_, _>>()?;
    if algorithms.is_empty() || algorithms.len() > 2 {
        return Err(OptimizeError::BadPlanLength(algorithms.len()));
    }
    if algorithms.len() == 2 && algorithms[0] == algorithms[1] {
        return Err(OptimizeError::DuplicateAlgorithm(
            algorithms[0].name().to_string(),
        ));
    }
    Ok(algorithms)
}
