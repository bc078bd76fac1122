//! Snippet evaluation: compile, run on a simulator backend, classify.
//!
//! Backends implement [`SimulatorBackend`] and are chosen by name at
//! runtime: `reference` (runs the host binary and synthesizes a
//! deterministic IPC) or `gem5` (drives an external simulator). Every
//! snippet becomes an [`EvalRecord`] with exactly one [`FailureClass`];
//! a record carries an IPC if and only if its failure class is `None`.

pub mod compile;
pub mod gem5;
pub mod proc;
pub mod reference;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::extract::{ExtractionResult, ExtractionStatus};
use crate::hash::fnv1a64_hex;
pub use compile::{compile_snippet, CompileError, CompileSpec, CompiledSnippet};
pub use gem5::{parse_stats, Gem5Backend, Gem5Config};
pub use reference::{pseudo_ipc, ReferenceBackend, MAX_IPC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Ok,
    Crash,
    Timeout,
    SimError,
}

/// Result of one simulated (or reference) execution. `ipc` is present
/// exactly when `status` is `Ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub status: SimStatus,
    pub ipc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub raw_stats: Option<String>,
    pub wall_ms: f64,
}

/// Why a snippet failed to produce an IPC; `None` when it did.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    CompileError,
    SimCrash,
    SimTimeout,
    ParseFailure,
    Refusal,
    Incomplete,
    None,
}

impl FailureClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureClass::CompileError => "compile_error",
            FailureClass::SimCrash => "sim_crash",
            FailureClass::SimTimeout => "sim_timeout",
            FailureClass::ParseFailure => "parse_failure",
            FailureClass::Refusal => "refusal",
            FailureClass::Incomplete => "incomplete",
            FailureClass::None => "none",
        }
    }
}

impl std::fmt::Display for FailureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One snippet's journey through the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Content hash of the snippet source (or, for code-less responses,
    /// of the preserved diagnostics), matching the blob name in the store.
    pub snippet_id: String,
    pub extraction: ExtractionStatus,
    pub compile_ok: bool,
    pub outcome: Option<SimOutcome>,
    pub failure: FailureClass,
    pub ipc: Option<f64>,
}

/// A simulator strategy. Implementations are stateless per run and safe to
/// share across the evaluation worker pool.
pub trait SimulatorBackend: Send + Sync {
    /// Registry name used in configs (`reference`, `gem5`).
    fn name(&self) -> &'static str;
    /// Verify external tooling before a campaign starts.
    fn check_tooling(&self) -> Result<(), String>;
    /// Execute a compiled snippet. Never panics; failures map into the
    /// outcome status.
    fn run(&self, source: &str, binary: &Path) -> SimOutcome;
}

/// Stable identity for a snippet: the code when there is code, otherwise
/// whatever text the extractor preserved (refusals keep their message).
pub fn snippet_id(extraction: &ExtractionResult) -> String {
    match &extraction.code {
        Some(code) => fnv1a64_hex(code.as_bytes()),
        None => fnv1a64_hex(extraction.diagnostics.join("\n").as_bytes()),
    }
}

/// Evaluate one extraction end to end. Total: every input yields a record.
pub fn evaluate_snippet(
    extraction: &ExtractionResult,
    backend: &dyn SimulatorBackend,
    compile_spec: &CompileSpec,
) -> EvalRecord {
    let id = snippet_id(extraction);
    let base = |failure: FailureClass| EvalRecord {
        snippet_id: id.clone(),
        extraction: extraction.status,
        compile_ok: false,
        outcome: None,
        failure,
        ipc: None,
    };

    let source = match (extraction.status, &extraction.code) {
        (ExtractionStatus::Refusal, _) => return base(FailureClass::Refusal),
        (ExtractionStatus::Empty, _) => return base(FailureClass::ParseFailure),
        (_, Some(code)) => code,
        // Unreachable for well-formed extractions; classify as unparseable.
        (_, None) => return base(FailureClass::ParseFailure),
    };

    let compiled = match compile_snippet(source, compile_spec) {
        Ok(compiled) => compiled,
        Err(_) if extraction.status == ExtractionStatus::Unterminated => {
            return base(FailureClass::Incomplete)
        }
        Err(_) => return base(FailureClass::CompileError),
    };

    let outcome = backend.run(source, &compiled.binary_path);
    let (failure, ipc) = match outcome.status {
        SimStatus::Ok => (FailureClass::None, outcome.ipc),
        SimStatus::Crash | SimStatus::SimError => (FailureClass::SimCrash, None),
        SimStatus::Timeout => (FailureClass::SimTimeout, None),
    };
    EvalRecord {
        snippet_id: id,
        extraction: extraction.status,
        compile_ok: true,
        outcome: Some(outcome),
        failure,
        ipc,
    }
}

/// Evaluate a batch on a bounded worker pool, preserving input order.
/// Each worker owns its temp dirs and subprocesses; only the result slots
/// are shared.
pub fn evaluate_batch(
    extractions: &[ExtractionResult],
    backend: &dyn SimulatorBackend,
    compile_spec: &CompileSpec,
    workers: usize,
) -> Vec<EvalRecord> {
    let workers = workers.max(1).min(extractions.len().max(1));
    if workers == 1 || extractions.len() <= 1 {
        return extractions
            .iter()
            .map(|e| evaluate_snippet(e, backend, compile_spec))
            .collect();
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<EvalRecord>>> =
        extractions.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= extractions.len() {
                    break;
                }
                let record = evaluate_snippet(&extractions[index], backend, compile_spec);
                *slots[index].lock().unwrap() = Some(record);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("all slots filled"))
        .collect()
}

/// Host CPU count, the default worker-pool size.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}
