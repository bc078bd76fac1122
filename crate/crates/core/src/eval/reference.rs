//! Desk-scale stand-in for the external simulator.
//!
//! The binary really runs (under a short timeout) so crashes and hangs are
//! observed, not guessed; the IPC itself is synthesized from source
//! features so it is deterministic across runs and hosts. The score grows
//! with arithmetic density and the presence of loops, capped at the 3.0
//! issue width of the modeled core, which gives the optimizer loop real
//! signal without a simulator install.

use std::path::Path;
use std::process::Command;
use std::time::Duration;

use super::proc::{run_with_timeout, DEFAULT_OUTPUT_CAP};
use super::{SimOutcome, SimStatus, SimulatorBackend};
use crate::hash::normalized_hash;

/// Issue width of the modeled core; no IPC may exceed it.
pub const MAX_IPC: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct ReferenceBackend {
    pub timeout: Duration,
}

impl Default for ReferenceBackend {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(2),
        }
    }
}

impl ReferenceBackend {
    pub fn with_timeout_s(timeout_s: f64) -> Self {
        Self {
            timeout: Duration::from_secs_f64(timeout_s),
        }
    }
}

/// Count of arithmetic-operator characters (`+ - * / %`) in the source.
fn arithmetic_ops(source: &str) -> usize {
    source
        .chars()
        .filter(|c| matches!(c, '+' | '-' | '*' | '/' | '%'))
        .count()
}

/// Word-boundary match for `for`, `while` or `do`.
fn has_loop_keyword(source: &str) -> bool {
    source
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .any(|token| matches!(token, "for" | "while" | "do"))
}

/// Deterministic pseudo-IPC:
///
/// ```text
/// clamp(0.10 + 0.02*A + 0.40*L + 0.40*U + 0.001*(h mod 200), 0, 3.0)
/// ```
///
/// where A counts arithmetic-operator characters, L is 1 when a loop
/// keyword occurs, U is 1 when A >= 8, and h is the FNV-1a hash of the
/// whitespace-normalized source.
pub fn pseudo_ipc(source: &str) -> f64 {
    let a = arithmetic_ops(source) as f64;
    let l = if has_loop_keyword(source) { 1.0 } else { 0.0 };
    let u = if arithmetic_ops(source) >= 8 { 1.0 } else { 0.0 };
    let h = normalized_hash(source) % 200;
    let ipc = 0.10 + 0.02 * a + 0.40 * l + 0.40 * u + 0.001 * h as f64;
    ipc.clamp(0.0, MAX_IPC)
}

impl SimulatorBackend for ReferenceBackend {
    fn name(&self) -> &'static str {
        "reference"
    }

    fn check_tooling(&self) -> Result<(), String> {
        Ok(())
    }

    fn run(&self, source: &str, binary: &Path) -> SimOutcome {
        let mut cmd = Command::new(binary);
        let output = match run_with_timeout(&mut cmd, self.timeout, DEFAULT_OUTPUT_CAP) {
            Ok(output) => output,
            Err(e) => {
                return SimOutcome {
                    status: SimStatus::SimError,
                    ipc: None,
                    raw_stats: Some(format!("cannot execute binary: {e}")),
                    wall_ms: 0.0,
                }
            }
        };
        let wall_ms = output.wall.as_secs_f64() * 1000.0;
        if output.timed_out {
            return SimOutcome {
                status: SimStatus::Timeout,
                ipc: None,
                raw_stats: None,
                wall_ms,
            };
        }
        if output.crashed() {
            return SimOutcome {
                status: SimStatus::Crash,
                ipc: None,
                raw_stats: Some(format!("signal {:?}", output.signal)),
                wall_ms,
            };
        }
        // Any normal exit counts as a completed run; the exit code of a
        // generated program carries no meaning.
        SimOutcome {
            status: SimStatus::Ok,
            ipc: Some(pseudo_ipc(source)),
            raw_stats: None,
            wall_ms,
        }
    }
}
