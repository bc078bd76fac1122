//! Adapter for an external Gem5 simulator.
//!
//! The simulator is invoked as a subprocess per snippet with an absolute
//! tick budget and its `stats.txt` is parsed for the IPC key. Guest faults
//! are recognized by configurable stderr/stdout patterns because Gem5
//! versions word their panics differently.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::proc::{run_with_timeout, DEFAULT_OUTPUT_CAP};
use super::{SimOutcome, SimStatus, SimulatorBackend};

/// One simulated millisecond on the modeled core.
pub const DEFAULT_TICK_BUDGET: u64 = 1_000_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gem5Config {
    pub gem5_bin: PathBuf,
    pub config_script: PathBuf,
    #[serde(default = "default_ticks")]
    pub ticks: u64,
    #[serde(default = "default_ipc_key")]
    pub ipc_key: String,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    #[serde(default = "default_crash_patterns")]
    pub crash_patterns: Vec<String>,
    #[serde(default = "default_invocation_template")]
    pub invocation_template: String,
    /// Stats file location relative to the per-run working directory.
    #[serde(default = "default_stats_path")]
    pub stats_path: PathBuf,
}

fn default_ticks() -> u64 {
    DEFAULT_TICK_BUDGET
}

fn default_ipc_key() -> String {
    "system.cpu.ipc".to_string()
}

fn default_timeout_s() -> f64 {
    600.0
}

fn default_crash_patterns() -> Vec<String> {
    ["panic", "fault", "Segmentation"]
        .map(String::from)
        .to_vec()
}

fn default_invocation_template() -> String {
    "{gem5_bin} {config_script} --cmd {binary} --abs-max-tick {ticks}".to_string()
}

fn default_stats_path() -> PathBuf {
    PathBuf::from("m5out/stats.txt")
}

impl Gem5Config {
    pub fn new(gem5_bin: PathBuf, config_script: PathBuf) -> Self {
        Self {
            gem5_bin,
            config_script,
            ticks: default_ticks(),
            ipc_key: default_ipc_key(),
            timeout_s: default_timeout_s(),
            crash_patterns: default_crash_patterns(),
            invocation_template: default_invocation_template(),
            stats_path: default_stats_path(),
        }
    }
}

/// Parse a Gem5 stats dump: one `key value [# comment]` triple per line,
/// whitespace separated. Returns the first value found for `key`.
pub fn parse_stats(text: &str, key: &str) -> Option<f64> {
    for line in text.lines() {
        let mut fields = line.split_whitespace();
        if fields.next() == Some(key) {
            if let Some(value) = fields.next() {
                if let Ok(parsed) = value.parse::<f64>() {
                    return Some(parsed);
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct Gem5Backend {
    pub config: Gem5Config,
}

impl Gem5Backend {
    pub fn new(config: Gem5Config) -> Self {
        Self { config }
    }

    fn argv(&self, binary: &Path) -> Vec<String> {
        self.config
            .invocation_template
            .split_whitespace()
            .map(|token| {
                token
                    .replace("{gem5_bin}", &self.config.gem5_bin.to_string_lossy())
                    .replace(
                        "{config_script}",
                        &self.config.config_script.to_string_lossy(),
                    )
                    .replace("{binary}", &binary.to_string_lossy())
                    .replace("{ticks}", &self.config.ticks.to_string())
            })
            .collect()
    }
}

impl SimulatorBackend for Gem5Backend {
    fn name(&self) -> &'static str {
        "gem5"
    }

    fn check_tooling(&self) -> Result<(), String> {
        if !self.config.gem5_bin.exists() {
            return Err(format!(
                "gem5 binary not found: {}",
                self.config.gem5_bin.display()
            ));
        }
        if !self.config.config_script.exists() {
            return Err(format!(
                "gem5 config script not found: {}",
                self.config.config_script.display()
            ));
        }
        Ok(())
    }

    fn run(&self, _source: &str, binary: &Path) -> SimOutcome {
        let sim_error = |detail: String, wall_ms: f64| SimOutcome {
            status: SimStatus::SimError,
            ipc: None,
            raw_stats: Some(detail),
            wall_ms,
        };

        let run_dir = match tempfile::TempDir::new() {
            Ok(dir) => dir,
            Err(e) => return sim_error(format!("cannot create run dir: {e}"), 0.0),
        };
        let argv = self.argv(binary);
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..]).current_dir(run_dir.path());
        let output = match run_with_timeout(
            &mut cmd,
            Duration::from_secs_f64(self.config.timeout_s),
            DEFAULT_OUTPUT_CAP,
        ) {
            Ok(output) => output,
            Err(e) => return sim_error(format!("cannot run simulator: {e}"), 0.0),
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
        let guest_fault = self.config.crash_patterns.iter().any(|pattern| {
            output.stderr.contains(pattern.as_str()) || output.stdout.contains(pattern.as_str())
        });
        if guest_fault || output.crashed() {
            return SimOutcome {
                status: SimStatus::Crash,
                ipc: None,
                raw_stats: Some(truncate(&output.stderr, 65536)),
                wall_ms,
            };
        }
        if output.exit_code != Some(0) {
            return sim_error(
                format!(
                    "simulator exited with {:?}: {}",
                    output.exit_code,
                    truncate(&output.stderr, 4096)
                ),
                wall_ms,
            );
        }

        let stats_file = run_dir.path().join(&self.config.stats_path);
        let stats_text = match std::fs::read_to_string(&stats_file) {
            Ok(text) => text,
            Err(e) => {
                return sim_error(
                    format!("cannot read stats file {}: {e}", stats_file.display()),
                    wall_ms,
                )
            }
        };
        match parse_stats(&stats_text, &self.config.ipc_key) {
            Some(ipc) => SimOutcome {
                status: SimStatus::Ok,
                ipc: Some(ipc),
                raw_stats: Some(truncate(&stats_text, 65536)),
                wall_ms,
            },
            None => sim_error(
                format!("stats key '{}' absent", self.config.ipc_key),
                wall_ms,
            ),
        }
    }
}

fn truncate(text: &str, max: usize) -> String {
    if text.len() <= max {
        text.to_string()
    } else {
        let mut end = max;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &text[..end])
    }
}
