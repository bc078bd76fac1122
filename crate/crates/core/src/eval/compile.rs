//! Compile one snippet in a fresh temporary directory.

use std::path::PathBuf;
use std::process::Command;
use std::time::Duration;

use tempfile::TempDir;
use thiserror::Error;

use super::proc::{run_with_timeout, DEFAULT_OUTPUT_CAP};

/// How to turn a source file into a binary. `{src}` and `{out}` must each
/// appear exactly once in the template, which is split on whitespace (no
/// shell is involved).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CompileSpec {
    pub command_template: String,
    pub timeout_s: f64,
}

impl CompileSpec {
    /// Host C compiler profile. `-O1` keeps generated arithmetic alive
    /// without slow optimization passes; `-w` silences the warning spew
    /// models tend to provoke.
    pub fn host_default() -> Self {
        Self {
            command_template: "cc -O1 -static -w -o {out} {src}".to_string(),
            timeout_s: 30.0,
        }
    }

    /// Cross profile for a RISC-V bare-metal toolchain, matching the
    /// simulated core the Gem5 backend models.
    pub fn riscv_default() -> Self {
        Self {
            command_template: "riscv64-unknown-elf-gcc -O1 -static -w -o {out} {src}".to_string(),
            timeout_s: 60.0,
        }
    }

    pub fn validate(&self) -> Result<(), CompileError> {
        for placeholder in ["{src}", "{out}"] {
            if self.command_template.matches(placeholder).count() != 1 {
                return Err(CompileError::BadTemplate {
                    detail: format!(
                        "template must contain {placeholder} exactly once: {}",
                        self.command_template
                    ),
                });
            }
        }
        if !self.timeout_s.is_finite() || self.timeout_s <= 0.0 {
            return Err(CompileError::BadTemplate {
                detail: "timeout_s must be positive".to_string(),
            });
        }
        Ok(())
    }

    /// The compiler executable named by the template, for tooling checks.
    pub fn compiler(&self) -> Option<&str> {
        self.command_template.split_whitespace().next()
    }
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("compilation failed: {stderr}")]
    Failed { stderr: String },
    #[error("compiler timed out after {seconds}s")]
    Timeout { seconds: f64 },
    #[error("toolchain missing: {detail}")]
    ToolchainMissing { detail: String },
    #[error("bad compile spec: {detail}")]
    BadTemplate { detail: String },
}

/// A compiled snippet. The temporary directory lives as long as this value;
/// dropping it removes the directory, the source and the binary.
#[derive(Debug)]
pub struct CompiledSnippet {
    _dir: TempDir,
    pub source_path: PathBuf,
    pub binary_path: PathBuf,
}

impl CompiledSnippet {
    pub fn workdir(&self) -> &std::path::Path {
        self._dir.path()
    }
}

pub fn compile_snippet(source: &str, spec: &CompileSpec) -> Result<CompiledSnippet, CompileError> {
    spec.validate()?;
    let dir = TempDir::new().map_err(|e| CompileError::ToolchainMissing {
        detail: format!("cannot create work dir: {e}"),
    })?;
    let source_path = dir.path().join("snippet.c");
    let binary_path = dir.path().join("snippet.bin");
    std::fs::write(&source_path, source).map_err(|e| CompileError::ToolchainMissing {
        detail: format!("cannot write source: {e}"),
    })?;

    let argv: Vec<String> = spec
        .command_template
        .split_whitespace()
        .map(|token| {
            token
                .replace("{src}", &source_path.to_string_lossy())
                .replace("{out}", &binary_path.to_string_lossy())
        })
        .collect();

    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..]).current_dir(dir.path());
    let output = run_with_timeout(
        &mut cmd,
        Duration::from_secs_f64(spec.timeout_s),
        DEFAULT_OUTPUT_CAP,
    )
    .map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CompileError::ToolchainMissing {
            detail: format!("compiler not found: {}", argv[0]),
        },
        _ => CompileError::ToolchainMissing {
            detail: format!("cannot run compiler {}: {e}", argv[0]),
        },
    })?;

    if output.timed_out {
        return Err(CompileError::Timeout {
            seconds: spec.timeout_s,
        });
    }
    if !output.success() {
        let mut stderr = output.stderr;
        if stderr.trim().is_empty() {
            stderr = format!("compiler exited with {:?}", output.exit_code);
        }
        return Err(CompileError::Failed { stderr });
    }
    Ok(CompiledSnippet {
        _dir: dir,
        source_path,
        binary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program_compiles() {
        let compiled = compile_snippet("int main(){return 0;}", &CompileSpec::host_default())
            .expect("host cc available");
        assert!(compiled.binary_path.exists());
    }

    #[test]
    fn syntax_error_reports_stderr() {
        let err = compile_snippet("int main({", &CompileSpec::host_default()).unwrap_err();
        match err {
            CompileError::Failed { stderr } => assert!(!stderr.trim().is_empty()),
            other => panic!("expected Failed, got {other:?}"),
        }
    }

    #[test]
    fn cpp_source_fails_under_c_compiler() {
        let source = "#include <iostream>\nint main(){std::cout << 1; return 0;}";
        assert!(matches!(
            compile_snippet(source, &CompileSpec::host_default()),
            Err(CompileError::Failed { .. })
        ));
    }

    #[test]
    fn missing_toolchain_distinguished() {
        let spec = CompileSpec {
            command_template: "no-such-compiler-zz -o {out} {src}".to_string(),
            timeout_s: 5.0,
        };
        assert!(matches!(
            compile_snippet("int main(){}", &spec),
            Err(CompileError::ToolchainMissing { .. })
        ));
    }

    #[test]
    fn template_placeholders_checked() {
        let spec = CompileSpec {
            command_template: "cc -o out.bin {src}".to_string(),
            timeout_s: 5.0,
        };
        assert!(matches!(
            compile_snippet("int main(){}", &spec),
            Err(CompileError::BadTemplate { .. })
        ));
    }

    #[test]
    fn workdir_removed_on_drop() {
        let compiled =
            compile_snippet("int main(){return 0;}", &CompileSpec::host_default()).unwrap();
        let dir = compiled.workdir().to_path_buf();
        assert!(dir.exists());
        drop(compiled);
        assert!(!dir.exists());
    }
}
