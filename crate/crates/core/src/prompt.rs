//! Construction and rendering of the two-part chat prompt.
//!
//! A [`PromptSpec`] holds the system text (context for the model), the user
//! text (the actual instruction), and optional example programs. Rendering
//! lays these out in the Llama-2 instruction format:
//!
//! ```text
//! <s>[INST]<<SYS>>
//! {system}
//! <</SYS>>
//!
//! {user}[ examples...][/INST]
//! ```
//!
//! Rendering is deterministic: the same spec and flag always produce
//! byte-identical text.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("invalid prompt spec: {0}")]
    InvalidSpec(String),
    #[error("cannot read prompt spec: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse prompt spec: {0}")]
    Parse(#[from] serde_json::Error),
}

/// A hand-written example program shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeExample {
    pub label: String,
    #[serde(rename = "source")]
    pub source_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system_text: String,
    pub user_text: String,
    #[serde(default)]
    pub examples: Vec<CodeExample>,
    #[serde(default = "default_chat_template")]
    pub chat_template: String,
}

fn default_chat_template() -> String {
    "llama2-inst".to_string()
}

impl PromptSpec {
    /// Check the invariants: both texts non-blank, no example may
    /// embed a triple backtick (it would corrupt fence rendering).
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.system_text.trim().is_empty() {
            return Err(PromptError::InvalidSpec("system_text is blank".into()));
        }
        if self.user_text.trim().is_empty() {
            return Err(PromptError::InvalidSpec("user_text is blank".into()));
        }
        for example in &self.examples {
            if example.source_text.is_empty() {
                return Err(PromptError::InvalidSpec(format!(
                    "example '{}' is empty",
                    example.label
                )));
            }
            if example.source_text.contains("```") {
                return Err(PromptError::InvalidSpec(format!(
                    "example '{}' contains a triple backtick",
                    example.label
                )));
            }
        }
        Ok(())
    }

    /// Load a spec from a JSON document with keys `system_text`,
    /// `user_text`, `examples` (list of `{label, source}`) and
    /// `chat_template`.
    pub fn from_json_file(path: &Path) -> Result<Self, PromptError> {
        let text = fs::read_to_string(path)?;
        let spec: PromptSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// The fully rendered prompt plus a whitespace-token size estimate
/// (logging only; nothing downstream depends on exact token counts).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub approx_tokens: usize,
}

/// The canonical prompt: a system text demanding fenced C-only output and
/// the instruction to aim for a high number of instructions per cycle.
pub fn default_prompt() -> PromptSpec {
    PromptSpec {
        system_text: "You are a C code generator. \
Only respond with generated code and no explanation. \
Do not justify the code. \
Do not return C++. \
Always embed the generated code in Markdown code tags. \
If a question does not make any sense, or is not factually coherent, \
explain why instead of answering something not correct. \
If you don't know the answer to a question, please don't share false information."
            .to_string(),
        user_text: "Write a single program that aims for a high number of \
instructions per cycle. \
Don't forget to include all the necessary header files. \
If you use math functions include math.h."
            .to_string(),
        examples: Vec::new(),
        chat_template: default_chat_template(),
    }
}

/// Render a spec into the model's expected token layout. Examples are
/// included only when `include_examples` is set; their IPC is never
/// rendered.
pub fn render_prompt(
    spec: &PromptSpec,
    include_examples: bool,
) -> Result<RenderedPrompt, PromptError> {
    spec.validate()?;
    if spec.chat_template != "llama2-inst" {
        return Err(PromptError::InvalidSpec(format!(
            "unsupported chat template '{}'",
            spec.chat_template
        )));
    }

    let mut text = String::new();
    text.push_str("<s>[INST]<<SYS>>\n");
    text.push_str(&spec.system_text);
    text.push_str("\n<</SYS>>\n\n");
    text.push_str(&spec.user_text);
    if include_examples {
        for example in &spec.examples {
            text.push_str("\n\nHere is an example program that compiles and runs:\n```c\n");
            text.push_str(&example.source_text);
            if !example.source_text.ends_with('\n') {
                text.push('\n');
            }
            text.push_str("```");
        }
    }
    text.push_str("[/INST]");

    let approx_tokens = text.split_whitespace().count();
    Ok(RenderedPrompt {
        text,
        approx_tokens,
    })
}

/// True when the rendered text satisfies the marker layout: exactly one
/// `[INST]`/`[/INST]` pair in order, with the `<<SYS>>` block inside it.
pub fn markers_well_formed(text: &str) -> bool {
    let count = |needle: &str| text.match_indices(needle).count();
    if count("[INST]") != 1 || count("[/INST]") != 1 {
        return false;
    }
    let inst = text.find("[INST]").unwrap();
    let inst_end = text.find("[/INST]").unwrap();
    let (sys_open, sys_close) = match (text.find("<<SYS>>"), text.find("<</SYS>>")) {
        (Some(a), Some(b)) => (a, b),
        _ => return false,
    };
    inst < sys_open && sys_open < sys_close && sys_close < inst_end
}
