//! Tolerant extraction of a C snippet from raw model output.
//!
//! Model responses are messy: fences get doubled up, the closing fence goes
//! missing when the token budget runs out, code arrives with no fence at
//! all, or the model refuses outright. Every such shape maps to exactly one
//! [`ExtractionStatus`]; extraction never fails.
//!
//! Fence discipline follows Markdown: the remainder of the opening fence
//! line is an info string (language tag) and is discarded; code is the text
//! strictly between the opening line and the closing delimiter.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    /// A properly closed fence with a non-empty body.
    Fenced,
    /// No fence, but the text looks like a C program.
    BareCode,
    /// An opening fence with no closing fence; code is likely truncated.
    Unterminated,
    /// Prose with no recognizable code.
    Refusal,
    /// Blank response.
    Empty,
}

impl ExtractionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractionStatus::Fenced => "fenced",
            ExtractionStatus::BareCode => "bare_code",
            ExtractionStatus::Unterminated => "unterminated",
            ExtractionStatus::Refusal => "refusal",
            ExtractionStatus::Empty => "empty",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub status: ExtractionStatus,
    /// Present and non-empty exactly when status is Fenced, BareCode or
    /// Unterminated.
    pub code: Option<String>,
    pub diagnostics: Vec<String>,
}

impl ExtractionResult {
    pub fn has_code(&self) -> bool {
        self.code.is_some()
    }
}

const FENCE: &str = "```";

/// Non-overlapping byte offsets of every triple-backtick delimiter.
fn fence_offsets(text: &str) -> Vec<usize> {
    let mut offsets = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i + 3 <= bytes.len() {
        if &bytes[i..i + 3] == FENCE.as_bytes() {
            offsets.push(i);
            i += 3;
        } else {
            i += 1;
        }
    }
    offsets
}

/// Body of a closed fence: drop the info-string line, then one trailing
/// line break. Returns the discarded language tag as well.
fn fence_body(raw: &str) -> (String, Option<String>) {
    let (tag_line, rest) = match raw.find('\n') {
        Some(pos) => (&raw[..pos], &raw[pos + 1..]),
        // The whole body sits on the opening-fence line; all of it is the
        // info string and no code remains.
        None => (raw, ""),
    };
    let tag = tag_line.trim();
    let tag = (!tag.is_empty()).then(|| tag.to_string());
    let body = rest
        .strip_suffix("\r\n")
        .or_else(|| rest.strip_suffix('\n'))
        .unwrap_or(rest);
    (body.to_string(), tag)
}

/// Parse raw model output into a snippet. Total over arbitrary strings.
pub fn extract_code(response_text: &str) -> ExtractionResult {
    let offsets = fence_offsets(response_text);
    let mut diagnostics = Vec::new();

    if offsets.len() >= 2 {
        for pair in offsets.chunks_exact(2) {
            let raw = &response_text[pair[0] + FENCE.len()..pair[1]];
            let (body, tag) = fence_body(raw);
            if body.is_empty() {
                diagnostics.push("skipped empty fence".to_string());
                continue;
            }
            if let Some(tag) = tag {
                diagnostics.push(format!("fence language tag: {tag}"));
            }
            return ExtractionResult {
                status: ExtractionStatus::Fenced,
                code: Some(body),
                diagnostics,
            };
        }
        // All closed fences were empty; fall through to the fenceless rules.
    } else if offsets.len() == 1 {
        let raw = &response_text[offsets[0] + FENCE.len()..];
        let code = match raw.find('\n') {
            Some(pos) => &raw[pos + 1..],
            None => "",
        };
        if !code.trim().is_empty() {
            let tag = raw[..raw.find('\n').unwrap_or(raw.len())].trim();
            if !tag.is_empty() {
                diagnostics.push(format!("fence language tag: {tag}"));
            }
            diagnostics.push("unterminated fence".to_string());
            return ExtractionResult {
                status: ExtractionStatus::Unterminated,
                code: Some(code.to_string()),
                diagnostics,
            };
        }
        diagnostics.push("unterminated fence with no content".to_string());
    }

    classify_fenceless(response_text, diagnostics)
}

fn classify_fenceless(text: &str, mut diagnostics: Vec<String>) -> ExtractionResult {
    let looks_like_c = text.contains("int main")
        || text
            .lines()
            .any(|line| line.trim_start().starts_with("#include"));
    if looks_like_c {
        return ExtractionResult {
            status: ExtractionStatus::BareCode,
            code: Some(text.trim().to_string()),
            diagnostics,
        };
    }
    if text.trim().is_empty() {
        return ExtractionResult {
            status: ExtractionStatus::Empty,
            code: None,
            diagnostics,
        };
    }
    diagnostics.push(text.to_string());
    ExtractionResult {
        status: ExtractionStatus::Refusal,
        code: None,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_fence() {
        let r = extract_code("```c\nint main(){return 0;}\n```");
        assert_eq!(r.status, ExtractionStatus::Fenced);
        assert_eq!(r.code.as_deref(), Some("int main(){return 0;}"));
    }

    #[test]
    fn doubled_fence_skips_empty_body() {
        let r = extract_code("``````\n```c\nint x;\n```");
        assert_eq!(r.status, ExtractionStatus::Fenced);
        assert_eq!(r.code.as_deref(), Some("int x;"));
        assert!(r.diagnostics.iter().any(|d| d.contains("skipped")));
    }

    #[test]
    fn missing_closing_fence() {
        let r = extract_code("```c\nint main(){");
        assert_eq!(r.status, ExtractionStatus::Unterminated);
        assert_eq!(r.code.as_deref(), Some("int main(){"));
        assert!(r.diagnostics.iter().any(|d| d == "unterminated fence"));
    }

    #[test]
    fn bare_code_by_include() {
        let text = "#include <stdio.h>\nint main(){return 0;}";
        let r = extract_code(text);
        assert_eq!(r.status, ExtractionStatus::BareCode);
        assert_eq!(r.code.as_deref(), Some(text));
    }

    #[test]
    fn refusal_keeps_text_in_diagnostics() {
        let r = extract_code("I don't understand the query.");
        assert_eq!(r.status, ExtractionStatus::Refusal);
        assert_eq!(r.code, None);
        assert!(r
            .diagnostics
            .iter()
            .any(|d| d == "I don't understand the query."));
    }

    #[test]
    fn empty_input() {
        let r = extract_code("");
        assert_eq!(r.status, ExtractionStatus::Empty);
        assert_eq!(r.code, None);
        let r = extract_code(" \n\t\n");
        assert_eq!(r.status, ExtractionStatus::Empty);
    }

    #[test]
    fn first_nonempty_fence_wins() {
        let r = extract_code("```c\nfirst();\n```\ntext\n```c\nsecond();\n```");
        assert_eq!(r.code.as_deref(), Some("first();"));
    }

    #[test]
    fn language_tag_recorded_not_rejected() {
        let r = extract_code("```cpp\nstd::cout << 1;\n```");
        assert_eq!(r.status, ExtractionStatus::Fenced);
        assert_eq!(r.code.as_deref(), Some("std::cout << 1;"));
        assert!(r
            .diagnostics
            .iter()
            .any(|d| d == "fence language tag: cpp"));
    }

    #[test]
    fn all_empty_fences_fall_through() {
        let r = extract_code("``` ```");
        assert_eq!(r.status, ExtractionStatus::Refusal);
        // backticks themselves are non-blank text
        let r = extract_code("``````");
        assert_eq!(r.status, ExtractionStatus::Refusal);
    }

    #[test]
    fn lone_opening_fence_without_content() {
        let r = extract_code("```c");
        assert_eq!(r.status, ExtractionStatus::Refusal);
        assert_eq!(r.code, None);
    }

    #[test]
    fn crlf_fence() {
        let r = extract_code("```c\r\nint main(){return 0;}\r\n```");
        assert_eq!(r.status, ExtractionStatus::Fenced);
        assert_eq!(r.code.as_deref(), Some("int main(){return 0;}"));
    }

    #[test]
    fn code_presence_matches_status() {
        for text in [
            "```c\nx\n```",
            "```c\nx",
            "int main(){}",
            "no code here",
            "",
            "``` ``` junk",
        ] {
            let r = extract_code(text);
            let code_bearing = matches!(
                r.status,
                ExtractionStatus::Fenced
                    | ExtractionStatus::BareCode
                    | ExtractionStatus::Unterminated
            );
            assert_eq!(r.code.is_some(), code_bearing, "input {text:?}");
            if let Some(code) = &r.code {
                assert!(!code.is_empty(), "input {text:?}");
            }
        }
    }

    proptest! {
        /// Wrapping any backtick-free, CR-free, non-empty text in a ```c
        /// fence extracts it byte-for-byte.
        #[test]
        fn fence_round_trip(body in "[^`\r]{1,200}") {
            let wrapped = format!("```c\n{body}\n```");
            let r = extract_code(&wrapped);
            prop_assert_eq!(r.status, ExtractionStatus::Fenced);
            prop_assert_eq!(r.code.as_deref(), Some(body.as_str()));
        }

        /// Extraction is total and upholds the code-presence invariant for
        /// arbitrary input, including random fence arrangements.
        #[test]
        fn total_and_exclusive(chunks in proptest::collection::vec(
            prop_oneof![
                Just("```".to_string()),
                Just("```c\n".to_string()),
                Just("\n```\n".to_string()),
                "[a-z #<>(){};\n]{0,20}",
                Just("int main".to_string()),
                Just("#include <x.h>".to_string()),
            ],
            0..12,
        )) {
            let text = chunks.concat();
            let r = extract_code(&text);
            let code_bearing = matches!(
                r.status,
                ExtractionStatus::Fenced
                    | ExtractionStatus::BareCode
                    | ExtractionStatus::Unterminated
            );
            prop_assert_eq!(r.code.is_some(), code_bearing);
            if let Some(code) = &r.code {
                prop_assert!(!code.is_empty());
            }
        }
    }
}
