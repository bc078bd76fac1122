//! The text-transform strategies and their registry.
//!
//! Each algorithm implements [`TextTransform`] and is registered under a
//! stable kebab-case name; configs and search-space atoms select transforms
//! by that name at runtime. All transforms leave backtick-delimited spans
//! and the chat markers `[INST]`, `[/INST]`, `<<SYS>>`, `<</SYS>>` intact.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::lexicon::Lexicon;

pub trait TextTransform: Send + Sync {
    /// Registry name, also used in search-space atoms.
    fn name(&self) -> &'static str;
    /// Rewrite a tokenized text. Protected tokens must be passed through
    /// verbatim.
    fn apply_tokens(&self, tokens: &[Token<'_>], lexicon: &Lexicon, rng: &mut StdRng) -> String;
}

/// Remove words found in the stopword list.
pub struct StopwordPrune;

/// Strip ASCII punctuation characters.
pub struct PunctuationPrune;

/// Remove words whose surprisal -log2(freq) falls below
/// [`SURPRISAL_THRESHOLD_BITS`]: the most common, least surprising words.
pub struct EntropyPrune;

/// Swap each word that has a thesaurus entry for a seeded-random synonym,
/// one word for one word.
pub struct SynonymReplace;

/// Words more frequent than 2^-6 under the bundled table are considered
/// unsurprising; with 1/rank frequencies that is roughly the top 60 words.
pub const SURPRISAL_THRESHOLD_BITS: f64 = 6.0;

const REGISTRY: &[&dyn TextTransform] = &[
    &StopwordPrune,
    &PunctuationPrune,
    &EntropyPrune,
    &SynonymReplace,
];

/// All registered transforms, in registration order.
pub fn registry() -> &'static [&'static dyn TextTransform] {
    REGISTRY
}

pub fn by_name(name: &str) -> Option<&'static dyn TextTransform> {
    REGISTRY.iter().copied().find(|t| t.name() == name)
}

/// Apply one transform to a full text, shielding protected regions.
pub fn apply(transform: &dyn TextTransform, text: &str, lexicon: &Lexicon, seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    transform.apply_tokens(&tokenize(text), lexicon, &mut rng)
}

impl TextTransform for StopwordPrune {
    fn name(&self) -> &'static str {
        "stopword-prune"
    }

    fn apply_tokens(&self, tokens: &[Token<'_>], lexicon: &Lexicon, _rng: &mut StdRng) -> String {
        prune_words(tokens, |word| lexicon.is_stopword(word))
    }
}

impl TextTransform for PunctuationPrune {
    fn name(&self) -> &'static str {
        "punctuation-prune"
    }

    fn apply_tokens(&self, tokens: &[Token<'_>], _lexicon: &Lexicon, _rng: &mut StdRng) -> String {
        let mut out = String::new();
        for token in tokens {
            match token {
                Token::Word(s) => {
                    out.extend(s.chars().filter(|c| !c.is_ascii_punctuation()));
                }
                Token::Whitespace(s) | Token::Protected(s) => out.push_str(s),
            }
        }
        out
    }
}

impl TextTransform for EntropyPrune {
    fn name(&self) -> &'static str {
        "entropy-prune"
    }

    fn apply_tokens(&self, tokens: &[Token<'_>], lexicon: &Lexicon, _rng: &mut StdRng) -> String {
        prune_words(tokens, |word| match lexicon.frequency(word) {
            Some(freq) => -freq.log2() < SURPRISAL_THRESHOLD_BITS,
            None => false,
        })
    }
}

impl TextTransform for SynonymReplace {
    fn name(&self) -> &'static str {
        "synonym-replace"
    }

    fn apply_tokens(&self, tokens: &[Token<'_>], lexicon: &Lexicon, rng: &mut StdRng) -> String {
        let mut out = String::new();
        for token in tokens {
            match token {
                Token::Word(s) => out.push_str(&replace_token(s, lexicon, rng)),
                Token::Whitespace(s) | Token::Protected(s) => out.push_str(s),
            }
        }
        out
    }
}

/// Drop matched word tokens together with one adjacent whitespace run:
/// the run before the word when there is one, otherwise the run after it.
/// `"X the Y"` prunes to `"X Y"` and `"the Y"` to `"Y"`.
fn prune_words(tokens: &[Token<'_>], matches: impl Fn(&str) -> bool) -> String {
    let mut out = String::new();
    let mut pending = "";
    let mut swallow_next_ws = false;
    for token in tokens {
        let keep: &str = match token {
            Token::Whitespace(s) => {
                if swallow_next_ws {
                    swallow_next_ws = false;
                } else {
                    pending = s;
                }
                continue;
            }
            Token::Protected(s) => s,
            Token::Word(s) => {
                if normalize_key(s).is_some_and(|key| matches(&key)) {
                    if pending.is_empty() {
                        swallow_next_ws = true;
                    } else {
                        pending = "";
                    }
                    continue;
                }
                s
            }
        };
        swallow_next_ws = false;
        out.push_str(pending);
        pending = "";
        out.push_str(keep);
    }
    out.push_str(pending);
    out
}

fn replace_token(token: &str, lexicon: &Lexicon, rng: &mut StdRng) -> String {
    let core_start = token
        .find(|c: char| c.is_alphanumeric())
        .unwrap_or(token.len());
    let core_end = token
        .rfind(|c: char| c.is_alphanumeric())
        .map_or(core_start, |i| {
            i + token[i..].chars().next().unwrap().len_utf8()
        });
    let (lead, rest) = token.split_at(core_start);
    let (core, trail) = rest.split_at(core_end - core_start);
    if core.is_empty() {
        return token.to_string();
    }
    match lexicon.synonyms_of(&core.to_lowercase()) {
        Some(options) if !options.is_empty() => {
            let choice = &options[rng.gen_range(0..options.len())];
            let replacement = match_capitalization(core, choice);
            format!("{lead}{replacement}{trail}")
        }
        _ => token.to_string(),
    }
}

fn match_capitalization(original: &str, replacement: &str) -> String {
    let starts_upper = original.chars().next().is_some_and(char::is_uppercase);
    if starts_upper {
        let mut chars = replacement.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

/// Lowercased token with surrounding punctuation stripped; None for
/// punctuation-only tokens.
fn normalize_key(token: &str) -> Option<String> {
    let stripped = token.trim_matches(|c: char| !c.is_alphanumeric());
    if stripped.is_empty() {
        None
    } else {
        Some(stripped.to_lowercase())
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum Token<'a> {
    Whitespace(&'a str),
    Word(&'a str),
    /// A chat marker or backtick span; transforms pass these through.
    Protected(&'a str),
}

const MARKERS: [&str; 4] = ["[INST]", "[/INST]", "<<SYS>>", "<</SYS>>"];

fn protected_prefix(text: &str, at: usize) -> Option<usize> {
    let rest = &text[at..];
    for marker in MARKERS {
        if rest.starts_with(marker) {
            return Some(at + marker.len());
        }
    }
    if let Some(tail) = rest.strip_prefix('`') {
        // Pair with the next backtick; an unpaired backtick is prose.
        if let Some(close) = tail.find('`') {
            return Some(at + close + 2);
        }
    }
    None
}

fn flush_run<'a>(
    tokens: &mut Vec<Token<'a>>,
    text: &'a str,
    start: usize,
    end: usize,
    is_ws: Option<bool>,
) {
    if start < end {
        let piece = &text[start..end];
        match is_ws {
            Some(true) => tokens.push(Token::Whitespace(piece)),
            _ => tokens.push(Token::Word(piece)),
        }
    }
}

/// Lossless token stream: concatenating the tokens reproduces the input.
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut run_start = 0;
    let mut run_is_ws: Option<bool> = None;
    while i < text.len() {
        if let Some(end) = protected_prefix(text, i) {
            flush_run(&mut tokens, text, run_start, i, run_is_ws);
            tokens.push(Token::Protected(&text[i..end]));
            i = end;
            run_start = i;
            run_is_ws = None;
            continue;
        }
        let ch = text[i..].chars().next().unwrap();
        let is_ws = ch.is_whitespace();
        if run_is_ws != Some(is_ws) {
            flush_run(&mut tokens, text, run_start, i, run_is_ws);
            run_start = i;
            run_is_ws = Some(is_ws);
        }
        i += ch.len_utf8();
    }
    flush_run(&mut tokens, text, run_start, text.len(), run_is_ws);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn tiny_lexicon() -> Lexicon {
        let synonyms = HashMap::from([
            (
                "write".to_string(),
                vec!["compose".to_string(), "pen".to_string()],
            ),
            ("fast".to_string(), vec!["quick".to_string()]),
        ]);
        let freq = HashMap::from([
            ("the".to_string(), 1.0),
            ("of".to_string(), 0.5),
            ("rare".to_string(), 0.001),
        ]);
        Lexicon::from_parts(
            ["please", "do", "not", "the"].map(String::from),
            synonyms,
            freq,
        )
        .unwrap()
    }

    fn run(t: &dyn TextTransform, text: &str, seed: u64) -> String {
        apply(t, text, &tiny_lexicon(), seed)
    }

    #[test]
    fn tokenize_is_lossless() {
        for text in [
            "plain words here",
            "  leading and trailing  ",
            "[INST]<<SYS>>x<</SYS>>mid[/INST]",
            "span `code!` after",
            "unpaired ` tick",
            "",
        ] {
            let rebuilt: String = tokenize(text)
                .iter()
                .map(|t| match t {
                    Token::Whitespace(s) | Token::Word(s) | Token::Protected(s) => *s,
                })
                .collect();
            assert_eq!(rebuilt, text);
        }
    }

    #[test]
    fn stopword_prune_removes_listed_words() {
        assert_eq!(
            run(&StopwordPrune, "please do not share the false information", 0),
            "share false information"
        );
    }

    #[test]
    fn stopword_prune_matches_through_punctuation() {
        assert_eq!(run(&StopwordPrune, "The answer, please.", 0), "answer,");
    }

    #[test]
    fn punctuation_prune_strips_ascii_punct() {
        assert_eq!(
            run(&PunctuationPrune, "Don't forget: header files!", 0),
            "Dont forget header files"
        );
    }

    #[test]
    fn entropy_prune_drops_unsurprising_words() {
        // "the" (1.0) and "of" (0.5) sit far below 6 bits of surprisal;
        // "rare" (0.001 -> ~10 bits) and unknown words survive.
        assert_eq!(
            run(&EntropyPrune, "the cost of rare instructions", 0),
            "cost rare instructions"
        );
    }

    #[test]
    fn synonym_replace_preserves_token_count_and_case() {
        let out = run(&SynonymReplace, "Write fast, write often.", 7);
        assert_eq!(out.split_whitespace().count(), 4);
        let first = out.split_whitespace().next().unwrap();
        assert!(first == "Compose" || first == "Pen", "got {first}");
        assert!(out.contains("quick,"));
        assert!(out.ends_with("often."));
    }

    #[test]
    fn synonym_replace_is_seeded() {
        let text = "write write write write write write";
        assert_eq!(run(&SynonymReplace, text, 3), run(&SynonymReplace, text, 3));
    }

    #[test]
    fn backtick_spans_are_protected() {
        assert_eq!(
            run(&PunctuationPrune, "keep `the_code()!` intact, ok?", 0),
            "keep `the_code()!` intact ok"
        );
        assert_eq!(
            run(&StopwordPrune, "the `the` survives", 0),
            "`the` survives"
        );
        assert_eq!(
            run(&StopwordPrune, "keep `x` the end", 0),
            "keep `x` end"
        );
    }

    #[test]
    fn markers_are_protected() {
        let text = "[INST]<<SYS>>do not panic<</SYS>>[/INST]";
        assert_eq!(
            run(&PunctuationPrune, text, 0),
            "[INST]<<SYS>>do not panic<</SYS>>[/INST]"
        );
        assert_eq!(
            run(&StopwordPrune, "[INST]do this[/INST]", 0),
            "[INST]this[/INST]"
        );
    }

    #[test]
    fn unpaired_backtick_is_prose() {
        assert_eq!(run(&PunctuationPrune, "odd ` tick", 0), "odd  tick");
    }

    #[test]
    fn empty_input_passes_through() {
        for t in registry() {
            assert_eq!(run(*t, "", 0), "");
        }
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(registry().len(), 4);
        assert!(by_name("stopword-prune").is_some());
        assert!(by_name("entropy-prune").is_some());
        assert!(by_name("unknown").is_none());
        for t in registry() {
            assert_eq!(by_name(t.name()).unwrap().name(), t.name());
        }
    }
}
