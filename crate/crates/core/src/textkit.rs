//! Tokenization, surface statistics, a rule lemmatizer and frequency tables.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("empty phrase")]
    EmptyPhrase,
}

/// A token of some source text, addressed by byte offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.surface.chars().next().is_some_and(char::is_alphanumeric)
    }
}

/// Splits `text` into alphanumeric runs and single punctuation characters.
/// Whitespace separates tokens and is never part of one.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if run_start.is_none() {
                run_start = Some(i);
            }
            continue;
        }
        if let Some(s) = run_start.take() {
            tokens.push(Token { surface: text[s..i].to_string(), start: s, end: i });
        }
        if !c.is_whitespace() {
            let e = i + c.len_utf8();
            tokens.push(Token { surface: text[i..e].to_string(), start: i, end: e });
        }
    }
    if let Some(s) = run_start {
        tokens.push(Token { surface: text[s..].to_string(), start: s, end: text.len() });
    }
    tokens
}

/// Lowercased token surfaces, the form the LM and lookups operate on.
pub fn normalized_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.surface.to_lowercase()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthStats {
    pub chars: u32,
    pub vowels: u32,
    pub syllables: u32,
}

fn is_vowel(c: char) -> bool {
    matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Character, vowel and syllable counts of a phrase.
///
/// Syllables are maximal runs of vowel letters, at least one per
/// whitespace-separated word.
pub fn surface_stats(phrase: &str) -> Result<LengthStats, TextError> {
    let mut stats = LengthStats { chars: 0, vowels: 0, syllables: 0 };
    for word in phrase.split_whitespace() {
        let mut groups = 0;
        let mut in_group = false;
        for c in word.chars() {
            stats.chars += 1;
            if is_vowel(c) {
                stats.vowels += 1;
                if !in_group {
                    groups += 1;
                }
                in_group = true;
            } else {
                in_group = false;
            }
        }
        stats.syllables += groups.max(1);
    }
    if stats.chars == 0 {
        return Err(TextError::EmptyPhrase);
    }
    Ok(stats)
}

/// Explicit word → lemma overrides consulted before the suffix rules.
pub type LemmaDict = BTreeMap<String, String>;

/// Lemmatizes a token: dictionary hit first, otherwise a suffix-rule cascade
/// run to a fixpoint. Output is lowercase.
pub fn lemmatize(token: &str, dict: Option<&LemmaDict>) -> String {
    let lower = token.to_lowercase();
    if let Some(lemma) = dict.and_then(|d| d.get(&lower)) {
        return lemma.to_lowercase();
    }
    let mut current = lower;
    // Every rule shortens the word, so this terminates.
    while let Some(next) = strip_suffix_once(&current) {
        current = next;
    }
    current
}

/// Lemmatizes each whitespace-separated word of a phrase.
pub fn lemmatize_phrase(phrase: &str, dict: Option<&LemmaDict>) -> String {
    let mut out = String::new();
    for (i, w) in phrase.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&lemmatize(w, dict));
    }
    out
}

fn has_vowel(s: &str) -> bool {
    s.chars().any(is_vowel)
}

fn ends_with_double_consonant(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() < 2 {
        return false;
    }
    let (x, y) = (b[b.len() - 2], b[b.len() - 1]);
    x == y && x.is_ascii_alphabetic() && !is_vowel(x as char) && !matches!(x, b'l' | b's' | b'z')
}

/// Undo consonant doubling or restore a dropped final `e` after `-ed`/`-ing`.
fn repair_stem(stem: &str) -> String {
    if ends_with_double_consonant(stem) {
        return stem[..stem.len() - 1].to_string();
    }
    if stem.ends_with("at") || stem.ends_with("bl") || stem.ends_with("iz") {
        let mut s = stem.to_string();
        s.push('e');
        return s;
    }
    stem.to_string()
}

fn strip_suffix_once(word: &str) -> Option<String> {
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() >= 2 {
            let mut s = stem.to_string();
            s.push('y');
            return Some(s);
        }
    }
    if let Some(stem) = word.strip_suffix("es") {
        if stem.len() >= 3
            && (stem.ends_with('s')
                || stem.ends_with('x')
                || stem.ends_with('z')
                || stem.ends_with("ch")
                || stem.ends_with("sh"))
        {
            return Some(stem.to_string());
        }
    }
    if let Some(stem) = word.strip_suffix('s') {
        if stem.len() >= 3 && !stem.ends_with('s') && !stem.ends_with('u') && !stem.ends_with('i') {
            return Some(stem.to_string());
        }
    }
    if let Some(stem) = word.strip_suffix("ing") {
        if stem.len() >= 3 && has_vowel(stem) {
            return Some(repair_stem(stem)).filter(|s| s.len() < word.len());
        }
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if stem.len() >= 4 && has_vowel(stem) {
            return Some(repair_stem(stem)).filter(|s| s.len() < word.len());
        }
    }
    None
}

/// Number of case-insensitive occurrences of `phrase`'s token sequence in
/// the document token sequence. Overlapping matches count.
pub fn doc_frequency(document_tokens: &[Token], phrase: &str) -> u32 {
    let needle = normalized_tokens(phrase);
    if needle.is_empty() || needle.len() > document_tokens.len() {
        return 0;
    }
    document_tokens
        .windows(needle.len())
        .filter(|w| w.iter().zip(&needle).all(|(t, n)| t.surface.to_lowercase() == *n))
        .count() as u32
}

/// A named phrase → count table; keys are stored lowercase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub name: String,
    entries: BTreeMap<String, u64>,
}

impl FrequencyTable {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), entries: BTreeMap::new() }
    }

    /// Adds `count` to the phrase's tally.
    pub fn add(&mut self, phrase: &str, count: u64) {
        *self.entries.entry(phrase.to_lowercase()).or_insert(0) += count;
    }

    pub fn get(&self, phrase: &str) -> u64 {
        self.entries.get(&phrase.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}
