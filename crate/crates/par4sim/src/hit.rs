//! HITs: short documents with gold CP spans, completed by several workers.

use par4sim_core::adaptive::SpanRef;
use par4sim_core::textkit::{tokenize, Token};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sentence_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub hit_id: String,
    pub iteration: u32,
    pub sentences: Vec<Sentence>,
    pub gold_spans: Vec<SpanRef>,
    pub assigned_workers: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HitError {
    #[error("unknown sentence {0:?}")]
    UnknownSentence(String),
    #[error("span {start}..{end} is not a non-empty word span of sentence {sentence_id:?}")]
    InvalidSpan { sentence_id: String, start: usize, end: usize },
    #[error("{count} sentences; expected between {min} and {max}")]
    SentenceCount { count: usize, min: usize, max: usize },
    #[error("duplicate sentence id {0:?}")]
    DuplicateSentence(String),
    #[error("iteration must be at least 1")]
    InvalidIteration,
}

impl Hit {
    pub fn sentence(&self, sentence_id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.sentence_id == sentence_id)
    }

    /// The text under a span, if the span is valid.
    pub fn span_text(&self, span: &SpanRef) -> Result<&str, HitError> {
        let s = self.sentence(&span.sentence_id).ok_or_else(|| HitError::UnknownSentence(span.sentence_id.clone()))?;
        let invalid =
            || HitError::InvalidSpan { sentence_id: span.sentence_id.clone(), start: span.start, end: span.end };
        if span.start >= span.end {
            return Err(invalid());
        }
        let text = s.text.get(span.start..span.end).ok_or_else(invalid)?;
        if text.trim().is_empty() || text.trim() != text {
            return Err(invalid());
        }
        Ok(text)
    }

    pub fn is_gold(&self, span: &SpanRef) -> bool {
        self.gold_spans.contains(span)
    }

    /// Checks sentence count bounds, sentence id uniqueness and every gold span.
    pub fn validate(&self, min_sentences: usize, max_sentences: usize) -> Result<(), HitError> {
        if self.iteration == 0 {
            return Err(HitError::InvalidIteration);
        }
        let count = self.sentences.len();
        if count < min_sentences || count > max_sentences {
            return Err(HitError::SentenceCount { count, min: min_sentences, max: max_sentences });
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.sentences {
            if !seen.insert(s.sentence_id.as_str()) {
                return Err(HitError::DuplicateSentence(s.sentence_id.clone()));
            }
        }
        for span in &self.gold_spans {
            self.span_text(span)?;
        }
        Ok(())
    }

    /// Tokens of every sentence, in document order.
    pub fn document_tokens(&self) -> Vec<Token> {
        self.sentences.iter().flat_map(|s| tokenize(&s.text)).collect()
    }
}

/// Token-index range of the tokens overlapping a byte span.
pub fn token_range(tokens: &[Token], start: usize, end: usize) -> std::ops::Range<usize> {
    let first = tokens.iter().position(|t| t.end > start && t.start < end);
    match first {
        None => 0..0,
        Some(a) => {
            let b = tokens[a..].iter().take_while(|t| t.start < end).count();
            a..a + b
        }
    }
}
