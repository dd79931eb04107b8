use std::io::{BufRead, Write};

use par4sim_core::lm::{Interpolation, TrigramLm};
use par4sim_core::textkit::normalized_tokens;
use serde::{Deserialize, Serialize};

use super::{content_lines, FormatError};

const HEADER_PREFIX: &str = "#lm ";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    weights: [f64; 3],
    total_tokens: u64,
    vocab_size: u64,
}

/// Trains on plain text, one sentence per line.
pub fn read_corpus<R: BufRead>(reader: R, weights: Interpolation) -> Result<TrigramLm, FormatError> {
    let mut sentences = Vec::new();
    for line in reader.lines() {
        let tokens = normalized_tokens(&line?);
        if !tokens.is_empty() {
            sentences.push(tokens);
        }
    }
    TrigramLm::train(sentences, weights).map_err(|e| FormatError::parse(0, e.to_string()))
}

/// Persists counts as `#lm {json header}` followed by sorted
/// `order<TAB>ngram<TAB>count` rows.
pub fn write_lm<W: Write>(lm: &TrigramLm, mut w: W) -> Result<(), FormatError> {
    let wt = lm.weights();
    let header = Header {
        weights: [wt.trigram, wt.bigram, wt.unigram],
        total_tokens: lm.total_tokens(),
        vocab_size: lm.vocab_size(),
    };
    writeln!(w, "{HEADER_PREFIX}{}", serde_json::to_string(&header)?)?;
    let mut rows = lm.ngram_counts();
    rows.sort();
    for (gram, c) in rows {
        writeln!(w, "{}\t{}\t{c}", gram.len(), gram.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_lm<R: BufRead>(mut reader: R) -> Result<TrigramLm, FormatError> {
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let json = first
        .trim_end()
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| FormatError::parse(1, "missing `#lm` header"))?;
    let header: Header = serde_json::from_str(json).map_err(|e| FormatError::parse(1, e.to_string()))?;
    let [a, b, c] = header.weights;
    let weights = Interpolation::new(a, b, c).map_err(|e| FormatError::parse(1, e.to_string()))?;

    let mut rows: Vec<(usize, Vec<String>, u64)> = Vec::new();
    for item in content_lines(reader) {
        let (n, line) = item?;
        let n = n + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let [order, gram, count] = fields.as_slice() else {
            return Err(FormatError::parse(n, "expected order<TAB>ngram<TAB>count"));
        };
        let order: usize = order.parse().map_err(|_| FormatError::parse(n, "invalid order"))?;
        let tokens: Vec<String> = gram.split(' ').map(str::to_string).collect();
        if tokens.len() != order || !(1..=3).contains(&order) {
            return Err(FormatError::parse(n, format!("order {order} does not match {gram:?}")));
        }
        let count: u64 = count.parse().map_err(|_| FormatError::parse(n, format!("invalid count {count:?}")))?;
        rows.push((n, tokens, count));
    }
    let lm = TrigramLm::from_counts(rows.iter().map(|(_, t, c)| (t.iter().map(String::as_str).collect(), *c)), weights)
        .map_err(|e| FormatError::parse(0, e.to_string()))?;
    if lm.total_tokens() != header.total_tokens || lm.vocab_size() != header.vocab_size {
        return Err(FormatError::parse(1, "header totals disagree with the counts"));
    }
    Ok(lm)
}
