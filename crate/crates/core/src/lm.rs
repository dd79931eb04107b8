//! Interpolated trigram language model used to order and cap candidates.
//!
//! `P(w | h1 h2) = λ3·P_mle(w | h1 h2) + λ2·P_mle(w | h2) + λ1·P_add1(w)`
//! with `P_add1(w) = (c(w) + 1) / (N + V + 1)`; the `+1` in the denominator
//! reserves mass for a single out-of-vocabulary bucket. MLE terms whose
//! history was never seen contribute nothing.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::math::ln;
use crate::resources::CandidateSet;
use crate::textkit::normalized_tokens;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LmError {
    #[error("interpolation weights must be non-negative and sum to 1, got ({0}, {1}, {2})")]
    InvalidWeights(f64, f64, f64),
    #[error("training corpus contains no tokens")]
    EmptyCorpus,
    #[error("span {start}..{end} is outside a sentence of {len} tokens")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
    #[error("malformed n-gram {0:?}")]
    MalformedNgram(String),
}

/// Interpolation weights `(λ3, λ2, λ1)` for trigram, bigram and unigram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interpolation {
    pub trigram: f64,
    pub bigram: f64,
    pub unigram: f64,
}

impl Interpolation {
    pub fn new(trigram: f64, bigram: f64, unigram: f64) -> Result<Self, LmError> {
        let ok = [trigram, bigram, unigram].iter().all(|w| w.is_finite() && *w >= 0.0)
            && ((trigram + bigram + unigram) - 1.0).abs() <= 1e-9;
        if !ok {
            return Err(LmError::InvalidWeights(trigram, bigram, unigram));
        }
        Ok(Self { trigram, bigram, unigram })
    }
}

impl Default for Interpolation {
    fn default() -> Self {
        Self { trigram: 0.6, bigram: 0.3, unigram: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigramLm {
    weights: Interpolation,
    ids: BTreeMap<String, u32>,
    words: Vec<String>,
    unigrams: Vec<u64>,
    bigrams: BTreeMap<(u32, u32), u64>,
    trigrams: BTreeMap<(u32, u32, u32), u64>,
    // History totals over in-vocabulary targets only (never `</s>`), so each
    // MLE term is a distribution over the vocabulary.
    bigram_history: BTreeMap<u32, u64>,
    trigram_history: BTreeMap<(u32, u32), u64>,
    total_tokens: u64,
}

impl TrigramLm {
    fn empty(weights: Interpolation) -> Self {
        let mut lm = Self {
            weights,
            ids: BTreeMap::new(),
            words: Vec::new(),
            unigrams: Vec::new(),
            bigrams: BTreeMap::new(),
            trigrams: BTreeMap::new(),
            bigram_history: BTreeMap::new(),
            trigram_history: BTreeMap::new(),
            total_tokens: 0,
        };
        lm.intern(BOS);
        lm.intern(EOS);
        lm
    }

    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.ids.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.ids.insert(w.to_string(), id);
        self.words.push(w.to_string());
        self.unigrams.push(0);
        id
    }

    fn id(&self, w: &str) -> u32 {
        match w {
            BOS => BOS_ID,
            EOS => EOS_ID,
            _ => self.ids.get(w).copied().unwrap_or(UNK_ID),
        }
    }

    /// Counts n-grams over sentences padded as `<s> <s> w1 … wn </s>`.
    /// Tokens are lowercased.
    pub fn train<I, S, T>(sentences: I, weights: Interpolation) -> Result<Self, LmError>
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut lm = Self::empty(weights);
        for sentence in sentences {
            let mut ids = alloc::vec![BOS_ID, BOS_ID];
            for tok in sentence {
                let tok = tok.as_ref().to_lowercase();
                if tok.is_empty() || tok == BOS || tok == EOS {
                    continue;
                }
                ids.push(lm.intern(&tok));
            }
            if ids.len() == 2 {
                continue;
            }
            ids.push(EOS_ID);
            for &w in &ids[2..ids.len() - 1] {
                lm.unigrams[w as usize] += 1;
                lm.total_tokens += 1;
            }
            for i in 2..ids.len() {
                *lm.bigrams.entry((ids[i - 1], ids[i])).or_insert(0) += 1;
                *lm.trigrams.entry((ids[i - 2], ids[i - 1], ids[i])).or_insert(0) += 1;
            }
        }
        if lm.total_tokens == 0 {
            return Err(LmError::EmptyCorpus);
        }
        lm.rebuild_histories();
        Ok(lm)
    }

    /// Trains from raw text, one sentence per line.
    pub fn train_text(corpus: &str, weights: Interpolation) -> Result<Self, LmError> {
        Self::train(corpus.lines().map(normalized_tokens), weights)
    }

    fn rebuild_histories(&mut self) {
        self.bigram_history.clear();
        self.trigram_history.clear();
        for (&(h, w), &c) in &self.bigrams {
            if w != EOS_ID {
                *self.bigram_history.entry(h).or_insert(0) += c;
            }
        }
        for (&(h1, h2, w), &c) in &self.trigrams {
            if w != EOS_ID {
                *self.trigram_history.entry((h1, h2)).or_insert(0) += c;
            }
        }
    }

    /// Rebuilds a model from persisted n-gram counts (order 1–3, tokens as
    /// stored). Unigram counts of `<s>`/`</s>` are ignored.
    pub fn from_counts<'a, I>(counts: I, weights: Interpolation) -> Result<Self, LmError>
    where
        I: IntoIterator<Item = (Vec<&'a str>, u64)>,
    {
        let mut lm = Self::empty(weights);
        for (gram, c) in counts {
            let ids: Vec<u32> = gram.iter().map(|w| lm.intern(w)).collect();
            match ids.as_slice() {
                [w] if *w > EOS_ID => {
                    lm.unigrams[*w as usize] += c;
                    lm.total_tokens += c;
                }
                [_] => {}
                [a, b] => *lm.bigrams.entry((*a, *b)).or_insert(0) += c,
                [a, b, w] => *lm.trigrams.entry((*a, *b, *w)).or_insert(0) += c,
                _ => return Err(LmError::MalformedNgram(gram.join(" "))),
            }
        }
        if lm.total_tokens == 0 {
            return Err(LmError::EmptyCorpus);
        }
        lm.rebuild_histories();
        Ok(lm)
    }

    /// All stored n-grams with their counts, unigrams first.
    pub fn ngram_counts(&self) -> Vec<(Vec<&str>, u64)> {
        let w = |id: u32| self.words[id as usize].as_str();
        let mut out: Vec<(Vec<&str>, u64)> = Vec::new();
        for (id, &c) in self.unigrams.iter().enumerate().skip(2) {
            out.push((alloc::vec![w(id as u32)], c));
        }
        out.extend(self.bigrams.iter().map(|(&(a, b), &c)| (alloc::vec![w(a), w(b)], c)));
        out.extend(self.trigrams.iter().map(|(&(a, b, x), &c)| (alloc::vec![w(a), w(b), w(x)], c)));
        out
    }

    pub fn weights(&self) -> Interpolation {
        self.weights
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Distinct non-padding tokens.
    pub fn vocab_size(&self) -> u64 {
        (self.words.len() - 2) as u64
    }

    /// The vocabulary, excluding padding symbols.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.words.iter().skip(2).map(String::as_str)
    }

    pub fn unigram_count(&self, w: &str) -> u64 {
        match self.id(w) {
            UNK_ID => 0,
            id => self.unigrams[id as usize],
        }
    }

    pub fn bigram_count(&self, a: &str, b: &str) -> u64 {
        self.bigrams.get(&(self.id(a), self.id(b))).copied().unwrap_or(0)
    }

    pub fn trigram_count(&self, a: &str, b: &str, c: &str) -> u64 {
        self.trigrams.get(&(self.id(a), self.id(b), self.id(c))).copied().unwrap_or(0)
    }

    fn prob_ids(&self, w: u32, h1: u32, h2: u32) -> f64 {
        let wt = self.weights;
        let mut p = 0.0;
        if w != UNK_ID && h1 != UNK_ID && h2 != UNK_ID {
            if let Some(&hist) = self.trigram_history.get(&(h1, h2)) {
                let c = self.trigrams.get(&(h1, h2, w)).copied().unwrap_or(0);
                p += wt.trigram * c as f64 / hist as f64;
            }
        }
        if w != UNK_ID && h2 != UNK_ID {
            if let Some(&hist) = self.bigram_history.get(&h2) {
                let c = self.bigrams.get(&(h2, w)).copied().unwrap_or(0);
                p += wt.bigram * c as f64 / hist as f64;
            }
        }
        let cw = if w == UNK_ID { 0 } else { self.unigrams[w as usize] };
        let denom = (self.total_tokens + self.vocab_size() + 1) as f64;
        p + wt.unigram * (cw + 1) as f64 / denom
    }

    /// `P(w | h1 h2)`, where `h2` is the token immediately before `w`.
    /// Pass [`BOS`] for positions before the sentence start.
    pub fn cond_prob(&self, w: &str, h1: &str, h2: &str) -> f64 {
        let norm = |s: &str| if s == BOS || s == EOS { s.to_string() } else { s.to_lowercase() };
        self.prob_ids(self.id(&norm(w)), self.id(&norm(h1)), self.id(&norm(h2)))
    }

    /// Mean natural-log probability of the trigrams whose target falls in the
    /// substituted candidate or within two tokens either side of it.
    ///
    /// `span` is a token-index range of `sentence`; the candidate tokens
    /// replace it.
    pub fn score_replacement<S: AsRef<str>, C: AsRef<str>>(
        &self,
        sentence: &[S],
        span: Range<usize>,
        candidate: &[C],
    ) -> Result<f64, LmError> {
        if span.start > span.end || span.end > sentence.len() {
            return Err(LmError::SpanOutOfBounds { start: span.start, end: span.end, len: sentence.len() });
        }
        let lower = |s: &str| s.to_lowercase();
        let mut ids: Vec<u32> = Vec::with_capacity(sentence.len() + candidate.len());
        ids.extend(sentence[..span.start].iter().map(|t| self.id(&lower(t.as_ref()))));
        ids.extend(candidate.iter().map(|t| self.id(&lower(t.as_ref()))));
        ids.extend(sentence[span.end..].iter().map(|t| self.id(&lower(t.as_ref()))));
        if ids.is_empty() {
            return Ok(0.0);
        }
        let cand_end = span.start + candidate.len();
        let from = span.start.saturating_sub(2);
        let to = (cand_end + 2).min(ids.len());
        let at = |i: isize| if i < 0 { BOS_ID } else { ids[i as usize] };
        let mut sum = 0.0;
        for p in from..to {
            let p = p as isize;
            sum += ln(self.prob_ids(at(p), at(p - 2), at(p - 1)));
        }
        Ok(sum / (to - from) as f64)
    }
}

/// Candidate filtering knobs: the list cap and an optional minimum mean
/// log-probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub cap: usize,
    pub min_logprob: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { cap: 10, min_logprob: None }
    }
}

/// Scores every candidate in context, sorts by descending LM score (ties:
/// higher PPDB score sum, then surface) and truncates to the cap.
pub fn filter_and_order<S: AsRef<str>>(
    mut set: CandidateSet,
    lm: &TrigramLm,
    sentence: &[S],
    span: Range<usize>,
    config: &FilterConfig,
) -> Result<CandidateSet, LmError> {
    for c in &mut set.candidates {
        let toks = normalized_tokens(&c.surface);
        c.lm_logprob = lm.score_replacement(sentence, span.clone(), &toks)?;
    }
    if let Some(min) = config.min_logprob {
        set.candidates.retain(|c| c.lm_logprob >= min);
    }
    set.candidates.sort_by(|a, b| {
        b.lm_logprob
            .total_cmp(&a.lm_logprob)
            .then_with(|| b.resource_scores.sum().total_cmp(&a.resource_scores.sum()))
            .then_with(|| a.surface.cmp(&b.surface))
    });
    set.candidates.truncate(config.cap);
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::{Candidate, PpdbScores, Source};
    use alloc::collections::BTreeSet;
    use alloc::vec;
    use proptest::prelude::*;

    fn toy() -> TrigramLm {
        TrigramLm::train_text("a b c a b d", Interpolation::new(0.6, 0.3, 0.1).unwrap()).unwrap()
    }

    /// Counting oracle straight from the padded token stream.
    fn oracle_prob(corpus: &[&[&str]], wt: Interpolation, w: &str, h1: &str, h2: &str) -> f64 {
        let mut padded: Vec<Vec<&str>> = Vec::new();
        for s in corpus {
            let mut v = vec![BOS, BOS];
            v.extend_from_slice(s);
            v.push(EOS);
            padded.push(v);
        }
        let mut c3 = 0.0;
        let mut h3 = 0.0;
        let mut c2 = 0.0;
        let mut h2c = 0.0;
        let mut vocab = BTreeSet::new();
        let mut n = 0.0;
        let mut cw = 0.0;
        for s in &padded {
            for i in 2..s.len() {
                if s[i] != EOS {
                    if s[i - 2] == h1 && s[i - 1] == h2 {
                        h3 += 1.0;
                    }
                    if s[i - 1] == h2 {
                        h2c += 1.0;
                    }
                    vocab.insert(s[i]);
                    n += 1.0;
                    if s[i] == w {
                        cw += 1.0;
                    }
                }
                if s[i - 2] == h1 && s[i - 1] == h2 && s[i] == w {
                    c3 += 1.0;
                }
                if s[i - 1] == h2 && s[i] == w {
                    c2 += 1.0;
                }
            }
        }
        let mut p = 0.0;
        if h3 > 0.0 {
            p += wt.trigram * c3 / h3;
        }
        if h2c > 0.0 {
            p += wt.bigram * c2 / h2c;
        }
        p + wt.unigram * (cw + 1.0) / (n + vocab.len() as f64 + 1.0)
    }

    #[test]
    fn training_counts() {
        let lm = toy();
        assert_eq!(lm.bigram_count("a", "b"), 2);
        assert_eq!(lm.trigram_count("a", "b", "c"), 1);
        assert_eq!(lm.trigram_count(BOS, BOS, "a"), 1);
        assert_eq!(lm.bigram_count("d", EOS), 1);
        assert_eq!(lm.total_tokens(), 6);
        assert_eq!(lm.vocab_size(), 4);
        let single = TrigramLm::train_text("a", Interpolation::default()).unwrap();
        assert_eq!(single.vocab_size(), 1);
    }

    #[test]
    fn rejects_bad_weights_and_empty_corpus() {
        assert!(matches!(Interpolation::new(0.5, 0.4, 0.2), Err(LmError::InvalidWeights(..))));
        assert!(Interpolation::new(-0.1, 0.6, 0.5).is_err());
        assert_eq!(TrigramLm::train_text("", Interpolation::default()).unwrap_err(), LmError::EmptyCorpus);
        assert_eq!(TrigramLm::train_text("\n \n", Interpolation::default()).unwrap_err(), LmError::EmptyCorpus);
    }

    #[test]
    fn cond_prob_hand_values() {
        let lm = toy();
        let wt = lm.weights();
        let corpus: &[&[&str]] = &[&["a", "b", "c", "a", "b", "d"]];
        let expected = 0.6 * 0.5 + 0.3 * 0.5 + 0.1 * (2.0 / 11.0);
        assert!((lm.cond_prob("c", "a", "b") - expected).abs() < 1e-12);
        assert!((expected - 0.4682).abs() < 1e-4);
        assert!((lm.cond_prob("c", "a", "b") - oracle_prob(corpus, wt, "c", "a", "b")).abs() < 1e-12);
        let unseen = lm.cond_prob("z", "a", "b");
        assert!((unseen - 0.1 / 11.0).abs() < 1e-12);
        assert!(unseen > 0.0);
    }

    #[test]
    fn unigram_only_weights() {
        let lm = TrigramLm::train_text("a b c a b d", Interpolation::new(0.0, 0.0, 1.0).unwrap()).unwrap();
        for (h1, h2) in [("a", "b"), (BOS, BOS), ("zz", "yy"), ("c", "a")] {
            assert!((lm.cond_prob("a", h1, h2) - 3.0 / 11.0).abs() < 1e-12);
        }
    }

    #[test]
    fn counts_round_trip() {
        let lm = toy();
        let counts = lm.ngram_counts();
        let rebuilt = TrigramLm::from_counts(counts.iter().cloned(), lm.weights()).unwrap();
        assert_eq!(rebuilt.total_tokens(), 6);
        for (w, h1, h2) in [("c", "a", "b"), ("a", BOS, BOS), ("q", "d", "c")] {
            assert_eq!(rebuilt.cond_prob(w, h1, h2), lm.cond_prob(w, h1, h2));
        }
    }

    #[test]
    fn score_replacement_examples() {
        let lm = toy();
        let sent = ["a", "b", "c", "a"];
        let same = lm.score_replacement(&sent, 2..3, &["c"]).unwrap();
        let orig = lm.score_replacement(&sent, 2..3, &sent[2..3]).unwrap();
        assert_eq!(same, orig);

        let known = lm.score_replacement(&sent, 2..3, &["d"]).unwrap();
        let oov = lm.score_replacement(&sent, 2..3, &["zzz"]).unwrap();
        assert!(known > oov);

        let one = lm.score_replacement(&["a"], 0..1, &["a"]).unwrap();
        assert!((one - ln(lm.cond_prob("a", BOS, BOS))).abs() < 1e-15);

        assert!(matches!(
            lm.score_replacement(&sent, 3..6, &["x"]),
            Err(LmError::SpanOutOfBounds { .. })
        ));
    }

    #[test]
    fn window_covers_two_tokens_each_side() {
        let lm = toy();
        let sent = ["a", "b", "c", "a", "b", "d", "a"];
        let got = lm.score_replacement(&sent, 3..4, &["a"]).unwrap();
        let mut sum = 0.0;
        for p in 1..6 {
            let h1 = if p >= 2 { sent[p - 2] } else { BOS };
            sum += ln(lm.cond_prob(sent[p], h1, sent[p - 1]));
        }
        assert!((got - sum / 5.0).abs() < 1e-12);
    }

    fn cand(s: &str, ppdb2: f64) -> Candidate {
        Candidate {
            surface: s.into(),
            sources: [Source::Ppdb].into_iter().collect(),
            resource_scores: PpdbScores { ppdb2, ..Default::default() },
            thesaurus_counts: (0, 0),
            lm_logprob: 0.0,
            model_score: 0.0,
        }
    }

    fn set_of(cands: Vec<Candidate>) -> CandidateSet {
        CandidateSet { cp_surface: "c".into(), sentence_id: "s".into(), span: (4, 5), candidates: cands }
    }

    #[test]
    fn filter_sorts_and_caps() {
        let lm = toy();
        let sent = ["a", "b", "c", "a"];
        let out = filter_and_order(
            set_of(vec![cand("zz", 0.0), cand("c", 0.0), cand("d", 0.0)]),
            &lm,
            &sent,
            2..3,
            &FilterConfig::default(),
        )
        .unwrap();
        assert_eq!(out.candidates.len(), 3);
        assert!(out.candidates.windows(2).all(|w| w[0].lm_logprob >= w[1].lm_logprob));
        assert_eq!(out.candidates[0].surface, "c");

        let many: Vec<_> = (0..15).map(|i| cand(&alloc::format!("w{i}"), i as f64)).collect();
        let out = filter_and_order(set_of(many), &lm, &sent, 2..3, &FilterConfig::default()).unwrap();
        assert_eq!(out.candidates.len(), 10);
        // Equal (all-OOV) LM scores: PPDB sum decides.
        assert_eq!(out.candidates[0].surface, "w14");
        assert_eq!(out.candidates[9].surface, "w5");
    }

    #[test]
    fn filter_threshold_and_ties() {
        let lm = toy();
        let sent = ["a", "b", "c", "a"];
        let out = filter_and_order(
            set_of(vec![cand("y2", 1.0), cand("y1", 1.0), cand("c", 0.0)]),
            &lm,
            &sent,
            2..3,
            &FilterConfig { cap: 10, min_logprob: Some(-2.0) },
        )
        .unwrap();
        assert_eq!(out.surfaces().collect::<Vec<_>>(), vec!["c"]);
        let out = filter_and_order(
            set_of(vec![cand("y2", 1.0), cand("y1", 1.0)]),
            &lm,
            &sent,
            2..3,
            &FilterConfig::default(),
        )
        .unwrap();
        assert_eq!(out.surfaces().collect::<Vec<_>>(), vec!["y1", "y2"]);
    }

    proptest! {
        #[test]
        fn distribution_sums_to_one(
            sentences in proptest::collection::vec(proptest::collection::vec(0u8..5, 1..8), 1..6),
            pick in 0usize..1000,
            l3 in 0.0f64..1.0,
            l2 in 0.0f64..1.0,
        ) {
            let names = ["a", "b", "c", "d", "e"];
            let corpus: Vec<Vec<&str>> = sentences.iter().map(|s| s.iter().map(|&i| names[i as usize]).collect()).collect();
            let (l3, l2) = (l3 * 0.9, l2 * (1.0 - l3 * 0.9));
            let wt = Interpolation::new(l3, l2, 1.0 - l3 - l2).unwrap();
            let lm = TrigramLm::train(corpus.iter().map(|s| s.iter().copied()), wt).unwrap();
            // Histories drawn from the corpus so both MLE terms are defined.
            let mut histories = Vec::new();
            for s in &corpus {
                let mut p = vec![BOS, BOS];
                p.extend(s.iter().copied());
                for i in 2..p.len() {
                    histories.push((p[i - 2], p[i - 1]));
                }
            }
            let (h1, h2) = histories[pick % histories.len()];
            let vocab: Vec<&str> = lm.vocabulary().collect();
            let mut total: f64 = vocab.iter().map(|w| lm.cond_prob(w, h1, h2)).sum();
            total += lm.cond_prob("<oov>", h1, h2);
            prop_assert!((total - 1.0).abs() < 1e-9, "sum = {}", total);
            let slices: Vec<&[&str]> = corpus.iter().map(|s| s.as_slice()).collect();
            for w in vocab.iter().chain(["<oov>"].iter()) {
                let p = lm.cond_prob(w, h1, h2);
                prop_assert!(p > 0.0);
                prop_assert!((p - oracle_prob(&slices, wt, w, h1, h2)).abs() < 1e-12);
            }
        }

        #[test]
        fn filter_is_deterministic(scores in proptest::collection::vec(0.0f64..3.0, 0..14)) {
            let lm = toy();
            let sent = ["a", "b", "c", "a"];
            let cands: Vec<_> = scores.iter().enumerate().map(|(i, s)| cand(&alloc::format!("c{}", i % 3 + i), *s)).collect();
            let a = filter_and_order(set_of(cands.clone()), &lm, &sent, 2..3, &FilterConfig::default()).unwrap();
            let b = filter_and_order(set_of(cands), &lm, &sent, 2..3, &FilterConfig::default()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
