//! The 14-feature candidate representation and its min-max scaler.
//!
//! | idx | feature |
//! |-----|---------|
//! | 1 | characters |
//! | 2 | vowels |
//! | 3 | syllables |
//! | 4 | frequency in the simple-language corpus table |
//! | 5 | frequency in the current document |
//! | 6 | frequency in the web corpus table |
//! | 7 | lexical-thesaurus neighbor count of the CP |
//! | 8 | distributional-thesaurus neighbor count of the CP |
//! | 9–12 | PPDB `ppdb2`, `ppdb1`, `paraphrase`, `simplification` scores |
//! | 13 | cosine(candidate, sentence) |
//! | 14 | cosine(candidate, left word + candidate + right word) |
//!
//! The index ↔ meaning mapping is frozen: LETOR files use it verbatim.

use alloc::vec::Vec;
use core::ops::{Index, Range};

use serde::{Deserialize, Serialize};

use crate::math::cosine;
use crate::resources::{Candidate, EmbeddingStore};
use crate::textkit::{doc_frequency, normalized_tokens, surface_stats, FrequencyTable, Token};

pub const NUM_FEATURES: usize = 14;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "num_chars",
    "num_vowels",
    "num_syllables",
    "freq_simple_corpus",
    "freq_document",
    "freq_web_corpus",
    "lexical_neighbor_count",
    "distributional_neighbor_count",
    "ppdb2score",
    "ppdb1score",
    "paraphraseScore",
    "simplificationScore",
    "cos_sentence",
    "cos_trigram_context",
];

/// Feature values in fixed order; slot `i` holds LETOR feature `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub const ZERO: FeatureVector = FeatureVector([0.0; NUM_FEATURES]);

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Dot product with a weight vector of the same length.
    pub fn dot(&self, weights: &[f64; NUM_FEATURES]) -> f64 {
        self.0.iter().zip(weights).map(|(a, b)| a * b).sum()
    }
}

impl Default for FeatureVector {
    fn default() -> Self {
        Self::ZERO
    }
}

impl Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The two frequency tables that back features 4 and 6.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTables {
    pub simple: FrequencyTable,
    pub web: FrequencyTable,
}

/// Everything feature extraction needs to know about the CP occurrence.
#[derive(Debug, Clone)]
pub struct ExtractionContext<'a> {
    pub sentence_tokens: &'a [Token],
    /// Token-index range of the CP within `sentence_tokens`.
    pub cp_tokens: Range<usize>,
    pub document_tokens: &'a [Token],
    pub embeddings: Option<&'a EmbeddingStore>,
    pub frequencies: &'a FrequencyTables,
}

fn word_surfaces(tokens: &[Token]) -> Vec<alloc::string::String> {
    tokens.iter().filter(|t| t.is_word()).map(|t| t.surface.to_lowercase()).collect()
}

/// Vector of a candidate: the phrase itself when stored, otherwise the mean
/// of its tokens.
fn candidate_vector(store: &EmbeddingStore, surface: &str, tokens: &[alloc::string::String]) -> Option<Vec<f64>> {
    store.get(surface).map(<[f64]>::to_vec).or_else(|| store.phrase_vector(tokens))
}

fn cos_or_zero(a: &Option<Vec<f64>>, b: &Option<Vec<f64>>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => cosine(a, b),
        _ => 0.0,
    }
}

/// Raw (unscaled) features of one candidate.
pub fn extract(candidate: &Candidate, ctx: &ExtractionContext<'_>) -> FeatureVector {
    let mut f = [0.0; NUM_FEATURES];
    if let Ok(s) = surface_stats(&candidate.surface) {
        f[0] = s.chars as f64;
        f[1] = s.vowels as f64;
        f[2] = s.syllables as f64;
    }
    f[3] = ctx.frequencies.simple.get(&candidate.surface) as f64;
    f[4] = doc_frequency(ctx.document_tokens, &candidate.surface) as f64;
    f[5] = ctx.frequencies.web.get(&candidate.surface) as f64;
    f[6] = candidate.thesaurus_counts.0 as f64;
    f[7] = candidate.thesaurus_counts.1 as f64;
    let s = candidate.resource_scores;
    f[8] = s.ppdb2;
    f[9] = s.ppdb1;
    f[10] = s.paraphrase;
    f[11] = s.simplification;

    if let Some(store) = ctx.embeddings {
        let cand_tokens = normalized_tokens(&candidate.surface);
        let cand_vec = candidate_vector(store, &candidate.surface, &cand_tokens);
        let sentence_vec = store.phrase_vector(&word_surfaces(ctx.sentence_tokens));
        f[12] = cos_or_zero(&cand_vec, &sentence_vec);

        let span = ctx.cp_tokens.start.min(ctx.sentence_tokens.len())..ctx.cp_tokens.end.min(ctx.sentence_tokens.len());
        let left = ctx.sentence_tokens[..span.start].iter().rev().find(|t| t.is_word());
        let right = ctx.sentence_tokens[span.end..].iter().find(|t| t.is_word());
        let mut window = Vec::with_capacity(cand_tokens.len() + 2);
        window.extend(left.map(|t| t.surface.to_lowercase()));
        window.extend(cand_tokens.iter().cloned());
        window.extend(right.map(|t| t.surface.to_lowercase()));
        let window_vec = store.phrase_vector(&window);
        f[13] = cos_or_zero(&cand_vec, &window_vec);
    }
    FeatureVector(f)
}

/// Per-feature `(min, max)` fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: [f64; NUM_FEATURES],
    pub max: [f64; NUM_FEATURES],
}

impl Scaler {
    /// Fits on at least one vector; `None` for an empty input.
    pub fn fit<'a, I>(vectors: I) -> Option<Scaler>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        let mut it = vectors.into_iter();
        let first = it.next()?;
        let mut scaler = Scaler { min: first.0, max: first.0 };
        for v in it {
            for i in 0..NUM_FEATURES {
                scaler.min[i] = scaler.min[i].min(v.0[i]);
                scaler.max[i] = scaler.max[i].max(v.0[i]);
            }
        }
        Some(scaler)
    }

    /// `(v - min) / (max - min)` clamped to `[0, 1]`; constant columns map to 0.5.
    pub fn apply(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; NUM_FEATURES];
        for i in 0..NUM_FEATURES {
            let (lo, hi) = (self.min[i], self.max[i]);
            out[i] = if hi > lo { ((v.0[i] - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        }
        FeatureVector(out)
    }

    /// A scaler that leaves `[0, 1]` data unchanged.
    pub fn unit() -> Scaler {
        Scaler { min: [0.0; NUM_FEATURES], max: [1.0; NUM_FEATURES] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::{PpdbScores, Source};
    use crate::textkit::tokenize;
    use alloc::string::String;
    use alloc::vec;
    use proptest::prelude::*;

    fn cand(surface: &str) -> Candidate {
        Candidate {
            surface: surface.into(),
            sources: [Source::Ppdb].into_iter().collect(),
            resource_scores: PpdbScores::default(),
            thesaurus_counts: (3, 7),
            lm_logprob: 0.0,
            model_score: 0.0,
        }
    }

    fn with_single(v: f64, i: usize) -> FeatureVector {
        let mut f = FeatureVector::ZERO;
        f.0[i] = v;
        f
    }

    const SENT: &str = "Hajar said his cousin was not affiliated with any group.";

    fn ctx<'a>(toks: &'a [Token], freqs: &'a FrequencyTables, emb: Option<&'a EmbeddingStore>) -> ExtractionContext<'a> {
        ExtractionContext { sentence_tokens: toks, cp_tokens: 6..7, document_tokens: toks, embeddings: emb, frequencies: freqs }
    }

    #[test]
    fn surface_and_resource_features() {
        let toks = tokenize(SENT);
        let mut freqs = FrequencyTables::default();
        freqs.simple.add("associated", 12);
        freqs.web.add("associated", 900);
        let mut c = cand("associated");
        c.resource_scores = PpdbScores { ppdb2: 3.2, ppdb1: 2.1, paraphrase: 0.9, simplification: 0.5 };
        let f = extract(&c, &ctx(&toks, &freqs, None));
        assert_eq!(&f.0[..3], &[10.0, 5.0, 4.0]);
        assert_eq!(f[3], 12.0);
        assert_eq!(f[4], 0.0);
        assert_eq!(f[5], 900.0);
        assert_eq!((f[6], f[7]), (3.0, 7.0));
        assert_eq!(&f.0[8..12], &[3.2, 2.1, 0.9, 0.5]);
        assert_eq!((f[12], f[13]), (0.0, 0.0));
        let f = extract(&cand("cousin"), &ctx(&toks, &freqs, None));
        assert_eq!(f[4], 1.0);
    }

    #[test]
    fn embedding_features() {
        let toks = tokenize(SENT);
        let freqs = FrequencyTables::default();
        let mut emb = EmbeddingStore::new(2).unwrap();
        emb.insert("not", vec![1.0, 0.0]).unwrap();
        emb.insert("with", vec![1.0, 0.0]).unwrap();
        emb.insert("associated", vec![0.0, 1.0]).unwrap();
        let f = extract(&cand("associated"), &ctx(&toks, &freqs, Some(&emb)));
        // Sentence mean over {not, with} = (1, 0) ⟂ (0, 1).
        assert!(f[12].abs() < 1e-12);
        // Window mean over {not, associated, with} = (2/3, 1/3).
        let expected = (1.0 / 3.0) / libm::sqrt(4.0 / 9.0 + 1.0 / 9.0);
        assert!((f[13] - expected).abs() < 1e-12);
        let f = extract(&cand("unseen"), &ctx(&toks, &freqs, Some(&emb)));
        assert_eq!((f[12], f[13]), (0.0, 0.0));
    }

    #[test]
    fn extract_is_pure() {
        let toks = tokenize(SENT);
        let freqs = FrequencyTables::default();
        let c = cand("linked to");
        assert_eq!(extract(&c, &ctx(&toks, &freqs, None)), extract(&c, &ctx(&toks, &freqs, None)));
    }

    #[test]
    fn scaler_examples() {
        let col: Vec<_> = [2.0, 4.0, 6.0].iter().map(|v| with_single(*v, 0)).collect();
        let s = Scaler::fit(&col).unwrap();
        let scaled: Vec<f64> = col.iter().map(|v| s.apply(v)[0]).collect();
        assert_eq!(scaled, vec![0.0, 0.5, 1.0]);
        assert_eq!(s.apply(&with_single(8.0, 0))[0], 1.0);
        assert_eq!(s.apply(&with_single(-1.0, 0))[0], 0.0);
        let constant: Vec<_> = [7.0, 7.0].iter().map(|v| with_single(*v, 0)).collect();
        let s = Scaler::fit(&constant).unwrap();
        assert_eq!(s.apply(&constant[0])[0], 0.5);
        assert!(Scaler::fit(&[]).is_none());
    }

    #[test]
    fn feature_names_are_unique() {
        let mut names: Vec<String> = FEATURE_NAMES.iter().map(|s| String::from(*s)).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), NUM_FEATURES);
    }

    proptest! {
        #[test]
        fn scaling_lands_in_unit_interval_and_keeps_order(
            rows in proptest::collection::vec(proptest::array::uniform14(-100.0f64..100.0), 1..20)
        ) {
            let vecs: Vec<FeatureVector> = rows.iter().map(|r| FeatureVector(*r)).collect();
            let s = Scaler::fit(&vecs).unwrap();
            let scaled: Vec<FeatureVector> = vecs.iter().map(|v| s.apply(v)).collect();
            for v in &scaled {
                prop_assert!(v.0.iter().all(|x| (0.0..=1.0).contains(x)));
            }
            for i in 0..NUM_FEATURES {
                if s.max[i] > s.min[i] {
                    for a in 0..vecs.len() {
                        for b in 0..vecs.len() {
                            if vecs[a][i] < vecs[b][i] {
                                prop_assert!(scaled[a][i] <= scaled[b][i]);
                            }
                        }
                    }
                }
            }
        }
    }
}
