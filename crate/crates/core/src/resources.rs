//! Paraphrase resource stores and candidate generation.
//!
//! Four resource families feed the candidate list: a lexical thesaurus, a
//! distributional thesaurus, a PPDB-style paraphrase table and a phrase
//! embedding store. Each contributes its top `k` entries for a complex
//! phrase (CP); the union is deduplicated case-insensitively.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::math::cosine;
use crate::textkit::{lemmatize_phrase, LemmaDict};

/// Per-resource retrieval depth.
pub const DEFAULT_PER_RESOURCE_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThesaurusKind {
    Lexical,
    Distributional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Lexical,
    Distributional,
    Ppdb,
    Embedding,
}

impl From<ThesaurusKind> for Source {
    fn from(kind: ThesaurusKind) -> Self {
        match kind {
            ThesaurusKind::Lexical => Source::Lexical,
            ThesaurusKind::Distributional => Source::Distributional,
        }
    }
}

fn by_weight_desc(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Lemma → neighbors, each list sorted by descending weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thesaurus {
    pub kind: ThesaurusKind,
    entries: BTreeMap<String, Vec<(String, f64)>>,
}

impl Thesaurus {
    pub fn new(kind: ThesaurusKind) -> Self {
        Self { kind, entries: BTreeMap::new() }
    }

    /// Adds neighbors for a lemma, dropping self-references and keeping the
    /// list sorted. Keys and neighbors are lowercased.
    pub fn insert(&mut self, lemma: &str, neighbors: impl IntoIterator<Item = (String, f64)>) {
        let key = lemma.to_lowercase();
        let list = self.entries.entry(key.clone()).or_default();
        for (n, w) in neighbors {
            let n = n.to_lowercase();
            if n == key || list.iter().any(|(e, _)| *e == n) {
                continue;
            }
            list.push((n, w));
        }
        list.sort_by(by_weight_desc);
    }

    pub fn neighbors(&self, lemma: &str, k: usize) -> &[(String, f64)] {
        match self.entries.get(&lemma.to_lowercase()) {
            Some(list) => &list[..k.min(list.len())],
            None => &[],
        }
    }

    /// Total neighbor count for a lemma.
    pub fn neighbor_count(&self, lemma: &str) -> usize {
        self.entries.get(&lemma.to_lowercase()).map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(String, f64)])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// The four scores a PPDB row carries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpdbScores {
    pub ppdb2: f64,
    pub ppdb1: f64,
    pub paraphrase: f64,
    pub simplification: f64,
}

impl PpdbScores {
    pub fn sum(&self) -> f64 {
        self.ppdb2 + self.ppdb1 + self.paraphrase + self.simplification
    }

    fn max(self, other: PpdbScores) -> PpdbScores {
        PpdbScores {
            ppdb2: self.ppdb2.max(other.ppdb2),
            ppdb1: self.ppdb1.max(other.ppdb1),
            paraphrase: self.paraphrase.max(other.paraphrase),
            simplification: self.simplification.max(other.simplification),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpdbRow {
    pub target: String,
    pub scores: PpdbScores,
}

/// Source phrase → paraphrase rows, ordered by descending `ppdb2` score.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PpdbTable {
    entries: BTreeMap<String, Vec<PpdbRow>>,
}

impl PpdbTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a row; rows whose target equals the source are ignored.
    /// Returns whether the row was kept.
    pub fn insert(&mut self, source: &str, target: &str, scores: PpdbScores) -> bool {
        let source = source.to_lowercase();
        if target.to_lowercase() == source {
            return false;
        }
        let rows = self.entries.entry(source).or_default();
        rows.push(PpdbRow { target: target.to_string(), scores });
        rows.sort_by(|a, b| {
            b.scores.ppdb2.total_cmp(&a.scores.ppdb2).then_with(|| a.target.cmp(&b.target))
        });
        true
    }

    pub fn rows(&self, source: &str) -> &[PpdbRow] {
        self.entries.get(&source.to_lowercase()).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, source: &str) -> bool {
        self.entries.contains_key(&source.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PpdbRow)> {
        self.entries.iter().flat_map(|(s, rows)| rows.iter().map(move |r| (s.as_str(), r)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("vector for {phrase:?} has length {got}, expected {expected}")]
    DimensionMismatch { phrase: String, expected: usize, got: usize },
    #[error("embedding dimension must be positive")]
    ZeroDimension,
}

/// Dense phrase vectors of a fixed dimension; keys lowercase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStore {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Result<Self, EmbeddingError> {
        if dimension == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        Ok(Self { dimension, vectors: BTreeMap::new() })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn insert(&mut self, phrase: &str, vector: Vec<f64>) -> Result<(), EmbeddingError> {
        if vector.len() != self.dimension {
            return Err(EmbeddingError::DimensionMismatch {
                phrase: phrase.to_string(),
                expected: self.dimension,
                got: vector.len(),
            });
        }
        self.vectors.insert(phrase.to_lowercase(), vector);
        Ok(())
    }

    pub fn get(&self, phrase: &str) -> Option<&[f64]> {
        self.vectors.get(&phrase.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Brute-force top-`k` cosine neighbors of a stored phrase, excluding the
    /// phrase itself. Ties are broken by phrase order.
    pub fn similar(&self, phrase: &str, k: usize) -> Vec<(String, f64)> {
        let key = phrase.to_lowercase();
        let Some(query) = self.vectors.get(&key) else {
            return Vec::new();
        };
        let mut scored: Vec<(String, f64)> = self
            .vectors
            .iter()
            .filter(|(p, _)| **p != key)
            .map(|(p, v)| (p.clone(), cosine(query, v)))
            .collect();
        scored.sort_by(by_weight_desc);
        scored.truncate(k);
        scored
    }

    /// Mean of the vectors of the tokens present in the store.
    pub fn phrase_vector<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<f64>> {
        let mut sum = alloc::vec![0.0; self.dimension];
        let mut n = 0usize;
        for t in tokens {
            if let Some(v) = self.get(t.as_ref()) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        for s in &mut sum {
            *s /= n as f64;
        }
        Some(sum)
    }
}

/// A paraphrase suggestion for one CP occurrence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub surface: String,
    pub sources: BTreeSet<Source>,
    pub resource_scores: PpdbScores,
    /// Neighbor counts of the CP lemma in the (lexical, distributional) thesauri.
    pub thesaurus_counts: (u32, u32),
    pub lm_logprob: f64,
    pub model_score: f64,
}

/// Identifies a CP occurrence: its surface and byte span within a sentence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CpOccurrence {
    pub surface: String,
    pub sentence_id: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub cp_surface: String,
    pub sentence_id: String,
    pub span: (usize, usize),
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.surface.as_str())
    }
}

/// The resource bundle candidate generation reads from. Any store may be
/// absent.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub lexical: Option<Thesaurus>,
    pub distributional: Option<Thesaurus>,
    pub ppdb: Option<PpdbTable>,
    pub embeddings: Option<EmbeddingStore>,
    pub lemmas: LemmaDict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub per_resource_k: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { per_resource_k: DEFAULT_PER_RESOURCE_K }
    }
}

struct Union {
    cp_key: String,
    order: Vec<Candidate>,
    index: BTreeMap<String, usize>,
    counts: (u32, u32),
}

impl Union {
    fn add(&mut self, surface: &str, source: Source, scores: Option<PpdbScores>) {
        let key = surface.trim().to_lowercase();
        if key.is_empty() || key == self.cp_key {
            return;
        }
        let idx = match self.index.get(&key) {
            Some(&i) => i,
            None => {
                self.order.push(Candidate {
                    surface: surface.trim().to_string(),
                    sources: BTreeSet::new(),
                    resource_scores: PpdbScores::default(),
                    thesaurus_counts: self.counts,
                    lm_logprob: 0.0,
                    model_score: 0.0,
                });
                self.index.insert(key, self.order.len() - 1);
                self.order.len() - 1
            }
        };
        let c = &mut self.order[idx];
        c.sources.insert(source);
        if let Some(s) = scores {
            c.resource_scores = c.resource_scores.max(s);
        }
    }
}

/// Unions the top-`k` outputs of every resource for a CP.
///
/// Thesauri are queried by lemma; PPDB and embeddings by surface first and
/// lemma when the surface is absent. The CP itself never survives.
pub fn generate_candidates(
    cp: &CpOccurrence,
    resources: &Resources,
    config: &GenerationConfig,
) -> CandidateSet {
    let k = config.per_resource_k;
    let surface = cp.surface.trim().to_lowercase();
    let lemma = lemmatize_phrase(&surface, Some(&resources.lemmas));
    let count = |t: &Option<Thesaurus>| t.as_ref().map_or(0, |t| t.neighbor_count(&lemma) as u32);
    let mut union = Union {
        cp_key: surface.clone(),
        order: Vec::new(),
        index: BTreeMap::new(),
        counts: (count(&resources.lexical), count(&resources.distributional)),
    };

    for thesaurus in [&resources.lexical, &resources.distributional].into_iter().flatten() {
        for (n, _) in thesaurus.neighbors(&lemma, k) {
            union.add(n, thesaurus.kind.into(), None);
        }
    }
    if let Some(ppdb) = &resources.ppdb {
        let key = if ppdb.contains(&surface) { &surface } else { &lemma };
        for row in ppdb.rows(key).iter().take(k) {
            union.add(&row.target, Source::Ppdb, Some(row.scores));
        }
    }
    if let Some(emb) = &resources.embeddings {
        let key = if emb.get(&surface).is_some() { &surface } else { &lemma };
        for (p, _) in emb.similar(key, k) {
            union.add(&p, Source::Embedding, None);
        }
    }

    CandidateSet {
        cp_surface: cp.surface.clone(),
        sentence_id: cp.sentence_id.clone(),
        span: (cp.start, cp.end),
        candidates: union.order,
    }
}
