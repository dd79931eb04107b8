//! A synthetic language: pseudo-words with latent simplicity and meaning
//! fidelity, the resource files derived from them, an LM corpus and HIT
//! documents.
//!
//! Every word is built from open CV syllables, so it ends in a vowel and is
//! its own lemma.

use std::collections::BTreeSet;
use std::path::Path;

use par4sim_core::adaptive::SpanRef;
use par4sim_core::resources::{EmbeddingStore, PpdbScores, PpdbTable, Thesaurus, ThesaurusKind};
use par4sim_core::textkit::FrequencyTable;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{ResourcePaths, ServiceConfig};
use crate::formats;
use crate::hit::{Hit, Sentence};

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    /// CP lemmas used by the campaign HITs.
    pub campaign_cps: usize,
    /// CP lemmas reserved for the external baseline dataset.
    pub essay_cps: usize,
    pub candidates_per_cp: usize,
    pub fillers: usize,
    pub embedding_dim: usize,
    pub corpus_sentences: usize,
    /// Probability that a candidate is listed by each thesaurus / PPDB.
    pub resource_coverage: f64,
    /// Standard deviation of a per-CP log-frequency level shared by the CP
    /// and its candidates.
    pub frequency_spread: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            campaign_cps: 200,
            essay_cps: 80,
            candidates_per_cp: 16,
            fillers: 300,
            embedding_dim: 16,
            corpus_sentences: 6000,
            resource_coverage: 0.5,
            frequency_spread: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordInfo {
    pub surface: String,
    /// Latent simplicity; drives length and frequencies.
    pub simplicity: f64,
    /// Latent closeness in meaning to the CP, in (0, 1).
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpEntry {
    pub lemma: String,
    pub candidates: Vec<WordInfo>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub campaign: Vec<CpEntry>,
    pub essay: Vec<CpEntry>,
    pub fillers: Vec<String>,
    pub lexical: Thesaurus,
    pub distributional: Thesaurus,
    pub ppdb: PpdbTable,
    pub embeddings: EmbeddingStore,
    pub simple: FrequencyTable,
    pub web: FrequencyTable,
    pub corpus: Vec<String>,
    filler_weights: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Namer {
    used: BTreeSet<String>,
}

impl Namer {
    /// A fresh word; lengthens after repeated collisions so short
    /// syllable counts cannot exhaust.
    fn word(&mut self, rng: &mut ChaCha8Rng, syllables: usize) -> String {
        let mut syllables = syllables;
        for attempt in 1.. {
            if attempt % 32 == 0 {
                syllables += 1;
            }
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
                w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
        unreachable!()
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

impl World {
    pub fn generate(cfg: &WorldConfig, seed: u64) -> World {
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut namer = Namer { used: BTreeSet::new() };
        let dim = cfg.embedding_dim.max(2);
        let mut lexical = Thesaurus::new(ThesaurusKind::Lexical);
        let mut distributional = Thesaurus::new(ThesaurusKind::Distributional);
        let mut ppdb = PpdbTable::new();
        let mut embeddings = EmbeddingStore::new(dim).expect("positive dimension");
        let mut simple = FrequencyTable::new("simple");
        let mut web = FrequencyTable::new("web");
        let mut content: Vec<(String, f64)> = Vec::new();

        let fillers: Vec<String> = (0..cfg.fillers).map(|i| namer.word(&mut rng, 1 + usize::from(i >= 40))).collect();
        // Zipf-like weights over fillers.
        let filler_weights: Vec<f64> = (0..fillers.len()).map(|i| 1.0 / (i as f64 + 2.0)).collect();
        for (f, w) in fillers.iter().zip(&filler_weights) {
            embeddings.insert(f, unit_vector(&mut rng, dim)).expect("dimension");
            simple.add(f, (20_000.0 * w) as u64);
            web.add(f, (50_000.0 * w) as u64);
        }

        let noise = Normal::new(0.0, 1.0).expect("valid");
        let mut make_cp = |rng: &mut ChaCha8Rng| -> CpEntry {
            let len = rng.random_range(4..=6);
            let lemma = namer.word(rng, len);
            let center = unit_vector(rng, dim);
            embeddings.insert(&lemma, center.clone()).expect("dimension");
            let level = cfg.frequency_spread * normal(rng);
            let cp_freq = (rng.random_range(3.0..30.0f64) * level.exp()).max(1.0) as u64;
            simple.add(&lemma, cp_freq / 3);
            web.add(&lemma, cp_freq);
            content.push((lemma.clone(), cp_freq as f64));

            let mut candidates = Vec::new();
            let mut lex = Vec::new();
            let mut dist = Vec::new();
            for _ in 0..cfg.candidates_per_cp {
                let z = normal(rng);
                let fidelity = rng.random_range(0.25..0.95f64);
                let syl = (2.6 - 0.9 * z + 0.6 * noise.sample(rng)).round().clamp(1.0, 5.0) as usize;
                let surface = namer.word(rng, syl);
                let s_freq = (5.0 + level + 0.6 * z + 0.35 * noise.sample(rng)).exp().round();
                let w_freq = (5.5 + level + 0.5 * z + 0.6 * noise.sample(rng)).exp().round();
                simple.add(&surface, s_freq as u64);
                web.add(&surface, w_freq as u64);
                content.push((surface.clone(), w_freq));

                let jitter = unit_vector(rng, dim);
                let v: Vec<f64> = center.iter().zip(&jitter).map(|(c, j)| fidelity * c + (1.0 - fidelity) * j).collect();
                embeddings.insert(&surface, v).expect("dimension");

                if rng.random_bool(cfg.resource_coverage) {
                    lex.push((surface.clone(), (fidelity + 0.1 * normal(rng)).clamp(0.01, 1.0)));
                }
                if rng.random_bool(cfg.resource_coverage) {
                    dist.push((surface.clone(), (0.5 * fidelity + 0.3 * rng.random::<f64>()).clamp(0.01, 1.0)));
                }
                if rng.random_bool(cfg.resource_coverage) {
                    let scores = PpdbScores {
                        ppdb2: (2.0 + 1.5 * fidelity + 0.5 * normal(rng)).max(0.0),
                        ppdb1: (3.0 + fidelity + 0.8 * normal(rng)).max(0.0),
                        paraphrase: (fidelity + 0.15 * normal(rng)).clamp(0.0, 1.0),
                        simplification: (0.5 + 0.25 * z + 0.15 * normal(rng)).clamp(0.0, 1.0),
                    };
                    ppdb.insert(&lemma, &surface, scores);
                }
                candidates.push(WordInfo { surface, simplicity: z, fidelity });
            }
            lexical.insert(&lemma, lex);
            distributional.insert(&lemma, dist);
            CpEntry { lemma, candidates }
        };
        let campaign: Vec<CpEntry> = (0..cfg.campaign_cps).map(|_| make_cp(&mut rng)).collect();
        let essay: Vec<CpEntry> = (0..cfg.essay_cps).map(|_| make_cp(&mut rng)).collect();

        // LM corpus: filler-heavy sentences with content words drawn by web frequency.
        let content_total: f64 = content.iter().map(|(_, w)| w).sum();
        let filler_total: f64 = filler_weights.iter().sum();
        let pick = |rng: &mut ChaCha8Rng, items: &[(String, f64)], total: f64| -> String {
            let mut x = rng.random::<f64>() * total;
            for (w, wt) in items {
                x -= wt;
                if x <= 0.0 {
                    return w.clone();
                }
            }
            items.last().expect("non-empty").0.clone()
        };
        let filler_items: Vec<(String, f64)> = fillers.iter().cloned().zip(filler_weights.iter().copied()).collect();
        let mut corpus = Vec::with_capacity(cfg.corpus_sentences);
        for _ in 0..cfg.corpus_sentences {
            let len = rng.random_range(6..14);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        pick(&mut rng, &content, content_total)
                    } else {
                        pick(&mut rng, &filler_items, filler_total)
                    }
                })
                .collect();
            corpus.push(format!("{} .", words.join(" ")));
        }

        World {
            campaign,
            essay,
            fillers,
            lexical,
            distributional,
            ppdb,
            embeddings,
            simple,
            web,
            corpus,
            filler_weights,
        }
    }

    /// Writes every resource file under `dir` and returns a config naming them.
    pub fn write(&self, dir: &Path) -> Result<ServiceConfig, formats::FormatError> {
        let path = |name: &str| dir.join(name);
        formats::write_thesaurus(&self.lexical, formats::create(&path("lexical.tsv"))?)?;
        formats::write_thesaurus(&self.distributional, formats::create(&path("distributional.tsv"))?)?;
        formats::write_ppdb(&self.ppdb, formats::create(&path("ppdb.tsv"))?)?;
        formats::write_embeddings(&self.embeddings, formats::create(&path("embeddings.txt"))?)?;
        formats::write_frequency(&self.simple, formats::create(&path("simple_freq.tsv"))?)?;
        formats::write_frequency(&self.web, formats::create(&path("web_freq.tsv"))?)?;
        let mut corpus = formats::create(&path("corpus.txt"))?;
        for line in &self.corpus {
            std::io::Write::write_all(&mut corpus, line.as_bytes())?;
            std::io::Write::write_all(&mut corpus, b"\n")?;
        }
        std::io::Write::flush(&mut corpus)?;
        Ok(ServiceConfig {
            resources: ResourcePaths {
                lexical_thesaurus: Some(path("lexical.tsv")),
                distributional_thesaurus: Some(path("distributional.tsv")),
                ppdb: Some(path("ppdb.tsv")),
                embeddings: Some(path("embeddings.txt")),
                lemmas: None,
                simple_frequency: Some(path("simple_freq.tsv")),
                web_frequency: Some(path("web_freq.tsv")),
                lm_corpus: Some(path("corpus.txt")),
                lm_counts: None,
            },
            ..ServiceConfig::default()
        })
    }

    fn filler(&self, rng: &mut ChaCha8Rng) -> &str {
        let total: f64 = self.filler_weights.iter().sum();
        let mut x = rng.random::<f64>() * total;
        for (f, w) in self.fillers.iter().zip(&self.filler_weights) {
            x -= w;
            if x <= 0.0 {
                return f;
            }
        }
        self.fillers.last().expect("fillers")
    }

    /// A document of `sentences` sentences; the first `cps.len()` sentences
    /// each contain one CP, marked as a gold span.
    pub fn make_hit(&self, hit_id: &str, iteration: u32, cps: &[&CpEntry], sentences: usize, rng: &mut ChaCha8Rng) -> Hit {
        let mut out = Vec::new();
        let mut spans = Vec::new();
        for i in 0..sentences.max(cps.len()) {
            let sentence_id = format!("s{}", i + 1);
            let before = rng.random_range(2..6);
            let after = rng.random_range(2..6);
            let mut text = String::new();
            for _ in 0..before {
                text.push_str(self.filler(rng));
                text.push(' ');
            }
            if let Some(cp) = cps.get(i) {
                let start = text.len();
                text.push_str(&cp.lemma);
                spans.push(SpanRef { sentence_id: sentence_id.clone(), start, end: text.len() });
            } else {
                text.push_str(self.filler(rng));
            }
            for _ in 0..after {
                text.push(' ');
                text.push_str(self.filler(rng));
            }
            text.push_str(" .");
            out.push(Sentence { sentence_id, text });
        }
        Hit { hit_id: hit_id.into(), iteration, sentences: out, gold_spans: spans, assigned_workers: 10 }
    }

    /// CP entries in a seeded order, cycling when more are needed.
    pub fn schedule<'a>(cps: &'a [CpEntry], n: usize, rng: &mut ChaCha8Rng) -> Vec<&'a CpEntry> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let mut round: Vec<&CpEntry> = cps.iter().collect();
            round.shuffle(rng);
            out.extend(round.into_iter().take(n - out.len()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use par4sim_core::textkit::lemmatize;

    fn small() -> WorldConfig {
        WorldConfig { campaign_cps: 6, essay_cps: 2, candidates_per_cp: 8, fillers: 30, corpus_sentences: 50, ..WorldConfig::default() }
    }

    #[test]
    fn words_are_unique_lemma_fixpoints() {
        let w = World::generate(&small(), 1);
        let mut all = BTreeSet::new();
        for cp in w.campaign.iter().chain(&w.essay) {
            assert_eq!(lemmatize(&cp.lemma, None), cp.lemma);
            assert!(all.insert(cp.lemma.clone()));
            for c in &cp.candidates {
                assert_eq!(lemmatize(&c.surface, None), c.surface);
                assert!(all.insert(c.surface.clone()));
            }
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = World::generate(&small(), 7);
        let b = World::generate(&small(), 7);
        assert_eq!(a.campaign, b.campaign);
        assert_eq!(a.corpus, b.corpus);
        assert_ne!(World::generate(&small(), 8).campaign, a.campaign);
    }

    #[test]
    fn hits_mark_their_cps() {
        let w = World::generate(&small(), 1);
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let cps: Vec<&CpEntry> = w.campaign.iter().take(4).collect();
        let hit = w.make_hit("h", 1, &cps, 5, &mut rng);
        assert_eq!(hit.sentences.len(), 5);
        assert!(hit.validate(1, 50).is_ok());
        for (span, cp) in hit.gold_spans.iter().zip(&cps) {
            assert_eq!(hit.span_text(span).unwrap(), cp.lemma);
        }
    }
}
