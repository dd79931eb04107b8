//! The served candidate pipeline: generate, LM-filter to the cap, extract
//! raw features. Results are cached per (HIT, span).

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use par4sim_core::adaptive::{Featurizer, LabeledGroup, SpanRef};
use par4sim_core::features::{extract, ExtractionContext, FeatureVector, FrequencyTables};
use par4sim_core::lm::{filter_and_order, FilterConfig, Interpolation, TrigramLm};
use par4sim_core::ltr::{RankedItem, RankingGroup};
use par4sim_core::resources::{
    generate_candidates, Candidate, CpOccurrence, GenerationConfig, Resources, ThesaurusKind,
};
use par4sim_core::textkit::{tokenize, FrequencyTable};

use crate::config::ServiceConfig;
use crate::formats::{self, FormatError};
use crate::hit::{token_range, Hit, HitError};

/// A served candidate with its raw feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub candidate: Candidate,
    pub features: FeatureVector,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Hit(#[from] HitError),
    #[error("language model: {0}")]
    Lm(String),
}

type CacheKey = (String, SpanRef);

pub struct Pipeline {
    pub resources: Resources,
    pub lm: TrigramLm,
    pub frequencies: FrequencyTables,
    pub generation: GenerationConfig,
    pub filter: FilterConfig,
    cache: Mutex<BTreeMap<CacheKey, Arc<Vec<ScoredCandidate>>>>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("generation", &self.generation).field("filter", &self.filter).finish()
    }
}

fn load_opt<T>(
    path: &Option<std::path::PathBuf>,
    read: impl FnOnce(std::io::BufReader<std::fs::File>) -> Result<T, FormatError>,
) -> Result<Option<T>, FormatError> {
    path.as_deref().map(|p| read(formats::open(p)?)).transpose()
}

impl Pipeline {
    pub fn new(
        resources: Resources,
        lm: TrigramLm,
        frequencies: FrequencyTables,
        generation: GenerationConfig,
        filter: FilterConfig,
    ) -> Self {
        Self { resources, lm, frequencies, generation, filter, cache: Mutex::new(BTreeMap::new()) }
    }

    /// Loads every configured resource file.
    pub fn load(cfg: &ServiceConfig) -> anyhow::Result<Self> {
        let r = &cfg.resources;
        let resources = Resources {
            lexical: load_opt(&r.lexical_thesaurus, |f| formats::read_thesaurus(ThesaurusKind::Lexical, f))?,
            distributional: load_opt(&r.distributional_thesaurus, |f| {
                formats::read_thesaurus(ThesaurusKind::Distributional, f)
            })?,
            ppdb: load_opt(&r.ppdb, formats::read_ppdb)?,
            embeddings: load_opt(&r.embeddings, formats::read_embeddings)?,
            lemmas: load_opt(&r.lemmas, formats::read_lemmas)?.unwrap_or_default(),
        };
        let frequencies = FrequencyTables {
            simple: load_opt(&r.simple_frequency, |f| formats::read_frequency("simple", f))?
                .unwrap_or_else(|| FrequencyTable::new("simple")),
            web: load_opt(&r.web_frequency, |f| formats::read_frequency("web", f))?
                .unwrap_or_else(|| FrequencyTable::new("web")),
        };
        let [a, b, c] = cfg.lm_weights;
        let weights = Interpolation::new(a, b, c).map_err(|e| anyhow::anyhow!("lm_weights: {e}"))?;
        let lm = match (&r.lm_counts, &r.lm_corpus) {
            (Some(p), _) => formats::read_lm(formats::open(p)?)?,
            (None, Some(p)) => formats::read_corpus(formats::open(p)?, weights)?,
            (None, None) => anyhow::bail!("no language model configured (lm_counts or lm_corpus)"),
        };
        let generation = GenerationConfig { per_resource_k: cfg.per_resource_k };
        let filter = FilterConfig { cap: cfg.cap, min_logprob: cfg.min_logprob };
        Ok(Self::new(resources, lm, frequencies, generation, filter))
    }

    pub fn load_from(path: &Path) -> anyhow::Result<Self> {
        Self::load(&ServiceConfig::load(path)?)
    }

    /// Candidates for a span in LM order, capped, with raw features.
    pub fn candidates(&self, hit: &Hit, span: &SpanRef) -> Result<Arc<Vec<ScoredCandidate>>, PipelineError> {
        let key = (hit.hit_id.clone(), span.clone());
        if let Some(c) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(c.clone());
        }
        let computed = Arc::new(self.compute(hit, span)?);
        Ok(self.cache.lock().expect("cache lock").entry(key).or_insert(computed).clone())
    }

    fn compute(&self, hit: &Hit, span: &SpanRef) -> Result<Vec<ScoredCandidate>, PipelineError> {
        let surface = hit.span_text(span)?;
        let sentence = hit.sentence(&span.sentence_id).expect("span_text checked the sentence");
        let tokens = tokenize(&sentence.text);
        let range = token_range(&tokens, span.start, span.end);
        let cp = CpOccurrence {
            surface: surface.to_string(),
            sentence_id: span.sentence_id.clone(),
            start: span.start,
            end: span.end,
        };
        let set = generate_candidates(&cp, &self.resources, &self.generation);
        let surfaces: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
        let set = filter_and_order(set, &self.lm, &surfaces, range.clone(), &self.filter)
            .map_err(|e| PipelineError::Lm(e.to_string()))?;
        let document = hit.document_tokens();
        let ctx = ExtractionContext {
            sentence_tokens: &tokens,
            cp_tokens: range,
            document_tokens: &document,
            embeddings: self.resources.embeddings.as_ref(),
            frequencies: &self.frequencies,
        };
        Ok(set
            .candidates
            .into_iter()
            .map(|c| {
                let features = extract(&c, &ctx);
                ScoredCandidate { candidate: c, features }
            })
            .collect())
    }
}

/// Featurizes labeled groups against a HIT catalog. Items come out in LM
/// order with relevance looked up by surface.
pub struct HitFeaturizer<'a> {
    pub pipeline: &'a Pipeline,
    pub hits: &'a BTreeMap<String, Hit>,
}

impl Featurizer for HitFeaturizer<'_> {
    fn featurize(&self, group: &LabeledGroup) -> Option<RankingGroup> {
        let hit = self.hits.get(&group.hit_id)?;
        let served = self.pipeline.candidates(hit, &group.span).ok()?;
        let items: Vec<RankedItem> = served
            .iter()
            .map(|s| RankedItem {
                features: s.features,
                relevance: group.relevance_of(&s.candidate.surface),
                item_id: s.candidate.surface.clone(),
            })
            .collect();
        (!items.is_empty()).then(|| RankingGroup { query_id: group.query_id(), items })
    }
}
