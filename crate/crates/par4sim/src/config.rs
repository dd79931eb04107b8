//! Service configuration, read from a JSON file.

use std::path::{Path, PathBuf};

use par4sim_core::ltr::TrainParams;
use serde::{Deserialize, Serialize};

/// Resource files. Relative paths resolve against the config file's
/// directory; every store is optional except the LM.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourcePaths {
    pub lexical_thesaurus: Option<PathBuf>,
    pub distributional_thesaurus: Option<PathBuf>,
    pub ppdb: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub simple_frequency: Option<PathBuf>,
    pub web_frequency: Option<PathBuf>,
    /// Plain-text training corpus, one sentence per line.
    pub lm_corpus: Option<PathBuf>,
    /// Persisted n-gram counts; preferred over `lm_corpus` when both are set.
    pub lm_counts: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub resources: ResourcePaths,
    /// Trigram, bigram and unigram interpolation weights.
    pub lm_weights: [f64; 3],
    pub train: TrainParams,
    pub cap: usize,
    pub per_resource_k: usize,
    pub min_logprob: Option<f64>,
    /// Replacements a worker must make in a HIT before submitting.
    pub submit_threshold: usize,
    pub workers_per_hit: u32,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub personalization: bool,
    pub baseline_letor: Option<PathBuf>,
    /// Event log and iteration records go here; in-memory only when unset.
    pub data_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            resources: ResourcePaths::default(),
            lm_weights: [0.6, 0.3, 0.1],
            train: TrainParams::default(),
            cap: 10,
            per_resource_k: 10,
            min_logprob: None,
            submit_threshold: 3,
            workers_per_hit: 10,
            min_sentences: 1,
            max_sentences: 50,
            personalization: false,
            baseline_letor: None,
            data_dir: None,
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let mut cfg: ServiceConfig = serde_json::from_str(&text)?;
        cfg.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Resolves relative paths against `base`.
    pub fn rebase(&mut self, base: &Path) {
        let r = &mut self.resources;
        for p in [
            &mut r.lexical_thesaurus,
            &mut r.distributional_thesaurus,
            &mut r.ppdb,
            &mut r.embeddings,
            &mut r.lemmas,
            &mut r.simple_frequency,
            &mut r.web_frequency,
            &mut r.lm_corpus,
            &mut r.lm_counts,
            &mut self.baseline_letor,
            &mut self.data_dir,
        ] {
            rebase(base, p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg: ServiceConfig = serde_json::from_str(r#"{"cap": 5, "train": {"num_trees": 7}}"#).unwrap();
        assert_eq!(cfg.cap, 5);
        assert_eq!(cfg.train.num_trees, 7);
        assert_eq!(cfg.train.num_leaves, 10);
        assert_eq!(cfg.submit_threshold, 3);
        assert_eq!(cfg.workers_per_hit, 10);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = ServiceConfig::default();
        cfg.resources.ppdb = Some("ppdb.tsv".into());
        cfg.resources.embeddings = Some("/abs/emb.txt".into());
        cfg.rebase(Path::new("/etc/p4s"));
        assert_eq!(cfg.resources.ppdb.unwrap(), Path::new("/etc/p4s/ppdb.tsv"));
        assert_eq!(cfg.resources.embeddings.unwrap(), Path::new("/abs/emb.txt"));
    }
}
