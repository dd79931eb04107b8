//! Iteration lifecycle: evaluate the active model on the closing iteration,
//! retrain on everything up to it, activate the result for the next one.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::events::{EventKind, UsageEvent};
use super::groups::{build_personal_groups, build_training_groups, LabeledGroup};
use crate::ltr::{ndcg_at_k, rank, train_lambdamart, LtrError, ModelRole, RankerModel, RankingGroup, TrainParams};

/// Attaches raw feature vectors to labeled groups.
///
/// Implementations return items in the order the pipeline serves them when
/// no model is active (language-model order), so that the identity
/// permutation is the LM baseline.
pub trait Featurizer {
    fn featurize(&self, group: &LabeledGroup) -> Option<RankingGroup>;
}

impl<F> Featurizer for F
where
    F: Fn(&LabeledGroup) -> Option<RankingGroup>,
{
    fn featurize(&self, group: &LabeledGroup) -> Option<RankingGroup> {
        self(group)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdaptiveError {
    #[error("iteration {0} is already closed")]
    AlreadyClosed(u32),
    #[error("iteration {iteration} cannot close after iteration {last}")]
    OutOfOrder { iteration: u32, last: u32 },
    #[error("iteration {0} has no groups")]
    NoGroups(u32),
    #[error("model {model_id} was trained on data from iteration {iteration}")]
    SeparationViolation { iteration: u32, model_id: String },
    #[error("worker {worker} participated in {found} iteration(s); at least 2 are needed")]
    InsufficientIterations { worker: String, found: usize },
    #[error(transparent)]
    Ltr(#[from] LtrError),
}

/// Mean NDCG over groups with a non-zero ideal DCG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean_ndcg: Option<f64>,
    pub evaluated: usize,
    pub excluded_all_zero: usize,
}

fn mean_over<'a>(groups: impl Iterator<Item = &'a RankingGroup>, mut ndcg: impl FnMut(&RankingGroup) -> f64) -> Evaluation {
    let (mut sum, mut evaluated, mut excluded) = (0.0, 0, 0);
    for g in groups {
        if g.items.iter().all(|i| i.relevance == 0) {
            excluded += 1;
            continue;
        }
        sum += ndcg(g);
        evaluated += 1;
    }
    Evaluation { mean_ndcg: (evaluated > 0).then(|| sum / evaluated as f64), evaluated, excluded_all_zero: excluded }
}

/// Ranks each group with `model` and averages NDCG@k against the worker
/// relevances.
pub fn evaluate(model: &RankerModel, groups: &[RankingGroup], k: usize) -> Evaluation {
    mean_over(groups.iter(), |g| {
        let ranked: Vec<u32> = rank(model, g).into_iter().map(|i| g.items[i].relevance).collect();
        ndcg_at_k(&ranked, k)
    })
}

/// NDCG of the groups' stored (LM) order.
pub fn evaluate_stored_order(groups: &[RankingGroup], k: usize) -> Evaluation {
    mean_over(groups.iter(), |g| g.stored_order_ndcg(k))
}

/// Result of closing one iteration. NDCG values are fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub num_groups: usize,
    pub num_evaluated: usize,
    pub excluded_all_zero: usize,
    pub mean_ndcg_at_10: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_ndcg_at_10_baseline: Option<f64>,
    pub mean_ndcg_at_10_lm_order: Option<f64>,
    /// The model that was evaluated (trained on earlier iterations only).
    pub model_id: Option<String>,
    /// The model trained at this close and served next.
    pub trained_model_id: Option<String>,
    pub training_groups: usize,
    pub hits: Vec<String>,
}

fn hits_of(groups: &[LabeledGroup]) -> BTreeSet<String> {
    groups.iter().map(|g| g.hit_id.clone()).collect()
}

/// Fails when `model` saw any of the evaluated iteration's data.
pub fn check_separation(model: &RankerModel, iteration: u32, hits: &BTreeSet<String>) -> Result<(), AdaptiveError> {
    if model.trained_on.contains(&iteration) || model.trained_hits.iter().any(|h| hits.contains(h)) {
        return Err(AdaptiveError::SeparationViolation { iteration, model_id: model.model_id.clone() });
    }
    Ok(())
}

/// The adaptive retraining loop over a usage log.
#[derive(Debug, Clone)]
pub struct AdaptiveLoop {
    pub params: TrainParams,
    pub k: usize,
    models: Vec<RankerModel>,
    active: Option<usize>,
    baseline: Option<RankerModel>,
    records: Vec<IterationRecord>,
    // Featurized groups of closed iterations; their events are frozen.
    pool: Vec<(LabeledGroup, RankingGroup)>,
    closed: BTreeSet<u32>,
}

impl AdaptiveLoop {
    pub fn new(params: TrainParams) -> Self {
        Self {
            k: params.ndcg_k,
            params,
            models: Vec::new(),
            active: None,
            baseline: None,
            records: Vec::new(),
            pool: Vec::new(),
            closed: BTreeSet::new(),
        }
    }

    pub fn set_baseline(&mut self, mut model: RankerModel) {
        model.role = ModelRole::Baseline;
        model.trained_on.clear();
        model.trained_hits.clear();
        self.baseline = Some(model);
    }

    pub fn baseline(&self) -> Option<&RankerModel> {
        self.baseline.as_ref()
    }

    pub fn active_model(&self) -> Option<&RankerModel> {
        self.active.map(|i| &self.models[i])
    }

    pub fn models(&self) -> &[RankerModel] {
        &self.models
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn is_closed(&self, iteration: u32) -> bool {
        self.closed.contains(&iteration)
    }

    pub fn last_closed(&self) -> Option<u32> {
        self.closed.last().copied()
    }

    /// Featurized groups of all closed iterations.
    pub fn pool(&self) -> impl Iterator<Item = (&LabeledGroup, &RankingGroup)> {
        self.pool.iter().map(|(l, r)| (l, r))
    }

    /// The model that served `iteration`: the newest one trained strictly
    /// before it.
    pub fn model_for_iteration(&self, iteration: u32) -> Option<&RankerModel> {
        self.models.iter().rev().find(|m| m.trained_on.iter().all(|&t| t < iteration))
    }

    /// Evaluates, retrains and activates. See the module docs.
    pub fn close_iteration(
        &mut self,
        iteration: u32,
        events: &[UsageEvent],
        featurizer: &impl Featurizer,
    ) -> Result<IterationRecord, AdaptiveError> {
        if self.closed.contains(&iteration) {
            return Err(AdaptiveError::AlreadyClosed(iteration));
        }
        if let Some(last) = self.last_closed() {
            if iteration < last {
                return Err(AdaptiveError::OutOfOrder { iteration, last });
            }
        }
        let current: Vec<LabeledGroup> =
            build_training_groups(events, iteration).into_iter().filter(|g| g.iteration == iteration).collect();
        if current.is_empty() {
            return Err(AdaptiveError::NoGroups(iteration));
        }
        let featurized: Vec<(LabeledGroup, RankingGroup)> =
            current.into_iter().filter_map(|l| featurizer.featurize(&l).map(|r| (l, r))).collect();
        let labeled: Vec<LabeledGroup> = featurized.iter().map(|(l, _)| l.clone()).collect();
        let test: Vec<RankingGroup> = featurized.iter().map(|(_, r)| r.clone()).collect();
        let hits = hits_of(&labeled);

        let mut record = IterationRecord {
            iteration,
            num_groups: test.len(),
            num_evaluated: 0,
            excluded_all_zero: 0,
            mean_ndcg_at_10: None,
            mean_ndcg_at_10_baseline: None,
            mean_ndcg_at_10_lm_order: None,
            model_id: None,
            trained_model_id: None,
            training_groups: 0,
            hits: hits.iter().cloned().collect(),
        };
        let lm = evaluate_stored_order(&test, self.k);
        record.mean_ndcg_at_10_lm_order = lm.mean_ndcg;
        record.num_evaluated = lm.evaluated;
        record.excluded_all_zero = lm.excluded_all_zero;
        if let Some(model) = self.active_model() {
            check_separation(model, iteration, &hits)?;
            record.mean_ndcg_at_10 = evaluate(model, &test, self.k).mean_ndcg;
            record.model_id = Some(model.model_id.clone());
        }
        if let Some(baseline) = &self.baseline {
            check_separation(baseline, iteration, &hits)?;
            record.mean_ndcg_at_10_baseline = evaluate(baseline, &test, self.k).mean_ndcg;
        }

        self.pool.extend(featurized);
        let training: Vec<RankingGroup> = self.pool.iter().map(|(_, r)| r.clone()).collect();
        match train_lambdamart(&training, &self.params) {
            Ok(mut model) => {
                model.model_id = format!("adaptive-{iteration}");
                model.trained_on = self.pool.iter().map(|(l, _)| l.iteration).collect();
                model.trained_hits = hits_of(&self.pool.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>());
                record.trained_model_id = Some(model.model_id.clone());
                record.training_groups = model.training_groups;
                self.models.push(model);
                self.active = Some(self.models.len() - 1);
            }
            Err(LtrError::NoGradedSignal) => {}
            Err(e) => return Err(e.into()),
        }
        self.closed.insert(iteration);
        self.records.push(record.clone());
        Ok(record)
    }

    /// Evaluates every stored model on every later closed iteration:
    /// `(test_iteration, newest_training_iteration, mean NDCG)`.
    pub fn evaluation_matrix(&self) -> Vec<(u32, u32, Option<f64>)> {
        let mut out = Vec::new();
        for &t in &self.closed {
            let test: Vec<RankingGroup> =
                self.pool.iter().filter(|(l, _)| l.iteration == t).map(|(_, r)| r.clone()).collect();
            for m in &self.models {
                let Some(&upto) = m.trained_on.last() else { continue };
                if upto < t {
                    out.push((t, upto, evaluate(m, &test, self.k).mean_ndcg));
                }
            }
        }
        out
    }
}

/// One step of a worker's personal trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalPoint {
    pub iteration: u32,
    /// Candidate rows the personal model was trained on.
    pub training_instances: usize,
    /// Share of training rows the worker selected, in percent.
    pub positive_pct: f64,
    pub eval_groups: usize,
    pub personal_ndcg: Option<f64>,
    pub global_ndcg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalTrajectory {
    pub worker_id: String,
    pub first_iteration: u32,
    pub points: Vec<PersonalPoint>,
    /// Trained on every participated iteration.
    pub model: Option<RankerModel>,
}

/// Iterations in which the worker made selection decisions.
pub fn worker_iterations(events: &[UsageEvent], worker_id: &str) -> Vec<u32> {
    let set: BTreeSet<u32> = events
        .iter()
        .filter(|e| e.worker_id == worker_id && matches!(e.kind, EventKind::Select | EventKind::DoNotChange | EventKind::CustomEdit))
        .map(|e| e.iteration)
        .collect();
    set.into_iter().collect()
}

/// Trains a worker-specific ranker cumulatively: the first participated
/// iteration seeds the model, and each later one is scored with the model
/// trained on the worker's earlier iterations. `global` supplies the shared
/// model that served a given iteration, for comparison.
pub fn build_personal_model<'m>(
    events: &[UsageEvent],
    worker_id: &str,
    first_iteration: u32,
    featurizer: &impl Featurizer,
    params: &TrainParams,
    global: impl Fn(u32) -> Option<&'m RankerModel>,
) -> Result<PersonalTrajectory, AdaptiveError> {
    let iterations: Vec<u32> =
        worker_iterations(events, worker_id).into_iter().filter(|&t| t >= first_iteration).collect();
    if iterations.len() < 2 {
        return Err(AdaptiveError::InsufficientIterations { worker: worker_id.into(), found: iterations.len() });
    }
    let last = *iterations.last().expect("non-empty");
    let groups: Vec<(LabeledGroup, RankingGroup)> = build_personal_groups(events, worker_id, last)
        .into_iter()
        .filter(|l| l.iteration >= first_iteration)
        .filter_map(|l| featurizer.featurize(&l).map(|r| (l, r)))
        .collect();

    let train_upto = |bound: u32| -> (Result<RankerModel, LtrError>, usize, f64) {
        let train: Vec<RankingGroup> =
            groups.iter().filter(|(l, _)| l.iteration < bound).map(|(_, r)| r.clone()).collect();
        let rows: usize = train.iter().map(|g| g.items.len()).sum();
        let pos: u32 = train.iter().flat_map(|g| g.items.iter()).map(|i| i.relevance.min(1)).sum();
        let pct = if rows == 0 { 0.0 } else { 100.0 * pos as f64 / rows as f64 };
        let model = train_lambdamart(&train, params).map(|mut m| {
            m.role = ModelRole::Personal;
            m.worker_scope = Some(worker_id.into());
            m.model_id = format!("personal-{worker_id}-{}", bound - 1);
            m.trained_on = groups.iter().filter(|(l, _)| l.iteration < bound).map(|(l, _)| l.iteration).collect();
            m.trained_hits = groups.iter().filter(|(l, _)| l.iteration < bound).map(|(l, _)| l.hit_id.clone()).collect();
            m
        });
        (model, rows, pct)
    };

    let mut points = Vec::new();
    for &t in &iterations[1..] {
        let test: Vec<RankingGroup> = groups.iter().filter(|(l, _)| l.iteration == t).map(|(_, r)| r.clone()).collect();
        let (model, rows, pct) = train_upto(t);
        let personal = model.ok().and_then(|m| evaluate(&m, &test, params.ndcg_k).mean_ndcg);
        let global_ndcg = global(t).and_then(|m| evaluate(m, &test, params.ndcg_k).mean_ndcg);
        let eval_groups = test.iter().filter(|g| g.items.iter().any(|i| i.relevance > 0)).count();
        points.push(PersonalPoint { iteration: t, training_instances: rows, positive_pct: pct, eval_groups, personal_ndcg: personal, global_ndcg });
    }
    let model = train_upto(last + 1).0.ok();
    Ok(PersonalTrajectory { worker_id: worker_id.into(), first_iteration: iterations[0], points, model })
}
