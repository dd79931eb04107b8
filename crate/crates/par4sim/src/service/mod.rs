//! The service: HIT catalog, served snapshots, event intake, iteration
//! control and metrics. [`Service`] is the in-process API; [`http`] wraps it
//! in REST endpoints.

pub mod http;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use par4sim_core::adaptive::{
    build_personal_model, replaced_span_count, worker_iterations, AdaptiveError, AdaptiveLoop, EventError, EventKind,
    EventLog, IterationRecord, SpanRef, UsageEvent,
};
use par4sim_core::features::NUM_FEATURES;
use par4sim_core::ltr::{train_lambdamart, ModelRole, RankerModel};
use par4sim_core::resources::Source;
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::formats::{self, JsonlWriter};
use crate::hit::{Hit, Sentence};
use crate::pipeline::{HitFeaturizer, Pipeline};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const HITS_FILE: &str = "hits.jsonl";
pub const RECORDS_FILE: &str = "records.jsonl";

/// Millisecond timestamps for events.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }
}

/// Ticks once per reading; keeps simulated logs reproducible.
#[derive(Default)]
pub struct LogicalClock(AtomicU64);

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.0.fetch_add(1, Ordering::Relaxed) + 1
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl From<EventError> for ServiceError {
    fn from(e: EventError) -> Self {
        match e {
            EventError::IterationClosed(_) => ServiceError::Conflict(e.to_string()),
            _ => ServiceError::BadRequest(e.to_string()),
        }
    }
}

impl From<formats::FormatError> for ServiceError {
    fn from(e: formats::FormatError) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ServiceError>;

/// A HIT submission.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewHit {
    #[serde(default)]
    pub hit_id: Option<String>,
    pub iteration: u32,
    pub sentences: Vec<Sentence>,
    #[serde(default)]
    pub spans: Vec<SpanRef>,
    #[serde(default)]
    pub assigned_workers: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitView {
    pub hit_id: String,
    pub iteration: u32,
    pub sentences: Vec<Sentence>,
    pub gold_spans: Vec<SpanRef>,
    /// Spans this worker added.
    pub added_spans: Vec<SpanRef>,
    pub assigned_workers: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServedCandidate {
    pub surface: String,
    pub sources: BTreeSet<Source>,
    pub lm_logprob: f64,
    pub model_score: f64,
    /// Raw (unscaled) features.
    pub features: [f64; NUM_FEATURES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResponse {
    pub hit_id: String,
    pub span: SpanRef,
    pub cp_surface: String,
    pub snapshot_id: String,
    /// Model that ordered the list; absent when the LM order is served.
    pub model_id: Option<String>,
    pub candidates: Vec<ServedCandidate>,
}

#[derive(Debug, Clone)]
struct Snapshot {
    worker_id: String,
    hit_id: String,
    span: SpanRef,
    surfaces: Vec<String>,
}

type WorkerSpan = (String, String, SpanRef);

#[derive(Default)]
struct State {
    hits: BTreeMap<String, Hit>,
    log: EventLog,
    events_sink: Option<JsonlWriter>,
    hits_sink: Option<JsonlWriter>,
    records_sink: Option<JsonlWriter>,
    snapshots: BTreeMap<String, Snapshot>,
    latest: BTreeMap<WorkerSpan, String>,
    added: BTreeMap<(String, String), Vec<SpanRef>>,
    next_snapshot: u64,
    closing: Option<u32>,
    closed: BTreeSet<u32>,
}

/// Models serving requests; replaced as a whole on every close.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    pub global: Option<RankerModel>,
    pub personal: BTreeMap<String, RankerModel>,
}

pub struct Service {
    config: ServiceConfig,
    pipeline: Arc<Pipeline>,
    state: Mutex<State>,
    models: RwLock<Arc<ModelSet>>,
    adaptive: Mutex<AdaptiveLoop>,
    clock: Box<dyn Clock>,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service").field("config", &self.config).finish_non_exhaustive()
    }
}

fn internal(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Internal(e.to_string())
}

impl Service {
    /// An in-memory service with no persistence.
    pub fn new(config: ServiceConfig, pipeline: Arc<Pipeline>) -> Self {
        let adaptive = AdaptiveLoop::new(config.train.clone());
        Self {
            config,
            pipeline,
            state: Mutex::new(State::default()),
            models: RwLock::new(Arc::new(ModelSet::default())),
            adaptive: Mutex::new(adaptive),
            clock: Box::new(SystemClock),
        }
    }

    pub fn with_clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    /// Trains the generic baseline from a LETOR file and evaluates it next to
    /// the adaptive model at every close.
    pub fn with_baseline_letor(self, path: &Path) -> anyhow::Result<Self> {
        let groups = formats::read_letor(formats::open(path)?)?;
        let mut model = train_lambdamart(&groups, &self.config.train)?;
        model.model_id = "baseline".into();
        model.role = ModelRole::Baseline;
        self.set_baseline(model);
        Ok(self)
    }

    pub fn set_baseline(&self, model: RankerModel) {
        self.adaptive.lock().expect("adaptive lock").set_baseline(model);
    }

    /// Builds a service from config, loading resources, the baseline and any
    /// persisted state under `data_dir` (closed iterations are retrained
    /// deterministically from the log).
    pub fn open(config: ServiceConfig) -> anyhow::Result<Self> {
        let pipeline = Arc::new(Pipeline::load(&config)?);
        let baseline = config.baseline_letor.clone();
        let mut svc = Self::new(config, pipeline);
        if let Some(p) = baseline {
            svc = svc.with_baseline_letor(&p)?;
        }
        if let Some(dir) = svc.config.data_dir.clone() {
            svc.restore(&dir)?;
        }
        Ok(svc)
    }

    fn restore(&self, dir: &Path) -> anyhow::Result<()> {
        let read = |name: &str| -> anyhow::Result<Option<std::io::BufReader<std::fs::File>>> {
            let p = dir.join(name);
            Ok(if p.exists() { Some(formats::open(&p)?) } else { None })
        };
        let hits: Vec<Hit> = read(HITS_FILE)?.map(formats::read_jsonl).transpose()?.unwrap_or_default();
        let events: Vec<UsageEvent> = read(EVENTS_FILE)?.map(formats::read_events).transpose()?.unwrap_or_default();
        let records: Vec<IterationRecord> = read(RECORDS_FILE)?.map(formats::read_jsonl).transpose()?.unwrap_or_default();
        {
            let mut st = self.state.lock().expect("state lock");
            for h in hits {
                st.hits.insert(h.hit_id.clone(), h);
            }
            for e in &events {
                let key = (e.worker_id.clone(), e.hit_id.clone());
                match (&e.kind, &e.span) {
                    (EventKind::AddCp, Some(span)) => {
                        let added = st.added.entry(key).or_default();
                        if !added.contains(span) {
                            added.push(span.clone());
                        }
                    }
                    (EventKind::Reload, _) => {
                        st.added.remove(&key);
                    }
                    _ => {}
                }
            }
            st.log = EventLog::from_events(events, std::iter::empty());
        }
        for r in records {
            self.close_inner(r.iteration, false)?;
        }
        self.persist_to(dir)?;
        Ok(())
    }

    /// Appends HITs, events and iteration records to JSON-lines files
    /// under `dir` from now on.
    pub fn persist_to(&self, dir: &Path) -> std::result::Result<(), formats::FormatError> {
        let mut st = self.state.lock().expect("state lock");
        st.events_sink = Some(JsonlWriter::append(&dir.join(EVENTS_FILE))?);
        st.hits_sink = Some(JsonlWriter::append(&dir.join(HITS_FILE))?);
        st.records_sink = Some(JsonlWriter::append(&dir.join(RECORDS_FILE))?);
        Ok(())
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    fn iteration_open(st: &State, iteration: u32) -> Result<()> {
        if st.closed.contains(&iteration) {
            return Err(ServiceError::Conflict(format!("iteration {iteration} is closed")));
        }
        if st.closing == Some(iteration) {
            return Err(ServiceError::Conflict(format!("iteration {iteration} is closing; retry")));
        }
        Ok(())
    }

    pub fn create_hit(&self, new: NewHit) -> Result<HitView> {
        let mut st = self.state.lock().expect("state lock");
        Self::iteration_open(&st, new.iteration)?;
        let hit_id = new.hit_id.unwrap_or_else(|| format!("hit-{}", st.hits.len() + 1));
        if st.hits.contains_key(&hit_id) {
            return Err(ServiceError::Conflict(format!("HIT {hit_id} exists")));
        }
        let hit = Hit {
            hit_id: hit_id.clone(),
            iteration: new.iteration,
            sentences: new.sentences,
            gold_spans: new.spans,
            assigned_workers: new.assigned_workers.unwrap_or(self.config.workers_per_hit),
        };
        hit.validate(self.config.min_sentences, self.config.max_sentences)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        if let Some(sink) = st.hits_sink.as_mut() {
            sink.write(&hit)?;
        }
        let view = Self::view(&hit, &[]);
        st.hits.insert(hit_id, hit);
        Ok(view)
    }

    fn view(hit: &Hit, added: &[SpanRef]) -> HitView {
        HitView {
            hit_id: hit.hit_id.clone(),
            iteration: hit.iteration,
            sentences: hit.sentences.clone(),
            gold_spans: hit.gold_spans.clone(),
            added_spans: added.to_vec(),
            assigned_workers: hit.assigned_workers,
        }
    }

    pub fn get_hit(&self, hit_id: &str, worker_id: Option<&str>) -> Result<HitView> {
        let st = self.state.lock().expect("state lock");
        let hit = st.hits.get(hit_id).ok_or_else(|| ServiceError::NotFound(format!("unknown HIT {hit_id}")))?;
        let added = worker_id
            .and_then(|w| st.added.get(&(w.to_string(), hit_id.to_string())))
            .map_or(&[][..], Vec::as_slice);
        Ok(Self::view(hit, added))
    }

    pub fn hits(&self) -> Vec<Hit> {
        self.state.lock().expect("state lock").hits.values().cloned().collect()
    }

    fn span_known(st: &State, hit: &Hit, worker_id: &str, span: &SpanRef) -> bool {
        hit.is_gold(span)
            || st.added.get(&(worker_id.to_string(), hit.hit_id.clone())).is_some_and(|a| a.contains(span))
    }

    /// Ranked candidates for a span, recorded as a snapshot for `worker_id`.
    pub fn candidates(&self, hit_id: &str, span: &SpanRef, worker_id: &str) -> Result<CandidateResponse> {
        if worker_id.is_empty() {
            return Err(ServiceError::BadRequest("missing worker id".into()));
        }
        let hit = {
            let st = self.state.lock().expect("state lock");
            let hit = st.hits.get(hit_id).ok_or_else(|| ServiceError::NotFound(format!("unknown HIT {hit_id}")))?;
            if !Self::span_known(&st, hit, worker_id, span) {
                return Err(ServiceError::NotFound("unknown span".into()));
            }
            hit.clone()
        };
        let cp_surface = hit.span_text(span).map_err(|e| ServiceError::NotFound(e.to_string()))?.to_string();
        let served = self.pipeline.candidates(&hit, span).map_err(internal)?;

        // One read of the model set serves the whole request.
        let models = self.models.read().expect("model lock").clone();
        let model = self
            .config
            .personalization
            .then(|| models.personal.get(worker_id))
            .flatten()
            .or(models.global.as_ref());
        let mut list: Vec<ServedCandidate> = served
            .iter()
            .map(|s| ServedCandidate {
                surface: s.candidate.surface.clone(),
                sources: s.candidate.sources.clone(),
                lm_logprob: s.candidate.lm_logprob,
                model_score: model.map_or(0.0, |m| m.score(&s.features)),
                features: s.features.0,
            })
            .collect();
        if model.is_some() {
            // Stable sort keeps LM order among equal scores.
            list.sort_by(|a, b| b.model_score.total_cmp(&a.model_score));
        }

        let mut st = self.state.lock().expect("state lock");
        st.next_snapshot += 1;
        let snapshot_id = format!("snap-{}", st.next_snapshot);
        st.snapshots.insert(
            snapshot_id.clone(),
            Snapshot {
                worker_id: worker_id.into(),
                hit_id: hit_id.into(),
                span: span.clone(),
                surfaces: list.iter().map(|c| c.surface.clone()).collect(),
            },
        );
        st.latest.insert((worker_id.into(), hit_id.into(), span.clone()), snapshot_id.clone());
        Ok(CandidateResponse {
            hit_id: hit_id.into(),
            span: span.clone(),
            cp_surface,
            snapshot_id,
            model_id: model.map(|m| m.model_id.clone()),
            candidates: list,
        })
    }

    /// Validates, persists and appends a usage event. Missing iteration,
    /// CP surface and snapshot contents are filled from the HIT and the
    /// echoed snapshot.
    pub fn record_event(&self, mut event: UsageEvent) -> Result<u64> {
        let mut st = self.state.lock().expect("state lock");
        let hit = st
            .hits
            .get(&event.hit_id)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown HIT {}", event.hit_id)))?
            .clone();
        if event.iteration == 0 {
            event.iteration = hit.iteration;
        }
        if event.iteration != hit.iteration {
            return Err(ServiceError::BadRequest(format!(
                "HIT {} belongs to iteration {}, not {}",
                hit.hit_id, hit.iteration, event.iteration
            )));
        }
        Self::iteration_open(&st, event.iteration)?;
        if event.worker_id.is_empty() {
            return Err(ServiceError::BadRequest("missing worker id".into()));
        }

        if let Some(span) = event.span.clone() {
            let text = hit.span_text(&span).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            if event.cp_surface.is_none() {
                event.cp_surface = Some(text.to_string());
            }
            if event.kind != EventKind::AddCp && !Self::span_known(&st, &hit, &event.worker_id, &span) {
                return Err(ServiceError::BadRequest("unknown span".into()));
            }
        }
        match event.kind {
            EventKind::Select | EventKind::DoNotChange => {
                let id = event
                    .snapshot_id
                    .clone()
                    .ok_or_else(|| ServiceError::BadRequest(format!("{:?} requires a snapshot_id", event.kind)))?;
                let stale = || ServiceError::Conflict(format!("stale snapshot {id}"));
                let snap = st.snapshots.get(&id).ok_or_else(stale)?;
                let key = (event.worker_id.clone(), event.hit_id.clone(), snap.span.clone());
                if snap.worker_id != event.worker_id
                    || snap.hit_id != event.hit_id
                    || Some(&snap.span) != event.span.as_ref()
                    || st.latest.get(&key) != Some(&id)
                {
                    return Err(stale());
                }
                if event.snapshot.is_empty() {
                    event.snapshot = snap.surfaces.clone();
                } else if event.snapshot != snap.surfaces {
                    return Err(ServiceError::Conflict(format!("snapshot does not match {id}")));
                }
            }
            EventKind::Submit => {
                let replaced = replaced_span_count(st.log.events(), &event.worker_id, &event.hit_id);
                let commented = event.comment.as_deref().is_some_and(|c| !c.trim().is_empty());
                if replaced < self.config.submit_threshold && !commented {
                    return Err(ServiceError::Conflict(format!(
                        "submit gate: {replaced} of {} replacements",
                        self.config.submit_threshold
                    )));
                }
            }
            _ => {}
        }

        let event = st.log.prepare(event, self.clock.now_ms())?;
        if let Some(sink) = st.events_sink.as_mut() {
            sink.write(&event)?;
        }
        let id = event.event_id;
        let key = (event.worker_id.clone(), event.hit_id.clone());
        match event.kind {
            EventKind::AddCp => {
                let span = event.span.clone().expect("validated");
                if !hit.is_gold(&span) {
                    let added = st.added.entry(key).or_default();
                    if !added.contains(&span) {
                        added.push(span);
                    }
                }
            }
            EventKind::Reload => {
                st.added.remove(&key);
            }
            _ => {}
        }
        st.log.commit(event);
        Ok(id)
    }

    pub fn events(&self) -> Vec<UsageEvent> {
        self.state.lock().expect("state lock").log.events().to_vec()
    }

    /// Evaluates the serving model on iteration `t`, retrains on everything
    /// up to `t` and swaps the new model in. Event intake for `t` answers
    /// 409 while this runs.
    pub fn close_iteration(&self, iteration: u32) -> Result<IterationRecord> {
        self.close_inner(iteration, true)
    }

    fn close_inner(&self, iteration: u32, persist: bool) -> Result<IterationRecord> {
        let (events, hits) = {
            let mut st = self.state.lock().expect("state lock");
            if st.closed.contains(&iteration) {
                return Err(ServiceError::Conflict(format!("iteration {iteration} is already closed")));
            }
            if let Some(t) = st.closing {
                return Err(ServiceError::Conflict(format!("iteration {t} is closing")));
            }
            st.closing = Some(iteration);
            (st.log.events().to_vec(), st.hits.clone())
        };
        let outcome = self.retrain(iteration, &events, &hits);
        let mut st = self.state.lock().expect("state lock");
        st.closing = None;
        let (record, models) = outcome?;
        *self.models.write().expect("model lock") = Arc::new(models);
        st.closed.insert(iteration);
        st.log.close(iteration);
        if persist {
            if let Some(sink) = st.records_sink.as_mut() {
                sink.write(&record)?;
            }
        }
        Ok(record)
    }

    fn retrain(
        &self,
        iteration: u32,
        events: &[UsageEvent],
        hits: &BTreeMap<String, Hit>,
    ) -> Result<(IterationRecord, ModelSet)> {
        let featurizer = HitFeaturizer { pipeline: &self.pipeline, hits };
        let mut lp = self.adaptive.lock().expect("adaptive lock");
        let record = lp.close_iteration(iteration, events, &featurizer).map_err(|e| match e {
            AdaptiveError::AlreadyClosed(_) | AdaptiveError::OutOfOrder { .. } | AdaptiveError::NoGroups(_) => {
                ServiceError::Conflict(e.to_string())
            }
            _ => internal(e),
        })?;
        let mut personal = BTreeMap::new();
        if self.config.personalization {
            let workers: BTreeSet<&str> = events.iter().map(|e| e.worker_id.as_str()).collect();
            for w in workers {
                if worker_iterations(events, w).iter().filter(|&&t| t <= iteration).count() < 2 {
                    continue;
                }
                let within: Vec<UsageEvent> = events.iter().filter(|e| e.iteration <= iteration).cloned().collect();
                if let Ok(traj) = build_personal_model(&within, w, 1, &featurizer, &self.config.train, |_| None) {
                    if let Some(m) = traj.model {
                        personal.insert(w.to_string(), m);
                    }
                }
            }
        }
        let models = ModelSet { global: lp.active_model().cloned(), personal };
        Ok((record, models))
    }

    pub fn records(&self) -> Vec<IterationRecord> {
        self.adaptive.lock().expect("adaptive lock").records().to_vec()
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = Vec::new();
        formats::write_curve_csv(&self.records(), &mut out).expect("writing to memory");
        String::from_utf8(out).expect("ascii csv")
    }

    /// Every stored adaptive model evaluated on every later iteration.
    pub fn evaluation_matrix(&self) -> Vec<(u32, u32, Option<f64>)> {
        self.adaptive.lock().expect("adaptive lock").evaluation_matrix()
    }

    pub fn models(&self) -> Arc<ModelSet> {
        self.models.read().expect("model lock").clone()
    }

    /// The adaptive loop, for offline analyses over the closed iterations.
    pub fn with_loop<T>(&self, f: impl FnOnce(&AdaptiveLoop) -> T) -> T {
        f(&self.adaptive.lock().expect("adaptive lock"))
    }
}
