//! End-to-end campaigns: fresh HITs per iteration, simulated workers
//! through the service API, an iteration close after each batch.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use par4sim_core::adaptive::{build_personal_model, EventKind, IterationRecord, PersonalTrajectory, UsageEvent};
use par4sim_core::features::NUM_FEATURES;
use par4sim_core::ltr::{RankedItem, RankingGroup, TrainParams};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::world::{CpEntry, World, WorldConfig};
use super::worker::{feature_scales, CrowdConfig, Decision, SimWorker, FIDELITY_PREFERENCE};
use crate::formats;
use crate::hit::Hit;
use crate::pipeline::{HitFeaturizer, Pipeline};
use crate::service::{LogicalClock, NewHit, Service};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub iterations: u32,
    pub hits_per_iteration: usize,
    pub cps_per_hit: usize,
    pub sentences_per_hit: usize,
    pub workers_per_hit: usize,
    pub submit_threshold: usize,
    pub world: WorldConfig,
    pub crowd: CrowdConfig,
    /// Population labeling the external baseline dataset; no baseline when
    /// absent.
    pub baseline_crowd: Option<CrowdConfig>,
    pub baseline_hits: usize,
    pub train: TrainParams,
    pub personalization_top_k: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            iterations: 9,
            hits_per_iteration: 12,
            cps_per_hit: 4,
            sentences_per_hit: 5,
            workers_per_hit: 10,
            submit_threshold: 3,
            world: WorldConfig::default(),
            crowd: CrowdConfig::default(),
            baseline_crowd: Some(CrowdConfig { base_weights: FIDELITY_PREFERENCE, ..CrowdConfig::default() }),
            baseline_hits: 20,
            train: TrainParams::default(),
            personalization_top_k: 10,
        }
    }
}

impl SimConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Everything a finished campaign leaves behind.
pub struct Campaign {
    pub service: Service,
    pub pipeline: Arc<Pipeline>,
    pub world: World,
    pub workers: Vec<SimWorker>,
    pub scales: [f64; NUM_FEATURES],
    pub records: Vec<IterationRecord>,
    pub served_lists: usize,
    pub contract_violations: Vec<String>,
    pub separation_violations: Vec<String>,
    pub hit_iterations: BTreeMap<String, u32>,
}

fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(purpose))
}

/// Served-list contract: at most `cap` entries, no duplicates, never the CP.
pub fn contract_violation(cp: &str, surfaces: &[String], cap: usize) -> Option<String> {
    if surfaces.len() > cap {
        return Some(format!("{cp}: {} candidates", surfaces.len()));
    }
    let mut seen = BTreeSet::new();
    for s in surfaces {
        let key = s.to_lowercase();
        if key == cp.to_lowercase() {
            return Some(format!("{cp}: contains the CP"));
        }
        if !seen.insert(key) {
            return Some(format!("{cp}: duplicate {s}"));
        }
    }
    None
}

fn essay_groups(
    world: &World,
    pipeline: &Pipeline,
    cfg: &SimConfig,
    seed: u64,
) -> Vec<(Hit, Vec<Vec<[f64; NUM_FEATURES]>>, Vec<Vec<String>>)> {
    let mut rng = stream(seed, 5);
    let mut out = Vec::new();
    let per_hit = cfg.cps_per_hit.max(1);
    let cps = World::schedule(&world.essay, cfg.baseline_hits * per_hit, &mut rng);
    for (h, chunk) in cps.chunks(per_hit).enumerate() {
        let hit = world.make_hit(&format!("essay-{h:03}"), 1, chunk, cfg.sentences_per_hit, &mut rng);
        let mut feats = Vec::new();
        let mut surfaces = Vec::new();
        for span in &hit.gold_spans {
            let served = pipeline.candidates(&hit, span).expect("generated spans are valid");
            feats.push(served.iter().map(|s| s.features.0).collect());
            surfaces.push(served.iter().map(|s| s.candidate.surface.clone()).collect());
        }
        out.push((hit, feats, surfaces));
    }
    out
}

/// Runs a campaign, writing the world, logs and curves under `out`.
pub fn run_campaign(cfg: &SimConfig, seed: u64, out: &Path) -> anyhow::Result<Campaign> {
    let world = World::generate(&cfg.world, seed);
    let mut service_cfg = world.write(&out.join("world"))?;
    service_cfg.train = cfg.train.clone();
    service_cfg.workers_per_hit = cfg.workers_per_hit as u32;
    service_cfg.submit_threshold = cfg.submit_threshold;
    service_cfg.max_sentences = service_cfg.max_sentences.max(cfg.sentences_per_hit);
    // Resources go through the file loaders, as a deployed service would.
    let pipeline = Arc::new(Pipeline::load(&service_cfg)?);

    let essays = essay_groups(&world, &pipeline, cfg, seed);
    let scales = feature_scales(essays.iter().flat_map(|(_, f, _)| f.iter().flatten()));

    let log_dir = out.join("log");
    for f in [crate::service::EVENTS_FILE, crate::service::HITS_FILE, crate::service::RECORDS_FILE] {
        let p = log_dir.join(f);
        if p.exists() {
            std::fs::remove_file(&p)?;
        }
    }
    let mut service = Service::new(service_cfg, pipeline.clone()).with_clock(LogicalClock::default());
    if let Some(crowd) = &cfg.baseline_crowd {
        let mut labelers = crowd.build(&scales, "essay", stream(seed, 6_u64).next_u64_seed());
        let mut rng = stream(seed, 7);
        let mut groups = Vec::new();
        for (hit, feats, surfaces) in &essays {
            for ((span, f), s) in hit.gold_spans.iter().zip(feats).zip(surfaces) {
                let mut counts = vec![0u32; f.len()];
                for i in sample(&mut rng, labelers.len(), cfg.workers_per_hit.min(labelers.len())).iter() {
                    if let Decision::Select(c) = labelers[i].choose(f) {
                        counts[c] += 1;
                    }
                }
                groups.push(RankingGroup {
                    query_id: format!("{}/{}/{}-{}", hit.hit_id, span.sentence_id, span.start, span.end),
                    items: f
                        .iter()
                        .zip(s)
                        .zip(counts)
                        .map(|((f, s), r)| RankedItem { features: par4sim_core::FeatureVector(*f), relevance: r, item_id: s.clone() })
                        .collect(),
                });
            }
        }
        let path = out.join("baseline.letor");
        formats::write_letor(&groups, formats::create(&path)?)?;
        service = service.with_baseline_letor(&path)?;
    }
    service.persist_to(&log_dir)?;

    let mut workers = cfg.crowd.build(&scales, "w", stream(seed, 1).next_u64_seed());
    let mut hit_rng = stream(seed, 2);
    let mut assign_rng = stream(seed, 3);
    let total_cps = cfg.iterations as usize * cfg.hits_per_iteration * cfg.cps_per_hit;
    let schedule: Vec<&CpEntry> = World::schedule(&world.campaign, total_cps, &mut hit_rng);
    let mut schedule = schedule.chunks(cfg.cps_per_hit.max(1));

    let mut served_lists = 0;
    let mut contract_violations = Vec::new();
    let mut separation_violations = Vec::new();
    let mut hit_iterations = BTreeMap::new();
    for t in 1..=cfg.iterations {
        let mut hits = Vec::new();
        for h in 0..cfg.hits_per_iteration {
            let cps = schedule.next().ok_or_else(|| anyhow::anyhow!("corpus exhausted"))?;
            let hit = world.make_hit(&format!("t{t}-h{h:02}"), t, cps, cfg.sentences_per_hit, &mut hit_rng);
            if hit_iterations.insert(hit.hit_id.clone(), t).is_some() {
                anyhow::bail!("HIT {} reused", hit.hit_id);
            }
            service
                .create_hit(NewHit {
                    hit_id: Some(hit.hit_id.clone()),
                    iteration: t,
                    sentences: hit.sentences.clone(),
                    spans: hit.gold_spans.clone(),
                    assigned_workers: Some(cfg.workers_per_hit as u32),
                })
                .map_err(|e| anyhow::anyhow!("create HIT: {e}"))?;
            hits.push(hit);
        }
        for hit in &hits {
            let mut chosen: Vec<usize> =
                sample(&mut assign_rng, workers.len(), cfg.workers_per_hit.min(workers.len())).into_vec();
            chosen.sort_unstable();
            for wi in chosen {
                let worker = &mut workers[wi];
                let mut replaced = 0;
                for span in &hit.gold_spans {
                    let resp = service
                        .candidates(&hit.hit_id, span, &worker.worker_id)
                        .map_err(|e| anyhow::anyhow!("candidates: {e}"))?;
                    served_lists += 1;
                    let surfaces: Vec<String> = resp.candidates.iter().map(|c| c.surface.clone()).collect();
                    if let Some(v) = contract_violation(&resp.cp_surface, &surfaces, service.config().cap) {
                        contract_violations.push(v);
                    }
                    let feats: Vec<[f64; NUM_FEATURES]> = resp.candidates.iter().map(|c| c.features).collect();
                    let base = UsageEvent::new(worker.worker_id.as_str(), hit.hit_id.as_str(), t, EventKind::DoNotChange)
                        .with_span(span.clone());
                    let mut event = match worker.choose(&feats) {
                        Decision::Select(i) => {
                            replaced += 1;
                            let mut e = base.with_choice(surfaces[i].clone());
                            e.kind = EventKind::Select;
                            e
                        }
                        Decision::DoNotChange => base,
                    };
                    event.snapshot_id = Some(resp.snapshot_id);
                    service.record_event(event).map_err(|e| anyhow::anyhow!("event: {e}"))?;
                }
                let mut submit = UsageEvent::new(worker.worker_id.as_str(), hit.hit_id.as_str(), t, EventKind::Submit);
                if replaced < cfg.submit_threshold {
                    submit.comment = Some("nothing else needed simplifying".into());
                }
                service.record_event(submit).map_err(|e| anyhow::anyhow!("submit: {e}"))?;
            }
        }
        let record = service.close_iteration(t).map_err(|e| anyhow::anyhow!("close {t}: {e}"))?;
        if let Some(id) = &record.model_id {
            let current: BTreeSet<&String> = hits.iter().map(|h| &h.hit_id).collect();
            service.with_loop(|lp| {
                for m in lp.models().iter().filter(|m| &m.model_id == id) {
                    if m.trained_on.contains(&t) || m.trained_hits.iter().any(|h| current.contains(h)) {
                        separation_violations.push(format!("{id} evaluated on iteration {t}"));
                    }
                }
            });
        }
    }

    let records = service.records();
    formats::write_curve_csv(&records, formats::create(&out.join("curve.csv"))?)?;
    let mut matrix = formats::create(&out.join("matrix.csv"))?;
    writeln!(matrix, "iteration,trained_through,adaptive")?;
    for (t, upto, v) in service.evaluation_matrix() {
        writeln!(matrix, "{t},{upto},{}", v.map(|x| format!("{:.4}", 100.0 * x)).unwrap_or_default())?;
    }
    matrix.flush()?;

    Ok(Campaign {
        service,
        pipeline,
        world,
        workers,
        scales,
        records,
        served_lists,
        contract_violations,
        separation_violations,
        hit_iterations,
    })
}

trait SeedFrom {
    fn next_u64_seed(self) -> u64;
}

impl SeedFrom for ChaCha8Rng {
    fn next_u64_seed(mut self) -> u64 {
        rand::Rng::random(&mut self)
    }
}

/// One worker's personal-versus-global comparison.
#[derive(Debug, Clone)]
pub struct PersonalResult {
    pub worker_id: String,
    pub selections: usize,
    pub trajectory: PersonalTrajectory,
    /// Means over trajectory points where both models were scored.
    pub mean_personal: Option<f64>,
    pub mean_global: Option<f64>,
}

impl PersonalResult {
    pub fn personal_wins(&self) -> bool {
        matches!((self.mean_personal, self.mean_global), (Some(p), Some(g)) if p > g)
    }
}

/// Per-worker cumulative retraining for the `top_k` most productive
/// workers (by number of selections), compared against the global model
/// that served each iteration.
pub fn run_personalization(campaign: &Campaign, top_k: usize, params: &TrainParams) -> anyhow::Result<Vec<PersonalResult>> {
    let events = campaign.service.events();
    let mut selections: BTreeMap<String, usize> = BTreeMap::new();
    let mut iterations: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    for e in &events {
        if e.kind == EventKind::Select {
            *selections.entry(e.worker_id.clone()).or_default() += 1;
        }
        if matches!(e.kind, EventKind::Select | EventKind::DoNotChange) {
            iterations.entry(e.worker_id.clone()).or_default().insert(e.iteration);
        }
    }
    let mut ranked: Vec<(String, usize)> =
        selections.into_iter().filter(|(w, _)| iterations.get(w).is_some_and(|i| i.len() >= 2)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if ranked.len() < top_k {
        anyhow::bail!("only {} workers participated in two or more iterations; {top_k} requested", ranked.len());
    }
    let hits: BTreeMap<String, Hit> = campaign.service.hits().into_iter().map(|h| (h.hit_id.clone(), h)).collect();
    let featurizer = HitFeaturizer { pipeline: &campaign.pipeline, hits: &hits };
    campaign.service.with_loop(|lp| {
        ranked
            .into_iter()
            .take(top_k)
            .map(|(w, n)| {
                let trajectory = build_personal_model(&events, &w, 1, &featurizer, params, |t| lp.model_for_iteration(t))?;
                let both: Vec<(f64, f64)> =
                    trajectory.points.iter().filter_map(|p| Some((p.personal_ndcg?, p.global_ndcg?))).collect();
                let mean = |f: fn(&(f64, f64)) -> f64| {
                    (!both.is_empty()).then(|| both.iter().map(f).sum::<f64>() / both.len() as f64)
                };
                Ok(PersonalResult {
                    worker_id: w,
                    selections: n,
                    mean_personal: mean(|p| p.0),
                    mean_global: mean(|p| p.1),
                    trajectory,
                })
            })
            .collect()
    })
}

pub const PERSONAL_HEADER: &str = "worker,iteration,instances,positive_pct,personal,global";

pub fn write_personal_csv<W: Write>(results: &[PersonalResult], mut w: W) -> std::io::Result<()> {
    let pct = |v: Option<f64>| v.map(|x| format!("{:.4}", 100.0 * x)).unwrap_or_default();
    writeln!(w, "{PERSONAL_HEADER}")?;
    for r in results {
        for p in &r.trajectory.points {
            writeln!(
                w,
                "{},{},{},{:.2},{},{}",
                r.worker_id,
                p.iteration,
                p.training_instances,
                p.positive_pct,
                pct(p.personal_ndcg),
                pct(p.global_ndcg)
            )?;
        }
    }
    w.flush()
}
