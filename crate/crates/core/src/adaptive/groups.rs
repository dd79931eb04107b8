//! Turning the usage log into graded ranking groups.
//!
//! Each worker's events on a span are replayed in id order (undo/redo move
//! a cursor over their action history, reload clears the HIT) and only the
//! final choice counts. A candidate's relevance is the number of distinct
//! workers whose final choice is that candidate.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::events::{EventKind, SpanRef, UsageEvent};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledItem {
    pub surface: String,
    pub relevance: u32,
}

/// Worker judgments for one CP occurrence, before feature extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledGroup {
    pub hit_id: String,
    pub iteration: u32,
    pub span: SpanRef,
    pub cp_surface: String,
    /// Shown candidates, first-served order.
    pub items: Vec<LabeledItem>,
    /// Workers who acted on the span.
    pub participants: u32,
    pub first_event_id: u64,
}

impl LabeledGroup {
    pub fn query_id(&self) -> String {
        format!("{}/{}/{}-{}", self.hit_id, self.span.sentence_id, self.span.start, self.span.end)
    }

    pub fn is_all_zero(&self) -> bool {
        self.items.iter().all(|i| i.relevance == 0)
    }

    /// Two or more distinct relevance levels.
    pub fn is_trainable(&self) -> bool {
        let levels: BTreeSet<u32> = self.items.iter().map(|i| i.relevance).collect();
        levels.len() >= 2
    }

    pub fn relevance_of(&self, surface: &str) -> u32 {
        let key = surface.to_lowercase();
        self.items.iter().find(|i| i.surface.to_lowercase() == key).map_or(0, |i| i.relevance)
    }

    pub fn positives(&self) -> u32 {
        self.items.iter().map(|i| i.relevance).sum()
    }
}

#[derive(Debug, Clone)]
enum Choice {
    Keep,
    Pick(String),
    Custom(String),
}

#[derive(Debug, Clone, Default)]
struct Replay {
    history: Vec<Choice>,
    cursor: usize,
}

impl Replay {
    fn act(&mut self, c: Choice) {
        self.history.truncate(self.cursor);
        self.history.push(c);
        self.cursor = self.history.len();
    }

    fn undo(&mut self) {
        self.cursor = self.cursor.saturating_sub(1);
    }

    fn redo(&mut self) {
        self.cursor = (self.cursor + 1).min(self.history.len());
    }

    fn current(&self) -> Option<&Choice> {
        self.cursor.checked_sub(1).map(|i| &self.history[i])
    }
}

struct SpanAccum {
    first_event_id: u64,
    iteration: u32,
    cp_surface: Option<String>,
    items: Vec<String>,
    keys: BTreeSet<String>,
    replays: BTreeMap<String, Replay>,
}

type SpanKey = (String, SpanRef);

/// Builds one group per (HIT, span) from events of iterations `≤ max_iteration`.
///
/// Groups are ordered by the id of their first event. All-zero groups are
/// kept; callers decide whether to train or evaluate on them.
pub fn build_training_groups(events: &[UsageEvent], max_iteration: u32) -> Vec<LabeledGroup> {
    build(events.iter().filter(|e| e.iteration <= max_iteration))
}

/// Groups from a single worker's events: relevance 1 for the worker's final
/// choice, 0 for every other shown candidate.
pub fn build_personal_groups(events: &[UsageEvent], worker_id: &str, max_iteration: u32) -> Vec<LabeledGroup> {
    build(events.iter().filter(|e| e.iteration <= max_iteration && e.worker_id == worker_id))
}

fn build<'a>(events: impl Iterator<Item = &'a UsageEvent>) -> Vec<LabeledGroup> {
    let mut events: Vec<&UsageEvent> = events.collect();
    events.sort_by_key(|e| e.event_id);

    let mut spans: BTreeMap<SpanKey, SpanAccum> = BTreeMap::new();
    for e in events {
        if e.kind == EventKind::Reload {
            for ((hit, _), acc) in spans.iter_mut() {
                if *hit == e.hit_id {
                    acc.replays.remove(&e.worker_id);
                }
            }
            continue;
        }
        let Some(span) = &e.span else { continue };
        if matches!(e.kind, EventKind::Submit | EventKind::AddCp) {
            continue;
        }
        let acc = spans.entry((e.hit_id.clone(), span.clone())).or_insert_with(|| SpanAccum {
            first_event_id: e.event_id,
            iteration: e.iteration,
            cp_surface: None,
            items: Vec::new(),
            keys: BTreeSet::new(),
            replays: BTreeMap::new(),
        });
        if acc.cp_surface.is_none() {
            acc.cp_surface = e.cp_surface.clone();
        }
        for s in &e.snapshot {
            if acc.keys.insert(s.to_lowercase()) {
                acc.items.push(s.clone());
            }
        }
        let replay = acc.replays.entry(e.worker_id.clone()).or_default();
        match e.kind {
            EventKind::Select => {
                if let Some(c) = &e.chosen_surface {
                    replay.act(Choice::Pick(c.clone()));
                }
            }
            EventKind::DoNotChange => replay.act(Choice::Keep),
            EventKind::CustomEdit => {
                if let Some(c) = &e.chosen_surface {
                    replay.act(Choice::Custom(c.clone()));
                }
            }
            EventKind::Undo => replay.undo(),
            EventKind::Redo => replay.redo(),
            EventKind::AddCp | EventKind::Reload | EventKind::Submit => {}
        }
    }

    let mut groups: Vec<LabeledGroup> = spans
        .into_iter()
        .filter(|(_, acc)| !acc.items.is_empty())
        .map(|((hit_id, span), acc)| {
            let mut counts = alloc::vec![0u32; acc.items.len()];
            let lower: Vec<String> = acc.items.iter().map(|s| s.to_lowercase()).collect();
            for replay in acc.replays.values() {
                let chosen = match replay.current() {
                    Some(Choice::Pick(s)) | Some(Choice::Custom(s)) => s.to_lowercase(),
                    _ => continue,
                };
                if let Some(i) = lower.iter().position(|s| *s == chosen) {
                    counts[i] += 1;
                }
            }
            LabeledGroup {
                hit_id,
                iteration: acc.iteration,
                cp_surface: acc.cp_surface.unwrap_or_default(),
                span,
                items: acc.items.into_iter().zip(counts).map(|(surface, relevance)| LabeledItem { surface, relevance }).collect(),
                participants: acc.replays.len() as u32,
                first_event_id: acc.first_event_id,
            }
        })
        .collect();
    groups.sort_by_key(|g| g.first_event_id);
    groups
}

/// Spans of `hit_id` whose current state, after replaying `worker_id`'s
/// events, is a replacement (a selected or typed candidate).
pub fn replaced_span_count(events: &[UsageEvent], worker_id: &str, hit_id: &str) -> usize {
    let mut replays: BTreeMap<SpanRef, Replay> = BTreeMap::new();
    let mut events: Vec<&UsageEvent> = events.iter().filter(|e| e.worker_id == worker_id && e.hit_id == hit_id).collect();
    events.sort_by_key(|e| e.event_id);
    for e in events {
        if e.kind == EventKind::Reload {
            replays.clear();
            continue;
        }
        let Some(span) = &e.span else { continue };
        let replay = replays.entry(span.clone()).or_default();
        match (e.kind, &e.chosen_surface) {
            (EventKind::Select, Some(c)) => replay.act(Choice::Pick(c.clone())),
            (EventKind::CustomEdit, Some(c)) => replay.act(Choice::Custom(c.clone())),
            (EventKind::DoNotChange, _) => replay.act(Choice::Keep),
            (EventKind::Undo, _) => replay.undo(),
            (EventKind::Redo, _) => replay.redo(),
            _ => {}
        }
    }
    replays.values().filter(|r| matches!(r.current(), Some(Choice::Pick(_)) | Some(Choice::Custom(_)))).count()
}
