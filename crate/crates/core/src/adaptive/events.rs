use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Current version of the [`UsageEvent`] schema.
pub const EVENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Select,
    DoNotChange,
    CustomEdit,
    AddCp,
    Undo,
    Redo,
    Reload,
    Submit,
}

impl EventKind {
    /// Kinds that address one CP span.
    pub fn needs_span(self) -> bool {
        !matches!(self, EventKind::Reload | EventKind::Submit)
    }

    /// Kinds that replace the CP text.
    pub fn is_replacement(self) -> bool {
        matches!(self, EventKind::Select | EventKind::CustomEdit)
    }
}

/// A CP span: byte offsets within one sentence of a HIT.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpanRef {
    pub sentence_id: String,
    pub start: usize,
    pub end: usize,
}

/// One append-only record of a worker action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageEvent {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub event_id: u64,
    pub timestamp_ms: u64,
    pub worker_id: String,
    pub hit_id: String,
    pub iteration: u32,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<SpanRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_surface: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_surface: Option<String>,
    /// Candidate surfaces shown, in served order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

fn schema_version() -> u32 {
    EVENT_SCHEMA_VERSION
}

impl UsageEvent {
    /// A bare event of `kind`; ids and timestamps are assigned on append.
    pub fn new(worker_id: impl Into<String>, hit_id: impl Into<String>, iteration: u32, kind: EventKind) -> Self {
        Self {
            schema_version: EVENT_SCHEMA_VERSION,
            event_id: 0,
            timestamp_ms: 0,
            worker_id: worker_id.into(),
            hit_id: hit_id.into(),
            iteration,
            kind,
            span: None,
            cp_surface: None,
            chosen_surface: None,
            snapshot: Vec::new(),
            snapshot_id: None,
            comment: None,
        }
    }

    pub fn with_span(mut self, span: SpanRef) -> Self {
        self.span = Some(span);
        self
    }

    pub fn with_snapshot(mut self, snapshot: Vec<String>) -> Self {
        self.snapshot = snapshot;
        self
    }

    pub fn with_choice(mut self, chosen: impl Into<String>) -> Self {
        self.chosen_surface = Some(chosen.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EventError {
    #[error("iteration {0} is closed")]
    IterationClosed(u32),
    #[error("iteration must be at least 1")]
    InvalidIteration,
    #[error("selected surface {0:?} is not in the served snapshot")]
    NotInSnapshot(String),
    #[error("{0:?} events require a span")]
    MissingSpan(EventKind),
    #[error("{0:?} events require a chosen surface")]
    MissingChoice(EventKind),
    #[error("empty worker or HIT id")]
    MissingIdentity,
}

/// Checks an event's own invariants, independent of log state.
pub fn validate_event(e: &UsageEvent) -> Result<(), EventError> {
    if e.iteration == 0 {
        return Err(EventError::InvalidIteration);
    }
    if e.worker_id.is_empty() || e.hit_id.is_empty() {
        return Err(EventError::MissingIdentity);
    }
    if e.kind.needs_span() && e.span.is_none() {
        return Err(EventError::MissingSpan(e.kind));
    }
    match e.kind {
        EventKind::Select => {
            let chosen = e.chosen_surface.as_ref().ok_or(EventError::MissingChoice(e.kind))?;
            if !e.snapshot.iter().any(|s| s == chosen) {
                return Err(EventError::NotInSnapshot(chosen.clone()));
            }
        }
        EventKind::CustomEdit if e.chosen_surface.is_none() => return Err(EventError::MissingChoice(e.kind)),
        _ => {}
    }
    Ok(())
}

/// In-memory append-only event log with iteration gating.
///
/// Events receive consecutive ids starting at 1 and are never mutated.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Vec<UsageEvent>,
    closed: BTreeSet<u32>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a log from persisted events (already id-ordered).
    pub fn from_events(events: Vec<UsageEvent>, closed: impl IntoIterator<Item = u32>) -> Self {
        Self { events, closed: closed.into_iter().collect() }
    }

    pub fn next_id(&self) -> u64 {
        self.events.last().map_or(1, |e| e.event_id + 1)
    }

    /// Validates `event` against the log state and returns it with its id
    /// assigned, without appending. Callers persist it, then [`commit`].
    ///
    /// [`commit`]: EventLog::commit
    pub fn prepare(&self, mut event: UsageEvent, timestamp_ms: u64) -> Result<UsageEvent, EventError> {
        validate_event(&event)?;
        if self.closed.contains(&event.iteration) {
            return Err(EventError::IterationClosed(event.iteration));
        }
        event.event_id = self.next_id();
        event.timestamp_ms = timestamp_ms;
        event.schema_version = EVENT_SCHEMA_VERSION;
        Ok(event)
    }

    pub fn commit(&mut self, event: UsageEvent) {
        debug_assert_eq!(event.event_id, self.next_id());
        self.events.push(event);
    }

    /// Validates and appends; returns the new event id.
    pub fn record(&mut self, event: UsageEvent, timestamp_ms: u64) -> Result<u64, EventError> {
        let e = self.prepare(event, timestamp_ms)?;
        let id = e.event_id;
        self.commit(e);
        Ok(id)
    }

    pub fn close(&mut self, iteration: u32) {
        self.closed.insert(iteration);
    }

    pub fn is_closed(&self, iteration: u32) -> bool {
        self.closed.contains(&iteration)
    }

    pub fn events(&self) -> &[UsageEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}
