//! Usage events, graded training data and the adaptive retraining loop.

mod events;
mod groups;
mod lifecycle;

pub use events::{validate_event, EventError, EventKind, EventLog, SpanRef, UsageEvent, EVENT_SCHEMA_VERSION};
pub use groups::{build_personal_groups, build_training_groups, replaced_span_count, LabeledGroup, LabeledItem};
pub use lifecycle::{
    build_personal_model, check_separation, evaluate, evaluate_stored_order, worker_iterations, AdaptiveError,
    AdaptiveLoop, Evaluation, Featurizer, IterationRecord, PersonalPoint, PersonalTrajectory,
};
