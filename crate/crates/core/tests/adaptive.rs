use std::collections::BTreeSet;

use par4sim_core::adaptive::{
    build_training_groups, check_separation, AdaptiveError, AdaptiveLoop, EventError, EventKind, EventLog, LabeledGroup,
    SpanRef, UsageEvent,
};
use par4sim_core::ltr::{RankedItem, RankingGroup, TrainParams};
use par4sim_core::{FeatureVector, NUM_FEATURES};

fn span(n: usize) -> SpanRef {
    SpanRef { sentence_id: format!("s{n}"), start: 0, end: 10 }
}

fn snapshot() -> Vec<String> {
    ["associated", "merged", "aligned", "partnered", "unexpected", "connected"].map(String::from).to_vec()
}

fn select(worker: &str, hit: &str, t: u32, s: SpanRef, choice: &str) -> UsageEvent {
    UsageEvent::new(worker, hit, t, EventKind::Select).with_span(s).with_snapshot(snapshot()).with_choice(choice)
}

fn relevances(g: &LabeledGroup) -> Vec<u32> {
    g.items.iter().map(|i| i.relevance).collect()
}

#[test]
fn vote_counts_become_grades() {
    let mut log = EventLog::new();
    let picks = [("associated", 6), ("merged", 2), ("aligned", 1), ("partnered", 1)];
    let mut w = 0;
    for (surface, n) in picks {
        for _ in 0..n {
            w += 1;
            log.record(select(&format!("w{w}"), "h", 1, span(1), surface), w).unwrap();
        }
    }
    let groups = build_training_groups(log.events(), 1);
    assert_eq!(groups.len(), 1);
    assert_eq!(relevances(&groups[0]), [6, 2, 1, 1, 0, 0]);
    assert_eq!(groups[0].participants, 10);
    assert!(groups[0].is_trainable());
}

#[test]
fn replay_respects_undo_redo_and_supersession() {
    let mut log = EventLog::new();
    let s = span(1);
    let undo = || UsageEvent::new("w1", "h", 1, EventKind::Undo).with_span(span(1));
    let redo = || UsageEvent::new("w1", "h", 1, EventKind::Redo).with_span(span(1));
    log.record(select("w1", "h", 1, s.clone(), "merged"), 1).unwrap();
    log.record(undo(), 2).unwrap();
    log.record(select("w1", "h", 1, s.clone(), "aligned"), 3).unwrap();
    log.record(select("w2", "h", 1, s.clone(), "merged"), 4).unwrap();
    log.record(select("w2", "h", 1, s.clone(), "partnered"), 5).unwrap();
    log.record(select("w3", "h", 1, s.clone(), "merged"), 6).unwrap();
    log.record(UsageEvent::new("w3", "h", 1, EventKind::Undo).with_span(s.clone()), 7).unwrap();
    log.record(UsageEvent::new("w3", "h", 1, EventKind::Redo).with_span(s.clone()), 8).unwrap();
    // A redo after a fresh action has nothing to restore.
    log.record(redo(), 9).unwrap();
    let g = &build_training_groups(log.events(), 1)[0];
    assert_eq!(relevances(g), [0, 1, 1, 1, 0, 0]);
}

#[test]
fn custom_edits_count_only_when_they_match_a_candidate() {
    let mut log = EventLog::new();
    let custom = |w: &str, text: &str| {
        UsageEvent::new(w, "h", 1, EventKind::CustomEdit).with_span(span(1)).with_snapshot(snapshot()).with_choice(text)
    };
    log.record(custom("w1", "MERGED"), 1).unwrap();
    log.record(custom("w2", "joined up"), 2).unwrap();
    let g = &build_training_groups(log.events(), 1)[0];
    assert_eq!(relevances(g), [0, 1, 0, 0, 0, 0]);
}

#[test]
fn unanimous_keep_gives_an_untrainable_group() {
    let mut log = EventLog::new();
    for w in 0..10 {
        let e = UsageEvent::new(format!("w{w}"), "h", 1, EventKind::DoNotChange).with_span(span(1)).with_snapshot(snapshot());
        log.record(e, w).unwrap();
    }
    let g = &build_training_groups(log.events(), 1)[0];
    assert!(g.is_all_zero() && !g.is_trainable());
}

#[test]
fn reload_discards_the_workers_choices_in_that_hit() {
    let mut log = EventLog::new();
    log.record(select("w1", "h", 1, span(1), "merged"), 1).unwrap();
    log.record(select("w1", "h", 1, span(2), "aligned"), 2).unwrap();
    log.record(select("w1", "other", 1, span(1), "aligned"), 3).unwrap();
    log.record(UsageEvent::new("w1", "h", 1, EventKind::Reload), 4).unwrap();
    log.record(select("w1", "h", 1, span(2), "partnered"), 5).unwrap();
    let groups = build_training_groups(log.events(), 1);
    let by = |hit: &str, s: SpanRef| groups.iter().find(|g| g.hit_id == hit && g.span == s).map(relevances).unwrap();
    assert_eq!(by("h", span(1)), [0; 6]);
    assert_eq!(by("h", span(2)), [0, 0, 0, 1, 0, 0]);
    assert_eq!(by("other", span(1)), [0, 0, 1, 0, 0, 0]);
}

#[test]
fn log_rejects_invalid_events() {
    let mut log = EventLog::new();
    let err = log.record(select("w1", "h", 1, span(1), "zebra"), 1).unwrap_err();
    assert_eq!(err, EventError::NotInSnapshot("zebra".into()));
    let no_span = UsageEvent::new("w1", "h", 1, EventKind::Select).with_choice("merged");
    assert!(matches!(log.record(no_span, 1), Err(EventError::MissingSpan(_))));
    assert_eq!(log.record(select("w1", "h", 0, span(1), "merged"), 1), Err(EventError::InvalidIteration));
    log.close(1);
    assert_eq!(log.record(select("w1", "h", 1, span(1), "merged"), 1), Err(EventError::IterationClosed(1)));
    assert!(log.is_empty());
}

// Candidate i has f1 = i; every worker prefers the highest f1 shown.
fn featurize(g: &LabeledGroup) -> Option<RankingGroup> {
    Some(RankingGroup {
        query_id: g.query_id(),
        items: g
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| {
                let mut f = [0.0; NUM_FEATURES];
                f[0] = (snapshot().len() - i) as f64;
                f[1] = it.surface.len() as f64;
                RankedItem { features: FeatureVector(f), relevance: it.relevance, item_id: it.surface.clone() }
            })
            .rev()
            .collect(),
    })
}

fn iteration_events(log: &mut EventLog, t: u32) {
    for h in 0..4 {
        for s in 0..3 {
            for w in 0..5 {
                let choice = if w < 3 { "associated" } else { "merged" };
                let e = select(&format!("w{w}"), &format!("t{t}-h{h}"), t, span(s), choice);
                log.record(e, log.len() as u64).unwrap();
            }
        }
    }
}

#[test]
fn adaptive_loop_keeps_training_and_evaluation_apart() {
    let mut log = EventLog::new();
    let mut lp = AdaptiveLoop::new(TrainParams { num_trees: 20, ..TrainParams::default() });
    for t in 1..=3 {
        iteration_events(&mut log, t);
        let rec = lp.close_iteration(t, log.events(), &featurize).unwrap();
        log.close(t);
        assert_eq!(rec.num_groups, 12);
        assert_eq!(rec.mean_ndcg_at_10.is_none(), t == 1);
        if t > 1 {
            // The reversed stored order is the worst ranking; the model fixes it.
            assert!(rec.mean_ndcg_at_10.unwrap() > 0.99);
            assert!(rec.mean_ndcg_at_10_lm_order.unwrap() < 0.5);
            let model = lp.models().iter().find(|m| Some(&m.model_id) == rec.model_id.as_ref()).unwrap();
            assert!(model.trained_on.iter().all(|&x| x < t));
            let hits: BTreeSet<String> = rec.hits.iter().cloned().collect();
            assert!(check_separation(model, t, &hits).is_ok());
        }
    }
    assert!(matches!(lp.close_iteration(3, log.events(), &featurize), Err(AdaptiveError::AlreadyClosed(3))));
    assert!(matches!(lp.close_iteration(2, log.events(), &featurize), Err(AdaptiveError::AlreadyClosed(_) | AdaptiveError::OutOfOrder { .. })));

    let latest = lp.active_model().unwrap();
    let hits: BTreeSet<String> = ["t3-h0".to_string()].into();
    assert!(matches!(check_separation(latest, 3, &hits), Err(AdaptiveError::SeparationViolation { .. })));
    assert_eq!(lp.model_for_iteration(3).unwrap().trained_on, BTreeSet::from([1, 2]));
    assert_eq!(lp.model_for_iteration(1), None);
}

#[test]
fn closing_without_usage_is_an_error() {
    let mut lp = AdaptiveLoop::new(TrainParams::default());
    assert!(matches!(lp.close_iteration(1, &[], &featurize), Err(AdaptiveError::NoGroups(1))));
}
