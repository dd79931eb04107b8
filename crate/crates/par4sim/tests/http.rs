mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use par4sim::hit::Hit;
use par4sim::service::http::router;
use par4sim::service::Service;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Api {
    app: Router,
    _dir: tempfile::TempDir,
    fx: common::Fixture,
}

impl Api {
    fn new() -> Self {
        Self::with(|s| s)
    }

    fn with(f: impl FnOnce(Service) -> Service) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let fx = common::fixture(dir.path());
        let app = router(Arc::new(f(fx.service())));
        Api { app, _dir: dir, fx }
    }

    async fn call(&self, method: &str, uri: &str, worker: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(w) = worker {
            req = req.header("x-worker-id", w);
        }
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
        (status, value)
    }

    async fn post_hit(&self, hit: &Hit) -> (StatusCode, Value) {
        self.call("POST", "/api/hits", None, Some(serde_json::to_value(common::new_hit(hit)).unwrap())).await
    }

    async fn candidates(&self, hit: &Hit, span: usize, worker: &str) -> (StatusCode, Value) {
        let s = &hit.gold_spans[span];
        let uri = format!("/api/hits/{}/candidates?sentence={}&start={}&end={}", hit.hit_id, s.sentence_id, s.start, s.end);
        self.call("GET", &uri, Some(worker), None).await
    }

    async fn select(&self, hit: &Hit, span: usize, worker: &str, resp: &Value, pick: usize) -> (StatusCode, Value) {
        let body = json!({
            "hit_id": hit.hit_id,
            "kind": "select",
            "span": hit.gold_spans[span],
            "chosen_surface": resp["candidates"][pick]["surface"],
            "snapshot_id": resp["snapshot_id"],
        });
        self.call("POST", "/api/events", Some(worker), Some(body)).await
    }

    /// Every worker selects the top-served candidate on every span, then submits.
    async fn complete(&self, hit: &Hit, workers: &[&str]) {
        for w in workers {
            for span in 0..hit.gold_spans.len() {
                let (status, resp) = self.candidates(hit, span, w).await;
                assert_eq!(status, StatusCode::OK, "{resp}");
                let (status, body) = self.select(hit, span, w, &resp, 0).await;
                assert_eq!(status, StatusCode::CREATED, "{body}");
            }
            let submit = json!({ "hit_id": hit.hit_id, "kind": "submit" });
            let (status, body) = self.call("POST", "/api/events", Some(w), Some(submit)).await;
            assert_eq!(status, StatusCode::CREATED, "{body}");
        }
    }
}

#[tokio::test]
async fn hit_lifecycle_status_codes() {
    let api = Api::new();
    let hit = api.fx.hit("h1", 1, 0, 3);
    let (status, view) = api.post_hit(&hit).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(view["hit_id"], "h1");
    assert_eq!(view["gold_spans"].as_array().unwrap().len(), 3);

    assert_eq!(api.post_hit(&hit).await.0, StatusCode::CONFLICT);
    assert_eq!(api.call("GET", "/api/hits/h1", None, None).await.0, StatusCode::OK);
    assert_eq!(api.call("GET", "/api/hits/nope", None, None).await.0, StatusCode::NOT_FOUND);

    let (status, _) = api.call("POST", "/api/hits", None, Some(json!({ "sentences": "x" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let mut bad = common::new_hit(&api.fx.hit("h2", 1, 3, 2));
    bad.spans[0].end = 10_000;
    let (status, body) = api.call("POST", "/api/hits", None, Some(serde_json::to_value(bad).unwrap())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    assert!(body["reason"].is_string());
}

#[tokio::test]
async fn candidate_lists_respect_the_contract() {
    let api = Api::new();
    let hit = api.fx.hit("h1", 1, 0, 4);
    api.post_hit(&hit).await;
    for span in 0..4 {
        let (status, resp) = api.candidates(&hit, span, "w1").await;
        assert_eq!(status, StatusCode::OK);
        let list = resp["candidates"].as_array().unwrap();
        assert!(!list.is_empty() && list.len() <= 10);
        let cp = resp["cp_surface"].as_str().unwrap();
        let mut surfaces: Vec<&str> = list.iter().map(|c| c["surface"].as_str().unwrap()).collect();
        assert!(!surfaces.contains(&cp));
        surfaces.sort_unstable();
        surfaces.dedup();
        assert_eq!(surfaces.len(), list.len());
        assert_eq!(list[0]["features"].as_array().unwrap().len(), 14);
        assert!(resp["model_id"].is_null());
    }

    let uri = format!("/api/hits/h1/candidates?sentence=s1&start=0&end=1");
    assert_eq!(api.call("GET", &uri, Some("w1"), None).await.0, StatusCode::NOT_FOUND);
    let s = &hit.gold_spans[0];
    let uri = format!("/api/hits/h1/candidates?sentence={}&start={}&end={}", s.sentence_id, s.start, s.end);
    assert_eq!(api.call("GET", &uri, None, None).await.0, StatusCode::BAD_REQUEST);
    let (status, _) = api.call("GET", &format!("{uri}&worker=w2"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(api.call("GET", "/api/hits/h1/candidates?sentence=s1", Some("w1"), None).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn snapshots_must_be_current() {
    let api = Api::new();
    let hit = api.fx.hit("h1", 1, 0, 2);
    api.post_hit(&hit).await;
    let (_, first) = api.candidates(&hit, 0, "w1").await;
    let (_, second) = api.candidates(&hit, 0, "w1").await;
    assert_ne!(first["snapshot_id"], second["snapshot_id"]);

    let (status, body) = api.select(&hit, 0, "w1", &first, 0).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert!(body["reason"].as_str().unwrap().contains("stale snapshot"));
    // Another worker cannot echo w1's snapshot.
    assert_eq!(api.select(&hit, 0, "w2", &second, 0).await.0, StatusCode::CONFLICT);
    let (status, body) = api.select(&hit, 0, "w1", &second, 1).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert!(body["event_id"].as_u64().unwrap() > 0);

    let no_snapshot = json!({ "hit_id": "h1", "kind": "do_not_change", "span": hit.gold_spans[1] });
    assert_eq!(api.call("POST", "/api/events", Some("w1"), Some(no_snapshot)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn event_validation() {
    let api = Api::new();
    let hit = api.fx.hit("h1", 1, 0, 2);
    api.post_hit(&hit).await;
    let submit = json!({ "hit_id": "h1", "kind": "submit", "worker_id": "w9" });
    assert_eq!(api.call("POST", "/api/events", Some("w1"), Some(submit)).await.0, StatusCode::BAD_REQUEST);
    let orphan = json!({ "hit_id": "nope", "kind": "reload" });
    assert_eq!(api.call("POST", "/api/events", Some("w1"), Some(orphan)).await.0, StatusCode::NOT_FOUND);
    let wrong_iteration = json!({ "hit_id": "h1", "kind": "reload", "iteration": 4 });
    assert_eq!(api.call("POST", "/api/events", Some("w1"), Some(wrong_iteration)).await.0, StatusCode::BAD_REQUEST);
    let anonymous = json!({ "hit_id": "h1", "kind": "reload" });
    assert_eq!(api.call("POST", "/api/events", None, Some(anonymous)).await.0, StatusCode::BAD_REQUEST);
    let garbage = json!({ "hit_id": "h1", "kind": "teleport" });
    assert_eq!(api.call("POST", "/api/events", Some("w1"), Some(garbage)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn added_spans_are_per_worker_and_cleared_by_reload() {
    let api = Api::new();
    let hit = api.fx.hit("h1", 1, 0, 2);
    api.post_hit(&hit).await;
    // The filler sentence's first word.
    let last = hit.sentences.last().unwrap();
    let end = last.text.find(' ').unwrap();
    let span = json!({ "sentence_id": last.sentence_id, "start": 0, "end": end });
    let add = json!({ "hit_id": "h1", "kind": "add_cp", "span": span });
    assert_eq!(api.call("POST", "/api/events", Some("w1"), Some(add)).await.0, StatusCode::CREATED);

    let (_, view) = api.call("GET", "/api/hits/h1?worker=w1", None, None).await;
    assert_eq!(view["added_spans"].as_array().unwrap().len(), 1);
    let (_, other) = api.call("GET", "/api/hits/h1", Some("w2"), None).await;
    assert!(other["added_spans"].as_array().unwrap().is_empty());
    let uri = format!("/api/hits/h1/candidates?sentence={}&start=0&end={end}", last.sentence_id);
    assert_eq!(api.call("GET", &uri, Some("w1"), None).await.0, StatusCode::OK);
    assert_eq!(api.call("GET", &uri, Some("w2"), None).await.0, StatusCode::NOT_FOUND);

    let reload = json!({ "hit_id": "h1", "kind": "reload" });
    assert_eq!(api.call("POST", "/api/events", Some("w1"), Some(reload)).await.0, StatusCode::CREATED);
    let (_, view) = api.call("GET", "/api/hits/h1?worker=w1", None, None).await;
    assert!(view["added_spans"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn submit_gate() {
    let api = Api::with(|s| s);
    let hit = api.fx.hit("h1", 1, 0, 4);
    api.post_hit(&hit).await;
    let submit = json!({ "hit_id": "h1", "kind": "submit" });
    let (status, body) = api.call("POST", "/api/events", Some("w1"), Some(submit.clone())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["reason"].as_str().unwrap().contains("submit gate"));

    let commented = json!({ "hit_id": "h1", "kind": "submit", "comment": "text was already simple" });
    assert_eq!(api.call("POST", "/api/events", Some("w1"), Some(commented)).await.0, StatusCode::CREATED);
    let blank = json!({ "hit_id": "h1", "kind": "submit", "comment": "   " });
    assert_eq!(api.call("POST", "/api/events", Some("w2"), Some(blank)).await.0, StatusCode::CONFLICT);

    for span in 0..3 {
        let (_, resp) = api.candidates(&hit, span, "w2").await;
        api.select(&hit, span, "w2", &resp, 0).await;
    }
    assert_eq!(api.call("POST", "/api/events", Some("w2"), Some(submit)).await.0, StatusCode::CREATED);
}

#[tokio::test]
async fn iterations_close_once_and_feed_metrics() {
    let api = Api::new();
    let workers = ["w1", "w2", "w3"];
    for t in 1..=3u32 {
        let hit = api.fx.hit(&format!("t{t}"), t, 4 * t as usize, 4);
        assert_eq!(api.post_hit(&hit).await.0, StatusCode::CREATED);
        api.complete(&hit, &workers).await;
        let (status, record) = api.call("POST", &format!("/api/iterations/{t}/close"), None, None).await;
        assert_eq!(status, StatusCode::OK, "{record}");
        assert_eq!(record["iteration"], t);
        assert_eq!(record["model_id"].is_null(), t == 1);
        assert_eq!(record["trained_model_id"], format!("adaptive-{t}"));
    }
    assert_eq!(api.call("POST", "/api/iterations/2/close", None, None).await.0, StatusCode::CONFLICT);

    // A closed iteration takes no more HITs or events.
    let late = api.fx.hit("late", 3, 20, 2);
    assert_eq!(api.post_hit(&late).await.0, StatusCode::CONFLICT);
    let reload = json!({ "hit_id": "t3", "kind": "reload" });
    assert_eq!(api.call("POST", "/api/events", Some("w1"), Some(reload)).await.0, StatusCode::CONFLICT);

    // Served lists now come from the latest model.
    let next = api.fx.hit("t4", 4, 24, 2);
    api.post_hit(&next).await;
    let (_, resp) = api.candidates(&next, 0, "w1").await;
    assert_eq!(resp["model_id"], "adaptive-3");

    let (status, csv) = api.call("GET", "/api/metrics?format=csv", None, None).await;
    assert_eq!(status, StatusCode::OK);
    let csv = csv.as_str().unwrap().to_string();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iteration,adaptive,baseline,lm_order");
    assert_eq!(lines.len(), 3, "{csv}");
    assert!(lines[1].starts_with("2,") && lines[2].starts_with("3,"));

    let (_, metrics) = api.call("GET", "/api/metrics", None, None).await;
    assert_eq!(metrics["records"].as_array().unwrap().len(), 3);
    assert!(!metrics["matrix"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn closing_an_iteration_without_usage_conflicts() {
    let api = Api::new();
    let (status, body) = api.call("POST", "/api/iterations/1/close", None, None).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(api.call("POST", "/api/iterations/x/close", None, None).await.0, StatusCode::BAD_REQUEST);
}
