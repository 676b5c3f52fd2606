use chrono::{DateTime, Duration, Utc};
use reqwest::StatusCode;
use serde_json::{json, Value};

use crowdcell_core::records::read_votes;
use crowdcell_orchestrator::http::{router, AssignmentView};
use crowdcell_orchestrator::{Clock, Orchestrator, OrchestratorConfig};

fn t0() -> DateTime<Utc> {
    DateTime::from_timestamp(1_700_000_000, 0).unwrap()
}

struct Server {
    base: String,
    client: reqwest::Client,
    clock: Clock,
    _images: tempfile::TempDir,
}

impl Server {
    async fn start() -> Self {
        let images = tempfile::tempdir().unwrap();
        std::fs::write(images.path().join("c0.png"), b"png bytes").unwrap();
        let clock = Clock::manual(t0());
        let config = OrchestratorConfig {
            image_dir: Some(images.path().to_path_buf()),
            ..Default::default()
        };
        let orch = Orchestrator::start(config, clock.clone()).unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, router(orch)).await.unwrap() });
        Self {
            base: format!("http://{addr}"),
            client: reqwest::Client::new(),
            clock,
            _images: images,
        }
    }

    async fn get(&self, path: &str) -> (StatusCode, String) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status(), r.text().await.unwrap())
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self
            .client
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn worker(&self, id: &str, rate: f64) {
        let (s, _) = self
            .post("/workers", json!({"worker_id": id, "is_master": true, "approval_rate": rate}))
            .await;
        assert_eq!(s, StatusCode::CREATED);
    }

    async fn claim(&self, id: &str) -> (StatusCode, String) {
        self.get(&format!("/assignments/next?worker_id={id}")).await
    }
}

fn answers(a: &AssignmentView, labels: &[&str]) -> Value {
    let list: Vec<Value> = a
        .items
        .iter()
        .zip(labels)
        .map(|(i, l)| json!({"item_id": i.item_id, "label": l}))
        .collect();
    json!({ "answers": list })
}

#[tokio::test]
async fn four_item_batch_end_to_end() {
    let srv = Server::start().await;
    assert_eq!(srv.get("/health").await.0, StatusCode::OK);

    let items: Vec<Value> = (0..4)
        .map(|i| json!({"item_id": format!("c{i}"), "image": format!("c{i}.png"), "truth": "circular"}))
        .collect();
    let (s, body) = srv.post("/batches", json!({ "items": items })).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(body["tasks"].as_array().unwrap().len(), 2);
    assert_eq!(srv.post("/batches", json!({"items": []})).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    // unqualified worker sees nothing
    srv.worker("low", 0.85).await;
    let (s, body) = srv.claim("low").await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    assert!(body.contains("not_qualified"));
    assert_eq!(srv.claim("ghost").await.0, StatusCode::NOT_FOUND);

    for w in 0..6 {
        srv.worker(&format!("w{w}"), 0.95).await;
    }
    let labels = [
        ["circular", "circular"],
        ["circular", "elongated"],
        ["c", "other"],
        ["elongated", "o"],
        ["other", "e"],
    ];
    for (w, l) in labels.iter().enumerate() {
        let (s, body) = srv.claim(&format!("w{w}")).await;
        assert_eq!(s, StatusCode::OK, "{body}");
        let a: AssignmentView = serde_json::from_str(&body).unwrap();
        assert_eq!(a.task_id.0, 0);
        assert_eq!(a.items[0].image_url.as_deref(), Some("/images/c0.png"));
        assert_eq!(a.deadline, "2023-11-14T23:13:20Z");
        if w == 0 {
            let bad = srv.post(&format!("/assignments/{}/submit", a.assignment_id.0), answers(&a, &["circular", "round"])).await;
            assert_eq!(bad.0, StatusCode::UNPROCESSABLE_ENTITY);
            assert_eq!(bad.1["error"], "invalid_label");
        }
        let (s, receipt) = srv.post(&format!("/assignments/{}/submit", a.assignment_id.0), answers(&a, l)).await;
        assert_eq!(s, StatusCode::OK, "{receipt}");
        assert_eq!(receipt["votes_recorded"], 2);
        assert_eq!(receipt["task_complete"], w == 4);
    }
    let (_, view) = srv.get("/workers/w0").await;
    let view: Value = serde_json::from_str(&view).unwrap();
    assert_eq!(view["pending_usd"], 0.01);

    let (s, status) = srv.get("/tasks/0").await;
    assert_eq!(s, StatusCode::OK);
    let status: Value = serde_json::from_str(&status).unwrap();
    assert_eq!(status["task"]["state"], "complete");
    assert_eq!(status["items"][0]["outcome"]["result"]["outcome"], json!({"kind": "label", "class": "circular", "agreement": 3}));
    assert_eq!(status["items"][1]["outcome"]["result"]["outcome"]["kind"], "no_consensus");
    assert_eq!(srv.get("/tasks/99").await.0, StatusCode::NOT_FOUND);

    // the sixth worker gets the second task, then nothing
    let (_, body) = srv.claim("w5").await;
    let late: AssignmentView = serde_json::from_str(&body).unwrap();
    assert_eq!(late.task_id.0, 1);
    let (s, body) = srv.claim("w5").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(body.contains("none_available"));

    // late submission
    srv.clock.advance(Duration::minutes(61));
    let (s, body) = srv
        .post(&format!("/assignments/{}/submit", late.assignment_id.0), answers(&late, &["c", "c"]))
        .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["error"], "deadline_exceeded");

    let (s, csv) = srv.get("/batches/0/votes.csv").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(read_votes(csv.as_bytes()).unwrap().len(), 10);

    // auto-approval through the admin sweep
    let (s, swept) = srv.post("/admin/sweep?now=2023-11-22T00:00:00Z", json!(null)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(swept["approved"].as_array().unwrap().len(), 5);
    assert_eq!(swept["expired_tasks"], json!([1]));
    let (_, view) = srv.get("/workers/w0").await;
    let view: Value = serde_json::from_str(&view).unwrap();
    assert_eq!(view["balance_usd"], 0.01);
    assert_eq!(view["pending_usd"], 0.0);

    let (s, report) = srv.get("/batches/0/report").await;
    assert_eq!(s, StatusCode::OK);
    let report: Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["complete_ballots"], 2);
    assert_eq!(report["incomplete_ballots"], 0);
    assert_eq!(report["tasks_expired"], 1);
    assert_eq!(report["cost"]["approved_assignments"], 5);
    assert!((report["cost"]["total_usd"].as_f64().unwrap() - 0.05).abs() < 1e-12);
    assert!(report["metrics"].is_object());

    let (s, png) = srv.get("/images/c0.png").await;
    assert_eq!((s, png.as_str()), (StatusCode::OK, "png bytes"));

    // manual review only applies to pending submissions
    assert_eq!(srv.post("/assignments/0/approve", json!(null)).await.0, StatusCode::CONFLICT);
}
