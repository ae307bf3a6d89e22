mod common;

use common::{fixture_bytes, TestServer};
use serde_json::{json, Value};

fn weight_sum(data: &Value) -> f64 {
    data["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_f64().unwrap())
        .sum()
}

fn error_code(body: &Value) -> &str {
    assert_eq!(body["ok"], false);
    assert!(body["data"].is_null());
    body["error"]["code"].as_str().unwrap()
}

#[test]
fn register_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path());
    let (status, body) = server.post("/schemas", fixture_bytes("room_schema.json"));
    assert_eq!(status, 201, "{body}");
    assert_eq!(body["ok"], true);
    assert!(body["error"].is_null());
    let data = &body["data"];
    assert_eq!(data["schema_id"], "room");
    assert_eq!(data["anchors"], 4);
    assert_eq!(data["simplices"], 2);
    assert_eq!(data["created"], true);

    let (status, again) = server.post("/schemas", fixture_bytes("room_schema.json"));
    assert_eq!(status, 200);
    assert_eq!(again["data"]["schema_id"], "room");
    assert_eq!(again["data"]["created"], false);

    let mut changed: Value = serde_json::from_slice(&fixture_bytes("room_schema.json")).unwrap();
    changed["sensors"][0]["max"] = json!(45);
    let (status, conflict) = server.post_json("/schemas", &changed);
    assert_eq!(status, 400);
    assert_eq!(error_code(&conflict), "BAD_SCHEMA");
}

#[test]
fn derived_ids_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path());
    let mut payload: Value = serde_json::from_slice(&fixture_bytes("room_schema.json")).unwrap();
    payload.as_object_mut().unwrap().remove("schema_id");
    let (s1, a) = server.post_json("/schemas", &payload);
    let (s2, b) = server.post_json("/schemas", &payload);
    assert_eq!((s1, s2), (201, 200));
    assert_eq!(a["data"]["schema_id"], b["data"]["schema_id"]);
    assert!(a["data"]["schema_id"].as_str().unwrap().starts_with('s'));
}

#[test]
fn malformed_requests_get_stable_codes() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path());
    let (status, body) = server.post("/schemas", fixture_bytes("malformed/bad_schema.json"));
    assert_eq!((status, error_code(&body)), (400, "BAD_SCHEMA"));
    let (status, body) = server.post("/schemas", "not json");
    assert_eq!((status, error_code(&body)), (400, "BAD_SCHEMA"));

    for path in [
        "/schemas/nope/interpolate",
        "/schemas/nope/generate",
        "/schemas/nope/anchors",
    ] {
        let (status, body) = server.post_json(path, &json!({"temp": 1, "humidity": 2}));
        assert_eq!(
            (status, error_code(&body)),
            (404, "UNKNOWN_SCHEMA"),
            "{path}"
        );
    }
    let (status, body) = server.get("/schemas/nope/cache/stats");
    assert_eq!((status, error_code(&body)), (404, "UNKNOWN_SCHEMA"));

    server.post("/schemas", fixture_bytes("room_schema.json"));
    for fixture in [
        "malformed/missing_sensor_reading.json",
        "malformed/malformed_reading.json",
    ] {
        for op in ["interpolate", "generate"] {
            let (status, body) =
                server.post(&format!("/schemas/room/{op}"), fixture_bytes(fixture));
            assert_eq!(
                (status, error_code(&body)),
                (422, "VALIDATION"),
                "{op} {fixture}"
            );
        }
    }
    let (status, body) = server.post_json(
        "/schemas/room/interpolate",
        &json!({"temp": 1, "humidity": 2, "pressure": 3}),
    );
    assert_eq!((status, error_code(&body)), (422, "VALIDATION"));
}

#[test]
fn interpolation_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path());
    server.post("/schemas", fixture_bytes("room_schema.json"));
    let (status, body) = server.post_json(
        "/schemas/room/interpolate",
        &json!({"temp": -10, "humidity": 50}),
    );
    assert_eq!(status, 200);
    let data = &body["data"];
    assert!((weight_sum(data) - 1.0).abs() < 1e-9);
    assert_eq!(data["clamped"], false);
    assert_eq!(data["embedding"].as_array().unwrap().len(), 64);
    let mut weights: Vec<f64> = data["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_f64().unwrap())
        .collect();
    weights.sort_by(f64::total_cmp);
    let expected = [3.0 / 14.0, 2.0 / 7.0, 0.5];
    for (w, e) in weights.iter().zip(expected) {
        assert!((w - e).abs() < 1e-12);
    }

    let (_, corner) = server.post_json(
        "/schemas/room/interpolate",
        &json!({"values": {"temp": 40, "humidity": 100}, "timestamp": 1700000000}),
    );
    let w = corner["data"]["weights"].as_array().unwrap();
    assert_eq!(w.iter().filter(|x| x.as_f64() == Some(1.0)).count(), 1);

    let (_, clamped) = server.post_json(
        "/schemas/room/interpolate",
        &json!({"temp": 100, "humidity": 50}),
    );
    assert_eq!(clamped["data"]["clamped"], true);
}

#[test]
fn anchors_retessellate() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path());
    server.post("/schemas", fixture_bytes("room_schema.json"));
    let (status, body) = server.post_json(
        "/schemas/room/anchors",
        &json!({"reading": {"temp": 5, "humidity": 50}}),
    );
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["data"]["previous_simplices"], 2);
    assert_eq!(body["data"]["simplices"], 4);
    assert_eq!(body["data"]["anchors"], 5);

    let (status, body) = server.post_json(
        "/schemas/room/anchors",
        &json!({"reading": {"temp": -30, "humidity": 100}}),
    );
    assert_eq!((status, error_code(&body)), (422, "VALIDATION"));
    let (status, body) = server.post_json(
        "/schemas/room/anchors",
        &json!({"reading": {"temp": 80, "humidity": 10}}),
    );
    assert_eq!((status, error_code(&body)), (422, "VALIDATION"));

    let (_, at_anchor) = server.post_json(
        "/schemas/room/interpolate",
        &json!({"temp": 5, "humidity": 50}),
    );
    let w = at_anchor["data"]["weights"].as_array().unwrap();
    let idx = at_anchor["data"]["anchor_ids"].as_array().unwrap();
    let hit = w.iter().position(|x| x.as_f64() == Some(1.0)).unwrap();
    assert_eq!(idx[hit], 4);
}

#[test]
fn generation_reuses_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path());
    server.post("/schemas", fixture_bytes("room_schema.json"));
    let (_, fresh) = server.get("/schemas/room/cache/stats");
    assert_eq!(fresh["data"]["entries"], 0);
    assert_eq!(fresh["data"]["speedup_estimate"], 1.0);

    let reading = json!({"temp": -10, "humidity": 50});
    let (status, first) = server.post_json("/schemas/room/generate", &reading);
    assert_eq!(status, 200);
    assert_eq!(first["data"]["iterations_used"], 50);
    assert_eq!(first["data"]["cache_hit"], false);
    assert_eq!(first["data"]["artifact_digest"].as_str().unwrap().len(), 64);
    for _ in 0..49 {
        let (_, next) = server.post_json("/schemas/room/generate", &reading);
        assert_eq!(next["data"]["cache_hit"], true);
        assert!(next["data"]["iterations_used"].as_u64().unwrap() <= 10);
    }
    let (_, stats) = server.get("/schemas/room/cache/stats");
    let data = &stats["data"];
    assert_eq!(data["entries"], 1);
    assert_eq!(data["generations"], 50);
    assert_eq!(data["iterations_used"], 148);
    assert_eq!(data["iterations_saved"], 2500 - 148);
    assert!(data["speedup_estimate"].as_f64().unwrap() >= 16.0);
    assert!(dir.path().join("schemas/room/cache.jsonl").exists());
}

#[test]
fn distant_readings_show_no_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path());
    server.post("/schemas", fixture_bytes("room_schema.json"));
    for (t, h) in [(-30, 0), (40, 0), (-30, 100), (40, 100), (5, 50)] {
        let (_, r) = server.post_json("/schemas/room/generate", &json!({"temp": t, "humidity": h}));
        assert_eq!(r["data"]["cache_hit"], false);
    }
    let (_, stats) = server.get("/schemas/room/cache/stats");
    assert_eq!(stats["data"]["speedup_estimate"], 1.0);
    assert_eq!(stats["data"]["entries"], 5);
}

#[test]
fn restart_restores_space_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let reading = json!({"temp": 12.5, "humidity": 33});
    let (interp_before, digest_before, second_before) = {
        let server = TestServer::start(dir.path());
        server.post("/schemas", fixture_bytes("room_schema.json"));
        server.post_json(
            "/schemas/room/anchors",
            &json!({"reading": {"temp": 0, "humidity": 60}}),
        );
        let (_, i) = server.post_json("/schemas/room/interpolate", &reading);
        let (_, g) = server.post_json("/schemas/room/generate", &reading);
        let (_, g2) = server.post_json(
            "/schemas/room/generate",
            &json!({"temp": 13, "humidity": 34}),
        );
        server.stop();
        (
            i["data"].clone(),
            g["data"]["artifact_digest"].clone(),
            g2["data"].clone(),
        )
    };
    assert!(second_before["cache_hit"].as_bool().unwrap());

    let server = TestServer::start(dir.path());
    let (_, i) = server.post_json("/schemas/room/interpolate", &reading);
    assert_eq!(i["data"], interp_before);
    let (_, stats) = server.get("/schemas/room/cache/stats");
    assert_eq!(stats["data"]["entries"], 2);
    assert_eq!(stats["data"]["generations"], 0);
    let (_, g) = server.post_json("/schemas/room/generate", &reading);
    assert_eq!(g["data"]["cache_hit"], true);
    assert_eq!(g["data"]["iterations_used"], 2);
    assert_ne!(g["data"]["artifact_digest"], Value::Null);
    let _ = digest_before;
}

#[test]
fn restarts_are_deterministic() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let server = TestServer::start(dir.path());
        server.post("/schemas", fixture_bytes("room_schema.json"));
        let mut digests = Vec::new();
        for k in 0..10 {
            let (_, g) = server.post_json(
                "/schemas/room/generate",
                &json!({"temp": -20 + 3 * k, "humidity": 40 + k}),
            );
            digests.push(g["data"].clone());
        }
        digests
    };
    assert_eq!(run(), run());
}

#[test]
fn concurrent_reads_during_anchor_updates() {
    let dir = tempfile::tempdir().unwrap();
    let server = std::sync::Arc::new(TestServer::start(dir.path()));
    server.post("/schemas", fixture_bytes("room_schema.json"));
    let readers: Vec<_> = (0..4)
        .map(|k| {
            let s = server.clone();
            std::thread::spawn(move || {
                for j in 0..25 {
                    let (status, body) = s.post_json(
                        "/schemas/room/interpolate",
                        &json!({"temp": -30 + 2 * j, "humidity": 10 * k + j}),
                    );
                    assert_eq!(status, 200);
                    assert!((weight_sum(&body["data"]) - 1.0).abs() < 1e-9);
                }
            })
        })
        .collect();
    for (t, h) in [(0, 20), (10, 70), (-20, 40), (30, 30)] {
        let (status, _) = server.post_json(
            "/schemas/room/anchors",
            &json!({"reading": {"temp": t, "humidity": h}}),
        );
        assert_eq!(status, 200);
    }
    for r in readers {
        r.join().unwrap();
    }
    let (_, body) = server.post_json(
        "/schemas/room/anchors",
        &json!({"reading": {"temp": 1, "humidity": 1}}),
    );
    assert_eq!(body["data"]["anchors"], 9);
}
