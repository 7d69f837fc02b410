use std::sync::Arc;
use std::time::Duration;

use mmsc_core::gateway::{
    collect_trajectories, CacheMode, Gateway, GatewayError, HttpBackend, MockScript, MockServer,
    Modality, ModelRequest, PromptId, ReplayBackend, ResponseCache, RetryPolicy, SamplingParams,
    UtteranceInput,
};
use mmsc_core::UtteranceId;

fn script() -> MockScript {
    MockScript::from_json(
        br#"{
            "utterances": {
                "s1/0": {"*": ["Reasoning.\nFINAL: CT"], "P2": ["FINAL: ST", "FINAL: FN"]},
                "s1/1": {"*": ["FINAL: FN"]}
            },
            "fail": ["s1/9"]
        }"#,
    )
    .unwrap()
}

fn fast() -> RetryPolicy {
    RetryPolicy {
        attempts: 3,
        base_delay: Duration::from_millis(5),
    }
}

fn backend(server: &MockServer) -> HttpBackend {
    HttpBackend::new(&server.base_url(), Some("k".into()), "test-model").with_retry(fast())
}

fn request(index: u32, prompt: PromptId, sample: u32) -> ModelRequest {
    ModelRequest::new(
        UtteranceId::new("s1", index),
        prompt,
        sample,
        Modality::AudioAndText,
        Some(Arc::new(b"RIFF....WAVE".to_vec())),
        Some("I guess I could try.".into()),
    )
    .unwrap()
}

#[test]
fn wire_format_and_routing() {
    let server = MockServer::start(script(), "127.0.0.1:0").unwrap();
    let gw = Gateway::new(Arc::new(backend(&server)));
    let params = SamplingParams::default();
    let t = gw.query(&request(0, PromptId::P1, 0), &params).unwrap();
    assert_eq!(t.raw_response, "Reasoning.\nFINAL: CT");
    assert_eq!(t.backend_id, "test-model");
    assert!(!t.cached);

    // The n-th P2 request for an utterance gets the n-th scripted entry.
    let a = gw.query(&request(0, PromptId::P2, 0), &params).unwrap();
    let b = gw.query(&request(0, PromptId::P2, 1), &params).unwrap();
    assert_eq!(
        (a.raw_response.as_str(), b.raw_response.as_str()),
        ("FINAL: ST", "FINAL: FN")
    );

    let body = &server.requests()[0];
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 1.0);
    assert_eq!(body["top_p"], 0.5);
    let parts = body["messages"][0]["content"].as_array().unwrap();
    assert_eq!(parts[0]["type"], "input_audio");
    assert_eq!(parts[0]["input_audio"]["format"], "wav");
    assert_eq!(parts[1]["text"], "Transcript: I guess I could try.");
    assert!(parts[2]["text"].as_str().unwrap().contains("FINAL: CT"));
    assert!(!body.to_string().contains("sample"));
}

#[test]
fn transient_failures_are_retried() {
    let server = MockServer::start(script(), "127.0.0.1:0").unwrap();
    let gw = Gateway::new(Arc::new(backend(&server)));
    server.fail_next(2);
    let t = gw
        .query(&request(1, PromptId::P3, 0), &SamplingParams::default())
        .unwrap();
    assert_eq!(t.raw_response, "FINAL: FN");
    assert_eq!(server.requests().len(), 3);

    server.fail_next(3);
    let err = gw
        .query(&request(1, PromptId::P3, 1), &SamplingParams::default())
        .unwrap_err();
    assert!(matches!(err, GatewayError::BackendUnavailable(_)), "{err}");
    assert!(err.is_backend_failure());
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(script(), "127.0.0.1:0").unwrap();
    let gw = Gateway::new(Arc::new(backend(&server)));
    let err = gw
        .query(&request(5, PromptId::P1, 0), &SamplingParams::default())
        .unwrap_err();
    assert!(
        matches!(err, GatewayError::BackendRejected { status: 404, .. }),
        "{err}"
    );
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn unreachable_backend_is_unavailable() {
    let addr = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let http = HttpBackend::new(&format!("http://{addr}/v1"), None, "m").with_retry(fast());
    let err = Gateway::new(Arc::new(http))
        .query(&request(0, PromptId::P1, 0), &SamplingParams::default())
        .unwrap_err();
    assert!(matches!(err, GatewayError::BackendUnavailable(_)), "{err}");
}

#[test]
fn cache_serves_repeats_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let server = MockServer::start(script(), "127.0.0.1:0").unwrap();
    let params = SamplingParams::default();
    let gw = Gateway::new(Arc::new(backend(&server))).with_cache(
        ResponseCache::open(dir.path()).unwrap(),
        CacheMode::ReadWrite,
    );
    let first = gw.query(&request(0, PromptId::P4, 2), &params).unwrap();
    let second = gw.query(&request(0, PromptId::P4, 2), &params).unwrap();
    assert!(!first.cached && second.cached);
    assert_eq!(first.raw_response, second.raw_response);
    assert_eq!(server.requests().len(), 1);

    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
    let entry: serde_json::Value =
        serde_json::from_slice(&std::fs::read(entries[0].as_ref().unwrap().path()).unwrap())
            .unwrap();
    assert_eq!(entry["raw_response"], "Reasoning.\nFINAL: CT");
    assert!(entry["request_digest"].is_string() && entry["timestamp"].is_number());

    // Replay against the same model id hits; an unseen request misses.
    let replay = Gateway::new(Arc::new(ReplayBackend::new("test-model"))).with_cache(
        ResponseCache::open(dir.path()).unwrap(),
        CacheMode::ReplayOnly,
    );
    assert!(
        replay
            .query(&request(0, PromptId::P4, 2), &params)
            .unwrap()
            .cached
    );
    let miss = replay
        .query(&request(0, PromptId::P4, 0), &params)
        .unwrap_err();
    assert!(matches!(miss, GatewayError::CacheMiss { .. }), "{miss}");
    assert!(miss.is_backend_failure());

    // Different sampling parameters are a different key.
    let other = SamplingParams {
        temperature: 0.0,
        ..params
    };
    assert!(replay.query(&request(0, PromptId::P4, 2), &other).is_err());
}

#[test]
fn collection_counts_and_failed_slots() {
    let server = MockServer::start(script(), "127.0.0.1:0").unwrap();
    let gw = Gateway::new(Arc::new(backend(&server))).with_concurrency(3);
    let params = SamplingParams::default();
    let input = |index| UtteranceInput {
        id: UtteranceId::new("s1", index),
        text: "It helps me relax.".into(),
        clip: Some(Arc::new(vec![0; 64])),
    };
    let all = collect_trajectories(
        &gw,
        &input(0),
        &PromptId::REASONING,
        Modality::AudioOnly,
        &params,
    )
    .unwrap();
    assert_eq!(all.len(), 12);
    for (n, r) in all.iter().enumerate() {
        let t = r.as_ref().unwrap();
        assert_eq!(t.prompt_id, PromptId::REASONING[n / 3]);
        assert_eq!(t.sample_index, (n % 3) as u32);
    }
    let three = [PromptId::P1, PromptId::P3, PromptId::P4];
    let failed =
        collect_trajectories(&gw, &input(9), &three, Modality::AudioOnly, &params).unwrap();
    assert_eq!(failed.len(), 9);
    assert!(failed.iter().all(|r| r.is_err()));

    let text_only =
        collect_trajectories(&gw, &input(0), &[PromptId::P2], Modality::TextOnly, &params);
    assert!(matches!(
        text_only,
        Err(GatewayError::IncompatibleModality { .. })
    ));
}
