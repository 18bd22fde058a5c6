//! The session service end to end against a mock remote model.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::routing::post;
use axum::{Json, Router};
use limetree::blackbox::{PredictRequest, PredictResponse, WireInstance};
use limetree::service::SessionStore;
use serde_json::{json, Value};

const WORDS: [&str; 4] = ["good", "cheap", "fast", "slow"];

fn mock_row(tokens: &[String]) -> Vec<f64> {
    let has = |w: &str| f64::from(u8::from(tokens.iter().any(|t| t == w)));
    let s = (0.2 + 0.5 * has("good") + 0.2 * has("fast") - 0.15 * has("slow") + 0.05 * has("cheap")).clamp(0.0, 1.0);
    vec![1.0 - s, 0.5 * s, 0.5 * s]
}

fn mock_bits(bits: &str) -> Vec<f64> {
    let tokens: Vec<String> = WORDS
        .iter()
        .zip(bits.chars())
        .filter(|(_, b)| *b == '1')
        .map(|(w, _)| w.to_string())
        .collect();
    mock_row(&tokens)
}

struct Harness {
    rt: tokio::runtime::Runtime,
    model: SocketAddr,
    calls: Arc<AtomicUsize>,
}

impl Harness {
    fn new() -> Self {
        let rt = tokio::runtime::Runtime::new().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = calls.clone();
        let app = Router::new()
            .route(
                "/predict",
                post(move |Json(req): Json<PredictRequest>| {
                    counter.fetch_add(1, Ordering::SeqCst);
                    async move {
                        let probabilities = req
                            .instances
                            .iter()
                            .map(|i| match i {
                                WireInstance::Tokens(t) => mock_row(t),
                                WireInstance::Image(_) => vec![0.5, 0.25, 0.25],
                            })
                            .collect();
                        Json(PredictResponse { probabilities })
                    }
                }),
            )
            .route(
                "/short",
                post(|| async { Json(PredictResponse { probabilities: vec![vec![1.0, 0.0, 0.0]] }) }),
            );
        let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let model = listener.local_addr().unwrap();
        rt.spawn(async move { axum::serve(listener, app).await.unwrap() });
        Self { rt, model, calls }
    }

    fn service(&self, root: &Path) -> String {
        let store = Arc::new(SessionStore::open(root).unwrap());
        let listener = self.rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let addr = listener.local_addr().unwrap();
        self.rt.spawn(limetree::service::serve(listener, store));
        format!("http://{addr}")
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn send(method: &str, url: &str, body: Option<&Value>) -> (u16, Value, Vec<u8>) {
    let a = agent();
    let mut resp = match method {
        "GET" => a.get(url).call(),
        "PUT" => a.put(url).header("content-type", "application/json").send(body.unwrap().to_string().as_bytes()),
        _ => a.post(url).header("content-type", "application/json").send(body.unwrap().to_string().as_bytes()),
    }
    .unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.body_mut().read_to_vec().unwrap();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value, bytes)
}

fn remote_session(h: &Harness, path: &str, batch: usize) -> Value {
    json!({
        "instance": {"kind": "text", "text": WORDS.join(" ")},
        "blackbox": {"kind": "remote", "url": format!("http://{}{path}", h.model), "batch_size": batch, "max_in_flight": 3}
    })
}

#[test]
fn remote_session_lifecycle_and_persistence() {
    let h = Harness::new();
    let dir = tempfile::tempdir().unwrap();
    let base = h.service(dir.path());

    let (status, created, _) = send("POST", &format!("{base}/sessions"), Some(&remote_session(&h, "/predict", 3)));
    assert_eq!(status, 201, "{created}");
    assert_eq!(created["d"], 4);
    assert_eq!(created["class_count"], 3);
    let s = format!("{base}/sessions/{}", created["id"].as_str().unwrap());

    let (status, err, _) = send("POST", &format!("{s}/query"), Some(&json!({"kind": "rule"})));
    assert_eq!(status, 409);
    assert_eq!(err["error"]["code"], "conflict");

    let before = h.calls.load(Ordering::SeqCst);
    let (status, fit, _) = send(
        "POST",
        &format!("{s}/fit"),
        Some(&json!({"classes": [0, 1], "variants": ["limet", "limet-relabeled", "limet-complete", "lime"]})),
    );
    assert_eq!(status, 200, "{fit}");
    // 16 points in batches of 3, plus the anchor
    assert!(h.calls.load(Ordering::SeqCst) - before >= 7);
    let complete = fit["reports"].as_array().unwrap().iter().find(|r| r["variant"] == "limet-complete").unwrap();
    assert_eq!(complete["final_loss"], 0.0);
    assert_eq!(complete["certified"], true);

    // rows came back in request order across batches
    for i in 0..16u32 {
        let bits = format!("{i:04b}");
        let point: Vec<u8> = bits.bytes().map(|b| b - b'0').collect();
        let q = json!({"kind": "what-if", "variant": "limet-complete", "point": point, "oracle": "tree"});
        let (status, out, _) = send("POST", &format!("{s}/query"), Some(&q));
        assert_eq!(status, 200);
        let want = mock_bits(&bits);
        let got: Vec<f64> = serde_json::from_value(out["result"]["probabilities"].clone()).unwrap();
        assert_eq!(got, vec![want[0], want[1]], "{bits}");
    }

    let (status, _, body) = send("GET", &format!("{s}/render/1010.png"), None);
    assert_eq!(status, 200);
    assert_eq!(String::from_utf8(body).unwrap(), "good fast");
    let (status, _, _) = send("GET", &format!("{s}/render/10.png"), None);
    assert_eq!(status, 400);

    let (status, tree, _) = send("GET", &format!("{s}/tree?variant=limet-relabeled"), None);
    assert_eq!(status, 200);
    assert_eq!(tree["variant"], "limet-relabeled");
    assert!(!tree["rendered"]["nodes"].as_array().unwrap().is_empty());

    let bad = json!({"kind": "counterfactual", "query": {"target": {"kind": "argmax-is", "class": 1}, "given": {"0": 1}, "despite": [0]}});
    let (status, err, _) = send("POST", &format!("{s}/query"), Some(&bad));
    assert_eq!(status, 400);
    assert_eq!(err["error"]["code"], "invalid-argument");

    let cf = json!({"kind": "counterfactual", "variant": "limet-complete", "query": {"target": {"kind": "argmax-is-not", "class": 1}}});
    let (_, first, _) = send("POST", &format!("{s}/query"), Some(&cf));
    let (_, importance, _) = send("POST", &format!("{s}/query"), Some(&json!({"kind": "importance"})));

    // a fresh store over the same directory sees the same fitted session
    let base2 = h.service(dir.path());
    let s2 = s.replace(&base, &base2);
    let (status, summary, _) = send("GET", &s2, None);
    assert_eq!(status, 200);
    assert_eq!(summary["fitted"], json!(["limet", "limet-relabeled", "limet-complete"]));
    let (_, again, _) = send("POST", &format!("{s2}/query"), Some(&cf));
    assert_eq!(first, again);
    let (_, importance2, _) = send("POST", &format!("{s2}/query"), Some(&json!({"kind": "importance"})));
    assert_eq!(importance, importance2);

    let (status, merged, _) = send("PUT", &format!("{s2}/segmentation"), Some(&json!({"groups": [[0, 2]]})));
    assert_eq!(status, 200);
    assert_eq!(merged, json!({"d": 3, "invalidated": true}));
    let (status, _, _) = send("POST", &format!("{s2}/query"), Some(&json!({"kind": "importance"})));
    assert_eq!(status, 409);
    let (status, _, body) = send("GET", &format!("{s2}/render/011.png"), None);
    assert_eq!(status, 200);
    assert_eq!(String::from_utf8(body).unwrap(), "cheap slow");
}

#[test]
fn misbehaving_and_missing_models_are_bad_gateways() {
    let h = Harness::new();
    let dir = tempfile::tempdir().unwrap();
    let base = h.service(dir.path());

    // answers one row whatever it is sent
    let (status, created, _) = send("POST", &format!("{base}/sessions"), Some(&remote_session(&h, "/short", 8)));
    assert_eq!(status, 201, "{created}");
    let s = format!("{base}/sessions/{}", created["id"].as_str().unwrap());
    let (status, err, _) = send("POST", &format!("{s}/fit"), Some(&json!({"top": 1})));
    assert_eq!(status, 502);
    assert_eq!(err["error"]["code"], "protocol");

    let closed = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let req = json!({
        "instance": {"kind": "text", "text": "a b"},
        "blackbox": {"kind": "remote", "url": format!("http://{closed}/predict"), "retries": 1, "timeout_ms": 2000}
    });
    let (status, err, _) = send("POST", &format!("{base}/sessions"), Some(&req));
    assert_eq!(status, 502);
    assert_eq!(err["error"]["code"], "transport");
}

#[test]
fn requests_are_validated() {
    let h = Harness::new();
    let dir = tempfile::tempdir().unwrap();
    let base = h.service(dir.path());

    let (status, err, _) = send("GET", &format!("{base}/sessions/missing"), None);
    assert_eq!(status, 404);
    assert_eq!(err["error"]["code"], "not-found");

    let synthetic = json!({
        "instance": {"kind": "text", "text": "x y z"},
        "blackbox": {"kind": "synthetic", "family": "xor-pair", "class_count": 3, "seed": 1}
    });
    let (status, created, _) = send("POST", &format!("{base}/sessions"), Some(&synthetic));
    assert_eq!(status, 201);
    let s = format!("{base}/sessions/{}", created["id"].as_str().unwrap());
    let (status, _, _) = send("POST", &format!("{s}/fit"), Some(&json!({"classes": [7]})));
    assert_eq!(status, 400);
    let (status, _, _) = send("PUT", &format!("{s}/segmentation"), Some(&json!({"groups": [[0, 9]]})));
    assert_eq!(status, 400);
    let (status, _, _) = send("POST", &format!("{s}/query"), Some(&json!({"kind": "nonsense"})));
    assert!((400..500).contains(&status));

    let image = json!({
        "instance": {"kind": "image", "data": "bm90IGFuIGltYWdl"},
        "segmentation": {"kind": "grid", "rows": 1, "cols": 2},
        "blackbox": {"kind": "synthetic", "family": "segment-logit", "class_count": 3, "seed": 1}
    });
    let (status, err, _) = send("POST", &format!("{base}/sessions"), Some(&image));
    assert_eq!(status, 400);
    assert_eq!(err["error"]["code"], "media");
}


#[test]
fn image_sessions_survive_a_restart_with_their_merges() {
    use base64::Engine as _;
    let h = Harness::new();
    let dir = tempfile::tempdir().unwrap();
    let base = h.service(dir.path());

    let img = image::RgbImage::from_fn(24, 16, |x, y| image::Rgb([(x * 10) as u8, (y * 15) as u8, 77]));
    let png = limetree::domain::encode_png(&img).unwrap();
    let req = json!({
        "instance": {"kind": "image", "data": base64::engine::general_purpose::STANDARD.encode(png)},
        "segmentation": {"kind": "grid", "rows": 2, "cols": 3},
        "occlusion": {"kind": "segment-mean"},
        "blackbox": {"kind": "synthetic", "family": "segment-logit", "class_count": 4, "seed": 3}
    });
    let (status, created, _) = send("POST", &format!("{base}/sessions"), Some(&req));
    assert_eq!(status, 201, "{created}");
    let s = format!("{base}/sessions/{}", created["id"].as_str().unwrap());
    let (status, _, _) = send("PUT", &format!("{s}/segmentation"), Some(&json!({"groups": [[0, 1], [4, 5]]})));
    assert_eq!(status, 200);
    let (status, fit, _) = send("POST", &format!("{s}/fit"), Some(&json!({"top": 2, "variants": ["limet-complete"]})));
    assert_eq!(status, 200, "{fit}");
    let (_, _, thumb) = send("GET", &format!("{s}/render/1010.png"), None);
    let decoded = image::load_from_memory(&thumb).unwrap();
    assert_eq!((decoded.width(), decoded.height()), (24, 16));
    let q = json!({"kind": "shortest", "class": fit["classes"][0]});
    let (_, shortest, _) = send("POST", &format!("{s}/query"), Some(&q));

    let base2 = h.service(dir.path());
    let s2 = s.replace(&base, &base2);
    let (_, summary, _) = send("GET", &s2, None);
    assert_eq!(summary["d"], 4);
    assert_eq!(summary["domain"]["merge_history"], json!([[[0, 1], [4, 5]]]));
    let (_, thumb2, _) = send("GET", &format!("{s2}/render/1010.png"), None);
    let (_, _, thumb2_bytes) = send("GET", &format!("{s2}/render/1010.png"), None);
    assert!(thumb2.is_null());
    assert_eq!(thumb, thumb2_bytes);
    let (_, shortest2, _) = send("POST", &format!("{s2}/query"), Some(&q));
    assert_eq!(shortest, shortest2);
}
