//! Start the session service in-process and drive it over HTTP.
//!
//! cargo run --example service_client

use std::sync::Arc;

use limetree::service::SessionStore;
use serde_json::{json, Value};

fn call(agent: &ureq::Agent, method: &str, url: &str, body: Option<Value>) -> (u16, Value) {
    let mut resp = match (method, body) {
        ("GET", _) => agent.get(url).call(),
        ("PUT", Some(b)) => agent.put(url).header("content-type", "application/json").send(b.to_string().as_bytes()),
        (_, b) => agent
            .post(url)
            .header("content-type", "application/json")
            .send(b.unwrap_or(Value::Null).to_string().as_bytes()),
    }
    .expect("request");
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().expect("body");
    (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

fn main() -> limetree::Result<()> {
    let root = std::env::temp_dir().join(format!("limetree-sessions-{}", std::process::id()));
    let store = Arc::new(SessionStore::open(&root)?);
    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    rt.spawn(limetree::service::serve(listener, store));

    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let (status, created) = call(&agent, "POST", &format!("{base}/sessions"), Some(json!({
        "instance": {"kind": "text", "text": "cheap fast reliable quiet"},
        "blackbox": {"kind": "synthetic", "family": "segment-logit", "class_count": 3, "seed": 9},
        "class_names": ["no", "maybe", "yes"]
    })));
    println!("create -> {status}");
    let id = created["id"].as_str().expect("id").to_owned();
    let s = format!("{base}/sessions/{id}");

    let (status, _) = call(&agent, "POST", &format!("{s}/query"), Some(json!({"kind": "importance"})));
    println!("query before fit -> {status}");
    let (status, fit) = call(&agent, "POST", &format!("{s}/fit"), Some(json!({
        "top": 2, "variants": ["limet", "limet-relabeled", "limet-complete", "lime"]
    })));
    println!("fit -> {status}, classes {}", fit["classes"]);
    for q in [
        json!({"kind": "rule"}),
        json!({"kind": "importance", "variant": "limet-complete"}),
        json!({"kind": "counterfactual", "query": {"target": {"kind": "argmax-is-not", "class": fit["classes"][0]}, "despite": [0]}}),
        json!({"kind": "what-if", "point": [1, 0, 1, 0]}),
    ] {
        let (status, out) = call(&agent, "POST", &format!("{s}/query"), Some(q));
        println!("{} -> {status}: {}", out["kind"], out["result"]);
    }
    let (status, _) = call(&agent, "GET", &format!("{s}/render/1010.png"), None);
    println!("render -> {status}");
    let (status, merged) = call(&agent, "PUT", &format!("{s}/segmentation"), Some(json!({"groups": [[0, 1]]})));
    println!("merge -> {status}: {merged}");
    let (status, err) = call(&agent, "GET", &format!("{base}/sessions/nope"), None);
    println!("unknown -> {status}: {err}");
    drop(rt);
    let _ = std::fs::remove_dir_all(root);
    Ok(())
}
