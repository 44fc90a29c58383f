//! Every endpoint against the recorded request/response pairs in fixtures/.
//!
//! Expected bodies are matched as subsets unless the fixture says `exact`;
//! the strings `<string>`, `<number>`, `<bool>`, `<array>` and `<object>`
//! match any value of that JSON type.

mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use tunalab_cli::service::{router, AppState};

use common::{small_bundle, small_models};

fn app(max_body: usize) -> Router {
    let state = AppState::new(small_bundle().clone(), small_models().clone(), 99);
    router(Arc::new(state), max_body)
}

async fn call(app: Router, method: &str, path: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, v)
}

fn type_matches(pattern: &str, v: &Value) -> Option<bool> {
    Some(match pattern {
        "<string>" => v.is_string(),
        "<number>" => v.is_number(),
        "<bool>" => v.is_boolean(),
        "<array>" => v.is_array(),
        "<object>" => v.is_object(),
        _ => return None,
    })
}

fn matches(expect: &Value, got: &Value, exact: bool, at: &str) -> Result<(), String> {
    if let Value::String(p) = expect {
        if let Some(ok) = type_matches(p, got) {
            return if ok {
                Ok(())
            } else {
                Err(format!("{at}: expected {p}, got {got}"))
            };
        }
    }
    match (expect, got) {
        (Value::Object(e), Value::Object(g)) => {
            if exact && e.len() != g.len() {
                return Err(format!(
                    "{at}: keys differ: {:?} vs {:?}",
                    e.keys().collect::<Vec<_>>(),
                    g.keys().collect::<Vec<_>>()
                ));
            }
            for (k, ev) in e {
                let gv = g.get(k).ok_or_else(|| format!("{at}.{k}: missing"))?;
                matches(ev, gv, exact, &format!("{at}.{k}"))?;
            }
            Ok(())
        }
        (Value::Array(e), Value::Array(g)) => {
            if e.len() != g.len() {
                return Err(format!("{at}: length {} vs {}", e.len(), g.len()));
            }
            for (i, (ev, gv)) in e.iter().zip(g).enumerate() {
                matches(ev, gv, exact, &format!("{at}[{i}]"))?;
            }
            Ok(())
        }
        (Value::Number(e), Value::Number(g)) => {
            if (e.as_f64().unwrap() - g.as_f64().unwrap()).abs() <= 1e-9 {
                Ok(())
            } else {
                Err(format!("{at}: expected {e}, got {g}"))
            }
        }
        _ if expect == got => Ok(()),
        _ => Err(format!("{at}: expected {expect}, got {got}")),
    }
}

async fn sample_png(seed: u64) -> String {
    let (_, v) = call(
        app(1 << 20),
        "POST",
        "/api/sample",
        Some(json!({ "seed": seed }).to_string()),
    )
    .await;
    v["image_png_base64"].as_str().unwrap().to_string()
}

/// Replaces `{{sample_png:N}}` placeholders with a sampled image.
async fn expand(v: Value) -> Value {
    match v {
        Value::String(s) if s.starts_with("{{sample_png:") => {
            let seed = s
                .trim_start_matches("{{sample_png:")
                .trim_end_matches("}}")
                .parse()
                .unwrap();
            Value::String(sample_png(seed).await)
        }
        Value::Object(m) => {
            let mut out = serde_json::Map::new();
            for (k, v) in m {
                out.insert(k, Box::pin(expand(v)).await);
            }
            Value::Object(out)
        }
        other => other,
    }
}

async fn run_fixture(name: &str) -> Value {
    let path = format!("{}/tests/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
    let fx: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let body = match (&fx.get("body"), &fx.get("raw_body")) {
        (Some(b), _) => Some(expand((*b).clone()).await.to_string()),
        (None, Some(r)) => Some(r.as_str().unwrap().to_string()),
        _ => None,
    };
    let (status, got) = call(
        app(1 << 20),
        fx["method"].as_str().unwrap(),
        fx["path"].as_str().unwrap(),
        body,
    )
    .await;
    assert_eq!(status.as_u16() as u64, fx["status"].as_u64().unwrap(), "{name}: {got}");
    let exact = fx.get("exact").and_then(Value::as_bool).unwrap_or(false);
    if let Err(e) = matches(&fx["expect"], &got, exact, name) {
        panic!("{e}");
    }
    got
}

#[tokio::test]
async fn health_fixture() {
    let v = run_fixture("health").await;
    assert_eq!(v["models"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn attributes_fixture() {
    run_fixture("attributes").await;
}

#[tokio::test]
async fn sample_fixture_is_deterministic() {
    let a = run_fixture("sample").await;
    let b = run_fixture("sample").await;
    assert_eq!(a, b);
    let png = base64::engine::general_purpose::STANDARD
        .decode(a["image_png_base64"].as_str().unwrap())
        .unwrap();
    assert!(png.starts_with(b"\x89PNG"));
}

#[tokio::test]
async fn identity_edit_matches_sample_bytes() {
    let edit = run_fixture("edit_identity").await;
    let sample = run_fixture("sample").await;
    assert_eq!(edit["image_png_base64"], sample["image_png_base64"]);
    assert_eq!(edit["trajectory"].as_array().unwrap().len(), 1);
    assert_eq!(edit["final_latent"], sample["w_latent"]);
}

#[tokio::test]
async fn glasses_edit_fixture() {
    let a = run_fixture("edit_glasses").await;
    let b = run_fixture("edit_glasses").await;
    assert_eq!(a, b);
    let steps = a["trajectory"].as_array().unwrap();
    assert!(steps.len() > 1);
    assert_eq!(steps[0]["displacement"], json!(0.0));
    assert!(steps[0]["attrs"]["glasses"].is_number());
}

#[tokio::test]
async fn linear_z_edit_fixture() {
    let v = run_fixture("edit_linear_z").await;
    assert_eq!(v["trajectory"].as_array().unwrap().len(), 5);
}

#[tokio::test]
async fn error_fixtures() {
    for name in [
        "edit_unknown_attribute",
        "edit_bad_space",
        "edit_two_sources",
        "edit_malformed",
        "invert_bad_png",
    ] {
        run_fixture(name).await;
    }
}

#[tokio::test]
async fn invert_fixture_round_trips_a_sample() {
    run_fixture("invert").await;
}

#[tokio::test]
async fn latent_source_edit() {
    let sample = run_fixture("sample").await;
    let values = sample["w_latent"]["values"].clone();
    let body =
        json!({ "source": { "latent": values, "latent_space": "w" }, "deltas": {}, "space": "w", "method": "linear" });
    let (status, v) = call(app(1 << 20), "POST", "/api/edit", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["image_png_base64"], sample["image_png_base64"]);
    let bad =
        json!({ "source": { "latent": [1.0, 2.0] }, "deltas": { "glasses": 1 }, "space": "w", "method": "linear" });
    let (status, _) = call(app(1 << 20), "POST", "/api/edit", Some(bad.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn oversized_body_is_413() {
    let big = json!({ "image_png_base64": "A".repeat(4096) }).to_string();
    let (status, v) = call(app(1024), "POST", "/api/invert", Some(big)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE, "{v}");
    assert!(v["error"].is_string());
}

#[tokio::test]
async fn inversion_work_is_capped() {
    let png = sample_png(2).await;
    let body = json!({ "image_png_base64": png, "iters": 100000 }).to_string();
    let (status, _) = call(app(1 << 20), "POST", "/api/invert", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn missing_seed_draws_from_server_seed() {
    let (s1, a) = call(app(1 << 20), "POST", "/api/sample", Some("{}".into())).await;
    let (s2, b) = call(app(1 << 20), "POST", "/api/sample", Some("{}".into())).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    // fresh servers with the same server seed draw the same first seed
    assert_eq!(a["seed"], b["seed"]);
    let (_, again) = call(
        app(1 << 20),
        "POST",
        "/api/sample",
        Some(json!({ "seed": a["seed"] }).to_string()),
    )
    .await;
    assert_eq!(again, a);
}

#[tokio::test]
async fn unknown_route_is_404() {
    let (status, _) = call(app(1 << 20), "GET", "/api/nothing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
