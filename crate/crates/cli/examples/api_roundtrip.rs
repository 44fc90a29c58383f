//! Drives the HTTP API in process: samples a face, then edits it. The same
//! requests work against `tunalab serve`.
//!
//! cargo run -p tunalab-cli --example api_roundtrip

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use tunalab::edits::ModelSet;
use tunalab::faceworld::WorldConfig;
use tunalab::generator::{train_generator, GeneratorHyper, Space};
use tunalab::latent::{fit_from_bundle, ModelKind};
use tunalab::ndmath::RngState;
use tunalab_cli::service::{router, AppState};

async fn post(app: &axum::Router, path: &str, body: Value) -> Value {
    let req = Request::post(path)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    serde_json::from_slice(&bytes).unwrap()
}

#[tokio::main(flavor = "current_thread")]
async fn main() -> tunalab::Result<()> {
    let hyper = GeneratorHyper {
        samples: 8000,
        epochs: 10,
        ..GeneratorHyper::default()
    };
    let bundle = train_generator(&WorldConfig::default(), &hyper, &mut RngState::new(3))?;
    let model = fit_from_bundle(&bundle, Space::W, ModelKind::Nonlinear, 3000, 0)?;
    let app = router(Arc::new(AppState::new(bundle, ModelSet::new(vec![model]), 1)), 1 << 20);

    let sample = post(&app, "/api/sample", json!({ "seed": 7 })).await;
    println!("sample readout {}", sample["readout"]);
    // take the glasses off if present, otherwise put them on
    let delta = if sample["readout"]["glasses"].as_f64() > Some(0.0) {
        -1.0
    } else {
        1.0
    };
    let edit = post(
        &app,
        "/api/edit",
        json!({ "source": { "seed": 7 }, "deltas": { "glasses": delta }, "space": "w", "method": "nonlinear" }),
    )
    .await;
    println!(
        "edit readout {} after {} steps, converged {}",
        edit["readout"],
        edit["trajectory"].as_array().map_or(0, |t| t.len() - 1),
        edit["converged"]
    );
    Ok(())
}
