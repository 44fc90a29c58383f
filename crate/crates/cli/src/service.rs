//! JSON-over-HTTP API: sampling, editing and inversion over one loaded bundle.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tunalab::edits::{edit_image, invert, seed_latent, EditRequest, EditSource, InvertConfig, ModelSet, Trajectory};
use tunalab::faceworld::{oracle_label, Attribute, AttributeKind, AttributeVector, Image};
use tunalab::generator::{GeneratorBundle, LatentVector, Space, MODEL_MAGIC, MODEL_VERSION};
use tunalab::latent::{ModelKind, FEATURE_MODEL_MAGIC, FEATURE_MODEL_VERSION};
use tunalab::ndmath::RngState;

use crate::config::{bundle_path, load_bundle, load_model_set, ServiceConfig};
use crate::CliError;

/// Upper bound on per-request work knobs.
const MAX_STEPS: usize = 1000;
const MAX_INVERT_ITERS: usize = 5000;
const MAX_RESTARTS: usize = 16;

pub struct AppState {
    pub bundle: GeneratorBundle,
    pub models: ModelSet,
    pub server_seed: u64,
    requests: AtomicU64,
}

impl AppState {
    pub fn new(bundle: GeneratorBundle, models: ModelSet, server_seed: u64) -> Self {
        Self {
            bundle,
            models,
            server_seed,
            requests: AtomicU64::new(0),
        }
    }

    fn next_request(&self) -> u64 {
        self.requests.fetch_add(1, Ordering::Relaxed)
    }

    /// The request's seed, or one drawn from the server seed (and logged).
    fn seed_for(&self, given: Option<u64>, endpoint: &str) -> u64 {
        if let Some(s) = given {
            return s;
        }
        let n = self.next_request();
        let s = RngState::new(self.server_seed).split(n).next_u64();
        eprintln!("{endpoint}: request {n} drew seed {s}");
        s
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: msg.into(),
        }
    }

    fn internal(detail: impl std::fmt::Display) -> Self {
        let id = format!(
            "{:016x}",
            RngState::new(std::process::id() as u64)
                .split(ERRORS.fetch_add(1, Ordering::Relaxed))
                .next_u64()
        );
        eprintln!("internal error {id}: {detail}");
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: id,
        }
    }
}

static ERRORS: AtomicU64 = AtomicU64::new(0);

impl From<tunalab::Error> for ApiError {
    fn from(e: tunalab::Error) -> Self {
        use tunalab::Error as E;
        match e {
            E::InvalidArgument(_) | E::Format(_) => Self::bad_request(e.to_string()),
            E::InversionFailed { .. } | E::TraversalDiverged { .. } | E::NumericDomain(_) => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                message: e.to_string(),
            },
            other => Self::internal(other),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = if self.status == StatusCode::INTERNAL_SERVER_ERROR {
            json!({ "error": "internal error", "id": self.message })
        } else {
            json!({ "error": self.message })
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn body_json<T: for<'de> Deserialize<'de>>(body: Result<Bytes, BytesRejection>) -> Result<T, ApiError> {
    let bytes = body.map_err(|r| ApiError {
        status: r.status(),
        message: r.body_text(),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

fn png_base64(img: &Image) -> Result<String, ApiError> {
    Ok(B64.encode(img.to_png()?))
}

fn decode_png(field: &str, data: &str) -> Result<Image, ApiError> {
    let bytes = B64
        .decode(data.trim())
        .map_err(|e| ApiError::bad_request(format!("{field}: invalid base64: {e}")))?;
    Image::from_png(&bytes).map_err(|e| ApiError::bad_request(format!("{field}: {e}")))
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Value> {
    let models: Vec<Value> = st
        .models
        .models
        .iter()
        .map(|m| json!({ "kind": m.kind().name(), "space": m.space }))
        .collect();
    Json(json!({
        "status": "ok",
        "generator_format": String::from_utf8_lossy(MODEL_MAGIC),
        "generator_version": MODEL_VERSION,
        "feature_model_format": String::from_utf8_lossy(FEATURE_MODEL_MAGIC),
        "feature_model_version": FEATURE_MODEL_VERSION,
        "bundle": {
            "seed": st.bundle.meta.seed,
            "epochs": st.bundle.meta.epochs,
            "z_dim": st.bundle.z_dim(),
            "w_dim": st.bundle.w_dim(),
        },
        "models": models,
    }))
}

pub fn attributes_payload() -> Value {
    let attrs: Vec<Value> = Attribute::ALL
        .iter()
        .map(|a| {
            let (lo, hi) = a.range();
            json!({
                "name": a.name(),
                "kind": match a.kind() {
                    AttributeKind::Categorical => "categorical",
                    AttributeKind::Numeric => "numeric",
                },
                "range": [lo, hi],
            })
        })
        .collect();
    json!({ "attributes": attrs, "spaces": ["z", "w"], "methods": ["linear", "nonlinear"] })
}

async fn attributes() -> Json<Value> {
    Json(attributes_payload())
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SampleBody {
    seed: Option<u64>,
}

async fn sample(State(st): State<Arc<AppState>>, body: Result<Bytes, BytesRejection>) -> ApiResult {
    let req: SampleBody = body_json(body)?;
    let seed = st.seed_for(req.seed, "/api/sample");
    blocking(move || {
        let z = seed_latent(&st.bundle, seed);
        let w = st.bundle.map_latent(&z)?;
        let img = st.bundle.synthesize(&w)?;
        Ok(Json(json!({
            "seed": seed,
            "image_png_base64": png_base64(&img)?,
            "latent": z,
            "w_latent": w,
            "readout": oracle_label(&img),
        })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditBody {
    source: Value,
    #[serde(default)]
    deltas: BTreeMap<String, f64>,
    space: String,
    method: String,
    alpha: Option<f32>,
    steps: Option<usize>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct StepOut {
    step: usize,
    attrs: AttributeVector,
    displacement: f32,
}

fn parse_source(v: &Value, space: Space) -> Result<EditSource, ApiError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ApiError::bad_request("source must be an object"))?;
    let keys: Vec<&str> = obj
        .keys()
        .map(|k| k.as_str())
        .filter(|k| *k != "latent_space")
        .collect();
    if keys.len() != 1 {
        return Err(ApiError::bad_request(
            "source needs exactly one of seed, latent, image_png_base64",
        ));
    }
    match keys[0] {
        "seed" => obj["seed"]
            .as_u64()
            .map(EditSource::Seed)
            .ok_or_else(|| ApiError::bad_request("source.seed must be a nonnegative integer")),
        "latent" => {
            let values: Vec<f32> = serde_json::from_value(obj["latent"].clone())
                .map_err(|_| ApiError::bad_request("source.latent must be an array of numbers"))?;
            let ls = match obj.get("latent_space") {
                None => space,
                Some(s) => s
                    .as_str()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| ApiError::bad_request("source.latent_space must be \"z\" or \"w\""))?,
            };
            Ok(EditSource::Latent(LatentVector::new(ls, values)?))
        }
        "image_png_base64" => {
            let data = obj["image_png_base64"]
                .as_str()
                .ok_or_else(|| ApiError::bad_request("source.image_png_base64 must be a string"))?;
            Ok(EditSource::Image(decode_png("source.image_png_base64", data)?))
        }
        other => Err(ApiError::bad_request(format!("unknown source field `{other}`"))),
    }
}

fn trajectory_json(t: &Trajectory) -> Vec<StepOut> {
    t.displacements()
        .into_iter()
        .enumerate()
        .map(|(step, displacement)| StepOut {
            step,
            attrs: t.readouts[step],
            displacement,
        })
        .collect()
}

async fn edit(State(st): State<Arc<AppState>>, body: Result<Bytes, BytesRejection>) -> ApiResult {
    let b: EditBody = body_json(body)?;
    let space: Space = b
        .space
        .parse()
        .map_err(|_| ApiError::bad_request(format!("space: unknown latent space `{}`", b.space)))?;
    let method: ModelKind = b
        .method
        .parse()
        .map_err(|_| ApiError::bad_request(format!("method: unknown method `{}`", b.method)))?;
    let mut deltas = Vec::with_capacity(b.deltas.len());
    for (name, v) in &b.deltas {
        let a: Attribute = name
            .parse()
            .map_err(|_| ApiError::bad_request(format!("deltas.{name}: unknown attribute `{name}`")))?;
        deltas.push((a, *v as f32));
    }
    let source = parse_source(&b.source, space)?;
    let mut req = EditRequest::new(source, deltas, space, method);
    if let Some(a) = b.alpha {
        req.alpha = a;
    }
    if let Some(s) = b.steps {
        if s == 0 || s > MAX_STEPS {
            return Err(ApiError::bad_request(format!("steps must lie in [1, {MAX_STEPS}]")));
        }
        req.steps = s;
    }
    let seed = match req.source {
        EditSource::Image(_) => st.seed_for(b.seed, "/api/edit"),
        _ => b.seed.unwrap_or(0),
    };
    req.seed = seed;
    blocking(move || {
        let t = edit_image(&st.bundle, &st.models, &req)?;
        Ok(Json(json!({
            "image_png_base64": png_base64(t.final_image())?,
            "final_latent": t.final_latent(),
            "trajectory": trajectory_json(&t),
            "readout": t.final_readout(),
            "converged": t.converged,
            "seed": seed,
        })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InvertBody {
    image_png_base64: String,
    seed: Option<u64>,
    iters: Option<usize>,
    restarts: Option<usize>,
}

async fn invert_handler(State(st): State<Arc<AppState>>, body: Result<Bytes, BytesRejection>) -> ApiResult {
    let b: InvertBody = body_json(body)?;
    let target = decode_png("image_png_base64", &b.image_png_base64)?;
    let mut cfg = InvertConfig::default();
    if let Some(i) = b.iters {
        if i == 0 || i > MAX_INVERT_ITERS {
            return Err(ApiError::bad_request(format!(
                "iters must lie in [1, {MAX_INVERT_ITERS}]"
            )));
        }
        cfg.iters = i;
    }
    if let Some(r) = b.restarts {
        if r == 0 || r > MAX_RESTARTS {
            return Err(ApiError::bad_request(format!(
                "restarts must lie in [1, {MAX_RESTARTS}]"
            )));
        }
        cfg.restarts = r;
    }
    let seed = st.seed_for(b.seed, "/api/invert");
    blocking(move || {
        let r = invert(&st.bundle, &target, &cfg, &mut RngState::new(seed))?;
        let want = oracle_label(&target);
        let got = oracle_label(&r.reconstruction);
        Ok(Json(json!({
            "latent": r.latent,
            "reconstruction_png_base64": png_base64(&r.reconstruction)?,
            "loss": r.loss,
            "readout": got,
            "target_readout": want,
            "categorical_agreement": want.glasses == got.glasses && want.beard == got.beard,
            "seed": seed,
        })))
    })
    .await
}

pub fn router(state: Arc<AppState>, max_body_bytes: usize) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/attributes", get(attributes))
        .route("/api/sample", post(sample))
        .route("/api/edit", post(edit))
        .route("/api/invert", post(invert_handler))
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state)
}

pub fn serve(cfg: ServiceConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let bundle = load_bundle(&bundle_path(&cfg.model)?)?;
    let models = load_model_set(&cfg.feature_models)?;
    let state = Arc::new(AppState::new(bundle, models, cfg.server_seed));
    let mut app = router(state, cfg.max_body_bytes);
    if let Some(dir) = &cfg.static_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    let addr: SocketAddr = format!("{}:{}", cfg.bind, cfg.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad bind address: {e}")))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {addr}: {e}")))?;
        eprintln!("serving on http://{addr} (server seed {})", cfg.server_seed);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))
    })
}
