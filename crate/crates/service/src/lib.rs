//! HTTP API over one loaded model, its explanation context and an optional
//! rule cache. Every response is a pure function of the loaded state and
//! the request body.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use creditlens_core::data::load_dataset;
use creditlens_core::explain::{Engine, ExplainSettings};
use creditlens_core::riskmodel::load_model;
use creditlens_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_MODEL_PATH: &str = "data/fico/demo_model.toml";
pub const DEFAULT_DATA_PATH: &str = "data/fico/synthetic_fico.csv";
pub const DEFAULT_UI_DIR: &str = "webui/dist";

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub bind_addr: SocketAddr,
    pub model_path: PathBuf,
    pub data_path: PathBuf,
    pub cache_path: Option<PathBuf>,
    pub solver_time_limit: Duration,
    pub min_support: usize,
    /// Allowed browser origin; any origin when unset.
    pub cors_origin: Option<String>,
    pub ui_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        let settings = ExplainSettings::default();
        Config {
            bind_addr: DEFAULT_BIND_ADDR.parse().expect("default address parses"),
            model_path: DEFAULT_MODEL_PATH.into(),
            data_path: DEFAULT_DATA_PATH.into(),
            cache_path: None,
            solver_time_limit: settings.rules.solve.time_limit,
            min_support: settings.rules.min_support,
            cors_origin: None,
            ui_dir: DEFAULT_UI_DIR.into(),
        }
    }
}

impl Config {
    /// Reads BIND_ADDR, MODEL_PATH, DATA_PATH, CACHE_PATH,
    /// SOLVER_TIME_LIMIT_SECS, MIN_SUPPORT, CORS_ORIGIN and UI_DIR.
    pub fn from_env() -> Result<Config, StartupError> {
        Config::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Config, StartupError> {
        let mut c = Config::default();
        if let Some(v) = get("BIND_ADDR") {
            c.bind_addr = v
                .parse()
                .map_err(|_| StartupError::Config(format!("BIND_ADDR {v:?} is not a socket address")))?;
        }
        if let Some(v) = get("MODEL_PATH") {
            c.model_path = v.into();
        }
        if let Some(v) = get("DATA_PATH") {
            c.data_path = v.into();
        }
        c.cache_path = get("CACHE_PATH").filter(|v| !v.is_empty()).map(PathBuf::from);
        if let Some(v) = get("SOLVER_TIME_LIMIT_SECS") {
            c.solver_time_limit = parse_seconds(&v)
                .ok_or_else(|| StartupError::Config(format!("SOLVER_TIME_LIMIT_SECS {v:?} is not a positive number")))?;
        }
        if let Some(v) = get("MIN_SUPPORT") {
            c.min_support = v
                .parse()
                .map_err(|_| StartupError::Config(format!("MIN_SUPPORT {v:?} is not a count")))?;
        }
        c.cors_origin = get("CORS_ORIGIN").filter(|v| !v.is_empty());
        if let Some(o) = &c.cors_origin {
            HeaderValue::from_str(o).map_err(|_| StartupError::Config(format!("CORS_ORIGIN {o:?} is not a header value")))?;
        }
        if let Some(v) = get("UI_DIR") {
            c.ui_dir = v.into();
        }
        Ok(c)
    }
}

pub fn parse_seconds(text: &str) -> Option<Duration> {
    let secs: f64 = text.trim().parse().ok()?;
    (secs.is_finite() && secs > 0.0).then(|| Duration::from_secs_f64(secs))
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl StartupError {
    /// 2 for bad configuration or inconsistent inputs, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            StartupError::Config(_) => 2,
            StartupError::Core(e) => core_exit_code(e),
            StartupError::Io(_) => 1,
        }
    }
}

/// Exit code for a core error: 2 when the inputs or configuration are at
/// fault, 1 for failures while running.
pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Io { .. }
        | CoreError::Parse(_)
        | CoreError::Schema(_)
        | CoreError::Version { .. }
        | CoreError::SchemaMismatch(_)
        | CoreError::InvalidArgument(_)
        | CoreError::CacheMismatch { .. }
        | CoreError::CacheCorrupt(_) => 2,
        _ => 1,
    }
}

pub struct AppState {
    pub engine: Engine,
    pub settings: ExplainSettings,
}

impl AppState {
    pub fn new(engine: Engine, cfg: &Config) -> AppState {
        let mut settings = ExplainSettings::default();
        settings.rules.solve.time_limit = cfg.solver_time_limit;
        settings.rules.min_support = cfg.min_support;
        settings.rules.fallback_support = settings.rules.fallback_support.min(cfg.min_support);
        AppState { engine, settings }
    }

    /// Loads the model, the training snapshot and, when configured, the
    /// rule cache, which must have been built for this model and data.
    pub fn load(cfg: &Config) -> Result<AppState, StartupError> {
        let model = load_model(&cfg.model_path)?;
        let data = load_dataset(&cfg.data_path, &model.schema)?;
        let mut engine = Engine::with_default_threshold(model, data)?;
        if let Some(path) = &cfg.cache_path {
            if !path.exists() {
                return Err(StartupError::Config(format!("rule cache {} does not exist", path.display())));
            }
            engine.attach_cache(path)?;
        }
        Ok(AppState::new(engine, cfg))
    }
}

pub fn router(state: Arc<AppState>, cfg: &Config) -> Router {
    let cors = match &cfg.cors_origin {
        // an unparsable origin allows none
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(v),
            Err(_) => CorsLayer::new(),
        },
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);
    let api = Router::new()
        .route("/predict", post(predict))
        .route("/explain", post(explain))
        .route("/model", get(model))
        .route("/healthz", get(healthz))
        .route("/version", get(version))
        .with_state(state);
    Router::new()
        .nest("/v1", api)
        .nest_service("/ui", ServeDir::new(&cfg.ui_dir).append_index_html_on_directories(true))
        .layer(cors)
}

/// Binds, serves until ctrl-c, and returns.
pub async fn serve(cfg: Config) -> Result<(), StartupError> {
    let state = {
        let cfg = cfg.clone();
        tokio::task::spawn_blocking(move || AppState::load(&cfg))
            .await
            .map_err(|e| StartupError::Io(std::io::Error::other(e)))??
    };
    tracing::info!(
        fingerprint = state.engine.fingerprint(),
        rows = state.engine.dataset.len(),
        cache = state.engine.cache.as_ref().map(|c| c.len()),
        "model loaded"
    );
    let app = router(Arc::new(state), &cfg);
    let listener = tokio::net::TcpListener::bind(cfg.bind_addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Unprocessable(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "malformed_request", m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, "schema_mismatch", m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m),
        };
        (status, Json(json!({ "error": kind, "message": message }))).into_response()
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::SchemaMismatch(_) => ApiError::Unprocessable(e.to_string()),
            CoreError::InvalidArgument(_) => ApiError::BadRequest(e.to_string()),
            _ => ApiError::Internal(e.to_string()),
        }
    }
}

/// Request body for both POST endpoints. `options` only affects /explain.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRequest {
    pub observation: Map<String, Value>,
    #[serde(default)]
    pub options: RequestOptions,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RequestOptions {
    /// Number of protective terms to list.
    pub protective: Option<usize>,
    pub cases: Option<usize>,
    pub show_labels: Option<bool>,
}

fn parse_request(body: &[u8]) -> Result<ObservationRequest, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req = parse_request(&body)?;
    let x = state.engine.observation(&req.observation)?;
    Ok(Json(state.engine.predict(&x)?).into_response())
}

async fn explain(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req = parse_request(&body)?;
    let x = state.engine.observation(&req.observation)?;
    let mut settings = state.settings.clone();
    if let Some(k) = req.options.protective {
        settings.protective = k;
    }
    if let Some(k) = req.options.cases {
        settings.n_cases = k;
    }
    if let Some(b) = req.options.show_labels {
        settings.show_labels = b;
    }
    let payload = tokio::task::spawn_blocking(move || state.engine.explain(&x, &settings))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let status = if payload.timed_out {
        StatusCode::GATEWAY_TIMEOUT
    } else {
        StatusCode::OK
    };
    Ok((status, Json(payload)).into_response())
}

async fn model(State(state): State<Arc<AppState>>) -> Response {
    Json(state.engine.model_payload()).into_response()
}

async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    Json(json!({ "status": "ok", "model_fingerprint": state.engine.fingerprint() })).into_response()
}

async fn version(State(state): State<Arc<AppState>>) -> Response {
    let e = &state.engine;
    Json(json!({
        "name": "creditlens",
        "version": env!("CARGO_PKG_VERSION"),
        "api": "v1",
        "model_fingerprint": e.fingerprint(),
        "context_hash": e.ctx.hash(),
        "cache_rules": e.cache.as_ref().map(|c| c.len()),
    }))
    .into_response()
}
