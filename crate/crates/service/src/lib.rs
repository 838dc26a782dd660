//! HTTP JSON API over a trained model directory and discovery artifacts.
//!
//! Models are loaded once into an immutable [`Registry`] snapshot. Requests
//! clone the current snapshot's `Arc`, so a reload swaps the whole registry
//! atomically and in-flight requests finish against the one they started with.

mod error;
pub mod requests;

use std::collections::HashMap;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use ecomix_core::dataset::{bucket_age, AgeBucket, ImpactVector};
use ecomix_core::discovery::{
    generate_candidates, sample_conditions, strength_spectrum_export, targeted_conditions,
    Candidate,
};
use ecomix_core::pipeline::{
    load_models, progression_file, spectrum_file, LoadedModels, CVAE_FILE, REDUCTION_JSON,
};
use ecomix_core::predictors::{predict_impacts, predict_strength};
use ecomix_core::rng;

pub use error::ApiError;

pub const DEFAULT_GENERATE_CAP: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SPECTRUM_SAMPLES: usize = 2_000;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub models_dir: PathBuf,
    /// Where `discover`/`progression` outputs are looked up.
    pub artifacts_dir: PathBuf,
    pub generate_cap: u64,
    /// Candidates generated for a spectrum request with no stored export;
    /// 0 disables on-demand generation.
    pub spectrum_samples: usize,
}

impl ServiceConfig {
    pub fn new(models_dir: impl Into<PathBuf>) -> Self {
        let models_dir = models_dir.into();
        ServiceConfig {
            artifacts_dir: models_dir.clone(),
            models_dir,
            generate_cap: DEFAULT_GENERATE_CAP,
            spectrum_samples: DEFAULT_SPECTRUM_SAMPLES,
        }
    }
}

/// An immutable snapshot of the loaded models; `None` when the directory
/// holds no trained models yet.
#[derive(Debug)]
pub struct Registry {
    pub loaded: Option<LoadedModels>,
}

impl Registry {
    /// Fails when the directory is missing or holds invalid checkpoints; a
    /// directory without checkpoints gives an empty (degraded) registry.
    pub fn load(dir: &Path) -> Result<Self, ecomix_core::Error> {
        if !dir.is_dir() {
            return Err(ecomix_core::Error::Config(format!(
                "models directory {} does not exist",
                dir.display()
            )));
        }
        if !dir.join(CVAE_FILE).exists() {
            return Ok(Registry { loaded: None });
        }
        Ok(Registry {
            loaded: Some(load_models(dir)?),
        })
    }
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServiceConfig>,
    registry: Arc<RwLock<Arc<Registry>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Self, ecomix_core::Error> {
        let registry = Registry::load(&config.models_dir)?;
        Ok(AppState {
            config: Arc::new(config),
            registry: Arc::new(RwLock::new(Arc::new(registry))),
        })
    }

    pub fn snapshot(&self) -> Arc<Registry> {
        self.registry.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Loads a fresh registry and swaps it in; the old one stays on failure.
    pub fn reload(&self) -> Result<Arc<Registry>, ecomix_core::Error> {
        let fresh = Arc::new(Registry::load(&self.config.models_dir)?);
        *self.registry.write().unwrap_or_else(|e| e.into_inner()) = fresh.clone();
        Ok(fresh)
    }

    fn models(&self) -> Result<Arc<Registry>, ApiError> {
        let snap = self.snapshot();
        if snap.loaded.is_none() {
            return Err(ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "models_unavailable",
                "no trained models are loaded",
            ));
        }
        Ok(snap)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict))
        .route("/generate", post(generate))
        .route("/explore/spectrum", get(spectrum))
        .route("/discover/reduction", get(reduction))
        .route("/progression/{bucket}", get(progression))
        .route("/admin/reload", post(reload))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub schema: String,
    pub status: String,
    /// Checkpoint format version of the loaded models.
    pub model_version: Option<String>,
}

fn health_of(reg: &Registry) -> Health {
    Health {
        schema: "health/v1".into(),
        status: if reg.loaded.is_some() { "ok" } else { "degraded" }.into(),
        model_version: reg.loaded.as_ref().map(|l| l.format_version.to_string()),
    }
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(health_of(&state.snapshot()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub schema: String,
    pub bucket: AgeBucket,
    pub strength_mpa: f64,
    pub impacts: ImpactVector,
    pub strength_clamped: bool,
    pub impacts_clamped: bool,
}

async fn predict(State(state): State<AppState>, body: Bytes) -> Result<Json<Prediction>, ApiError> {
    let req = requests::parse_predict(&body)?;
    let snap = state.models()?;
    let loaded = snap.loaded.as_ref().expect("checked by models()");
    let bucket = bucket_age(req.age_days)
        .map_err(|e| ApiError::bad_request("invalid_value", e.to_string()).with_field("age_days"))?;
    let s = predict_strength(&loaded.models.strength, &req.formula, bucket)?;
    let i = predict_impacts(&loaded.models.impact, &req.formula)?;
    Ok(Json(Prediction {
        schema: "prediction/v1".into(),
        bucket,
        strength_mpa: s.strength_mpa,
        impacts: i.impacts,
        strength_clamped: s.clamped,
        impacts_clamped: i.clamped,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub schema: String,
    pub bucket: AgeBucket,
    pub seed: u64,
    pub count: usize,
    /// Sorted by predicted GWP, ascending.
    pub candidates: Vec<Candidate>,
}

async fn generate(State(state): State<AppState>, body: Bytes) -> Result<Json<CandidateList>, ApiError> {
    let req = requests::parse_generate(&body)?;
    if req.count > state.config.generate_cap {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "count_over_cap",
            format!("count {} exceeds the cap of {}", req.count, state.config.generate_cap),
        )
        .with_field("count"));
    }
    let snap = state.models()?;
    let seed = req.seed.unwrap_or(DEFAULT_SEED);
    let list = tokio::task::spawn_blocking(move || {
        let loaded = snap.loaded.as_ref().expect("checked by models()");
        let conditions = targeted_conditions(
            req.count as usize,
            req.bucket,
            loaded.dataset.normalization(),
            req.strength_target_mpa,
            req.impact_targets,
            rng::derive_seed(seed, 0),
        );
        let mut candidates =
            generate_candidates(&loaded.models, &conditions, req.bucket, rng::derive_seed(seed, 1))?;
        candidates.sort_by(|a, b| a.predicted_impacts.gwp.total_cmp(&b.predicted_impacts.gwp));
        Ok::<_, ecomix_core::Error>(CandidateList {
            schema: "candidates/v1".into(),
            bucket: req.bucket,
            seed,
            count: candidates.len(),
            candidates,
        })
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(list))
}

fn json_file(path: &Path, what: &str) -> Result<Response, ApiError> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(ApiError::not_found(format!("no {what} has been produced yet")))
        }
        Err(e) => Err(ApiError::internal(format!("{}: {e}", path.display()))),
    }
}

fn bucket_param(raw: &str) -> Result<AgeBucket, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::not_found(format!("unknown age bucket {raw:?}")).with_field("bucket"))
}

async fn spectrum(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let raw = q.get("bucket").ok_or_else(|| {
        ApiError::bad_request("missing_field", "query parameter bucket is required").with_field("bucket")
    })?;
    let bucket = bucket_param(raw)?;
    let stored = state.config.artifacts_dir.join(spectrum_file(bucket));
    if stored.exists() || state.config.spectrum_samples == 0 {
        return json_file(&stored, "strength spectrum");
    }
    let snap = state.models()?;
    let n = state.config.spectrum_samples;
    let doc = tokio::task::spawn_blocking(move || {
        let loaded = snap.loaded.as_ref().expect("checked by models()");
        let spec = loaded.dataset.normalization();
        let conditions = sample_conditions(n, bucket, spec, rng::derive_seed(DEFAULT_SEED, 2 * bucket.index() as u64));
        let latent_seed = rng::derive_seed(DEFAULT_SEED, 2 * bucket.index() as u64 + 1);
        generate_candidates(&loaded.models, &conditions, bucket, latent_seed)
            .map(|c| strength_spectrum_export(&c, bucket))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(doc).into_response())
}

async fn reduction(State(state): State<AppState>) -> Result<Response, ApiError> {
    json_file(&state.config.artifacts_dir.join(REDUCTION_JSON), "reduction report")
}

async fn progression(State(state): State<AppState>, UrlPath(raw): UrlPath<String>) -> Result<Response, ApiError> {
    let bucket = bucket_param(&raw)?;
    json_file(&state.config.artifacts_dir.join(progression_file(bucket)), "progression report")
}

async fn reload(State(state): State<AppState>) -> Result<Json<Health>, ApiError> {
    let fresh = tokio::task::spawn_blocking(move || state.reload())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "reload_failed", e.to_string()))?;
    Ok(Json(health_of(&fresh)))
}
