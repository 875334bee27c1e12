//! JSON HTTP API over the run store.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use careflow_core::census::{ArrivalFamily, CensusScenario, ScenarioTransform};
use careflow_core::service_need::CaregiverType;
use careflow_core::sim::{summarize, Band, BandKind};
use careflow_core::staffing::{CensusMode, CostModel, EvalOptions};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;
use uuid::Uuid;

use crate::config::{from_value, parse_config};
use crate::error::{core_message, Error, FieldError};
use crate::service;
use crate::store::{sha256_hex, RunRecord, RunStatus, RunStore, PRESETS};

#[derive(Clone)]
pub struct AppState {
    store: Arc<RunStore>,
    cost: Arc<CostModel>,
    runs: Arc<Semaphore>,
}

impl AppState {
    /// `max_concurrent_runs` bounds simulations executing at once; queued
    /// runs stay `pending`.
    pub fn new(store: RunStore, cost: CostModel, max_concurrent_runs: usize) -> Self {
        AppState { store: Arc::new(store), cost: Arc::new(cost), runs: Arc::new(Semaphore::new(max_concurrent_runs)) }
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/fit-los", post(fit_los))
        .route("/api/fit-arrivals", post(fit_arrivals))
        .route("/api/runs", post(create_run).get(list_runs))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/runs/{id}/daily", get(daily))
        .route("/api/runs/{id}/report", get(report))
        .route("/api/scenarios", post(save_scenario).get(list_scenarios))
        .route("/api/sweep", post(sweep))
        .fallback(|| async { ApiError(Error::NotFound("no such endpoint".into())) })
        .with_state(state)
}

pub async fn serve(addr: &str, state: AppState) -> std::io::Result<()> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .try_init();
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl From<careflow_core::Error> for ApiError {
    fn from(e: careflow_core::Error) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let (status, code) = match &e {
            Error::Usage(_) | Error::Config(_) | Error::Data(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            Error::Integrity { .. } | Error::Io { .. } | Error::Internal(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        let mut body = json!({ "code": code, "message": e.to_string() });
        if let Error::Config(fields) = &e {
            body["fields"] = json!(fields);
        }
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            let error_id = Uuid::new_v4();
            tracing::error!(%error_id, "{e}");
            body["error_id"] = json!(error_id);
        }
        (status, Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let value: Value = serde_json::from_slice(body).map_err(|e| Error::config("", format!("malformed JSON: {e}")))?;
    Ok(from_value(value)?)
}

fn parse_id(id: &str) -> ApiResult<Uuid> {
    Uuid::parse_str(id).map_err(|_| ApiError(Error::NotFound(id.to_string())))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| Error::Internal(format!("worker panicked: {e}")))?.map_err(ApiError)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FitLosRequest {
    csv: String,
    #[serde(default = "service::default_disposition_labels")]
    dispositions: Vec<String>,
}

async fn fit_los(body: Bytes) -> ApiResult<Json<Value>> {
    let req: FitLosRequest = parse_body(&body)?;
    let hash = sha256_hex(&body);
    let fit = blocking(move || service::fit_los_reader(req.csv.as_bytes(), &req.dispositions)).await?;
    Ok(Json(json!({ "config_hash": hash, "fit": fit })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FitArrivalsRequest {
    csv: String,
    #[serde(default = "default_family")]
    family: ArrivalFamily,
}

fn default_family() -> ArrivalFamily {
    ArrivalFamily::NegativeBinomial
}

async fn fit_arrivals(body: Bytes) -> ApiResult<Json<Value>> {
    let req: FitArrivalsRequest = parse_body(&body)?;
    let hash = sha256_hex(&body);
    let fit = blocking(move || {
        let counts = service::read_arrival_counts(req.csv.as_bytes())?;
        service::fit_arrival_counts(&counts, req.family)
    })
    .await?;
    Ok(Json(json!({ "config_hash": hash, "fit": fit })))
}

/// Launches a simulation. `scenario` may be given inline or by preset/saved name.
async fn create_run(State(st): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let mut value: Value =
        serde_json::from_slice(&body).map_err(|e| Error::config("", format!("malformed JSON: {e}")))?;
    if let Some(name) = value.get("scenario").and_then(Value::as_str).map(str::to_string) {
        value["scenario"] = serde_json::to_value(st.store.scenario(&name)?).map_err(|e| Error::Internal(e.to_string()))?;
    }
    let cfg = parse_config(value)?;
    let store = st.store.clone();
    let record = blocking(move || store.create_run(cfg)).await?;
    let (id, store, runs) = (record.run_id, st.store.clone(), st.runs.clone());
    tokio::spawn(async move {
        let Ok(_permit) = runs.acquire_owned().await else { return };
        let outcome = tokio::task::spawn_blocking(move || service::execute_run(&store, id)).await;
        match outcome {
            Ok(Ok(_)) => tracing::info!(%id, "run done"),
            Ok(Err(e)) => tracing::warn!(%id, "run failed: {e}"),
            Err(e) => tracing::error!(%id, "run worker panicked: {e}"),
        }
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "run_id": id, "status": record.status, "config_hash": record.config_hash })),
    ))
}

#[derive(Serialize)]
struct RunSummary {
    run_id: Uuid,
    created_at: chrono::DateTime<chrono::Utc>,
    status: RunStatus,
    config_hash: String,
    scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

async fn list_runs(State(st): State<AppState>) -> ApiResult<Json<Value>> {
    let store = st.store.clone();
    let runs: Vec<RunSummary> = blocking(move || store.list())
        .await?
        .into_iter()
        .map(|r: RunRecord| RunSummary {
            run_id: r.run_id,
            created_at: r.created_at,
            status: r.status,
            config_hash: r.config_hash,
            scenario: r.config.scenario.name,
            error: r.error,
        })
        .collect();
    Ok(Json(json!({ "runs": runs })))
}

async fn get_run(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RunRecord>> {
    let id = parse_id(&id)?;
    let store = st.store.clone();
    Ok(Json(blocking(move || store.get(id)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DailyQuery {
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    band: BandKind,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Serialize)]
struct DayBands {
    day: u32,
    census: Band,
    demand: std::collections::BTreeMap<CaregiverType, Band>,
}

async fn daily(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<DailyQuery>,
) -> ApiResult<Json<Value>> {
    let id = parse_id(&id)?;
    let store = st.store.clone();
    let out = blocking(move || service::finished_output(&store, id)).await?;
    let summary = summarize(&out, q.alpha).map_err(|e| {
        let field = if matches!(e, careflow_core::Error::Precondition(_)) { "replications" } else { "alpha" };
        Error::config(field, core_message(&e))
    })?;
    let days: Vec<DayBands> = summary
        .days
        .iter()
        .map(|d| DayBands {
            day: d.day,
            census: d.census.band(q.band),
            demand: CaregiverType::ALL.iter().map(|&k| (k, d.demand[k.index()].band(q.band))).collect(),
        })
        .collect();
    Ok(Json(json!({
        "run_id": id,
        "config_hash": out.config_hash,
        "alpha": q.alpha,
        "band": q.band,
        "replications": summary.replications,
        "warmup_days": out.warmup_days,
        "days": days,
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportQuery {
    strategies: Option<String>,
    #[serde(default = "default_alpha")]
    alpha: f64,
    fixed_census: Option<u32>,
}

fn eval_options(alpha: f64, fixed_census: Option<u32>) -> Result<EvalOptions, Error> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha", "must be in (0, 1)"));
    }
    Ok(EvalOptions { alpha, census_mode: fixed_census.map_or(CensusMode::Daily, |census| CensusMode::Fixed { census }) })
}

async fn report(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<ReportQuery>) -> ApiResult<Json<Value>> {
    let id = parse_id(&id)?;
    let strategies = match q.strategies.as_deref() {
        None | Some("") => service::default_strategies(),
        Some(s) => service::parse_strategies(&s.split(',').collect::<Vec<_>>())?,
    };
    let opts = eval_options(q.alpha, q.fixed_census)?;
    let (store, cost) = (st.store.clone(), st.cost.clone());
    let report = blocking(move || service::report(&store, id, &strategies, &cost, &opts)).await?;
    Ok(Json(serde_json::to_value(report).map_err(|e| Error::Internal(e.to_string()))?))
}

/// Either a complete scenario, or a preset/saved base plus transforms.
enum ScenarioRequest {
    Full(CensusScenario),
    Derived(DerivedScenario),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DerivedScenario {
    name: String,
    #[serde(default = "default_base")]
    base: String,
    #[serde(default)]
    transforms: Vec<ScenarioTransform>,
}

fn default_base() -> String {
    "baseline".into()
}

async fn save_scenario(State(st): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let value: Value = serde_json::from_slice(&body).map_err(|e| Error::config("", format!("malformed JSON: {e}")))?;
    let req = match value.get("scenario") {
        Some(s) => ScenarioRequest::Full(from_value(s.clone()).map_err(|e| prefix(e, "scenario"))?),
        None => ScenarioRequest::Derived(from_value(value)?),
    };
    let store = st.store.clone();
    let (scenario, warnings, path) = blocking(move || {
        let (scenario, warnings) = match req {
            ScenarioRequest::Full(scenario) => (scenario, Vec::new()),
            ScenarioRequest::Derived(d) => {
                let r = store
                    .scenario(&d.base)
                    .map_err(|e| relabel(e, "base"))?
                    .derive(&d.name, &d.transforms)
                    .map_err(|e| Error::config("transforms", core_message(&e)))?;
                (r.scenario, r.warnings)
            }
        };
        let path = store.save_scenario(&scenario)?;
        Ok((scenario, warnings, path))
    })
    .await?;
    let hash = scenario_hash(&scenario);
    Ok((
        StatusCode::CREATED,
        Json(json!({ "config_hash": hash, "scenario": scenario, "warnings": warnings, "path": path })),
    ))
}

fn relabel(e: Error, field: &str) -> Error {
    match e {
        Error::Config(errs) => Error::Config(errs.into_iter().map(|f| FieldError { field: field.into(), message: f.message }).collect()),
        other => other,
    }
}

fn prefix(e: Error, field: &str) -> Error {
    match e {
        Error::Config(errs) => Error::Config(
            errs.into_iter()
                .map(|f| FieldError {
                    field: if f.field.is_empty() { field.into() } else { format!("{field}.{}", f.field) },
                    message: f.message,
                })
                .collect(),
        ),
        other => other,
    }
}

fn scenario_hash(s: &CensusScenario) -> String {
    sha256_hex(serde_json::to_string(s).unwrap_or_default().as_bytes())
}

async fn list_scenarios(State(st): State<AppState>) -> ApiResult<Json<Value>> {
    let store = st.store.clone();
    let saved = blocking(move || store.saved_scenarios()).await?;
    let mut items = Vec::new();
    for name in PRESETS {
        let s = careflow_core::defaults::scenario(name)?;
        items.push(json!({ "name": name, "source": "preset", "config_hash": scenario_hash(&s), "scenario": s }));
    }
    for s in saved {
        items.push(json!({ "name": s.name, "source": "saved", "config_hash": scenario_hash(&s), "scenario": s }));
    }
    Ok(Json(json!({ "scenarios": items })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepRequest {
    run_id: Uuid,
    #[serde(default = "default_type")]
    caregiver_type: CaregiverType,
    #[serde(default = "default_k_min")]
    k_min: u32,
    #[serde(default = "default_k_max")]
    k_max: u32,
    #[serde(default = "default_alpha")]
    alpha: f64,
    fixed_census: Option<u32>,
}

fn default_type() -> CaregiverType {
    CaregiverType::Cna
}
fn default_k_min() -> u32 {
    1
}
fn default_k_max() -> u32 {
    60
}

async fn sweep(State(st): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: SweepRequest = parse_body(&body)?;
    let opts = eval_options(req.alpha, req.fixed_census)?;
    let (store, cost) = (st.store.clone(), st.cost.clone());
    let result =
        blocking(move || service::sweep(&store, req.run_id, req.caregiver_type, req.k_min..=req.k_max, &cost, &opts))
            .await?;
    Ok(Json(serde_json::to_value(result).map_err(|e| Error::Internal(e.to_string()))?))
}
