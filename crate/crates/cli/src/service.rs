//! Session-scoped HTTP API over the planning library.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ggpu_core::analysis::{shipped_benchmarks, speedup_report, BenchmarkRecord, RISCV_AREA_MM2};
use ggpu_core::design::{build_reference_design, read_design, validate_design, Design, Variant};
use ggpu_core::planner::{optimize_to_target, recommend, Recommendation, Spec};
use ggpu_core::tech::{estimate_ppa, PpaEstimate, TechParams};
use ggpu_core::timing::{analyze, layout_floorplan, timing_report, CriticalPath, Floorplan};
use ggpu_core::transforms::{apply, Transform, TransformKind};
use ggpu_core::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

pub const UNDO_DEPTH: usize = 64;
pub const DEFAULT_PORT: u16 = 8080;
pub const PORT_VAR: &str = "GGPU_PORT";

pub struct Session {
    pub id: u64,
    pub design: Design,
    pub undo: VecDeque<Design>,
    pub tech: TechParams,
    pub wire: bool,
}

impl Session {
    fn push(&mut self, next: Design) {
        if self.undo.len() == UNDO_DEPTH {
            self.undo.pop_front();
        }
        self.undo.push_back(std::mem::replace(&mut self.design, next));
    }
}

pub struct AppState {
    sessions: RwLock<HashMap<u64, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    tech: TechParams,
    benchmarks: Vec<BenchmarkRecord>,
}

impl AppState {
    pub fn new(tech: TechParams) -> Self {
        AppState {
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            tech,
            benchmarks: shipped_benchmarks(),
        }
    }

    fn session(&self, id: u64) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))
    }
}

#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Parse { .. } | Error::Usage(_) | Error::Config(_) => StatusCode::BAD_REQUEST,
            Error::State(_) | Error::Calibration(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::CONFLICT,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    let src: &[u8] = if bytes.is_empty() { b"{}" } else { bytes };
    serde_json::from_slice(src).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: u64,
    pub num_cus: u32,
    pub fmax_mhz: f64,
    pub ppa: PpaEstimate,
    pub memory_count: usize,
    pub transform_count: usize,
    pub undo_depth: usize,
}

/// fmax and PPA at that frequency, exactly as the core library computes them.
pub fn design_metrics(d: &Design, p: &TechParams, wire: bool) -> ggpu_core::Result<(f64, PpaEstimate)> {
    let fmax = analyze(d, p, wire, &BTreeMap::new())?.fmax();
    let ppa = estimate_ppa(d, p, fmax)?;
    Ok((fmax, ppa))
}

fn state_of(s: &Session) -> Result<SessionState, ApiError> {
    let (fmax_mhz, ppa) = design_metrics(&s.design, &s.tech, s.wire)?;
    Ok(SessionState {
        id: s.id,
        num_cus: s.design.config.num_cus,
        fmax_mhz,
        ppa,
        memory_count: s.design.memories.len(),
        transform_count: s.design.transform_log.len(),
        undo_depth: s.undo.len(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    num_cus: Option<u32>,
    #[serde(default)]
    variant: Option<String>,
    #[serde(default)]
    design: Option<serde_json::Value>,
    #[serde(default)]
    wire: bool,
}

async fn create_session(State(app): State<Arc<AppState>>, bytes: Bytes) -> Result<(StatusCode, Json<SessionState>), ApiError> {
    let req: CreateSession = body(&bytes)?;
    let design = match req.design {
        Some(doc) => {
            let d = read_design(&doc.to_string())?;
            let v = validate_design(&d);
            if let Some(first) = v.violations.first() {
                return Err(ApiError(
                    StatusCode::BAD_REQUEST,
                    format!("invalid design: {} {}", first.subject, first.message),
                ));
            }
            d
        }
        None => {
            let variant: Variant = req.variant.as_deref().unwrap_or("baseline").parse()?;
            build_reference_design(req.num_cus.unwrap_or(1), variant)?
        }
    };
    let id = app.next_id.fetch_add(1, Ordering::Relaxed);
    let session = Session {
        id,
        design,
        undo: VecDeque::new(),
        tech: app.tech,
        wire: req.wire,
    };
    let state = state_of(&session)?;
    app.sessions
        .write()
        .expect("session table lock")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(state)))
}

async fn delete_session(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    app.sessions
        .write()
        .expect("session table lock")
        .remove(&id)
        .map(|_| StatusCode::NO_CONTENT)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))
}

/// Copy of the session's design and settings, taken under the session lock.
async fn snapshot(app: &AppState, id: u64) -> Result<(Design, TechParams, bool), ApiError> {
    let s = app.session(id)?;
    let s = s.lock().await;
    Ok((s.design.clone(), s.tech, s.wire))
}

async fn get_state(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<SessionState> {
    let s = app.session(id)?;
    let s = s.lock().await;
    Ok(Json(state_of(&s)?))
}

async fn get_design(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Design> {
    Ok(Json(snapshot(&app, id).await?.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingBody {
    pub fmax_mhz: f64,
    pub report: String,
}

async fn get_timing(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<TimingBody> {
    let (d, p, wire) = snapshot(&app, id).await?;
    let a = analyze(&d, &p, wire, &BTreeMap::new())?;
    Ok(Json(TimingBody {
        fmax_mhz: a.fmax(),
        report: timing_report(&a.critical),
    }))
}

async fn get_critical(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<CriticalPath> {
    let (d, p, wire) = snapshot(&app, id).await?;
    Ok(Json(analyze(&d, &p, wire, &BTreeMap::new())?.critical))
}

#[derive(Deserialize)]
struct FreqQuery {
    freq_mhz: Option<f64>,
}

async fn get_ppa(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(q): Query<FreqQuery>,
) -> ApiResult<PpaEstimate> {
    let (d, p, wire) = snapshot(&app, id).await?;
    match q.freq_mhz {
        Some(f) => Ok(Json(estimate_ppa(&d, &p, f)?)),
        None => Ok(Json(design_metrics(&d, &p, wire)?.1)),
    }
}

async fn get_floorplan(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Floorplan> {
    let (d, p, _) = snapshot(&app, id).await?;
    Ok(Json(layout_floorplan(&d, &p)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationBody {
    pub state: SessionState,
    pub applied: Vec<Transform>,
}

async fn post_transform(State(app): State<Arc<AppState>>, Path(id): Path<u64>, bytes: Bytes) -> ApiResult<MutationBody> {
    let kind: TransformKind = body(&bytes)?;
    let s = app.session(id)?;
    let mut s = s.lock().await;
    let next = apply(&s.design, &kind)?;
    let applied = vec![next.transform_log.last().expect("transform logged").clone()];
    s.push(next);
    Ok(Json(MutationBody {
        state: state_of(&s)?,
        applied,
    }))
}

async fn post_undo(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<MutationBody> {
    let s = app.session(id)?;
    let mut s = s.lock().await;
    let prev = s
        .undo
        .pop_back()
        .ok_or_else(|| ApiError(StatusCode::CONFLICT, "nothing to undo".into()))?;
    s.design = prev;
    Ok(Json(MutationBody {
        state: state_of(&s)?,
        applied: Vec::new(),
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRequest {
    target_mhz: f64,
    #[serde(default)]
    max_area_mm2: Option<f64>,
    #[serde(default)]
    max_power_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanBody {
    pub state: SessionState,
    pub applied: Vec<Transform>,
    pub feasible: bool,
    pub achieved_fmax_mhz: f64,
}

async fn post_plan(State(app): State<Arc<AppState>>, Path(id): Path<u64>, bytes: Bytes) -> ApiResult<PlanBody> {
    let req: PlanRequest = body(&bytes)?;
    let s = app.session(id)?;
    let mut s = s.lock().await;
    let spec = Spec {
        max_area_mm2: req.max_area_mm2,
        max_power_w: req.max_power_w,
        ..Spec::new(s.design.config.num_cus, req.target_mhz, s.wire)
    };
    let r = optimize_to_target(&s.design, &s.tech, &spec).map_err(|e| match e {
        Error::Range(m) => ApiError(StatusCode::BAD_REQUEST, m),
        e => e.into(),
    })?;
    if !r.transform_log.is_empty() {
        s.push(r.design);
    }
    Ok(Json(PlanBody {
        state: state_of(&s)?,
        applied: r.transform_log,
        feasible: r.feasible,
        achieved_fmax_mhz: r.achieved_fmax_mhz,
    }))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RecommendRequest {
    #[serde(default)]
    measured_delays: BTreeMap<String, f64>,
    #[serde(default)]
    target_mhz: Option<f64>,
}

async fn recommendation(app: &AppState, id: u64, req: RecommendRequest) -> ApiResult<Recommendation> {
    let (d, p, wire) = snapshot(app, id).await?;
    Ok(Json(recommend(&d, &p, Some(&req.measured_delays), wire, req.target_mhz)?))
}

async fn get_recommendation(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(q): Query<BTreeMap<String, String>>,
) -> ApiResult<Recommendation> {
    let target_mhz = match q.get("target_mhz") {
        Some(v) => Some(
            v.parse()
                .map_err(|_| ApiError(StatusCode::BAD_REQUEST, format!("target_mhz `{v}` is not a number")))?,
        ),
        None => None,
    };
    recommendation(
        &app,
        id,
        RecommendRequest {
            target_mhz,
            ..Default::default()
        },
    )
    .await
}

async fn post_recommendation(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    bytes: Bytes,
) -> ApiResult<Recommendation> {
    let req: RecommendRequest = body(&bytes)?;
    recommendation(&app, id, req).await
}

async fn get_benchmarks(State(app): State<Arc<AppState>>) -> ApiResult<Vec<BenchmarkRecord>> {
    Ok(Json(app.benchmarks.clone()))
}

#[derive(Deserialize)]
struct SpeedupQuery {
    riscv_area_mm2: Option<f64>,
}

/// Speedups with G-GPU areas taken from the 500 MHz reference designs.
async fn get_speedups(
    State(app): State<Arc<AppState>>,
    Query(q): Query<SpeedupQuery>,
) -> ApiResult<ggpu_core::analysis::SpeedupReport> {
    let mut areas = BTreeMap::new();
    for c in ggpu_core::analysis::CU_COLUMNS {
        let d = build_reference_design(c, Variant::Baseline)?;
        areas.insert(c, estimate_ppa(&d, &app.tech, Variant::Baseline.target_mhz())?.total_area_mm2);
    }
    let report = speedup_report(&app.benchmarks, &areas, q.riscv_area_mm2.unwrap_or(RISCV_AREA_MM2))
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    Ok(Json(report))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_state).delete(delete_session))
        .route("/sessions/{id}/design", get(get_design))
        .route("/sessions/{id}/timing", get(get_timing))
        .route("/sessions/{id}/critical-path", get(get_critical))
        .route("/sessions/{id}/ppa", get(get_ppa))
        .route("/sessions/{id}/floorplan", get(get_floorplan))
        .route("/sessions/{id}/transform", post(post_transform))
        .route("/sessions/{id}/undo", post(post_undo))
        .route("/sessions/{id}/plan", post(post_plan))
        .route(
            "/sessions/{id}/recommendation",
            get(get_recommendation).post(post_recommendation),
        )
        .route("/benchmarks", get(get_benchmarks))
        .route("/speedups", get(get_speedups))
        .with_state(state)
}

pub fn default_port() -> u16 {
    std::env::var(PORT_VAR)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}

pub async fn serve(port: u16, tech: TechParams) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::new(tech)))).await
}
