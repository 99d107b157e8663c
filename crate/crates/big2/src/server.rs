//! JSON game server for human-vs-agent play.
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/api/sessions` | `{"ai_checkpoint"?: path, "human_seat"?: 0-3, "seed"?: u64}` |
//! | GET | `/api/sessions/{id}` | |
//! | POST | `/api/sessions/{id}/actions` | `{"action": 0-1694}` |
//! | POST | `/api/sessions/{id}/rematch` | |
//!
//! Every success returns a [`SessionResponse`]; failures return
//! `{"code", "message"}` plus `legal_actions` for `IllegalAction`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use big2_core::action::ActionIndex;
use big2_core::env::Table;
use big2_core::game::SEATS;
use big2_core::net::Network;
use big2_core::policy::{Decision, NetworkPolicy, Policy, RandomUniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::evaluation::{load_network, EvalError};
use crate::view::{legal_actions, moves_since, LegalAction, MoveRecord, SeatView};

#[derive(Debug, Clone)]
pub struct ServerOptions {
    /// Drives AI seats when a request names no checkpoint. Random play
    /// when absent.
    pub default_checkpoint: Option<PathBuf>,
    pub deterministic: bool,
    pub idle_timeout: Duration,
    /// Seeds deals for sessions that do not pick their own.
    pub seed: u64,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            default_checkpoint: None,
            deterministic: false,
            idle_timeout: Duration::from_secs(3_600),
            seed: 0,
        }
    }
}

#[derive(Clone)]
struct Ai {
    name: String,
    policy: Arc<dyn Policy + Send>,
}

struct Session {
    table: Table,
    human_seat: u8,
    ai: Ai,
    rng: ChaCha8Rng,
    games: u32,
    tally: [i64; SEATS],
    tallied: bool,
    last_seen: Instant,
}

impl Session {
    fn deal(&mut self, seed: u64) -> Vec<MoveRecord> {
        self.table = Table::deal(seed);
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        self.games += 1;
        self.tallied = false;
        self.advance()
    }

    /// Plays AI seats until the human must act or the game ends and
    /// returns the moves made.
    fn advance(&mut self) -> Vec<MoveRecord> {
        let from = self.table.state().history().len();
        while !self.table.is_done() && self.table.to_act() != self.human_seat {
            let mut d = [Decision {
                table: &self.table,
                mask: self.table.legal_mask(),
                rng: &mut self.rng,
            }];
            let a = self.ai.policy.act(&mut d).expect("policy networks match the encoder")[0];
            self.table.step(a).expect("policies choose legal actions");
        }
        if let (Some(r), false) = (self.table.state().rewards(), self.tallied) {
            for (t, x) in self.tally.iter_mut().zip(r) {
                *t += x as i64;
            }
            self.tallied = true;
        }
        moves_since(self.table.state().history(), from)
    }

    fn response(&self, id: Uuid, replay: Vec<MoveRecord>) -> SessionResponse {
        let state = self.table.state();
        let your_turn = !state.is_done() && state.to_act() == self.human_seat;
        SessionResponse {
            session_id: id.to_string(),
            human_seat: self.human_seat,
            ai_policy: self.ai.name.clone(),
            game: self.games,
            view: SeatView::new(&state.perspective_view(self.human_seat)),
            your_turn,
            legal_actions: if your_turn { legal_actions(state) } else { Vec::new() },
            replay,
            terminal: state.rewards().map(|rewards| Terminal { rewards }),
            tally: Tally {
                games_completed: self.games - u32::from(!state.is_done()),
                totals: self.tally,
            },
            rematch_available: state.is_done(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminal {
    pub rewards: [i32; SEATS],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub games_completed: u32,
    /// Summed rewards per absolute seat.
    pub totals: [i64; SEATS],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_id: String,
    pub human_seat: u8,
    pub ai_policy: String,
    /// 1-based number of the current game within the session.
    pub game: u32,
    pub view: SeatView,
    pub your_turn: bool,
    /// Exactly the legal moves when `your_turn`, otherwise empty.
    pub legal_actions: Vec<LegalAction>,
    /// Moves made while handling this request, oldest first.
    pub replay: Vec<MoveRecord>,
    pub terminal: Option<Terminal>,
    pub tally: Tally,
    pub rematch_available: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub ai_checkpoint: Option<PathBuf>,
    pub human_seat: Option<u8>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitAction {
    pub action: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub legal_actions: Option<Vec<LegalAction>>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                legal_actions: None,
            },
        }
    }

    fn unknown_session(id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session {id:?}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.body_text())
    }
}

struct Shared {
    options: ServerOptions,
    default_ai: Ai,
    networks: Mutex<HashMap<PathBuf, Arc<Network<f32>>>>,
    sessions: Mutex<HashMap<Uuid, Arc<Mutex<Session>>>>,
    deals: AtomicU64,
}

/// Server state shared by all handlers.
#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    /// Loads the default checkpoint, if any.
    pub fn new(options: ServerOptions) -> Result<AppState, EvalError> {
        let mut networks = HashMap::new();
        let default_ai = match &options.default_checkpoint {
            Some(path) => {
                let net = load_network(path)?;
                networks.insert(path.clone(), net.clone());
                network_ai(path, net, options.deterministic)
            }
            None => Ai {
                name: "random".into(),
                policy: Arc::new(RandomUniform),
            },
        };
        Ok(AppState(Arc::new(Shared {
            options,
            default_ai,
            networks: Mutex::new(networks),
            sessions: Mutex::new(HashMap::new()),
            deals: AtomicU64::new(0),
        })))
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.lock().unwrap().len()
    }

    /// Drops sessions idle for longer than the timeout.
    pub fn expire_idle(&self) -> usize {
        let timeout = self.0.options.idle_timeout;
        let mut sessions = self.0.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| s.lock().map(|s| s.last_seen.elapsed() <= timeout).unwrap_or(false));
        before - sessions.len()
    }

    fn next_seed(&self) -> u64 {
        let n = self.0.deals.fetch_add(1, Ordering::Relaxed);
        let mut rng = ChaCha8Rng::seed_from_u64(self.0.options.seed);
        rng.set_stream(n);
        rand::Rng::random(&mut rng)
    }

    fn ai_for(&self, path: Option<&Path>) -> Result<Ai, ApiError> {
        let Some(path) = path else {
            return Ok(self.0.default_ai.clone());
        };
        let cached = self.0.networks.lock().unwrap().get(path).cloned();
        let net = match cached {
            Some(n) => n,
            None => {
                let n = load_network(path)
                    .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "BadCheckpoint", e.to_string()))?;
                self.0.networks.lock().unwrap().insert(path.to_path_buf(), n.clone());
                n
            }
        };
        Ok(network_ai(path, net, self.0.options.deterministic))
    }

    fn session(&self, id: &str) -> Result<(Uuid, Arc<Mutex<Session>>), ApiError> {
        self.expire_idle();
        let uuid = Uuid::parse_str(id).map_err(|_| ApiError::unknown_session(id))?;
        let s = self.0.sessions.lock().unwrap().get(&uuid).cloned();
        s.map(|s| (uuid, s)).ok_or_else(|| ApiError::unknown_session(id))
    }
}

fn network_ai(path: &Path, net: Arc<Network<f32>>, deterministic: bool) -> Ai {
    Ai {
        name: path.display().to_string(),
        policy: Arc::new(NetworkPolicy::new(net, deterministic)),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_state))
        .route("/api/sessions/{id}/actions", post(submit_action))
        .route("/api/sessions/{id}/rematch", post(rematch))
        .with_state(state)
}

async fn create_session(
    State(app): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionResponse>), ApiError> {
    let Json(req) = body?;
    let human_seat = req.human_seat.unwrap_or(0);
    if human_seat as usize >= SEATS {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "BadRequest",
            format!("human_seat must be 0-3, got {human_seat}"),
        ));
    }
    let ai = app.ai_for(req.ai_checkpoint.as_deref())?;
    let seed = req.seed.unwrap_or_else(|| app.next_seed());
    let mut session = Session {
        table: Table::deal(seed),
        human_seat,
        ai,
        rng: ChaCha8Rng::seed_from_u64(0),
        games: 0,
        tally: [0; SEATS],
        tallied: false,
        last_seen: Instant::now(),
    };
    let replay = session.deal(seed);
    let id = Uuid::new_v4();
    let body = session.response(id, replay);
    app.0.sessions.lock().unwrap().insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_state(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionResponse>, ApiError> {
    let (uuid, session) = app.session(&id)?;
    let mut s = session.lock().unwrap();
    s.last_seen = Instant::now();
    Ok(Json(s.response(uuid, Vec::new())))
}

async fn submit_action(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<SubmitAction>, JsonRejection>,
) -> Result<Json<SessionResponse>, ApiError> {
    let (uuid, session) = app.session(&id)?;
    let Json(req) = body?;
    let mut s = session.lock().unwrap();
    s.last_seen = Instant::now();
    let state = s.table.state();
    if state.is_done() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "NotYourTurn",
            "the game is over; request a rematch",
        ));
    }
    if state.to_act() != s.human_seat {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "NotYourTurn",
            format!("seat {} is to act", state.to_act()),
        ));
    }
    let action = usize::try_from(req.action)
        .ok()
        .and_then(ActionIndex::new)
        .filter(|&a| state.legal_mask().is_allowed(a));
    let Some(action) = action else {
        let mut err = ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "IllegalAction",
            format!("action {} is not legal now", req.action),
        );
        err.body.legal_actions = Some(legal_actions(state));
        return Err(err);
    };
    let from = state.history().len();
    s.table.step(action).expect("checked against the legal mask");
    let mut replay = moves_since(s.table.state().history(), from);
    replay.extend(s.advance());
    Ok(Json(s.response(uuid, replay)))
}

async fn rematch(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionResponse>, ApiError> {
    let (uuid, session) = app.session(&id)?;
    let mut s = session.lock().unwrap();
    s.last_seen = Instant::now();
    if !s.table.is_done() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "GameInProgress",
            "finish the current game before a rematch",
        ));
    }
    let replay = s.deal(app.next_seed());
    Ok(Json(s.response(uuid, replay)))
}

/// Serves until `shutdown` resolves, expiring idle sessions periodically.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let sweep = state.0.options.idle_timeout.clamp(Duration::from_secs(1), Duration::from_secs(60));
    let sweeper = {
        let state = state.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(sweep);
            loop {
                tick.tick().await;
                state.expire_idle();
            }
        })
    };
    let result = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await;
    sweeper.abort();
    result
}
