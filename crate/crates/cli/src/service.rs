//! Local HTTP/JSON game service.
//!
//! Sessions hold one game each. Human seats act through
//! `POST /sessions/{id}/actions`; agent seats move as soon as it is their
//! turn. Every response is rendered for one viewing seat and never carries
//! another seat's concealed cards.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ddz_core::game::seat_of_role;
use ddz_core::{Action, CardMultiset, GameRecord, GameState, PolicyConfig, PolicyMode};
use ddz_train::agents::{Agent, AgentKind, AgentSpec};
use ddz_train::NetSet;
use futures::stream::{self, Stream, StreamExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{broadcast, Mutex};

use crate::inspect::{deal_with_hands, evaluate, ActionEvaluation};
use crate::latest_checkpoint;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Where `latest` agent specs and evaluations find a checkpoint.
    pub checkpoint_dir: Option<PathBuf>,
    /// Whether human seats may request estimates for their own options.
    pub coach: bool,
}

struct AppState {
    cfg: ServiceConfig,
    sessions: parking_lot::Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

type App = Arc<AppState>;

pub fn router(cfg: ServiceConfig) -> Router {
    let app = Arc::new(AppState { cfg, sessions: Default::default(), next_id: AtomicU64::new(1) });
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_state))
        .route("/sessions/{id}/actions", post(submit_action))
        .route("/sessions/{id}/evaluations", get(get_evaluations))
        .route("/sessions/{id}/events", get(get_events))
        .route("/sessions/{id}/log", get(get_log))
        .with_state(app)
}

struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, msg: impl Into<String>) -> Self {
        ApiError { status, body: json!({ "error": msg.into() }) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<anyhow::Error> for ApiError {
    fn from(e: anyhow::Error) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}"))
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// One step of the public game history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameEvent {
    pub seq: usize,
    /// `bid`, `play` or `finished`.
    pub kind: String,
    pub seat: Option<usize>,
    pub role: Option<String>,
    pub action: Option<String>,
    /// Seat to act next, if the game continues.
    pub next: Option<usize>,
}

struct Session {
    id: String,
    state: GameState,
    fixed_hands: Vec<(usize, CardMultiset)>,
    landlord_cards: CardMultiset,
    seat_labels: [String; 3],
    agents: [Option<Arc<dyn Agent>>; 3],
    evaluator: Option<NetSet>,
    policy: PolicyConfig,
    rng: ChaCha8Rng,
    record: GameRecord,
    cards_left: [usize; 3],
    events: Vec<GameEvent>,
    tx: broadcast::Sender<GameEvent>,
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    #[serde(default)]
    pub seed: u64,
    /// `human` or an agent spec per seat.
    #[serde(default = "default_seats")]
    pub seats: [String; 3],
    #[serde(default)]
    pub policy: Option<PolicyMode>,
    /// Fixed 17-card hands keyed by seat.
    #[serde(default)]
    pub hands: HashMap<usize, String>,
}

fn default_seats() -> [String; 3] {
    ["human".into(), "greedy".into(), "greedy".into()]
}

#[derive(Debug, Deserialize)]
pub struct ActionRequest {
    pub seat: usize,
    /// A bid digit during the auction (`Pass` = 0), card text or `Pass` after.
    pub action: String,
}

#[derive(Debug, Deserialize)]
pub struct SeatQuery {
    pub seat: Option<usize>,
}

#[derive(Debug, Serialize)]
struct SeatView {
    seat: usize,
    player: String,
    role: Option<&'static str>,
    cards_left: usize,
    /// Present only for the viewing seat.
    hand: Option<String>,
}

#[derive(Debug, Serialize)]
struct PlayView {
    seat: usize,
    role: &'static str,
    action: String,
}

#[derive(Debug, Serialize)]
struct OutcomeView {
    result: String,
    landlord_seat: Option<usize>,
    bid_score: u8,
    bomb_count: u8,
    spring: bool,
    /// Per seat, bid × bombs × spring scoring.
    scores: Option<[i64; 3]>,
}

#[derive(Debug, Serialize)]
struct StateView {
    id: String,
    phase: &'static str,
    viewer: Option<usize>,
    to_act: Option<usize>,
    seats: Vec<SeatView>,
    bids: Vec<u8>,
    landlord_cards: Option<String>,
    plays: Vec<PlayView>,
    /// The viewer's options when it is their turn.
    legal: Option<Vec<String>>,
    outcome: Option<OutcomeView>,
}

fn landlord_seat(state: &GameState) -> Option<usize> {
    match state {
        GameState::Bidding(_) => None,
        GameState::Playing(p) => Some(p.landlord_seat),
        GameState::Finished(o) => o.landlord_seat,
    }
}

fn legal_labels(state: &GameState) -> Vec<String> {
    match state {
        GameState::Bidding(b) => b.valid_bids().iter().map(u8::to_string).collect(),
        GameState::Playing(p) => p.legal_actions().iter().map(ToString::to_string).collect(),
        GameState::Finished(_) => Vec::new(),
    }
}

impl Session {
    fn is_human(&self, seat: usize) -> bool {
        self.agents[seat].is_none()
    }

    fn view(&self, viewer: Option<usize>) -> StateView {
        let lord = landlord_seat(&self.state);
        let role_of = |seat: usize| lord.map(|l| ddz_core::game::role_of_seat(l, seat).name());
        let hand = |seat: usize| -> Option<String> {
            if viewer != Some(seat) {
                return None;
            }
            Some(match &self.state {
                GameState::Bidding(b) => b.deal.hands[seat].to_string(),
                GameState::Playing(p) => p.hand(p.role_of(seat)).to_string(),
                GameState::Finished(_) => return None,
            })
        };
        let landlord_cards = match &self.state {
            GameState::Playing(p) => Some(p.landlord_cards.to_string()),
            GameState::Finished(o) if o.landlord_seat.is_some() => Some(self.landlord_cards.to_string()),
            _ => None,
        };
        let to_act = self.state.seat_to_act();
        StateView {
            id: self.id.clone(),
            phase: match self.state {
                GameState::Bidding(_) => "bidding",
                GameState::Playing(_) => "playing",
                GameState::Finished(_) => "finished",
            },
            viewer,
            to_act,
            seats: (0..3)
                .map(|s| SeatView {
                    seat: s,
                    player: self.seat_labels[s].clone(),
                    role: role_of(s),
                    cards_left: self.cards_left[s],
                    hand: hand(s),
                })
                .collect(),
            bids: self.record.bids.clone(),
            landlord_cards,
            plays: self
                .record
                .plays
                .iter()
                .map(|(r, a)| PlayView {
                    seat: seat_of_role(lord.expect("plays imply a landlord"), *r),
                    role: r.name(),
                    action: a.to_string(),
                })
                .collect(),
            legal: (viewer.is_some() && viewer == to_act).then(|| legal_labels(&self.state)),
            outcome: match &self.state {
                GameState::Finished(o) => Some(OutcomeView {
                    result: format!("{:?}", o.result),
                    landlord_seat: o.landlord_seat,
                    bid_score: o.bid_score,
                    bomb_count: o.bomb_count,
                    spring: o.spring,
                    scores: o.adp2_scores.and_then(|s| {
                        let l = o.landlord_seat?;
                        Some([0, 1, 2].map(|seat| s[ddz_core::game::role_of_seat(l, seat).index()]))
                    }),
                }),
                _ => None,
            },
        }
    }

    fn emit(&mut self, kind: &str, seat: Option<usize>, role: Option<&'static str>, action: Option<String>) {
        let event = GameEvent {
            seq: self.events.len(),
            kind: kind.into(),
            seat,
            role: role.map(String::from),
            action,
            next: self.state.seat_to_act(),
        };
        self.events.push(event.clone());
        let _ = self.tx.send(event);
    }

    fn apply_bid(&mut self, seat: usize, bid: u8) -> anyhow::Result<()> {
        self.state = self.state.apply_bid(bid)?;
        self.record.bids.push(bid);
        if let GameState::Playing(p) = &self.state {
            self.cards_left[p.landlord_seat] += 3;
        }
        self.emit("bid", Some(seat), None, Some(bid.to_string()));
        self.finish_if_over();
        Ok(())
    }

    fn apply_play(&mut self, seat: usize, action: Action) -> anyhow::Result<()> {
        let GameState::Playing(p) = &self.state else { anyhow::bail!("not in cardplay") };
        let role = p.to_act;
        self.state = self.state.apply_play(action)?;
        self.record.plays.push((role, action));
        self.cards_left[seat] -= action.num_cards();
        self.emit("play", Some(seat), Some(role.name()), Some(action.to_string()));
        self.finish_if_over();
        Ok(())
    }

    fn finish_if_over(&mut self) {
        if let GameState::Finished(o) = &self.state {
            let result = format!("{:?}", o.result);
            self.emit("finished", None, None, Some(result));
        }
    }

    /// Lets agents move until a human is to act or the game ends.
    fn advance(&mut self) -> anyhow::Result<()> {
        while let Some(seat) = self.state.seat_to_act() {
            let Some(agent) = self.agents[seat].clone() else { break };
            match &self.state {
                GameState::Bidding(b) => {
                    let bid = agent.bid(b, &mut self.rng)?;
                    self.apply_bid(seat, bid)?;
                }
                GameState::Playing(p) => {
                    let legal = p.legal_actions();
                    let action = legal[agent.play(p, &legal, &mut self.rng)?];
                    self.apply_play(seat, action)?;
                }
                GameState::Finished(_) => break,
            }
        }
        Ok(())
    }

    /// Log text that `inspect::parse_state_file` reads back.
    fn log_text(&self) -> String {
        let mut out = String::new();
        for (seat, hand) in &self.fixed_hands {
            out.push_str(&format!("hand{seat}: {hand}\n"));
        }
        out.push_str(&self.record.to_string());
        out
    }
}

impl AppState {
    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id}")))
    }

    fn resolve_spec(&self, text: &str) -> ApiResult<AgentSpec> {
        let (head, tail) = text.split_once('@').map_or((text, None), |(h, t)| (h, Some(t)));
        let text = if head == "latest" {
            let path = self.default_checkpoint().ok_or_else(|| {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no checkpoint directory configured")
            })?;
            match tail {
                Some(t) => format!("{}@{t}", path.display()),
                None => path.display().to_string(),
            }
        } else {
            text.to_string()
        };
        text.parse().map_err(|e: ddz_train::TrainError| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
    }

    fn default_checkpoint(&self) -> Option<PathBuf> {
        latest_checkpoint(self.cfg.checkpoint_dir.as_deref()?)
    }
}

fn unprocessable(msg: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, msg)
}

async fn create_session(State(app): State<App>, Json(req): Json<CreateRequest>) -> ApiResult<Response> {
    let mut fixed = Vec::new();
    for (&seat, cards) in &req.hands {
        fixed.push((seat, cards.parse::<CardMultiset>().map_err(|e| unprocessable(e.to_string()))?));
    }
    fixed.sort_by_key(|(s, _)| *s);
    let deal = deal_with_hands(req.seed, &fixed).map_err(|e| unprocessable(e.to_string()))?;
    let policy = req.policy.map(PolicyConfig::with_mode).unwrap_or_default();

    let mut agents: [Option<Arc<dyn Agent>>; 3] = [None, None, None];
    let mut labels: [String; 3] = Default::default();
    let mut evaluator = None;
    for (seat, text) in req.seats.iter().enumerate() {
        if text.trim().eq_ignore_ascii_case("human") {
            labels[seat] = "human".into();
            continue;
        }
        let mut spec = app.resolve_spec(text.trim())?;
        if let AgentKind::Checkpoint { policy: p, .. } = &mut spec.kind {
            if req.policy.is_some() {
                *p = policy;
            }
        }
        let built = spec.build().map_err(|e| unprocessable(e.to_string()))?;
        if let (None, AgentKind::Checkpoint { path, .. }) = (&evaluator, &spec.kind) {
            evaluator = Some(NetSet::load(path).map_err(|e| unprocessable(e.to_string()))?);
        }
        labels[seat] = spec.label.clone();
        agents[seat] = Some(built.agent);
    }
    if evaluator.is_none() {
        if let Some(path) = app.default_checkpoint() {
            evaluator = NetSet::load(path).ok();
        }
    }

    let id = app.next_id.fetch_add(1, Ordering::Relaxed).to_string();
    let (tx, _) = broadcast::channel(256);
    let mut session = Session {
        id: id.clone(),
        landlord_cards: deal.landlord_cards,
        state: GameState::new(deal),
        fixed_hands: fixed,
        seat_labels: labels,
        agents,
        evaluator,
        policy,
        rng: ChaCha8Rng::seed_from_u64(req.seed ^ 0x5e55),
        record: GameRecord::new(req.seed),
        cards_left: [17; 3],
        events: Vec::new(),
        tx,
    };
    session.advance()?;
    let viewer = (0..3).find(|&s| session.is_human(s));
    let view = session.view(viewer);
    app.sessions.lock().insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

fn check_viewer(session: &Session, seat: Option<usize>) -> ApiResult<Option<usize>> {
    match seat {
        Some(s) if s >= 3 => Err(unprocessable(format!("seat {s} out of range"))),
        Some(s) if !session.is_human(s) => {
            Err(ApiError::new(StatusCode::FORBIDDEN, format!("seat {s} is not a human seat")))
        }
        other => Ok(other),
    }
}

async fn get_state(State(app): State<App>, Path(id): Path<String>, Query(q): Query<SeatQuery>) -> ApiResult<Json<StateView>> {
    let session = app.session(&id)?;
    let session = session.lock().await;
    let viewer = check_viewer(&session, q.seat)?;
    Ok(Json(session.view(viewer)))
}

async fn submit_action(
    State(app): State<App>,
    Path(id): Path<String>,
    Json(req): Json<ActionRequest>,
) -> ApiResult<Json<StateView>> {
    let session = app.session(&id)?;
    let mut session = session.lock().await;
    check_viewer(&session, Some(req.seat))?;
    if session.state.seat_to_act() != Some(req.seat) {
        return Err(ApiError::new(StatusCode::CONFLICT, format!("not seat {}'s turn", req.seat)));
    }
    let illegal = |session: &Session, why: String| ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        body: json!({ "error": why, "legal": legal_labels(&session.state) }),
    };
    let text = req.action.trim();
    match &session.state {
        GameState::Bidding(b) => {
            let bid = if text.eq_ignore_ascii_case("pass") { Some(0) } else { text.parse::<u8>().ok() };
            match bid {
                Some(v) if b.valid_bids().contains(&v) => session.apply_bid(req.seat, v)?,
                _ => return Err(illegal(&session, format!("\"{text}\" is not a valid bid"))),
            }
        }
        GameState::Playing(p) => {
            let parsed: Option<Action> = text.parse().ok();
            let chosen = parsed.and_then(|a| {
                p.legal_actions().into_iter().find(|l| l.cards == a.cards && l.is_pass() == a.is_pass())
            });
            match chosen {
                Some(a) => session.apply_play(req.seat, a)?,
                None => return Err(illegal(&session, format!("\"{text}\" is not legal here"))),
            }
        }
        GameState::Finished(_) => unreachable!("finished games have no seat to act"),
    }
    session.advance()?;
    Ok(Json(session.view(Some(req.seat))))
}

#[derive(Debug, Serialize)]
struct EvaluationsView {
    seat: usize,
    policy: PolicyMode,
    evaluations: Vec<ActionEvaluation>,
}

async fn get_evaluations(
    State(app): State<App>,
    Path(id): Path<String>,
    Query(q): Query<SeatQuery>,
) -> ApiResult<Json<EvaluationsView>> {
    let session = app.session(&id)?;
    let session = session.lock().await;
    let seat = q.seat.ok_or_else(|| unprocessable("seat is required"))?;
    check_viewer(&session, Some(seat))?;
    if !app.cfg.coach {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "coach mode is off"));
    }
    if session.state.seat_to_act() != Some(seat) {
        return Err(ApiError::new(StatusCode::CONFLICT, format!("not seat {seat}'s turn")));
    }
    let nets = session.evaluator.as_ref().ok_or_else(|| unprocessable("no checkpoint loaded"))?;
    let evaluations = evaluate(nets, &session.state, &session.policy)?.expect("game in progress");
    Ok(Json(EvaluationsView { seat, policy: session.policy.mode, evaluations }))
}

/// Past events, then live ones; the stream ends after `finished`.
async fn get_events(
    State(app): State<App>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>> {
    let session = app.session(&id)?;
    let (past, rx) = {
        let s = session.lock().await;
        (s.events.clone(), s.tx.subscribe())
    };
    let done = past.iter().any(|e| e.kind == "finished");
    let last_seq = past.last().map(|e| e.seq);
    let live = stream::unfold((rx, done), move |(mut rx, done)| async move {
        if done {
            return None;
        }
        loop {
            match rx.recv().await {
                Ok(e) if last_seq.is_some_and(|l| e.seq <= l) => continue,
                Ok(e) => {
                    let finished = e.kind == "finished";
                    return Some((e, (rx, finished)));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    let events = stream::iter(past).chain(live).map(|e| {
        Ok(SseEvent::default().event(e.kind.clone()).json_data(&e).expect("event serialises"))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

async fn get_log(State(app): State<App>, Path(id): Path<String>) -> ApiResult<String> {
    let session = app.session(&id)?;
    let session = session.lock().await;
    // The seed determines every hand, so the log waits for the end.
    if !session.state.is_finished() {
        return Err(ApiError::new(StatusCode::CONFLICT, "game still in progress"));
    }
    Ok(session.log_text())
}
