//! HTTP/JSON play server: a human answers as the Oracle, the trained guesser
//! tracks, the scripted QGen asks.
//!
//! | method | path                  | body                          |
//! |--------|-----------------------|-------------------------------|
//! | POST   | `/games`              | `{seed?, m?, checkpoint?}`    |
//! | POST   | `/games/{id}/target`  | `{object_index}`              |
//! | POST   | `/games/{id}/answer`  | `{answer: "yes"\|"no"\|"na"}` |
//! | GET    | `/games/{id}`         |                               |
//!
//! Errors are `{"error": category, "message": text}` with status 400 (bad
//! input), 404 (unknown session), 409 (wrong phase), 422 (checkpoint cannot
//! be loaded) or 503 (session capacity reached). The target is read only to
//! decide success; it never reaches the tracker.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gst_core::env::{
    generate_scene, qgen_next, Answer, GameRecord, Guesser, QGenPolicy, QaPair, Question, Scene, Vocabulary,
    CATEGORY_NAMES, COLOR_NAMES, NUM_COLORS, SIZE_NAMES,
};
use gst_core::model::Model;
use gst_core::tracker::{final_guess, stop_decision, GuessMode, GuessingState, StopPolicy};
use gst_core::train::Checkpoint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::checkpoint;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub checkpoint: Option<PathBuf>,
    pub max_sessions: usize,
    pub idle_timeout: Duration,
    pub stop: StopPolicy,
    pub static_dir: Option<PathBuf>,
}

struct Loaded {
    ckpt: Checkpoint,
    model: Model,
}

impl Loaded {
    fn open(dir: &Path) -> Result<Arc<Loaded>, String> {
        let ckpt = checkpoint::load(dir).map_err(|e| e.to_string())?;
        let model = ckpt.model().map_err(|e| e.to_string())?;
        Ok(Arc::new(Loaded { ckpt, model }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingTarget,
    AwaitingAnswer,
    Finished,
}

struct Session {
    scene: Scene,
    target: Option<usize>,
    loaded: Arc<Loaded>,
    rounds: Vec<QaPair>,
    states: Vec<Vec<f64>>,
    pending: Option<Question>,
    status: Status,
    guess: Option<usize>,
    created_at: u64,
    last_seen: Instant,
}

pub struct AppState {
    config: ServerConfig,
    default: Option<Arc<Loaded>>,
    cache: Mutex<HashMap<PathBuf, Arc<Loaded>>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    vocab: Vocabulary,
}

impl AppState {
    /// Loads the default checkpoint, if configured, up front.
    pub fn new(config: ServerConfig) -> crate::Result<Arc<AppState>> {
        let default = match &config.checkpoint {
            Some(dir) => {
                let ckpt = checkpoint::load(dir)?;
                let model = ckpt.model()?;
                Some(Arc::new(Loaded { ckpt, model }))
            }
            None => None,
        };
        Ok(Arc::new(AppState {
            config,
            default,
            cache: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
            vocab: Vocabulary::standard(),
        }))
    }

    fn sweep(&self, sessions: &mut HashMap<String, Arc<Mutex<Session>>>) {
        let timeout = self.config.idle_timeout;
        // A session busy in another request is in use, hence not idle.
        sessions.retain(|_, s| s.try_lock().map_or(true, |s| s.last_seen.elapsed() < timeout));
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let mut sessions = self.sessions.lock().unwrap();
        self.sweep(&mut sessions);
        sessions.get(id).cloned().ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not-found", format!("no game {id}")))
    }

    fn checkpoint(&self, requested: Option<&str>) -> Result<Arc<Loaded>, ApiError> {
        let unprocessable = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "checkpoint", m);
        match requested {
            None => self.default.clone().ok_or_else(|| unprocessable("no checkpoint configured".into())),
            Some(p) => {
                let path = PathBuf::from(p);
                if let Some(l) = self.cache.lock().unwrap().get(&path) {
                    return Ok(l.clone());
                }
                let loaded = Loaded::open(&path).map_err(unprocessable)?;
                self.cache.lock().unwrap().insert(path, loaded.clone());
                Ok(loaded)
            }
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    category: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, category: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, category, message: message.into() }
    }

    fn bad(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    fn phase(status: Status) -> Self {
        ApiError::new(StatusCode::CONFLICT, "wrong-phase", format!("game is {}", json!(status)))
    }

    fn internal(e: impl ToString) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.category, "message": self.message }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad(format!("invalid body: {e}")))
}

fn scene_json(scene: &Scene) -> Value {
    let objects: Vec<Value> = scene
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let [x, y, w, h] = o.bbox;
            json!({
                "id": i,
                "category": o.category_id,
                "category_name": CATEGORY_NAMES.get(o.category_id),
                "color": o.attribute_ids.iter().find(|a| **a < NUM_COLORS).map(|c| COLOR_NAMES[*c]),
                "size": o.attribute_ids.iter().find(|a| **a >= NUM_COLORS).and_then(|a| SIZE_NAMES.get(a - NUM_COLORS)),
                "bbox": [x / scene.width, y / scene.height, w / scene.width, h / scene.height],
            })
        })
        .collect();
    json!({ "width": scene.width, "height": scene.height, "objects": objects })
}

fn question_json(q: &Question, vocab: &Vocabulary) -> Value {
    json!({ "text": vocab.decode(&q.tokens), "tokens": q.tokens })
}

fn checked(pi: &[f64]) -> Result<Vec<f64>, ApiError> {
    GuessingState::new(pi.to_vec(), 1e-6).map(GuessingState::into_vec).map_err(ApiError::internal)
}

/// Belief states of the dialogue so far, recomputed on the frozen parameters.
fn replay(loaded: &Loaded, scene: &Scene, rounds: &[QaPair]) -> gst_core::Result<Vec<Vec<f64>>> {
    let guesser = loaded.model.guesser(&loaded.ckpt.store, loaded.ckpt.env.j_max);
    let mut session = guesser.start(scene)?;
    for qa in rounds {
        guesser.observe(&mut session, &qa.question, qa.answer)?;
    }
    Ok(guesser.states(&session).to_vec())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    seed: Option<u64>,
    m: Option<usize>,
    checkpoint: Option<String>,
}

async fn create(State(app): State<Arc<AppState>>, bytes: Bytes) -> ApiResult {
    let req: CreateBody = body(&bytes)?;
    let loaded = app.checkpoint(req.checkpoint.as_deref())?;
    let mut env = loaded.ckpt.env.clone();
    if let Some(m) = req.m {
        env.min_objects = m;
        env.max_objects = m;
        env.validate().map_err(|e| ApiError::bad(format!("m = {m}: {e}")))?;
    }
    let seed = req.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
    let scene = generate_scene(seed, &env).map_err(ApiError::internal)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let payload = json!({ "session_id": id, "scene": scene_json(&scene) });
    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let session = Session {
        states: vec![GuessingState::uniform(scene.len()).into_vec()],
        scene,
        target: None,
        loaded,
        rounds: Vec::new(),
        pending: None,
        status: Status::AwaitingTarget,
        guess: None,
        created_at,
        last_seen: Instant::now(),
    };
    let mut sessions = app.sessions.lock().unwrap();
    app.sweep(&mut sessions);
    if sessions.len() >= app.config.max_sessions {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "capacity", "too many open games"));
    }
    sessions.insert(id, Arc::new(Mutex::new(session)));
    Ok(Json(payload))
}

fn next_question(app: &AppState, s: &Session) -> Result<Option<Question>, ApiError> {
    // GreedySplit never draws from the generator.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = s.loaded.ckpt.env.num_categories;
    match qgen_next(&s.scene, n, &s.rounds, &QGenPolicy::GreedySplit, &app.vocab, &mut rng) {
        Ok(q) => Ok(Some(q)),
        Err(gst_core::Error::Exhausted) => Ok(None),
        Err(e) => Err(ApiError::internal(e)),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetBody {
    object_index: usize,
}

async fn target(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> ApiResult {
    let session = app.session(&id)?;
    let mut s = session.lock().unwrap();
    s.last_seen = Instant::now();
    if s.status != Status::AwaitingTarget {
        return Err(ApiError::phase(s.status));
    }
    let req: TargetBody = body(&bytes)?;
    if req.object_index >= s.scene.len() {
        return Err(ApiError::bad(format!("object_index {} out of {} objects", req.object_index, s.scene.len())));
    }
    let q = next_question(&app, &s)?.ok_or_else(|| ApiError::internal("no question to ask"))?;
    s.target = Some(req.object_index);
    s.status = Status::AwaitingAnswer;
    let payload = json!({ "question": question_json(&q, &app.vocab), "round": 1, "state": checked(&s.states[0])? });
    s.pending = Some(q);
    Ok(Json(payload))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    answer: String,
}

async fn answer(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> ApiResult {
    let session = app.session(&id)?;
    let mut s = session.lock().unwrap();
    s.last_seen = Instant::now();
    if s.status != Status::AwaitingAnswer {
        return Err(ApiError::phase(s.status));
    }
    let req: AnswerBody = body(&bytes)?;
    let answer = match req.answer.trim().to_ascii_lowercase().as_str() {
        "yes" => Answer::Yes,
        "no" => Answer::No,
        "na" => Answer::NotApplicable,
        other => return Err(ApiError::bad(format!("answer must be yes, no or na, got {other:?}"))),
    };
    let question = s.pending.clone().expect("a question is pending while awaiting an answer");
    let mut rounds = s.rounds.clone();
    rounds.push(QaPair { question, answer });
    let states = replay(&s.loaded, &s.scene, &rounds).map_err(ApiError::internal)?;
    let pi = checked(states.last().expect("π⁽⁰⁾"))?;
    s.rounds = rounds;
    s.states = states;
    let j_max = s.loaded.ckpt.env.j_max;
    let mut next = None;
    if s.rounds.len() < j_max && !stop_decision(&s.states, &app.config.stop) {
        next = next_question(&app, &s)?;
    }
    s.pending = next.clone();
    let mut payload = json!({ "state": pi, "round": s.rounds.len(), "finished": next.is_none() });
    match next {
        Some(q) => payload["next_question"] = question_json(&q, &app.vocab),
        None => {
            let guess = final_guess(&pi, GuessMode::Argmax, &mut ChaCha8Rng::seed_from_u64(0)).map_err(ApiError::internal)?;
            s.guess = Some(guess);
            s.status = Status::Finished;
            payload["guess"] = json!(guess);
            payload["success"] = json!(Some(guess) == s.target);
        }
    }
    Ok(Json(payload))
}

async fn view(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let session = app.session(&id)?;
    let mut s = session.lock().unwrap();
    s.last_seen = Instant::now();
    let rounds: Vec<Value> = s
        .rounds
        .iter()
        .zip(&s.states[1..])
        .map(|(qa, pi)| json!({ "question": question_json(&qa.question, &app.vocab), "answer": qa.answer.as_str(), "state": pi }))
        .collect();
    let finished = s.status == Status::Finished;
    Ok(Json(json!({
        "session_id": id,
        "status": s.status,
        "created_at": s.created_at,
        "scene": scene_json(&s.scene),
        "rounds": rounds,
        "states": s.states,
        "pending_question": s.pending.as_ref().map(|q| question_json(q, &app.vocab)),
        "guess": s.guess,
        "target": if finished { s.target } else { None },
        "success": if finished { Some(s.guess == s.target) } else { None },
    })))
}

pub fn router(app: Arc<AppState>) -> Router {
    let static_dir = app.config.static_dir.clone();
    let r = Router::new()
        .route("/games", post(create))
        .route("/games/{id}", get(view))
        .route("/games/{id}/target", post(target))
        .route("/games/{id}/answer", post(answer))
        .with_state(app);
    match static_dir {
        Some(dir) => r.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => r,
    }
}

/// Serves until interrupted.
pub async fn serve(app: Arc<AppState>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// The finished game as a corpus record, e.g. for `inspect`.
pub fn session_record(app: &AppState, id: &str) -> Option<GameRecord> {
    let session = app.sessions.lock().unwrap().get(id).cloned()?;
    let s = session.lock().unwrap();
    Some(GameRecord {
        id: 0,
        scene: s.scene.clone(),
        target_index: s.target?,
        rounds: s.rounds.clone(),
        status: match (s.status, s.guess == s.target) {
            (Status::Finished, true) => gst_core::env::GameStatus::Success,
            (Status::Finished, false) => gst_core::env::GameStatus::Failure,
            _ => gst_core::env::GameStatus::Incomplete,
        },
        guess: s.guess,
        final_pi: s.states.last().cloned(),
        trace: Some(s.states.clone()),
    })
}
