//! JSON-over-HTTP game service.
//!
//! A session asks `t1` IS questions from the frozen policy, then up to `t2`
//! KA questions about its internal guess, announces the guess and waits for
//! the player's judgment. Judged KA records go to a shared buffer that is
//! committed to the KB when full.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use twentyq_core::agents::{EpisodeHistory, IsPolicy};
use twentyq_core::ka::{
    commit_buffer, gmf_train, select_ka_question, CommitSummary, GmfConfig, GmfModel, KaBuffer, KaRecord,
    KaSelector, RejectRule,
};
use twentyq_core::rng::{derive_seed, seeded, SimRng};
use twentyq_core::{KnowledgeBase, Response};

use crate::agent::Agent;
use crate::kb_file::save_kb;

#[derive(Debug, Clone)]
pub struct ServiceSettings {
    pub t1: usize,
    pub t2: usize,
    pub n_c: usize,
    pub selector: KaSelector,
    pub gmf: GmfConfig,
    pub buffer_size: usize,
    pub reject: RejectRule,
    pub commit_all: bool,
    pub max_sessions: usize,
    pub session_timeout: Duration,
    pub kb_out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        ServiceSettings {
            t1: 17,
            t2: 3,
            n_c: 32,
            selector: KaSelector::LaGmf,
            gmf: GmfConfig::default(),
            buffer_size: 3000,
            reject: RejectRule::default(),
            commit_all: false,
            max_sessions: 256,
            session_timeout: Duration::from_secs(600),
            kb_out: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    AskingIs,
    AskingKa,
    AwaitingJudgment,
    Closed,
}

#[derive(Debug)]
struct Session {
    phase: Phase,
    history: EpisodeHistory,
    /// Question waiting for an answer.
    pending: Option<usize>,
    guess: Option<usize>,
    ka_asked: usize,
    rng: SimRng,
    created: Instant,
    last_activity: Instant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no session `{id}`"))
    }

    fn wrong_phase(phase: Phase, action: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "wrong_phase",
            format!("cannot {action} while the session is {}", phase_name(phase)),
        )
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::AskingIs => "asking-IS",
        Phase::AskingKa => "asking-KA",
        Phase::AwaitingJudgment => "awaiting-judgment",
        Phase::Closed => "closed",
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> HttpResponse {
        let body = serde_json::json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<twentyq_core::Error> for ApiError {
    fn from(e: twentyq_core::Error) -> Self {
        ApiError::internal(e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessView {
    pub entity_id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub question: QuestionView,
    pub asked: usize,
    pub total: usize,
}

/// Reply to an answer: the next question or the guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerReply {
    Question { question: QuestionView, asked: usize, total: usize },
    Guess { guess: GuessView },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentSummary {
    pub questions_asked: usize,
    pub ka_collected: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentReply {
    pub summary: JudgmentSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnView {
    pub question: QuestionView,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub phase: String,
    pub asked: usize,
    pub total: usize,
    pub history: Vec<TurnView>,
    pub question: Option<QuestionView>,
    pub guess: Option<GuessView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub kb_entities: usize,
    pub kb_questions: usize,
}

#[derive(Debug, Deserialize)]
struct AnswerBody {
    response: String,
}

#[derive(Debug, Deserialize)]
struct JudgmentBody {
    correct: bool,
}

struct Shared {
    kb: KnowledgeBase,
    /// Refit after each commit; absent for the uncertainty-only selector.
    model: Option<Arc<GmfModel>>,
}

/// Service state shared by all handlers.
pub struct GameService {
    settings: ServiceSettings,
    policy: Agent,
    shared: RwLock<Shared>,
    buffer: Mutex<KaBuffer>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    ids: Mutex<SimRng>,
    commits: Mutex<Vec<CommitSummary>>,
}

fn fit_model(settings: &ServiceSettings, kb: &KnowledgeBase, round: u64) -> twentyq_core::Result<Option<Arc<GmfModel>>> {
    if settings.t2 == 0 || settings.selector == KaSelector::UncertaintyOnly {
        return Ok(None);
    }
    let config = GmfConfig {
        seed: derive_seed(settings.seed, 1000 + round),
        ..settings.gmf.clone()
    };
    Ok(Some(Arc::new(gmf_train(&kb.indicator_matrix(), &config)?.0)))
}

impl GameService {
    pub fn new(policy: Agent, kb: KnowledgeBase, settings: ServiceSettings) -> twentyq_core::Result<Self> {
        if policy.num_questions() != kb.num_questions() {
            return Err(twentyq_core::Error::InvalidParameter(format!(
                "policy has {} questions, KB has {}",
                policy.num_questions(),
                kb.num_questions()
            )));
        }
        if settings.t1 == 0 || settings.t1 + settings.t2 > kb.num_questions() {
            return Err(twentyq_core::Error::InvalidParameter(format!(
                "t1 = {} and t2 = {} do not fit {} questions",
                settings.t1,
                settings.t2,
                kb.num_questions()
            )));
        }
        if settings.buffer_size == 0 || settings.max_sessions == 0 {
            return Err(twentyq_core::Error::InvalidParameter(
                "buffer size and session capacity must be positive".into(),
            ));
        }
        let model = fit_model(&settings, &kb, 0)?;
        Ok(GameService {
            buffer: Mutex::new(KaBuffer::new(settings.buffer_size)),
            ids: Mutex::new(seeded(derive_seed(settings.seed, 0x1d))),
            settings,
            policy,
            shared: RwLock::new(Shared { kb, model }),
            sessions: Mutex::new(HashMap::new()),
            commits: Mutex::new(Vec::new()),
        })
    }

    pub fn total(&self) -> usize {
        self.settings.t1 + self.settings.t2
    }

    /// A copy of the current KB.
    pub fn kb_snapshot(&self) -> KnowledgeBase {
        self.shared.read().unwrap().kb.clone()
    }

    pub fn buffered(&self) -> Vec<KaRecord> {
        self.buffer.lock().unwrap().records().to_vec()
    }

    pub fn commits(&self) -> Vec<CommitSummary> {
        self.commits.lock().unwrap().clone()
    }

    pub fn health(&self) -> Health {
        let s = self.shared.read().unwrap();
        Health {
            status: "ok".into(),
            kb_entities: s.kb.num_entities(),
            kb_questions: s.kb.num_questions(),
        }
    }

    fn question_view(kb: &KnowledgeBase, q: usize) -> QuestionView {
        let question = &kb.questions()[q];
        QuestionView {
            id: question.id.clone(),
            text: question.text.clone(),
        }
    }

    fn guess_view(kb: &KnowledgeBase, m: usize) -> GuessView {
        let e = &kb.entities()[m];
        GuessView {
            entity_id: e.id.clone(),
            name: e.name.clone(),
        }
    }

    fn session(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    pub fn create_session(&self, now: Instant) -> ApiResult<Created> {
        let mut sessions = self.sessions.lock().unwrap();
        let active = sessions
            .values()
            .filter(|s| s.lock().unwrap().phase != Phase::Closed)
            .count();
        if active >= self.settings.max_sessions {
            return Err(ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "capacity",
                format!("{active} sessions in progress; retry later"),
            ));
        }
        let (id, seed) = {
            let mut ids = self.ids.lock().unwrap();
            loop {
                let id = format!("{:016x}{:016x}", ids.next_u64(), ids.next_u64());
                if !sessions.contains_key(&id) {
                    break (id, ids.next_u64());
                }
            }
        };
        let mut rng = seeded(seed);
        let history = EpisodeHistory::new(self.policy.num_questions());
        let q = self.policy.select(&history, 0.0, &mut rng)?;
        let shared = self.shared.read().unwrap();
        let reply = Created {
            session_id: id.clone(),
            question: Self::question_view(&shared.kb, q),
            asked: 1,
            total: self.total(),
        };
        sessions.insert(
            id,
            Arc::new(Mutex::new(Session {
                phase: Phase::AskingIs,
                history,
                pending: Some(q),
                guess: None,
                ka_asked: 0,
                rng,
                created: now,
                last_activity: now,
            })),
        );
        Ok(reply)
    }

    pub fn submit_answer(&self, id: &str, response: &str, now: Instant) -> ApiResult<AnswerReply> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        if !matches!(s.phase, Phase::AskingIs | Phase::AskingKa) {
            return Err(ApiError::wrong_phase(s.phase, "answer"));
        }
        let x: Response = response
            .parse()
            .map_err(|_| ApiError::invalid(format!("response must be yes, no or unknown, got `{response}`")))?;
        let q = s.pending.take().ok_or_else(|| ApiError::internal("no pending question"))?;
        s.history.push(q, x)?;
        s.last_activity = now;
        let shared = self.shared.read().unwrap();
        let total = self.total();
        if s.phase == Phase::AskingIs && s.history.len() < self.settings.t1 {
            let s = &mut *s;
            let next = self.policy.select(&s.history, 0.0, &mut s.rng)?;
            s.pending = Some(next);
            return Ok(AnswerReply::Question {
                question: Self::question_view(&shared.kb, next),
                asked: s.history.len() + 1,
                total,
            });
        }
        if s.phase == Phase::AskingIs {
            s.guess = Some(self.policy.guess(&s.history, &shared.kb)?);
            s.phase = Phase::AskingKa;
        } else {
            s.ka_asked += 1;
        }
        let guess = s.guess.expect("guess is set before KA");
        if s.ka_asked < self.settings.t2 {
            let s = &mut *s;
            let placeholder;
            let model = match &shared.model {
                Some(m) => m.as_ref(),
                None => {
                    placeholder = GmfModel::zeros(1, 1, 1);
                    &placeholder
                }
            };
            let asked = s.history.asked_mask().to_vec();
            if let Some(next) = select_ka_question(
                self.settings.selector,
                model,
                &shared.kb,
                guess,
                &asked,
                self.settings.n_c,
                &mut s.rng,
            ) {
                s.pending = Some(next);
                return Ok(AnswerReply::Question {
                    question: Self::question_view(&shared.kb, next),
                    asked: s.history.len() + 1,
                    total,
                });
            }
        }
        s.phase = Phase::AwaitingJudgment;
        Ok(AnswerReply::Guess {
            guess: Self::guess_view(&shared.kb, guess),
        })
    }

    pub fn submit_judgment(&self, id: &str, correct: bool, now: Instant) -> ApiResult<JudgmentReply> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        if s.phase != Phase::AwaitingJudgment {
            return Err(ApiError::wrong_phase(s.phase, "judge"));
        }
        let guess = s.guess.expect("guess is set before judgment");
        let records: Vec<KaRecord> = s.history.steps()[self.settings.t1..]
            .iter()
            .map(|&(q, x)| KaRecord {
                entity: guess,
                question: q,
                response: x,
                correct,
            })
            .collect();
        s.phase = Phase::Closed;
        s.last_activity = now;
        let reply = JudgmentReply {
            summary: JudgmentSummary {
                questions_asked: s.history.len(),
                ka_collected: records.len(),
                correct,
            },
        };
        drop(s);
        let mut buffer = self.buffer.lock().unwrap();
        for r in records {
            if buffer.is_full() {
                self.commit(&mut buffer)?;
            }
            buffer.push(r)?;
        }
        if buffer.is_full() {
            self.commit(&mut buffer)?;
        }
        Ok(reply)
    }

    /// Commit the buffer and refit the KA model. Called with the buffer
    /// lock held, so commits serialize.
    fn commit(&self, buffer: &mut KaBuffer) -> ApiResult<()> {
        let mut shared = self.shared.write().unwrap();
        let summary = commit_buffer(buffer, &mut shared.kb, self.settings.commit_all, &self.settings.reject)?;
        let mut commits = self.commits.lock().unwrap();
        commits.push(summary);
        shared.model = fit_model(&self.settings, &shared.kb, commits.len() as u64)?;
        if let Some(path) = &self.settings.kb_out {
            save_kb(&shared.kb, path).map_err(|e| ApiError::internal(e.to_string()))?;
        }
        Ok(())
    }

    pub fn session_view(&self, id: &str) -> ApiResult<SessionView> {
        let session = self.session(id)?;
        let s = session.lock().unwrap();
        let shared = self.shared.read().unwrap();
        let kb = &shared.kb;
        Ok(SessionView {
            session_id: id.to_string(),
            phase: phase_name(s.phase).to_string(),
            asked: s.history.len() + usize::from(s.pending.is_some()),
            total: self.total(),
            history: s
                .history
                .steps()
                .iter()
                .map(|&(q, x)| TurnView {
                    question: Self::question_view(kb, q),
                    response: x.as_str().to_string(),
                })
                .collect(),
            question: s.pending.map(|q| Self::question_view(kb, q)),
            guess: match s.phase {
                Phase::AwaitingJudgment | Phase::Closed => s.guess.map(|m| Self::guess_view(kb, m)),
                _ => None,
            },
        })
    }

    /// Drop sessions idle longer than the timeout, and closed sessions
    /// past it. Nothing is committed. Returns how many open sessions expired.
    pub fn expire_sessions(&self, now: Instant) -> usize {
        let timeout = self.settings.session_timeout;
        let mut sessions = self.sessions.lock().unwrap();
        let mut expired = 0;
        sessions.retain(|_, s| {
            let s = s.lock().unwrap();
            let idle = now.saturating_duration_since(s.last_activity) > timeout;
            if idle && s.phase != Phase::Closed {
                expired += 1;
            }
            !idle
        });
        expired
    }

    /// Age of a session, if it exists.
    pub fn session_age(&self, id: &str, now: Instant) -> Option<Duration> {
        let session = self.session(id).ok()?;
        let created = session.lock().unwrap().created;
        Some(now.saturating_duration_since(created))
    }
}

async fn create(State(svc): State<Arc<GameService>>) -> ApiResult<Json<Created>> {
    svc.create_session(Instant::now()).map(Json)
}

async fn answer(
    State(svc): State<Arc<GameService>>,
    Path(id): Path<String>,
    body: Result<Json<AnswerBody>, JsonRejection>,
) -> ApiResult<Json<AnswerReply>> {
    let Json(body) = body.map_err(|e| ApiError::invalid(e.body_text()))?;
    svc.submit_answer(&id, &body.response, Instant::now()).map(Json)
}

async fn judgment(
    State(svc): State<Arc<GameService>>,
    Path(id): Path<String>,
    body: Result<Json<JudgmentBody>, JsonRejection>,
) -> ApiResult<Json<JudgmentReply>> {
    let Json(body) = body.map_err(|e| ApiError::invalid(e.body_text()))?;
    // A judgment can trigger a commit and a model refit.
    tokio::task::spawn_blocking(move || svc.submit_judgment(&id, body.correct, Instant::now()))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map(Json)
}

async fn state(State(svc): State<Arc<GameService>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    svc.session_view(&id).map(Json)
}

async fn health(State(svc): State<Arc<GameService>>) -> Json<Health> {
    Json(svc.health())
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(service: Arc<GameService>) -> Router {
    Router::new()
        .route("/api/v1/sessions", post(create))
        .route("/api/v1/sessions/{id}", get(state))
        .route("/api/v1/sessions/{id}/answer", post(answer))
        .route("/api/v1/sessions/{id}/judgment", post(judgment))
        .route("/api/v1/health", get(health))
        .fallback(fallback)
        .with_state(service)
}

/// Serve until ctrl-c, expiring idle sessions every few seconds.
pub async fn serve(service: Arc<GameService>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    let reaper = Arc::clone(&service);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(5));
        loop {
            tick.tick().await;
            reaper.expire_sessions(Instant::now());
        }
    });
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
