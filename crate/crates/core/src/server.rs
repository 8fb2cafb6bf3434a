//! Retrieval service: JSON over HTTP.
//!
//! * `POST /retrieve` ranks premises for a proof state,
//! * `POST /snapshots` registers a corpus (JSONL text) and embeds it,
//! * `GET /health` reports the model version and registered snapshots.
//!
//! Errors come back as `{"error": code, "detail": text}` with a 4xx status.

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Body;
use axum::extract::{Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::sync::oneshot;

use crate::corpus::{accessible_premises, parse_corpus, Corpus, CorpusError};
use crate::encoder::{Embedding, EncoderModel};
use crate::index::{
    apply_delta_with, build_snapshot, select_premises, IndexError, IndexSnapshot, NewPremise, ScoredPremise,
    SnapshotCache,
};
use crate::mepo::{extract_symbols, mepo_select, premise_symbols, MepoConfig, SymbolSet};

pub const MAX_BODY_BYTES: usize = 4 * 1024 * 1024;
pub const MAX_SNAPSHOT_BYTES: usize = 64 * 1024 * 1024;
pub const MAX_NEW_PREMISES: usize = 10_000;
pub const ADDR_ENV: &str = "PREMSEL_ADDR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8765";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    #[default]
    Neural,
    Mepo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieveRequest {
    pub state: String,
    pub k: usize,
    pub corpus_snapshot_id: String,
    /// Explicit candidate set. When absent, `module` and `decl_index` pick the
    /// accessible premises; when those are absent too, every premise is a
    /// candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decl_index: Option<u32>,
    #[serde(default)]
    pub new_premises: Vec<NewPremise>,
    #[serde(default)]
    pub selector: SelectorKind,
}

impl RetrieveRequest {
    pub fn new(state: impl Into<String>, k: usize, corpus_snapshot_id: impl Into<String>) -> Self {
        RetrieveRequest {
            state: state.into(),
            k,
            corpus_snapshot_id: corpus_snapshot_id.into(),
            candidate_names: None,
            module: None,
            decl_index: None,
            new_premises: Vec::new(),
            selector: SelectorKind::Neural,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub embed_ms: f64,
    pub search_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveResponse {
    pub ranked: Vec<ScoredPremise>,
    pub model_version: String,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotUpload {
    pub jsonl: String,
    #[serde(default)]
    pub blacklist: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotInfo {
    pub corpus_snapshot_id: String,
    pub premises: usize,
    pub model_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_version: String,
    pub snapshots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown corpus snapshot `{0}`")]
    UnknownSnapshot(String),
    #[error("{0}")]
    Malformed(String),
    #[error("body exceeds {0} bytes")]
    PayloadTooLarge(usize),
    #[error("{0} new premises exceeds the limit of {MAX_NEW_PREMISES}")]
    TooManyPremises(usize),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unknown premise `{0}`")]
    UnknownPremise(String),
    #[error("premise `{0}` conflicts with an existing signature")]
    ConflictingPremise(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSnapshot(_) => "unknown_snapshot",
            ServiceError::Malformed(_) => "malformed_request",
            ServiceError::PayloadTooLarge(_) => "payload_too_large",
            ServiceError::TooManyPremises(_) => "too_many_premises",
            ServiceError::InvalidK => "invalid_k",
            ServiceError::UnknownPremise(_) => "unknown_premise",
            ServiceError::ConflictingPremise(_) => "conflicting_premise",
            ServiceError::UnknownModule(_) => "unknown_module",
            ServiceError::Internal(_) => "internal",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownSnapshot(_) => StatusCode::NOT_FOUND,
            ServiceError::PayloadTooLarge(_) | ServiceError::TooManyPremises(_) => StatusCode::PAYLOAD_TOO_LARGE,
            ServiceError::ConflictingPremise(_) => StatusCode::CONFLICT,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: self.code().to_string(),
            detail: self.to_string(),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}

impl From<IndexError> for ServiceError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::UnknownPremise(n) => ServiceError::UnknownPremise(n),
            IndexError::ConflictingPremise(n) => ServiceError::ConflictingPremise(n),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

/// Embedding work done so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedCounts {
    pub states: u64,
    pub snapshot_premises: u64,
    pub new_premises: u64,
    pub signature_cache_hits: u64,
}

#[derive(Debug, Default)]
struct Counters {
    states: AtomicU64,
    snapshot_premises: AtomicU64,
    new_premises: AtomicU64,
    signature_cache_hits: AtomicU64,
}

struct Entry {
    corpus: Corpus,
    snapshot: Arc<IndexSnapshot>,
    symbols: HashMap<String, SymbolSet>,
}

/// Shared state behind the HTTP handlers. Usable in-process as well.
pub struct PremiseService {
    model: EncoderModel,
    registry: RwLock<HashMap<String, Arc<Entry>>>,
    signature_cache: RwLock<HashMap<[u8; 32], Arc<Vec<f64>>>>,
    counters: Counters,
    disk_cache: Option<SnapshotCache>,
    pub mepo: MepoConfig,
}

fn signature_key(signature: &str) -> [u8; 32] {
    Sha256::digest(signature.as_bytes()).into()
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn well_formed_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(char::is_whitespace)
}

impl PremiseService {
    pub fn new(model: EncoderModel) -> Self {
        PremiseService {
            model,
            registry: RwLock::new(HashMap::new()),
            signature_cache: RwLock::new(HashMap::new()),
            counters: Counters::default(),
            disk_cache: None,
            mepo: MepoConfig::default(),
        }
    }

    /// Persist and reuse built snapshots in `cache`.
    pub fn with_disk_cache(mut self, cache: SnapshotCache) -> Self {
        self.disk_cache = Some(cache);
        self
    }

    pub fn model_version(&self) -> &str {
        self.model.version()
    }

    pub fn counts(&self) -> EmbedCounts {
        let c = &self.counters;
        EmbedCounts {
            states: c.states.load(Ordering::Relaxed),
            snapshot_premises: c.snapshot_premises.load(Ordering::Relaxed),
            new_premises: c.new_premises.load(Ordering::Relaxed),
            signature_cache_hits: c.signature_cache_hits.load(Ordering::Relaxed),
        }
    }

    pub fn snapshot_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.registry.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Builds (or reuses) and registers the snapshot for `corpus`. Calling it
    /// again for the same corpus does no embedding work.
    pub fn warm_cache(&self, corpus: Corpus) -> Result<String, ServiceError> {
        let id = corpus.snapshot_id.clone();
        if self.registry.read().contains_key(&id) {
            return Ok(id);
        }
        let cached = match &self.disk_cache {
            Some(c) => c
                .load(&id, self.model.version())
                .map_err(|e| ServiceError::Internal(e.to_string()))?,
            None => None,
        };
        let snapshot = match cached {
            Some(s) => s,
            None => {
                let s = build_snapshot(&self.model, &corpus);
                self.counters
                    .snapshot_premises
                    .fetch_add(s.len() as u64, Ordering::Relaxed);
                if let Some(c) = &self.disk_cache {
                    c.store(&s).map_err(|e| ServiceError::Internal(e.to_string()))?;
                }
                s
            }
        };
        let symbols = corpus
            .premises
            .iter()
            .filter(|p| p.is_eligible())
            .map(|p| (p.name.clone(), premise_symbols(&p.name, &p.signature)))
            .collect();
        let entry = Arc::new(Entry {
            corpus,
            snapshot: Arc::new(snapshot),
            symbols,
        });
        // another request may have raced us; keep whichever landed first
        self.registry.write().entry(id.clone()).or_insert(entry);
        Ok(id)
    }

    pub fn register_jsonl(&self, upload: &SnapshotUpload) -> Result<SnapshotInfo, ServiceError> {
        let mut corpus = parse_corpus(&upload.jsonl).map_err(|e| ServiceError::Malformed(e.to_string()))?;
        if !upload.blacklist.is_empty() {
            corpus.apply_blacklist(upload.blacklist.iter());
        }
        let premises = corpus.premises.iter().filter(|p| p.is_eligible()).count();
        let id = self.warm_cache(corpus)?;
        Ok(SnapshotInfo {
            corpus_snapshot_id: id,
            premises,
            model_version: self.model.version().to_string(),
        })
    }

    fn embed_signature(&self, signature: &str) -> Vec<f64> {
        let key = signature_key(signature);
        if let Some(v) = self.signature_cache.read().get(&key) {
            self.counters.signature_cache_hits.fetch_add(1, Ordering::Relaxed);
            return v.as_ref().clone();
        }
        let v = self.model.encode(signature).vector;
        self.counters.new_premises.fetch_add(1, Ordering::Relaxed);
        self.signature_cache.write().insert(key, Arc::new(v.clone()));
        v
    }

    pub fn handle_retrieve(&self, req: &RetrieveRequest) -> Result<RetrieveResponse, ServiceError> {
        let start = Instant::now();
        if req.k == 0 {
            return Err(ServiceError::InvalidK);
        }
        if req.new_premises.len() > MAX_NEW_PREMISES {
            return Err(ServiceError::TooManyPremises(req.new_premises.len()));
        }
        if let Some(p) = req.new_premises.iter().find(|p| !well_formed_name(&p.name)) {
            return Err(ServiceError::Malformed(format!("bad premise name {:?}", p.name)));
        }
        let entry = self
            .registry
            .read()
            .get(&req.corpus_snapshot_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSnapshot(req.corpus_snapshot_id.clone()))?;

        let candidates: Option<Vec<String>> = match (&req.candidate_names, &req.module) {
            (Some(names), _) => Some(names.clone()),
            (None, Some(module)) => {
                let names = accessible_premises(&entry.corpus, module, req.decl_index.unwrap_or(u32::MAX))
                    .map_err(|e| match e {
                        CorpusError::UnknownModule(m) => ServiceError::UnknownModule(m),
                        other => ServiceError::Internal(other.to_string()),
                    })?;
                Some(
                    names
                        .into_iter()
                        .filter(|n| entry.snapshot.row_of(n).is_some())
                        .collect(),
                )
            }
            (None, None) => None,
        };

        match req.selector {
            SelectorKind::Neural => self.retrieve_neural(req, &entry, candidates, start),
            SelectorKind::Mepo => self.retrieve_mepo(req, &entry, candidates, start),
        }
    }

    fn retrieve_neural(
        &self,
        req: &RetrieveRequest,
        entry: &Entry,
        candidates: Option<Vec<String>>,
        start: Instant,
    ) -> Result<RetrieveResponse, ServiceError> {
        let t = Instant::now();
        let query = Embedding {
            vector: self.model.encode(&req.state).vector,
            model_version: self.model.version().to_string(),
        };
        self.counters.states.fetch_add(1, Ordering::Relaxed);
        let overlay = apply_delta_with(&entry.snapshot, &req.new_premises, |sig| self.embed_signature(sig))?;
        let embed_ms = ms(t);

        let t = Instant::now();
        let candidates = candidates.map(|mut c| {
            c.extend(req.new_premises.iter().map(|p| p.name.clone()));
            c
        });
        let result = select_premises(&query, req.k, candidates.as_deref(), &entry.snapshot, Some(&overlay))?;
        let search_ms = ms(t);
        Ok(RetrieveResponse {
            ranked: result.ranked,
            model_version: self.model.version().to_string(),
            timings: Timings {
                embed_ms,
                search_ms,
                total_ms: ms(start),
            },
        })
    }

    fn retrieve_mepo(
        &self,
        req: &RetrieveRequest,
        entry: &Entry,
        candidates: Option<Vec<String>>,
        start: Instant,
    ) -> Result<RetrieveResponse, ServiceError> {
        let t = Instant::now();
        // same conflict rules as the neural path
        let fresh = crate::index::unseen_premises(&entry.snapshot, &req.new_premises)?;
        let goal = extract_symbols(&req.state);
        let mut pool: Vec<(String, SymbolSet)> = Vec::new();
        let mut seen = BTreeSet::new();
        let base_names: Vec<String> = match candidates {
            Some(c) => c,
            None => entry.snapshot.names().to_vec(),
        };
        for n in base_names {
            if !seen.insert(n.clone()) {
                continue;
            }
            if let Some(s) = entry.symbols.get(&n) {
                pool.push((n, s.clone()));
            } else if let Some(p) = fresh.iter().find(|p| p.name == n) {
                pool.push((n, premise_symbols(&p.name, &p.signature)));
            } else if req.new_premises.iter().all(|p| p.name != n) {
                return Err(ServiceError::UnknownPremise(n));
            }
        }
        for p in fresh {
            if seen.insert(p.name.clone()) {
                pool.push((p.name.clone(), premise_symbols(&p.name, &p.signature)));
            }
        }
        let embed_ms = ms(t);
        let t = Instant::now();
        let sel = mepo_select(&goal, &pool, &self.mepo);
        let ranked = sel
            .last_k(req.k)
            .into_iter()
            .map(|a| ScoredPremise {
                name: a.name.clone(),
                score: a.mark,
            })
            .collect();
        let search_ms = ms(t);
        Ok(RetrieveResponse {
            ranked,
            model_version: self.model.version().to_string(),
            timings: Timings {
                embed_ms,
                search_ms,
                total_ms: ms(start),
            },
        })
    }
}

async fn read_json<T: serde::de::DeserializeOwned>(req: Request, limit: usize) -> Result<T, ServiceError> {
    let body: Body = req.into_body();
    let bytes = axum::body::to_bytes(body, limit)
        .await
        .map_err(|_| ServiceError::PayloadTooLarge(limit))?;
    serde_json::from_slice(&bytes).map_err(|e| ServiceError::Malformed(e.to_string()))
}

async fn retrieve_handler(State(service): State<Arc<PremiseService>>, req: Request) -> Response {
    let request: RetrieveRequest = match read_json(req, MAX_BODY_BYTES).await {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    let result = tokio::task::spawn_blocking(move || service.handle_retrieve(&request)).await;
    match result {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ServiceError::Internal(e.to_string()).into_response(),
    }
}

async fn snapshots_handler(State(service): State<Arc<PremiseService>>, req: Request) -> Response {
    let upload: SnapshotUpload = match read_json(req, MAX_SNAPSHOT_BYTES).await {
        Ok(u) => u,
        Err(e) => return e.into_response(),
    };
    let result = tokio::task::spawn_blocking(move || service.register_jsonl(&upload)).await;
    match result {
        Ok(Ok(info)) => Json(info).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ServiceError::Internal(e.to_string()).into_response(),
    }
}

async fn health_handler(State(service): State<Arc<PremiseService>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_version: service.model_version().to_string(),
        snapshots: service.snapshot_ids(),
    })
}

pub fn router(service: Arc<PremiseService>) -> Router {
    Router::new()
        .route("/retrieve", post(retrieve_handler))
        .route("/snapshots", post(snapshots_handler))
        .route("/health", get(health_handler))
        .with_state(service)
}

/// `--addr` if given, else `$PREMSEL_ADDR`, else the default.
pub fn resolve_addr(flag: Option<&str>) -> String {
    flag.map(str::to_string)
        .or_else(|| std::env::var(ADDR_ENV).ok())
        .unwrap_or_else(|| DEFAULT_ADDR.to_string())
}

/// Serves until the process is stopped.
pub async fn serve(service: Arc<PremiseService>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(service)).await
}

/// A server running on a background thread.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown_inner()
    }

    fn shutdown_inner(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown_inner();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves on its own runtime.
pub fn spawn_server(service: Arc<PremiseService>, addr: &str) -> std::io::Result<ServerHandle> {
    let std_listener = std::net::TcpListener::bind(addr)?;
    std_listener.set_nonblocking(true)?;
    let local = std_listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener)?;
            axum::serve(listener, router(service))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
        })
    });
    Ok(ServerHandle {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{status} {}: {}", body.error, body.detail)]
    Api { status: u16, body: ErrorBody },
    #[error("transport: {0}")]
    Transport(String),
}

/// Reference client for the HTTP protocol.
#[derive(Debug, Clone)]
pub struct RetrievalClient {
    base: String,
    agent: ureq::Agent,
}

impl RetrievalClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        RetrievalClient {
            base: base_url.into().trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().build(),
        }
    }

    fn decode<T: serde::de::DeserializeOwned>(r: Result<ureq::Response, ureq::Error>) -> Result<T, ClientError> {
        match r {
            Ok(resp) => resp.into_json().map_err(|e| ClientError::Transport(e.to_string())),
            Err(ureq::Error::Status(status, resp)) => {
                let body = resp.into_json::<ErrorBody>().unwrap_or_else(|e| ErrorBody {
                    error: "unknown".into(),
                    detail: e.to_string(),
                });
                Err(ClientError::Api { status, body })
            }
            Err(e) => Err(ClientError::Transport(e.to_string())),
        }
    }

    pub fn retrieve(&self, req: &RetrieveRequest) -> Result<RetrieveResponse, ClientError> {
        Self::decode(self.agent.post(&format!("{}/retrieve", self.base)).send_json(req))
    }

    pub fn upload_snapshot(&self, upload: &SnapshotUpload) -> Result<SnapshotInfo, ClientError> {
        Self::decode(self.agent.post(&format!("{}/snapshots", self.base)).send_json(upload))
    }

    pub fn health(&self) -> Result<Health, ClientError> {
        Self::decode(self.agent.get(&format!("{}/health", self.base)).call())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{generate_synthetic, SyntheticSpec};
    use crate::trainer::{initial_model, TrainConfig};

    fn service() -> (PremiseService, String) {
        let corpus = generate_synthetic(&SyntheticSpec {
            num_premises: 40,
            num_states: 10,
            ..Default::default()
        })
        .corpus;
        let model = initial_model(&corpus, &TrainConfig { dim: 16, ..Default::default() });
        let s = PremiseService::new(model);
        let id = s.warm_cache(corpus).unwrap();
        (s, id)
    }

    #[test]
    fn warm_twice_embeds_once() {
        let (s, id) = service();
        let before = s.counts();
        let corpus = s.registry.read()[&id].corpus.clone();
        assert_eq!(s.warm_cache(corpus).unwrap(), id);
        assert_eq!(s.counts(), before);
    }

    #[test]
    fn unknown_snapshot_code() {
        let (s, _) = service();
        let err = s.handle_retrieve(&RetrieveRequest::new("⊢ True", 3, "nope")).unwrap_err();
        assert_eq!(err.code(), "unknown_snapshot");
    }

    #[test]
    fn zero_k_rejected() {
        let (s, id) = service();
        let err = s.handle_retrieve(&RetrieveRequest::new("⊢ True", 0, id)).unwrap_err();
        assert_eq!(err.code(), "invalid_k");
    }

    #[test]
    fn new_premise_embedded_once() {
        let (s, id) = service();
        let mut req = RetrieveRequest::new("⊢ Alg3.op0 x", 5, id);
        req.new_premises = vec![NewPremise {
            name: "local_fact".into(),
            signature: "theorem local_fact : Alg3.op0 x = Alg3.op1 x".into(),
        }];
        let a = s.handle_retrieve(&req).unwrap();
        let b = s.handle_retrieve(&req).unwrap();
        assert_eq!(a.ranked, b.ranked);
        assert_eq!(s.counts().new_premises, 1);
        assert_eq!(s.counts().signature_cache_hits, 1);
    }

    #[test]
    fn conflicting_new_premise() {
        let (s, id) = service();
        let mut req = RetrieveRequest::new("⊢ x", 5, id);
        req.new_premises = vec![NewPremise {
            name: "Synth.lemma_0".into(),
            signature: "theorem different".into(),
        }];
        assert_eq!(s.handle_retrieve(&req).unwrap_err().code(), "conflicting_premise");
    }

    #[test]
    fn mepo_selector_scores_are_marks() {
        let (s, id) = service();
        let mut req = RetrieveRequest::new("⊢ Alg3.op0 x = Alg3.op1 x ∧ Alg3.op2 x = Alg3.op3 x", 5, id);
        req.selector = SelectorKind::Mepo;
        let r = s.handle_retrieve(&req).unwrap();
        assert!(!r.ranked.is_empty());
        assert!(r.ranked.iter().all(|p| p.score > 0.0 && p.score <= 1.0));
    }
}
