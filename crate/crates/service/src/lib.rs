//! HTTP steering service for time-varying cartograms.
//!
//! A client uploads a map and its statistics, adjusts parameters, and
//! fetches frames while a background worker computes them nearest to the
//! playhead first. See `openapi.yaml` for the request and response shapes.

mod api;
pub mod error;
pub mod session;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

pub use api::router;
pub use error::ApiError;
pub use session::{FrameStatus, Inputs, Params, Session};

/// Bundled OpenAPI description of the HTTP interface.
pub const OPENAPI: &str = include_str!("../openapi.yaml");

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    /// Directory of the browser frontend, served for unmatched GET paths.
    pub static_dir: Option<PathBuf>,
    /// Sessions and computed frames are saved here and reloaded on start.
    pub persist_dir: Option<PathBuf>,
}

pub struct AppState {
    pub options: ServiceOptions,
    sessions: RwLock<HashMap<String, Session>>,
    counter: AtomicU64,
}

impl AppState {
    /// Reloads persisted sessions, skipping any that no longer parse.
    pub fn new(options: ServiceOptions) -> Arc<AppState> {
        let mut sessions = HashMap::new();
        if let Some(dir) = &options.persist_dir {
            if let Ok(entries) = std::fs::read_dir(dir) {
                for entry in entries.flatten() {
                    let path = entry.path();
                    if !path.join("session.json").is_file() {
                        continue;
                    }
                    match Session::restore(&path) {
                        Ok(s) => {
                            log::info!("restored session {}", s.id());
                            sessions.insert(s.id().to_owned(), s);
                        }
                        Err(e) => log::warn!("cannot restore {}: {e}", path.display()),
                    }
                }
            }
        }
        Arc::new(AppState { options, sessions: RwLock::new(sessions), counter: AtomicU64::new(0) })
    }

    pub fn session(&self, id: &str) -> Option<Session> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    pub fn insert(&self, session: Session) {
        self.sessions.write().unwrap_or_else(|e| e.into_inner()).insert(session.id().to_owned(), session);
    }

    /// A fresh session id derived from the dataset hash and a counter.
    pub fn next_id(&self, dataset_hash: &str) -> String {
        use sha2::{Digest, Sha256};
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
        let digest = Sha256::digest(format!("{dataset_hash}:{n}:{nanos}").as_bytes());
        hex::encode(&digest[..8])
    }
}
