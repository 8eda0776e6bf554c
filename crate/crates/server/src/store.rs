use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use batchlab::calibration::{TreatmentKind, TreatmentSpec};
use batchlab::des::generate_sample_path;
use batchlab::session::{
    parse_log, registered_path, replay, to_jsonl, LogRecord, Mode, Session,
};

use crate::error::ApiError;

/// A session plus how much of its log is already on disk.
#[derive(Debug)]
pub struct Entry {
    pub session: Session,
    header: bool,
    commit: bool,
    decisions: usize,
    events: usize,
    payoff: bool,
}

impl Entry {
    fn new(session: Session) -> Self {
        Self {
            session,
            header: false,
            commit: false,
            decisions: 0,
            events: 0,
            payoff: false,
        }
    }

    /// Records produced since the last call, oldest first.
    fn unwritten(&mut self) -> Vec<LogRecord> {
        let s = &self.session;
        let mut out = Vec::new();
        if !self.header {
            out.push(LogRecord::Header(s.header()));
            self.header = true;
        }
        if let (false, Some(strategy)) = (self.commit, s.committed_strategy()) {
            out.push(LogRecord::Commit { t: 0.0, strategy });
            self.commit = true;
        }
        out.extend(s.decisions()[self.decisions..].iter().cloned().map(LogRecord::Decision));
        self.decisions = s.decisions().len();
        out.extend(s.events()[self.events..].iter().cloned().map(LogRecord::Event));
        self.events = s.events().len();
        if !self.payoff {
            if let Ok(p) = s.payoff() {
                out.push(LogRecord::Payoff(p));
                self.payoff = true;
            }
        }
        out
    }
}

pub type Handle = Arc<Mutex<Entry>>;

#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
pub struct CreateRequest {
    pub treatment: TreatmentKind,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub path_id: Option<String>,
}

fn default_mode() -> Mode {
    Mode::Live
}

/// In-memory sessions with an optional append-only log per session.
#[derive(Debug)]
pub struct Store {
    sessions: RwLock<HashMap<String, Handle>>,
    treatments: BTreeMap<TreatmentKind, TreatmentSpec>,
    log_dir: Option<PathBuf>,
}

impl Store {
    pub fn new(
        treatments: BTreeMap<TreatmentKind, TreatmentSpec>,
        log_dir: Option<PathBuf>,
    ) -> std::io::Result<Self> {
        if let Some(dir) = &log_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self {
            sessions: RwLock::new(HashMap::new()),
            treatments,
            log_dir,
        })
    }

    pub fn get(&self, id: &str) -> Result<Handle, ApiError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, req: &CreateRequest) -> Result<Handle, ApiError> {
        let spec = self
            .treatments
            .get(&req.treatment)
            .cloned()
            .ok_or_else(|| ApiError::BadRequest(format!("unknown treatment {}", req.treatment)))?;
        let (path, path_id) = match (&req.path_id, req.seed) {
            (Some(_), Some(_)) => {
                return Err(ApiError::BadRequest("give either seed or path_id, not both".into()))
            }
            (Some(id), None) => (registered_path(id)?, Some(id.clone())),
            (None, seed) => {
                let seed = seed.unwrap_or_else(rand_seed);
                (generate_sample_path(&spec.params, seed, spec.horizon)?, None)
            }
        };
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::new(id.clone(), spec, req.mode, Arc::new(path), path_id)?;
        let handle = Arc::new(Mutex::new(Entry::new(session)));
        self.persist(&mut handle.lock().expect("fresh lock"))?;
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(id, handle.clone());
        Ok(handle)
    }

    /// Runs `f` with exclusive access, or reports the session busy.
    pub fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> batchlab::Result<T>,
    ) -> Result<T, ApiError> {
        let handle = self.get(id)?;
        let mut entry = match handle.try_lock() {
            Ok(e) => e,
            Err(std::sync::TryLockError::WouldBlock) => return Err(ApiError::Busy(id.to_string())),
            Err(std::sync::TryLockError::Poisoned(_)) => {
                return Err(ApiError::Internal("session state poisoned".into()))
            }
        };
        let out = f(&mut entry.session)?;
        self.persist(&mut entry)?;
        Ok(out)
    }

    /// Waits for any in-flight mutation and reads a consistent snapshot.
    pub fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Result<T, ApiError> {
        let handle = self.get(id)?;
        let entry = handle
            .lock()
            .map_err(|_| ApiError::Internal("session state poisoned".into()))?;
        Ok(f(&entry.session))
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.log_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn persist(&self, entry: &mut Entry) -> Result<(), ApiError> {
        let Some(path) = self.log_path(entry.session.id()) else {
            return Ok(());
        };
        let records = entry.unwritten();
        if records.is_empty() {
            return Ok(());
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
        file.write_all(to_jsonl(&records).as_bytes())
            .and_then(|_| file.sync_data())
            .map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))
    }

    /// Replays every log in the log directory. Returns the number restored
    /// and the files that could not be replayed.
    pub fn restore(&self) -> (usize, Vec<(PathBuf, String)>) {
        let Some(dir) = &self.log_dir else {
            return (0, Vec::new());
        };
        let Ok(listing) = std::fs::read_dir(dir) else {
            return (0, Vec::new());
        };
        let mut restored = 0;
        let mut failed = Vec::new();
        for file in listing.flatten() {
            let path = file.path();
            if path.extension().is_none_or(|e| e != "jsonl") {
                continue;
            }
            match restore_one(&path) {
                Ok(entry) => {
                    let id = entry.session.id().to_string();
                    self.sessions
                        .write()
                        .expect("session map poisoned")
                        .insert(id, Arc::new(Mutex::new(entry)));
                    restored += 1;
                }
                Err(e) => failed.push((path, e)),
            }
        }
        (restored, failed)
    }
}

fn restore_one(path: &Path) -> Result<Entry, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let records = parse_log(&text).map_err(|e| e.to_string())?;
    let session = replay(&records).map_err(|e| e.to_string())?;
    let mut entry = Entry::new(session);
    // Everything the replay produced is already on disk.
    entry.unwritten();
    Ok(entry)
}

fn rand_seed() -> u64 {
    let bytes = *uuid::Uuid::new_v4().as_bytes();
    u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
}

