//! Sessions in memory, optionally mirrored to one append-only log file per
//! session. Opening a directory replays every log found there.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use uuid::Uuid;

use crate::session::{AnswerSubmission, Session, SessionEvent, SessionSummary, SubmitReply};
use crate::spec::TaskSpec;
use crate::ServiceError;

#[derive(Debug, Default)]
pub struct SessionStore {
    dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<Uuid, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Store backed by `dir`, created if missing.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut sessions = BTreeMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let s = Session::replay(&read_log(&path)?)?;
                sessions.insert(s.id(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(Self { dir: Some(dir), sessions: RwLock::new(sessions) })
    }

    fn log_path(&self, id: Uuid) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn append(&self, id: Uuid, events: &[SessionEvent]) -> Result<(), ServiceError> {
        let Some(path) = self.log_path(id) else { return Ok(()) };
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let mut buf = String::new();
        for e in events {
            buf.push_str(&serde_json::to_string(e).expect("plain data"));
            buf.push('\n');
        }
        f.write_all(buf.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    pub fn create(&self, spec: TaskSpec) -> Result<SubmitReply, ServiceError> {
        let s = Session::create(spec)?;
        self.append(s.id(), s.events())?;
        let reply = SubmitReply { session_id: s.id(), status: s.status(), query: s.current_query(), result: None };
        self.sessions.write().expect("lock").insert(s.id(), Arc::new(Mutex::new(s)));
        Ok(reply)
    }

    fn get(&self, id: Uuid) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions.read().expect("lock").get(&id).cloned().ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Runs `f` with exclusive access to one session and persists any
    /// events it appended.
    pub fn with_session<T>(&self, id: Uuid, f: impl FnOnce(&mut Session) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let handle = self.get(id)?;
        let mut s = handle.lock().expect("lock");
        let before = s.events().len();
        let out = f(&mut s);
        self.append(id, &s.events()[before..])?;
        out
    }

    pub fn submit(&self, id: Uuid, answer: AnswerSubmission) -> Result<(SubmitReply, bool), ServiceError> {
        self.with_session(id, |s| s.submit(answer))
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        let map = self.sessions.read().expect("lock");
        map.values().map(|s| s.lock().expect("lock").summary()).collect()
    }
}

pub(crate) fn read_log(path: &Path) -> Result<Vec<SessionEvent>, ServiceError> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(&line).map_err(|e| ServiceError::Corrupt(format!("{}:{}: {e}", path.display(), i + 1)))?;
        events.push(ev);
    }
    Ok(events)
}
