//! One session: engine state, event log and the views served to clients.

use std::time::{SystemTime, UNIX_EPOCH};

use pbalign::bisect::StepReport;
use pbalign::calibrate::ComparisonRecord;
use pbalign::pipeline::{AssConfig, OrthoBasis};
use pbalign::{Choice, ComparisonQuery, MapbOutcome, MapbRun};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uuid::Uuid;

use crate::spec::{TaskKind, TaskSpec};
use crate::stimulus::generate_stimulus;
use crate::ServiceError;

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    AwaitingAnswer,
    Advancing,
    Done,
    Aborted,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Done | Status::Aborted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub at_ms: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum EventBody {
    Created {
        session_id: Uuid,
        spec: TaskSpec,
    },
    QueryIssued {
        query_id: u64,
        theta: f64,
        c_minus: f64,
        c_plus: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<usize>,
    },
    AnswerReceived(AnswerSubmission),
    VerticalStopped {
        theta: f64,
        z: i8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<usize>,
    },
    HorizontalMoved {
        theta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<usize>,
    },
    Terminated(TerminatedPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scope", rename_all = "kebab-case")]
pub enum TerminatedPayload {
    /// One sample of a sample-level session finished.
    Sample { sample: usize, outcome: MapbOutcome },
    Session { result: SessionResult },
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSubmission {
    pub query_id: u64,
    pub choice: Choice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responder_tag: Option<String>,
    /// Left-to-right order the candidates were shown in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displayed_order: Option<[Choice; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub theta_hat: Vec<f64>,
    pub total_comparisons: u64,
    pub outcomes: Vec<MapbOutcome>,
    /// Aligned sample predictions, for sample-level sessions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_hat: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub horizontal_move: u64,
    pub vertical_step: u64,
    pub sample: Option<usize>,
    pub samples: usize,
}

/// The outstanding question as shown to a client. Never carries the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryView {
    pub session_id: Uuid,
    pub query_id: u64,
    pub theta: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus: Option<serde_json::Value>,
    pub progress: Progress,
}

impl QueryView {
    pub fn to_query(&self) -> ComparisonQuery {
        let mut q = ComparisonQuery::new(self.query_id, self.theta, self.c_plus - self.c_minus).expect("issued query");
        q.c_minus = self.c_minus;
        q.c_plus = self.c_plus;
        q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitReply {
    pub session_id: Uuid,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QueryView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<SessionResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerView {
    pub query_id: u64,
    pub theta: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub choice: Choice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub breakpoints: Vec<f64>,
    pub densities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: Uuid,
    pub kind: TaskKind,
    pub status: Status,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub epsilon: f64,
    pub progress: Progress,
    pub query_id: Option<u64>,
    pub posterior: Posterior,
    pub history: Vec<AnswerView>,
    pub result: Option<SessionResult>,
    pub state_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: Uuid,
    pub kind: TaskKind,
    pub status: Status,
    pub answers: usize,
    pub created_ms: u64,
    pub updated_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct AnswerRecord {
    query_id: u64,
    theta: f64,
    c_minus: f64,
    c_plus: f64,
    choice: Choice,
    sample: Option<usize>,
    truth: Option<f64>,
}

impl AnswerRecord {
    fn view(&self) -> AnswerView {
        AnswerView {
            query_id: self.query_id,
            theta: self.theta,
            c_minus: self.c_minus,
            c_plus: self.c_plus,
            choice: self.choice,
            sample: self.sample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
enum Engine {
    Single {
        run: MapbRun,
    },
    Samples {
        basis: OrthoBasis,
        config: AssConfig,
        center: Vec<f64>,
        k: usize,
        run: MapbRun,
        y_hat: Vec<f64>,
        outcomes: Vec<MapbOutcome>,
    },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn engine_err(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Engine(e.to_string())
}

fn sample_run(basis: &OrthoBasis, config: &AssConfig, center: &[f64], k: usize) -> Result<MapbRun, ServiceError> {
    let z = &basis.samples()[k];
    let width = config.half_width * z.iter().map(|v| v.abs()).sum::<f64>();
    let s = basis.dim();
    let c = config.template.build(config.epsilon_step, config.delta / s as f64, dot(z, center), width);
    MapbRun::uniform(c).map_err(engine_err)
}

impl Engine {
    fn build(spec: &TaskSpec) -> Result<Self, ServiceError> {
        Ok(match spec {
            TaskSpec::ScalarAlignment(s) => Engine::Single { run: MapbRun::uniform(s.config.clone()).map_err(engine_err)? },
            TaskSpec::DotCount(d) => Engine::Single { run: MapbRun::uniform(d.mapb_config()).map_err(engine_err)? },
            TaskSpec::AssSample(a) => {
                let basis = OrthoBasis::new(a.samples.clone(), a.config.max_condition).map_err(engine_err)?;
                let center = a.config.center.clone().unwrap_or_else(|| vec![0.0; basis.dim()]);
                let run = sample_run(&basis, &a.config, &center, 0)?;
                Engine::Samples { basis, config: a.config.clone(), center, k: 0, run, y_hat: Vec::new(), outcomes: Vec::new() }
            }
        })
    }

    fn run(&self) -> &MapbRun {
        match self {
            Engine::Single { run } | Engine::Samples { run, .. } => run,
        }
    }

    fn sample(&self) -> Option<usize> {
        match self {
            Engine::Single { .. } => None,
            Engine::Samples { k, .. } => Some(*k),
        }
    }

    fn samples(&self) -> usize {
        match self {
            Engine::Single { .. } => 1,
            Engine::Samples { basis, .. } => basis.dim(),
        }
    }

    /// Applies one answer and returns the events it produced after the
    /// answer itself, plus the final result if the session ended.
    fn apply(&mut self, choice: Choice) -> Result<(Vec<EventBody>, Option<SessionResult>), ServiceError> {
        let sample = self.sample();
        let run = match self {
            Engine::Single { run } | Engine::Samples { run, .. } => run,
        };
        let theta = run.current_theta();
        let qid = run.current_query().ok_or_else(|| engine_err("run already finished"))?.query_id;
        let report: StepReport = run.submit(qid, choice).map_err(engine_err)?;
        let mut events = Vec::new();
        if let Some(z) = report.vertical_stopped {
            events.push(EventBody::VerticalStopped { theta, z, sample });
        }
        if let Some(to) = report.moved_to {
            events.push(EventBody::HorizontalMoved { theta: to, sample });
        }
        let Some(outcome) = report.finished else {
            return Ok((events, None));
        };
        let result = match self {
            Engine::Single { .. } => SessionResult {
                theta_hat: vec![outcome.theta_hat],
                total_comparisons: outcome.total_comparisons,
                outcomes: vec![outcome],
                y_hat: None,
            },
            Engine::Samples { basis, config, center, k, run, y_hat, outcomes } => {
                events.push(EventBody::Terminated(TerminatedPayload::Sample { sample: *k, outcome: outcome.clone() }));
                y_hat.push(outcome.theta_hat);
                outcomes.push(outcome);
                if *k + 1 < basis.dim() {
                    *k += 1;
                    *run = sample_run(basis, config, center, *k)?;
                    return Ok((events, None));
                }
                let (_, theta_hat) = basis.back_solve(y_hat);
                SessionResult {
                    theta_hat,
                    total_comparisons: outcomes.iter().map(|o| o.total_comparisons).sum(),
                    outcomes: outcomes.clone(),
                    y_hat: Some(y_hat.clone()),
                }
            }
        };
        events.push(EventBody::Terminated(TerminatedPayload::Session { result: result.clone() }));
        Ok((events, Some(result)))
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    id: Uuid,
    spec: TaskSpec,
    status: Status,
    engine: Engine,
    answers: Vec<AnswerRecord>,
    result: Option<SessionResult>,
    events: Vec<SessionEvent>,
    last_reply: Option<SubmitReply>,
    created_ms: u64,
    updated_ms: u64,
}

impl Session {
    /// Validates `spec`, fills in hidden values and issues the first query.
    pub fn create(spec: TaskSpec) -> Result<Self, ServiceError> {
        Self::create_at(Uuid::new_v4(), spec.resolve(), now_ms())
    }

    fn create_at(id: Uuid, spec: TaskSpec, at_ms: u64) -> Result<Self, ServiceError> {
        spec.validate()?;
        let engine = Engine::build(&spec)?;
        let mut s = Self {
            id,
            spec: spec.clone(),
            status: Status::AwaitingAnswer,
            engine,
            answers: Vec::new(),
            result: None,
            events: Vec::new(),
            last_reply: None,
            created_ms: at_ms,
            updated_ms: at_ms,
        };
        s.push(at_ms, EventBody::Created { session_id: id, spec });
        s.issue(at_ms);
        Ok(s)
    }

    /// Rebuilds a session by re-running its log, and checks that every
    /// derived event comes out the same.
    pub fn replay(events: &[SessionEvent]) -> Result<Self, ServiceError> {
        let first = events.first().ok_or_else(|| ServiceError::Corrupt("empty log".into()))?;
        let EventBody::Created { session_id, spec } = &first.body else {
            return Err(ServiceError::Corrupt("log does not start with a created event".into()));
        };
        let mut s = Self::create_at(*session_id, spec.clone(), first.at_ms)?;
        for ev in events {
            match &ev.body {
                EventBody::AnswerReceived(a) => {
                    s.submit_at(a.clone(), ev.at_ms)?;
                }
                EventBody::Terminated(TerminatedPayload::Aborted { reason }) => s.abort_at(reason, ev.at_ms),
                _ => {}
            }
        }
        if s.events != events {
            let at = s.events.iter().zip(events).position(|(a, b)| a != b).unwrap_or(s.events.len().min(events.len()));
            return Err(ServiceError::Corrupt(format!("replayed log diverges at event {at}")));
        }
        Ok(s)
    }

    pub fn id(&self) -> Uuid {
        self.id
    }

    pub fn kind(&self) -> TaskKind {
        self.spec.kind()
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn result(&self) -> Option<&SessionResult> {
        self.result.as_ref()
    }

    fn push(&mut self, at_ms: u64, body: EventBody) {
        let seq = self.events.len() as u64;
        self.events.push(SessionEvent { seq, at_ms, body });
        self.updated_ms = at_ms;
    }

    fn issue(&mut self, at_ms: u64) {
        let q = self.engine.run().current_query().expect("running engine has a query");
        let body = EventBody::QueryIssued {
            query_id: self.answers.len() as u64,
            theta: q.theta,
            c_minus: q.c_minus,
            c_plus: q.c_plus,
            sample: self.engine.sample(),
        };
        self.push(at_ms, body);
    }

    fn progress(&self) -> Progress {
        let run = self.engine.run();
        Progress {
            horizontal_move: run.horizontal_moves(),
            vertical_step: run.vertical().steps(),
            sample: self.engine.sample(),
            samples: self.engine.samples(),
        }
    }

    fn truth_at(&self, sample: Option<usize>) -> Option<f64> {
        match &self.spec {
            TaskSpec::ScalarAlignment(s) => s.truth,
            TaskSpec::DotCount(d) => d.truth.map(f64::from),
            TaskSpec::AssSample(a) => {
                let t = a.truth.as_ref()?;
                Some(dot(&a.samples[sample?], t))
            }
        }
    }

    /// The outstanding query; `None` once the session has ended.
    pub fn current_query(&self) -> Option<QueryView> {
        if self.status != Status::AwaitingAnswer {
            return None;
        }
        let q = self.engine.run().current_query()?;
        let query_id = self.answers.len() as u64;
        let stimulus = match &self.spec {
            TaskSpec::ScalarAlignment(_) => None,
            TaskSpec::DotCount(d) => {
                let seed = d.seed.unwrap_or(0).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(query_id);
                let st = generate_stimulus(d.truth.unwrap_or(0), seed).expect("count validated against the cap");
                Some(serde_json::to_value(st).expect("plain data"))
            }
            TaskSpec::AssSample(a) => {
                let k = self.engine.sample().unwrap_or(0);
                Some(serde_json::json!({ "sample": k, "features": a.samples[k] }))
            }
        };
        Some(QueryView {
            session_id: self.id,
            query_id,
            theta: q.theta,
            c_minus: q.c_minus,
            c_plus: q.c_plus,
            stimulus,
            progress: self.progress(),
        })
    }

    fn reply(&self) -> SubmitReply {
        SubmitReply { session_id: self.id, status: self.status, query: self.current_query(), result: self.result.clone() }
    }

    /// Records an answer. Returns the reply and whether the answer was a
    /// repeat of one already applied.
    pub fn submit(&mut self, answer: AnswerSubmission) -> Result<(SubmitReply, bool), ServiceError> {
        self.submit_at(answer, now_ms())
    }

    fn submit_at(&mut self, answer: AnswerSubmission, at_ms: u64) -> Result<(SubmitReply, bool), ServiceError> {
        let expected = self.answers.len() as u64;
        if answer.query_id < expected {
            let prev = &self.answers[answer.query_id as usize];
            if prev.choice != answer.choice {
                return Err(ServiceError::Conflict(format!(
                    "query {} was already answered with {:?}",
                    answer.query_id, prev.choice
                )));
            }
            let reply = match &self.last_reply {
                Some(r) if answer.query_id + 1 == expected => r.clone(),
                _ => self.reply(),
            };
            return Ok((reply, true));
        }
        if self.status != Status::AwaitingAnswer {
            return Err(ServiceError::Conflict(format!("session is {:?}", self.status)));
        }
        if answer.query_id != expected {
            return Err(ServiceError::Conflict(format!("outstanding query is {expected}, got {}", answer.query_id)));
        }

        let run = self.engine.run();
        let q = run.current_query().expect("awaiting an answer");
        let sample = self.engine.sample();
        let record = AnswerRecord {
            query_id: expected,
            theta: q.theta,
            c_minus: q.c_minus,
            c_plus: q.c_plus,
            choice: answer.choice,
            sample,
            truth: self.truth_at(sample),
        };
        self.status = Status::Advancing;
        let mut next = self.engine.clone();
        match next.apply(answer.choice) {
            Ok((derived, result)) => {
                self.engine = next;
                self.answers.push(record);
                self.push(at_ms, EventBody::AnswerReceived(answer));
                for e in derived {
                    self.push(at_ms, e);
                }
                if let Some(r) = result {
                    self.result = Some(r);
                    self.status = Status::Done;
                } else {
                    self.status = Status::AwaitingAnswer;
                    self.issue(at_ms);
                }
                let reply = self.reply();
                self.last_reply = Some(reply.clone());
                Ok((reply, false))
            }
            Err(e) => {
                self.status = Status::AwaitingAnswer;
                Err(e)
            }
        }
    }

    /// Ends the session without a result.
    pub fn abort(&mut self, reason: &str) {
        self.abort_at(reason, now_ms());
    }

    fn abort_at(&mut self, reason: &str, at_ms: u64) {
        if self.status.is_terminal() {
            return;
        }
        self.status = Status::Aborted;
        self.push(at_ms, EventBody::Terminated(TerminatedPayload::Aborted { reason: reason.into() }));
    }

    /// SHA-256 over everything that determines future behavior.
    pub fn state_hash(&self) -> String {
        let bytes = serde_json::to_vec(&(&self.spec, self.status, &self.engine, &self.answers, &self.result))
            .expect("plain data");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn state(&self) -> SessionState {
        let d = self.engine.run().density();
        SessionState {
            session_id: self.id,
            kind: self.kind(),
            status: self.status,
            created_ms: self.created_ms,
            updated_ms: self.updated_ms,
            epsilon: self.engine.run().config().epsilon,
            progress: self.progress(),
            query_id: (self.status == Status::AwaitingAnswer).then_some(self.answers.len() as u64),
            posterior: Posterior { breakpoints: d.breakpoints().to_vec(), densities: d.densities().to_vec() },
            history: self.answers.iter().map(AnswerRecord::view).collect(),
            result: self.result.clone(),
            state_hash: self.state_hash(),
        }
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            session_id: self.id,
            kind: self.kind(),
            status: self.status,
            answers: self.answers.len(),
            created_ms: self.created_ms,
            updated_ms: self.updated_ms,
        }
    }

    /// One record per answer with a known target. Empty until the session
    /// has ended, so the target never leaks to a live client.
    pub fn comparison_records(&self) -> Vec<ComparisonRecord> {
        if !self.status.is_terminal() {
            return Vec::new();
        }
        self.answers
            .iter()
            .filter_map(|a| {
                let truth = a.truth?;
                // at the truth itself either side is as good; `plus` counts as right
                let plus_is_right = truth >= a.theta;
                Some(ComparisonRecord { theta: a.theta, theta_star: truth, correct: a.choice.is_plus() == plus_is_right })
            })
            .collect()
    }

    pub fn export_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(["theta", "theta_star", "correct"]).expect("in-memory write");
        for r in self.comparison_records() {
            w.serialize(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 csv")
    }

    /// Event log, one JSON document per line. Target values are removed
    /// while the session is live.
    pub fn export_jsonl(&self) -> String {
        let live = !self.status.is_terminal();
        let mut out = String::new();
        for ev in &self.events {
            let line = match (&ev.body, live) {
                (EventBody::Created { session_id, spec }, true) => SessionEvent {
                    body: EventBody::Created { session_id: *session_id, spec: spec.redacted() },
                    ..ev.clone()
                },
                _ => ev.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("plain data"));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{DotSpec, ScalarSpec};
    use pbalign::pipeline::MapbTemplate;
    use pbalign::MapbConfig;

    fn dot_spec(truth: u32) -> TaskSpec {
        TaskSpec::DotCount(DotSpec {
            count_min: 0,
            count_max: 128,
            granularity: 20,
            epsilon: 1.0,
            delta: 0.05,
            truth: Some(truth),
            seed: Some(5),
            template: MapbTemplate::default(),
        })
    }

    #[test]
    fn first_queries() {
        let s = Session::create(TaskSpec::ScalarAlignment(ScalarSpec { config: MapbConfig::new(0.01, 0.05, 1.0), truth: None }))
            .unwrap();
        assert_eq!(s.current_query().unwrap().theta, 0.0);
        let s = Session::create(dot_spec(30)).unwrap();
        let q = s.current_query().unwrap();
        assert_eq!((q.c_minus, q.c_plus), (54.0, 74.0));
        let stim: crate::DotStimulus = serde_json::from_value(q.stimulus.unwrap()).unwrap();
        assert_eq!(stim.count(), 30);
        assert_eq!(s.events().len(), 2);
    }

    #[test]
    fn bad_dot_specs_name_the_field() {
        for (spec, field) in [
            (DotSpec { granularity: 0, ..dot_fields() }, "granularity"),
            (DotSpec { granularity: 7, ..dot_fields() }, "granularity"),
            (DotSpec { count_max: 0, ..dot_fields() }, "count_max"),
            (DotSpec { epsilon: 0.5, ..dot_fields() }, "epsilon"),
        ] {
            match Session::create(TaskSpec::DotCount(spec)) {
                Err(ServiceError::Invalid(f)) => assert_eq!(f[0].field, field),
                other => panic!("expected rejection, got {other:?}"),
            }
        }
    }

    fn dot_fields() -> DotSpec {
        match dot_spec(10) {
            TaskSpec::DotCount(d) => d,
            _ => unreachable!(),
        }
    }

    #[test]
    fn live_export_hides_the_target() {
        let s = Session::create(dot_spec(77)).unwrap();
        assert_eq!(s.export_csv(), "theta,theta_star,correct\n");
        let log = s.export_jsonl();
        assert!(!log.contains("\"truth\":77") && !log.contains("\"seed\":5"));
        let q = serde_json::to_string(&s.current_query().unwrap()).unwrap();
        assert!(!q.contains("truth"));
    }
}
