use pbalign::calibrate::{default_kappa_grid, default_lambda_grid, fit_choice_model, read_comparisons};
use pbalign::pipeline::{AssConfig, MapbTemplate};
use pbalign::rng::stream;
use pbalign::{
    choice_probability_plus, Choice, DeterministicResponder, MapbConfig, OracleParams, Responder, Response,
    SimulatedResponder,
};
use pbalign_service::{
    dot_template, AnswerSubmission, AssSpec, EventBody, DotSpec, ScalarSpec, ServiceError, Session, SessionStore, Status, TaskSpec,
};

fn dot_spec(truth: u32, seed: u64) -> TaskSpec {
    TaskSpec::DotCount(DotSpec {
        count_min: 0,
        count_max: 128,
        granularity: 20,
        epsilon: 1.0,
        delta: 0.05,
        truth: Some(truth),
        seed: Some(seed),
        template: dot_template(),
    })
}

fn answer(query_id: u64, choice: Choice) -> AnswerSubmission {
    AnswerSubmission { query_id, choice, responder_tag: None, displayed_order: None }
}

/// Answers until the session ends or `limit` answers were given.
fn drive(s: &mut Session, responder: &mut dyn Responder, limit: usize) -> usize {
    let mut n = 0;
    while let Some(view) = s.current_query() {
        if n == limit {
            break;
        }
        let Response::Answer(c) = responder.respond(&view.to_query()) else { panic!("responder went quiet") };
        s.submit(answer(view.query_id, c)).unwrap();
        n += 1;
    }
    n
}

#[test]
fn error_free_dot_session_lands_within_epsilon() {
    for truth in [0, 7, 64, 99, 128] {
        let mut s = Session::create(dot_spec(truth, 1)).unwrap();
        drive(&mut s, &mut DeterministicResponder::new(truth as f64), 100_000);
        assert_eq!(s.status(), Status::Done);
        let theta_hat = s.result().unwrap().theta_hat[0];
        assert!((theta_hat - truth as f64).abs() <= 1.0, "truth {truth}, got {theta_hat}");
    }
}

#[test]
fn duplicate_answer_is_applied_once() {
    let mut s = Session::create(dot_spec(40, 2)).unwrap();
    let q = s.current_query().unwrap();
    let (first, dup) = s.submit(answer(q.query_id, Choice::Minus)).unwrap();
    assert!(!dup);
    let events = s.events().len();
    let hash = s.state_hash();
    let (again, dup) = s.submit(answer(q.query_id, Choice::Minus)).unwrap();
    assert!(dup);
    assert_eq!(first, again);
    assert_eq!(s.events().len(), events);
    assert_eq!(s.state_hash(), hash);
}

#[test]
fn stale_and_unknown_ids_conflict_without_change() {
    let mut s = Session::create(dot_spec(40, 3)).unwrap();
    s.submit(answer(0, Choice::Minus)).unwrap();
    let hash = s.state_hash();
    let events = s.events().len();
    for bad in [answer(0, Choice::Plus), answer(5, Choice::Minus)] {
        assert!(matches!(s.submit(bad), Err(ServiceError::Conflict(_))));
    }
    assert_eq!(s.state_hash(), hash);
    assert_eq!(s.events().len(), events);
}

#[test]
fn replayed_log_reproduces_state() {
    let config = MapbConfig::new(0.001, 0.05, 1.0);
    let mut s = Session::create(TaskSpec::ScalarAlignment(ScalarSpec { config, truth: Some(0.3) })).unwrap();
    let mut r = SimulatedResponder::new(OracleParams::euclidean(0.3, 0.5), stream(8, 0)).unwrap();
    assert_eq!(drive(&mut s, &mut r, 200), 200);
    let replayed = Session::replay(s.events()).unwrap();
    assert_eq!(replayed.state_hash(), s.state_hash());
    assert_eq!(replayed.state(), s.state());

    let mut flipped = s.events().to_vec();
    if let EventBody::AnswerReceived(a) = &mut flipped[2].body {
        a.choice = if a.choice == Choice::Plus { Choice::Minus } else { Choice::Plus };
    }
    if let Ok(other) = Session::replay(&flipped) {
        assert_ne!(other.state_hash(), s.state_hash());
    }

    let mut tampered = s.events().to_vec();
    let last_query = tampered.iter().rposition(|e| matches!(e.body, EventBody::QueryIssued { .. })).unwrap();
    if let EventBody::QueryIssued { theta, .. } = &mut tampered[last_query].body {
        *theta += 0.125;
    }
    assert!(matches!(Session::replay(&tampered), Err(ServiceError::Corrupt(_))));
}

#[test]
fn store_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    let created = store.create(dot_spec(33, 4)).unwrap();
    let id = created.session_id;
    let mut responder = SimulatedResponder::new(OracleParams::kappa(33.0, 1.0, 0.5, 0.5), stream(4, 1)).unwrap();
    for _ in 0..50 {
        let q = store.with_session(id, |s| Ok(s.current_query())).unwrap().unwrap();
        let Response::Answer(c) = responder.respond(&q.to_query()) else { unreachable!() };
        store.submit(id, answer(q.query_id, c)).unwrap();
    }
    let hash = store.with_session(id, |s| Ok(s.state_hash())).unwrap();
    drop(store);
    let reopened = SessionStore::open(dir.path()).unwrap();
    assert_eq!(reopened.with_session(id, |s| Ok(s.state_hash())).unwrap(), hash);
    assert_eq!(reopened.list().len(), 1);
}

#[test]
fn export_has_one_record_per_answer_and_feeds_calibration() {
    let truth = 52;
    let mut s = Session::create(dot_spec(truth, 5)).unwrap();
    let mut r = SimulatedResponder::new(OracleParams::kappa(truth as f64, 1.0, 0.4, 0.5), stream(5, 0)).unwrap();
    assert_eq!(drive(&mut s, &mut r, 30), 30);
    assert_eq!(s.export_csv(), "theta,theta_star,correct\n", "live sessions export no targets");
    s.abort("enough");
    let records = read_comparisons(s.export_csv().as_bytes()).unwrap();
    assert_eq!(records.len(), 30);
    assert!(records.iter().all(|r| r.theta_star == truth as f64));
    fit_choice_model(&records, &default_kappa_grid(), &default_lambda_grid()).unwrap();
}

#[test]
fn answer_frequencies_match_choice_model() {
    let truth = 70.0;
    let params = OracleParams::kappa(truth, 1.0, 0.3, 0.5);
    let mut s = Session::create(dot_spec(truth as u32, 6)).unwrap();
    let mut r = SimulatedResponder::new(params.clone(), stream(6, 0)).unwrap();
    let mut expected = 0.0;
    let mut var = 0.0;
    let mut plus = 0.0;
    let mut n = 0;
    while let Some(view) = s.current_query() {
        if n == 3000 {
            break;
        }
        let q = view.to_query();
        let p = choice_probability_plus(&q, &params).unwrap();
        let Response::Answer(c) = r.respond(&q) else { unreachable!() };
        expected += p;
        var += p * (1.0 - p);
        plus += c.is_plus() as u8 as f64;
        s.submit(answer(view.query_id, c)).unwrap();
        n += 1;
    }
    assert!(n > 100);
    assert!((plus - expected).abs() <= 3.0 * var.sqrt(), "plus {plus}, expected {expected} ± {}", var.sqrt());
}

#[test]
fn sample_session_recovers_coefficients() {
    let truth = vec![0.4, -0.7];
    let samples = vec![vec![1.0, 0.2], vec![0.3, 1.0]];
    let config = AssConfig {
        epsilon_step: 1e-3,
        delta: 0.05,
        half_width: 2.0,
        center: None,
        template: MapbTemplate::default(),
        max_condition: 1e6,
    };
    let mut s = Session::create(TaskSpec::AssSample(AssSpec { samples: samples.clone(), config, truth: Some(truth.clone()) })).unwrap();
    while let Some(view) = s.current_query() {
        let k = view.progress.sample.unwrap();
        let target: f64 = samples[k].iter().zip(&truth).map(|(a, b)| a * b).sum();
        let Response::Answer(c) = DeterministicResponder::new(target).respond(&view.to_query()) else { unreachable!() };
        s.submit(answer(view.query_id, c)).unwrap();
    }
    let result = s.result().unwrap();
    assert_eq!(result.outcomes.len(), 2);
    for (a, b) in result.theta_hat.iter().zip(&truth) {
        assert!((a - b).abs() < 0.01, "{:?}", result.theta_hat);
    }
    let records = s.comparison_records();
    assert_eq!(records.len() as u64, result.total_comparisons);
    assert!(records.iter().all(|r| r.correct));
}
