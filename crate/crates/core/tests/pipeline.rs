use pbalign::bisect::HorizontalRule;
use pbalign::pipeline::{
    ass_align, optimal_refinement_width, simulated_value_responders, AlignmentPlan, AssConfig, ComplexityModel,
    MapbTemplate, OracleSpec, OrthoBasis, refine,
};
use pbalign::rng::stream;
use pbalign::sparse::RecoveryParams;
use pbalign::{DeterministicResponder, OracleParams, Responder};
use rand::Rng;
use rand_distr::StandardNormal;

fn well_conditioned(s: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    // identity plus a small random perturbation
    (0..s)
        .map(|i| (0..s).map(|j| if i == j { 1.0 } else { 0.0 } + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

#[test]
fn back_solve_is_exact_with_perfect_values() {
    let mut rng = stream(21, 0);
    for _ in 0..100 {
        let z = well_conditioned(5, &mut rng);
        let truth: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
        let basis = OrthoBasis::new(z.clone(), 1e6).unwrap();
        assert!(basis.max_cosine() <= 1e-10);
        let y: Vec<f64> = z.iter().map(|r| r.iter().zip(&truth).map(|(a, b)| a * b).sum()).collect();
        let (_, theta) = basis.back_solve(&y);
        let scale = truth.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in theta.iter().zip(&truth) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
    }
}

#[test]
fn gram_schmidt_stays_orthogonal_up_to_condition_1e6() {
    let mut rng = stream(22, 0);
    for target in [1e2, 1e4, 1e6 * 0.9] {
        // columns scaled geometrically after a random rotation-ish mix
        let base = well_conditioned(5, &mut rng);
        let z: Vec<Vec<f64>> = base
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| v * (target as f64).powf(-(j as f64) / 4.0)).collect())
            .collect();
        match OrthoBasis::new(z, 1e6) {
            Ok(b) => assert!(b.max_cosine() <= 1e-10, "cond {} cos {}", b.condition_number(), b.max_cosine()),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn ass_error_respects_propagated_bound() {
    let oracle = OracleSpec::kappa(1.0, 1.0, 0.3);
    let template = MapbTemplate { kappa: 0.3, horizontal_rule: HorizontalRule::PosteriorCredible, ..Default::default() };
    let delta = 0.1;
    let seeds = 200;
    let mut ok = 0;
    for seed in 0..seeds {
        let mut rng = stream(300 + seed, 0);
        let z = well_conditioned(5, &mut rng);
        let truth: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let basis = OrthoBasis::new(z, 1e6).unwrap();
        let config = AssConfig {
            epsilon_step: 0.05,
            delta,
            half_width: 1.0,
            center: None,
            template: template.clone(),
            max_condition: 1e6,
        };
        let report = ass_align(&basis, &config, simulated_value_responders(&basis, &truth, &oracle, seed)).unwrap();
        let err: f64 = report.theta_hat.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if err <= report.propagated_bound {
            ok += 1;
        }
        assert_eq!(report.n2, report.steps.iter().map(|s| s.outcome.total_comparisons).sum::<u64>());
    }
    let slack = 3.0 * (delta * (1.0 - delta) / seeds as f64).sqrt();
    assert!(ok as f64 / seeds as f64 >= 1.0 - delta - slack, "{ok}/{seeds}");
}

#[test]
fn refinement_order_does_not_matter_for_exact_answers() {
    let truth = [0.0, 0.7, 0.0, -1.3, 0.45];
    let centers = [0.0, 0.5, 0.0, -1.0, 0.2];
    let plan = AlignmentPlan::new(vec![1, 3, 4], &centers, 0.1, 0.1, 2.0, 0.5, &MapbTemplate::default()).unwrap();
    let make = |j: usize| -> Result<Box<dyn Responder>, pbalign::pipeline::PipelineError> {
        Ok(Box::new(DeterministicResponder::with_params(OracleParams::kappa(truth[j], 1.0, 1.0, 0.3))))
    };
    let (a, _) = refine(&plan, 5, make).unwrap();
    let (b, _) = refine(&plan.clone().with_order(vec![2, 0, 1]).unwrap(), 5, make).unwrap();
    assert_eq!(a, b);
    let eps_j = 0.1 / 3f64.sqrt();
    for j in [1, 3, 4] {
        assert!((a[j] - truth[j]).abs() <= eps_j);
    }
}

#[test]
fn noisier_labels_push_refinement_width() {
    let grid: Vec<f64> = (1..=20).map(|i| 0.05 * i as f64).collect();
    let model = ComplexityModel::new(OracleSpec::kappa(1.0, 1.0, 0.3), MapbTemplate { kappa: 0.3, ..Default::default() });
    let pick = |sigma: f64| {
        let r = RecoveryParams::gaussian(sigma, 1.0, 10, 100);
        optimal_refinement_width(&r, &model, 0.1, 0.1, 2.0, &grid).unwrap().width
    };
    let (w1, w5) = (pick(1.0), pick(5.0));
    // the σ²/β̄² stage-1 term grows with σ, which favors wider boxes
    assert!(w5 >= w1, "w(σ=1)={w1} w(σ=5)={w5}");
}
