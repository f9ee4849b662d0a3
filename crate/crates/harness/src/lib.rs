//! Seeded experiment sweeps comparing the two-stage pipeline with plain
//! Lasso at a matched label budget, plus the calibrated precision sweep and
//! the pricing sign-flip scenario.

pub mod calibrated;
pub mod config;
pub mod experiment;
pub mod matched;
pub mod pricing;
pub mod sweep;

use thiserror::Error;

pub use calibrated::{calibrated_precision_sweep, write_calibrated_csv, CalibratedRow, CalibratedSweepConfig};
pub use config::{sweep_template, ExperimentConfig, OracleKind};
pub use experiment::{CalibratedFile, CalibrationSource, ExperimentFile};
pub use matched::{draw_truth, rep_seed, run_matched_budget_cell, CellPoint, RepResult};
pub use pricing::{run_pricing, write_pricing_csv, PricingConfig, PricingRep, PricingSummary};
pub use sweep::{crossing_point, sweep, CellSummary, SweepResult};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] pbalign::pipeline::PipelineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Median of a non-empty slice; NaNs sort last.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `f` on every index using all available cores and returns results in
/// index order.
pub(crate) fn par_map<T: Send, F: Fn(usize) -> T + Sync>(n: usize, f: F) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let slots = std::sync::Mutex::new(&mut out);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                slots.lock().expect("lock")[i] = Some(v);
            });
        }
    });
    out.into_iter().map(|v| v.expect("every index computed")).collect()
}
