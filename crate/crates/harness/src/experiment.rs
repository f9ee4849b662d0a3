//! Experiment files: one TOML document naming the experiment kind and its
//! settings, run into an output directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use pbalign::calibrate::CalibrationResult;
use serde::{Deserialize, Serialize};

use crate::calibrated::{calibrated_precision_sweep, write_calibrated_csv, CalibratedSweepConfig};
use crate::config::ExperimentConfig;
use crate::pricing::{run_pricing, write_pricing_csv, PricingConfig};
use crate::sweep::{crossing_point, sweep};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentFile {
    Matched(ExperimentConfig),
    Calibrated(CalibratedFile),
    Pricing(PricingConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratedFile {
    pub calibration: CalibrationSource,
    pub sweep: CalibratedSweepConfig,
}

/// Either a report written by `pbalign calibrate` or the three estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CalibrationSource {
    Report { report: PathBuf },
    Values { kappa: f64, lambda_tilde: f64, sigma: f64 },
}

impl CalibrationSource {
    /// Relative report paths are resolved against `base`.
    pub fn load(&self, base: &Path) -> Result<CalibrationResult, HarnessError> {
        match self {
            CalibrationSource::Report { report } => {
                let text = fs::read_to_string(base.join(report))?;
                serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", report.display())))
            }
            &CalibrationSource::Values { kappa, lambda_tilde, sigma } => Ok(CalibrationResult {
                kappa_hat: kappa,
                lambda_tilde_hat: lambda_tilde,
                sigma_hat: sigma,
                loglik: f64::NAN,
                degenerate: false,
                choice_bootstrap: None,
                sigma_bootstrap: None,
            }),
        }
    }
}

impl ExperimentFile {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let f: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if let ExperimentFile::Matched(c) = &f {
            c.validate()?;
        }
        Ok(f)
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Runs the experiment, writes its CSV files under `out` and returns a
    /// short human-readable summary.
    pub fn run(&self, base: &Path, out: &Path) -> Result<String, HarnessError> {
        fs::create_dir_all(out)?;
        let create = |name: &str| File::create(out.join(name)).map(BufWriter::new);
        match self {
            ExperimentFile::Matched(cfg) => {
                let result = sweep(cfg)?;
                result.write_reps_csv(create("reps.csv")?)?;
                result.write_summary_csv(create("summary.csv")?)?;
                let mut lines = Vec::new();
                for &sigma in &cfg.sigma {
                    for &gamma in &cfg.gamma {
                        for &s in &cfg.s {
                            let k = crossing_point(&result.curve(sigma, gamma, s));
                            let k = k.map_or("none".to_string(), |k| format!("{k}"));
                            lines.push(format!("sigma={sigma} gamma={gamma} s={s}: crossing kappa {k}"));
                        }
                    }
                }
                Ok(lines.join("\n"))
            }
            ExperimentFile::Calibrated(file) => {
                let calibration = file.calibration.load(base)?;
                let rows = calibrated_precision_sweep(&calibration, &file.sweep)?;
                let notes = vec![format!(
                    "kappa {} lambda_tilde {} sigma {} unit_scale {}",
                    calibration.kappa_hat, calibration.lambda_tilde_hat, calibration.sigma_hat, file.sweep.unit_scale
                )];
                write_calibrated_csv(&rows, &notes, create("calibrated.csv")?)?;
                Ok(rows
                    .iter()
                    .map(|r| format!("epsilon={}: median error {:.5}, ratio {:.3}", r.epsilon, r.median_error, r.median_ratio))
                    .collect::<Vec<_>>()
                    .join("\n"))
            }
            ExperimentFile::Pricing(cfg) => {
                let summary = run_pricing(cfg)?;
                write_pricing_csv(&summary, create("pricing.csv")?)?;
                Ok(format!(
                    "pure SL sign not negative in {}/{}; two-stage negative in {}/{}",
                    summary.sl_wrong_sign,
                    summary.reps.len(),
                    summary.two_stage_negative,
                    summary.reps.len()
                ))
            }
        }
    }
}
