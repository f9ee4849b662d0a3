//! Grids of matched-budget cells and their CSV output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::matched::{rep_seed, run_matched_budget_cell, CellPoint, RepResult};
use crate::{median, par_map, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub point: CellPoint,
    pub reps: Vec<RepResult>,
    /// Median of `Err(two-stage)/Err(SL)` over repetitions that ran.
    pub median_ratio: f64,
    pub median_err_two_stage: f64,
    pub median_err_pure_sl: f64,
    pub median_budget: f64,
    pub support_rate: f64,
    pub failures: usize,
}

impl CellSummary {
    fn new(point: CellPoint, reps: Vec<RepResult>) -> Self {
        let ok: Vec<&RepResult> = reps.iter().filter(|r| r.error.is_none()).collect();
        let col = |f: fn(&RepResult) -> f64| median(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        Self {
            point,
            median_ratio: col(|r| r.ratio),
            median_err_two_stage: col(|r| r.err_two_stage),
            median_err_pure_sl: col(|r| r.err_pure_sl),
            median_budget: col(|r| r.budget as f64),
            support_rate: ok.iter().filter(|r| r.support_recovered).count() as f64 / reps.len() as f64,
            failures: reps.len() - ok.len(),
            reps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellSummary>,
    pub notes: Vec<String>,
}

/// First `κ` whose median ratio reaches 1, from a curve sorted by `κ`.
pub fn crossing_point(curve: &[(f64, f64)]) -> Option<f64> {
    curve.iter().find(|(_, r)| *r >= 1.0).map(|(k, _)| *k)
}

impl SweepResult {
    /// `(κ, median ratio)` for one `(σ, γ, s)` line, sorted by `κ`.
    pub fn curve(&self, sigma: f64, gamma: f64, s: usize) -> Vec<(f64, f64)> {
        let mut c: Vec<(f64, f64)> = self
            .cells
            .iter()
            .filter(|c| c.point.sigma == sigma && c.point.gamma == gamma && c.point.s == s)
            .map(|c| (c.point.kappa, c.median_ratio))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    }

    fn write_notes<W: Write>(&self, w: &mut W) -> Result<(), HarnessError> {
        for n in &self.notes {
            writeln!(w, "# {n}")?;
        }
        Ok(())
    }

    /// Header: `sigma,gamma,s,kappa,rep,seed,n1,n2,budget,err_two_stage,err_pure_sl,ratio,support_recovered,missed,extra,error`.
    pub fn write_reps_csv<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        self.write_notes(&mut w)?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "sigma", "gamma", "s", "kappa", "rep", "seed", "n1", "n2", "budget", "err_two_stage", "err_pure_sl", "ratio",
            "support_recovered", "missed", "extra", "error",
        ])?;
        for cell in &self.cells {
            let p = cell.point;
            for r in &cell.reps {
                c.write_record([
                    p.sigma.to_string(),
                    p.gamma.to_string(),
                    p.s.to_string(),
                    p.kappa.to_string(),
                    r.rep.to_string(),
                    r.seed.to_string(),
                    r.n1.to_string(),
                    r.n2.to_string(),
                    r.budget.to_string(),
                    r.err_two_stage.to_string(),
                    r.err_pure_sl.to_string(),
                    r.ratio.to_string(),
                    r.support_recovered.to_string(),
                    r.missed.to_string(),
                    r.extra.to_string(),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
        }
        c.flush()?;
        Ok(())
    }

    /// Header: `sigma,gamma,s,kappa,median_ratio,median_err_two_stage,median_err_pure_sl,median_budget,support_rate,failures`.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        self.write_notes(&mut w)?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "sigma", "gamma", "s", "kappa", "median_ratio", "median_err_two_stage", "median_err_pure_sl", "median_budget",
            "support_rate", "failures",
        ])?;
        for cell in &self.cells {
            let p = cell.point;
            c.write_record([
                p.sigma.to_string(),
                p.gamma.to_string(),
                p.s.to_string(),
                p.kappa.to_string(),
                cell.median_ratio.to_string(),
                cell.median_err_two_stage.to_string(),
                cell.median_err_pure_sl.to_string(),
                cell.median_budget.to_string(),
                cell.support_rate.to_string(),
                cell.failures.to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    }
}

/// Every cell of the grid, repetitions run concurrently.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    cfg.validate()?;
    let mut points = Vec::new();
    for &sigma in &cfg.sigma {
        for &gamma in &cfg.gamma {
            for &s in &cfg.s {
                for &kappa in &cfg.kappa {
                    points.push(CellPoint { sigma, gamma, kappa, s });
                }
            }
        }
    }
    let reps = cfg.repetitions;
    let seeds: Vec<u64> = (0..reps).map(|r| rep_seed(cfg.master_seed, r)).collect();
    let flat = par_map(points.len() * reps, |i| run_matched_budget_cell(cfg, &points[i / reps], i % reps, seeds[i % reps]));
    let mut it = flat.into_iter();
    let cells = points.into_iter().map(|p| CellSummary::new(p, it.by_ref().take(reps).collect())).collect();
    Ok(SweepResult { cells, notes: cfg.header_notes() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_is_first_reach() {
        assert_eq!(crossing_point(&[(0.0, 0.1), (0.1, 0.9), (0.2, 1.0), (0.3, 0.8)]), Some(0.2));
        assert_eq!(crossing_point(&[(0.1, 2.0)]), Some(0.1));
        assert_eq!(crossing_point(&[(0.0, 0.1)]), None);
    }
}
