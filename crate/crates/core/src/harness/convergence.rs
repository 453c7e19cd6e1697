//! Monte-Carlo study of the discrimination loop against a simulated oracle
//! whose error matches the likelihood model.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acbo::{query_capacity_ceiling, run, theoretical_rounds, AcboConfig, RunResult, StopRule};
use crate::dag::{random_dag_with, Dag};
use crate::error::{Error, Result};
use crate::indep::PremiseSet;
use crate::oracle::SimulatedOracle;
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceConfig {
    /// (n hypotheses, per-answer error) cells.
    pub grid: Vec<(usize, f64)>,
    pub trials: usize,
    pub seed: u64,
    /// Variables per hypothesis graph.
    pub d: usize,
    pub budget_t: usize,
    pub stop_delta: f64,
    pub stop_rule: StopRule,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            grid: vec![(16, 0.1), (8, 0.2), (32, 0.1)],
            trials: 2000,
            seed: 0,
            d: 6,
            budget_t: 20,
            stop_delta: 0.01,
            stop_rule: StopRule::MapThreshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub n: usize,
    pub eta: f64,
    pub trial: usize,
    pub truth_index: usize,
    pub t_star: usize,
    pub success_t_star: bool,
    pub success_budget: bool,
    pub rounds_to_stop: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub eta: f64,
    pub t_star: usize,
    /// `1 - n * eta^t_star`.
    pub floor: f64,
    /// `min(1, 2^t_star / n)`: no strategy can beat this after `t_star` binary answers.
    pub ceiling: f64,
    pub trials: usize,
    pub success_t_star: f64,
    pub success_budget: f64,
    pub mean_rounds: f64,
    pub fraction_converged: f64,
}

/// Mean posterior mass on the true graph after each round; runs that
/// stopped early carry their final mass forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub n: usize,
    pub eta: f64,
    pub round: usize,
    pub mean_truth_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub summary: Vec<SummaryRow>,
    pub trials: Vec<TrialRow>,
    pub trajectory: Vec<TrajectoryRow>,
}

fn profile(g: &Dag) -> Vec<u64> {
    (0..g.num_vars()).map(|v| g.descendants_mask(v)).collect()
}

/// `n` random graphs over `d` variables with pairwise distinct
/// interventional profiles, so every pair is separated by some query.
pub fn distinguishable_hypotheses(n: usize, d: usize, seed: u64) -> Result<Vec<Dag>> {
    let mut r = rng(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n + 1000 {
            return Err(Error::Input(format!("could not draw {n} distinguishable graphs over {d} variables")));
        }
        let p = r.random_range(0.2..0.6);
        let g = random_dag_with(d, p, &mut r)?;
        if seen.insert(profile(&g)) {
            out.push(g);
        }
    }
    Ok(out)
}

struct Trial {
    row: TrialRow,
    masses: Vec<f64>,
}

fn one_trial(cfg: &ConvergenceConfig, n: usize, eta: f64, t_star: usize, trial: usize, seed: u64) -> Result<Trial> {
    let hyps = distinguishable_hypotheses(n, cfg.d, derive_seed(seed, 0))?;
    let truth_index = rng(derive_seed(seed, 1)).random_range(0..n);
    let truth = hyps[truth_index].clone();
    let premise = PremiseSet::new(truth.names().to_vec(), vec![], false)?;
    let oracle = SimulatedOracle::new(truth, eta, 1)?;
    let base = AcboConfig {
        budget_t: cfg.budget_t,
        explore_eps: 0.0,
        eta,
        stop_delta: cfg.stop_delta,
        votes_m: 1,
        candidates_n: n,
        stop_rule: cfg.stop_rule,
    };
    let go = |c: &AcboConfig, tag: u64| -> Result<RunResult> {
        run(&premise, &hyps, &oracle, c, &format!("conv/{n}/{eta}/{trial}/{tag}"), derive_seed(seed, 2 + tag))
            .map_err(|f| f.error)
    };
    // fixed horizon: stop only once the posterior is a point mass
    let fixed = go(
        &AcboConfig {
            budget_t: t_star,
            stop_delta: f64::MIN_POSITIVE,
            ..base.clone()
        },
        0,
    )?;
    let full = go(&base, 1)?;
    let mut masses: Vec<f64> = full
        .trajectory
        .iter()
        .map(|l| l.posterior_after.weights()[truth_index])
        .collect();
    let last = masses.last().copied().unwrap_or(1.0 / n as f64);
    masses.resize(cfg.budget_t, last);
    Ok(Trial {
        row: TrialRow {
            n,
            eta,
            trial,
            truth_index,
            t_star,
            success_t_star: fixed.map_index == truth_index,
            success_budget: full.map_index == truth_index,
            rounds_to_stop: full.rounds_used,
            converged: full.converged,
        },
        masses,
    })
}

pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if cfg.trials == 0 || cfg.budget_t == 0 {
        return Err(Error::Config("trials and budget_t must be positive".into()));
    }
    if cfg.d < 2 || cfg.d > 12 {
        return Err(Error::Config(format!("d must lie in 2..=12, got {}", cfg.d)));
    }
    let mut report = ConvergenceReport {
        summary: Vec::new(),
        trials: Vec::new(),
        trajectory: Vec::new(),
    };
    for (cell, &(n, eta)) in cfg.grid.iter().enumerate() {
        let bound = theoretical_rounds(n, eta).map_err(|e| Error::Config(e.to_string()))?;
        let cell_seed = derive_seed(cfg.seed, cell as u64);
        let trials = (0..cfg.trials)
            .into_par_iter()
            .map(|t| one_trial(cfg, n, eta, bound.t_star, t, derive_seed(cell_seed, t as u64)))
            .collect::<Result<Vec<_>>>()?;
        let k = trials.len() as f64;
        let frac = |f: &dyn Fn(&TrialRow) -> bool| trials.iter().filter(|t| f(&t.row)).count() as f64 / k;
        report.summary.push(SummaryRow {
            n,
            eta,
            t_star: bound.t_star,
            floor: bound.success_floor,
            ceiling: query_capacity_ceiling(n, bound.t_star),
            trials: trials.len(),
            success_t_star: frac(&|r| r.success_t_star),
            success_budget: frac(&|r| r.success_budget),
            mean_rounds: trials.iter().map(|t| t.row.rounds_to_stop as f64).sum::<f64>() / k,
            fraction_converged: frac(&|r| r.converged),
        });
        for round in 0..cfg.budget_t {
            report.trajectory.push(TrajectoryRow {
                n,
                eta,
                round: round + 1,
                mean_truth_mass: trials.iter().map(|t| t.masses[round]).sum::<f64>() / k,
            });
        }
        report.trials.extend(trials.into_iter().map(|t| t.row));
    }
    Ok(report)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Input(format!("{}: {other:?}", path.display())),
    }
}

/// Writes `summary.csv`, `trials.csv` and `trajectory.csv` into `dir`.
pub fn write_convergence(dir: &Path, report: &ConvergenceReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join("summary.csv"), &report.summary)?;
    write_csv(&dir.join("trials.csv"), &report.trials)?;
    write_csv(&dir.join("trajectory.csv"), &report.trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypotheses_are_pairwise_distinguishable() {
        let hs = distinguishable_hypotheses(32, 6, 9).unwrap();
        for i in 0..hs.len() {
            for j in i + 1..hs.len() {
                assert!(!crate::dag::discrimination_set(&hs[i], &hs[j]).unwrap().is_empty());
            }
        }
        assert!(distinguishable_hypotheses(100, 2, 1).is_err());
    }

    #[test]
    fn noiseless_runs_never_misidentify() {
        let cfg = ConvergenceConfig {
            grid: vec![(16, 0.0)],
            trials: 50,
            ..ConvergenceConfig::default()
        };
        let rep = run_convergence(&cfg).unwrap();
        let s = &rep.summary[0];
        assert_eq!(s.success_budget, 1.0);
        assert_eq!(s.fraction_converged, 1.0);
        assert!(rep.trials.iter().all(|t| t.rounds_to_stop <= 8));
        assert_eq!(rep.trajectory.last().unwrap().mean_truth_mass, 1.0);
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = ConvergenceConfig {
            grid: vec![(8, 0.2)],
            trials: 20,
            seed: 4,
            ..ConvergenceConfig::default()
        };
        assert_eq!(run_convergence(&cfg).unwrap(), run_convergence(&cfg).unwrap());
    }
}
