use std::fmt;

use serde::{Deserialize, Serialize};

use super::posterior::{bayes_update, entropy, Posterior};
use super::selection::{select_intervention, PredictionTable};
use crate::dag::{Dag, VarPair};
use crate::error::{Error, Result};
use crate::indep::PremiseSet;
use crate::oracle::{effective_error, InterventionalOracle, OracleQuery, OracleResponse, QueryContext};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Stop once the largest posterior mass exceeds `1 - stop_delta`.
    #[default]
    MapThreshold,
    /// Stop once the posterior entropy (bits) drops below `stop_delta`.
    EntropyThreshold,
}

impl StopRule {
    pub fn as_str(self) -> &'static str {
        match self {
            StopRule::MapThreshold => "map-threshold",
            StopRule::EntropyThreshold => "entropy-threshold",
        }
    }

    pub fn fired(self, pi: &Posterior, delta: f64) -> bool {
        match self {
            StopRule::MapThreshold => pi.max() > 1.0 - delta,
            StopRule::EntropyThreshold => entropy(pi) < delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcboConfig {
    pub budget_t: usize,
    pub explore_eps: f64,
    /// Per-vote error rate assumed by the likelihood.
    pub eta: f64,
    pub stop_delta: f64,
    pub votes_m: usize,
    pub candidates_n: usize,
    pub stop_rule: StopRule,
}

impl Default for AcboConfig {
    fn default() -> Self {
        AcboConfig {
            budget_t: 20,
            explore_eps: 0.1,
            eta: 0.1,
            stop_delta: 0.01,
            votes_m: 3,
            candidates_n: 8,
            stop_rule: StopRule::MapThreshold,
        }
    }
}

impl AcboConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.explore_eps) {
            return Err(Error::Config(format!("explore_eps must lie in [0, 1), got {}", self.explore_eps)));
        }
        if !(self.stop_delta > 0.0 && self.stop_delta < 1.0) {
            return Err(Error::Config(format!("stop_delta must lie in (0, 1), got {}", self.stop_delta)));
        }
        if !(0.0..0.5).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0, 0.5), got {}", self.eta)));
        }
        if self.budget_t == 0 {
            return Err(Error::Config("budget_t must be at least 1".into()));
        }
        if self.votes_m % 2 == 0 {
            return Err(Error::Config(format!("votes_m must be odd, got {}", self.votes_m)));
        }
        if self.candidates_n < 2 {
            return Err(Error::Config("candidates_n must be at least 2".into()));
        }
        Ok(())
    }

    /// Error rate of the majority answer, used by the likelihood.
    pub fn eta_eff(&self) -> f64 {
        effective_error(self.eta, self.votes_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub chosen_pair: VarPair,
    pub ig_score: f64,
    pub was_random: bool,
    pub response: OracleResponse,
    pub posterior_after: Posterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub map_index: usize,
    pub map_graph: Dag,
    pub map_mass: f64,
    pub rounds_used: usize,
    pub trajectory: Vec<RoundLog>,
    pub converged: bool,
    pub stop_rule: StopRule,
}

/// A failed run with the rounds completed before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Vec<RoundLog>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} rounds)", self.error, self.partial.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        RunFailure {
            error,
            partial: Vec::new(),
        }
    }
}

/// Query id of round `t` within run `run_id`.
pub fn query_id(run_id: &str, round: usize) -> String {
    format!("{run_id}/r{round}")
}

/// The discrimination loop: select a query, ask the oracle, update, until
/// the stop rule fires or the round budget is spent.
pub fn run(
    premise: &PremiseSet,
    hypotheses: &[Dag],
    oracle: &dyn InterventionalOracle,
    cfg: &AcboConfig,
    run_id: &str,
    seed: u64,
) -> std::result::Result<RunResult, RunFailure> {
    cfg.validate()?;
    if hypotheses.len() < 2 {
        return Err(Error::DegenerateHypotheses {
            found: hypotheses.len(),
        }
        .into());
    }
    if hypotheses[0].num_vars() != premise.num_vars() {
        return Err(Error::Input("hypotheses and premise disagree on the variable count".into()).into());
    }
    let table = PredictionTable::new(hypotheses)?;
    let eta_eff = cfg.eta_eff();
    let mut pi = Posterior::uniform(hypotheses.len())?;
    let mut trajectory = Vec::new();
    let mut converged = cfg.stop_rule.fired(&pi, cfg.stop_delta);
    let mut t = 0;
    while !converged && t < cfg.budget_t {
        t += 1;
        let step = (|| -> Result<RoundLog> {
            let sel = select_intervention(&pi, &table, eta_eff, cfg.explore_eps, derive_seed(seed, 2 * t as u64))?;
            let q = OracleQuery::new(premise, sel.pair);
            let ctx = QueryContext {
                query_id: query_id(run_id, t),
                seed: derive_seed(seed, 2 * t as u64 + 1),
            };
            let response = oracle.query(&q, &ctx)?;
            let next = bayes_update(&pi, table.preds(sel.pair_index), response.answer, eta_eff)?;
            Ok(RoundLog {
                round: t,
                chosen_pair: sel.pair,
                ig_score: sel.ig,
                was_random: sel.was_random,
                response,
                posterior_after: next,
            })
        })();
        match step {
            Ok(log) => {
                pi = log.posterior_after.clone();
                trajectory.push(log);
            }
            Err(error) => {
                return Err(RunFailure {
                    error,
                    partial: trajectory,
                })
            }
        }
        converged = cfg.stop_rule.fired(&pi, cfg.stop_delta);
    }
    let map_index = pi.map_index();
    Ok(RunResult {
        map_index,
        map_graph: hypotheses[map_index].clone(),
        map_mass: pi.max(),
        rounds_used: t,
        trajectory,
        converged,
        stop_rule: cfg.stop_rule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::default_names;
    use crate::oracle::SimulatedOracle;

    fn chain_fork() -> (Dag, Dag, PremiseSet) {
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let fork = Dag::from_edges(3, &[(1, 0), (1, 2)]).unwrap();
        let p = PremiseSet::new(default_names(3), vec![], false).unwrap();
        (chain, fork, p)
    }

    #[test]
    fn noiseless_chain_fork_converges_in_one_round() {
        let (chain, fork, p) = chain_fork();
        let oracle = SimulatedOracle::new(chain.clone(), 0.0, 1).unwrap();
        let cfg = AcboConfig {
            eta: 0.0,
            votes_m: 1,
            explore_eps: 0.0,
            ..AcboConfig::default()
        };
        let r = run(&p, &[chain.clone(), fork], &oracle, &cfg, "t", 3).unwrap();
        assert_eq!(r.rounds_used, 1);
        assert!(r.converged);
        assert_eq!(r.map_graph, chain);
        assert_eq!(r.map_mass, 1.0);
    }

    #[test]
    fn single_hypothesis_is_rejected() {
        let (chain, _, p) = chain_fork();
        let oracle = SimulatedOracle::new(chain.clone(), 0.0, 1).unwrap();
        let err = run(&p, &[chain], &oracle, &AcboConfig::default(), "t", 0).unwrap_err();
        assert!(matches!(err.error, Error::DegenerateHypotheses { found: 1 }));
    }

    #[test]
    fn fixed_seed_reproduces_trajectory() {
        let (chain, fork, p) = chain_fork();
        let oracle = SimulatedOracle::new(fork.clone(), 0.2, 3).unwrap();
        let cfg = AcboConfig::default();
        let a = run(&p, &[chain.clone(), fork.clone()], &oracle, &cfg, "t", 9).unwrap();
        let b = run(&p, &[chain, fork], &oracle, &cfg, "t", 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn stop_rules() {
        let pi = Posterior::from_weights(vec![0.995, 0.005]).unwrap();
        assert!(StopRule::MapThreshold.fired(&pi, 0.01));
        assert!(!StopRule::EntropyThreshold.fired(&pi, 0.01));
        assert!(StopRule::EntropyThreshold.fired(&Posterior::from_weights(vec![1.0, 0.0]).unwrap(), 0.01));
        assert_eq!(serde_json::to_string(&StopRule::MapThreshold).unwrap(), "\"map-threshold\"");
    }

    #[test]
    fn config_validation() {
        assert!(AcboConfig::default().validate().is_ok());
        for bad in [
            AcboConfig { explore_eps: 1.0, ..AcboConfig::default() },
            AcboConfig { stop_delta: 0.0, ..AcboConfig::default() },
            AcboConfig { eta: 0.5, ..AcboConfig::default() },
            AcboConfig { budget_t: 0, ..AcboConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }
}
