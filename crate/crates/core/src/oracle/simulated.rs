use rand::Rng;

use super::{InterventionalOracle, OracleConfig, OracleQuery, OracleResponse, QueryContext};
use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::seed::rng;

/// Answers from a known graph's reachability, each vote flipped with
/// probability `eta`.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    truth: Dag,
    eta: f64,
    votes_m: usize,
}

impl SimulatedOracle {
    pub fn new(truth: Dag, eta: f64, votes_m: usize) -> Result<Self> {
        OracleConfig {
            eta,
            votes_m,
            ..OracleConfig::default()
        }
        .validate()?;
        Ok(SimulatedOracle { truth, eta, votes_m })
    }

    pub fn from_config(truth: Dag, cfg: &OracleConfig) -> Result<Self> {
        Self::new(truth, cfg.eta, cfg.votes_m)
    }

    pub fn truth(&self) -> &Dag {
        &self.truth
    }
}

impl InterventionalOracle for SimulatedOracle {
    fn query(&self, q: &OracleQuery<'_>, ctx: &QueryContext) -> Result<OracleResponse> {
        let d = self.truth.num_vars();
        let pair = q.pair();
        if pair.source >= d || pair.sink >= d || pair.source == pair.sink {
            return Err(Error::Input(format!("query ({}, {}) invalid for {d} variables", pair.source, pair.sink)));
        }
        let correct = u8::from(self.truth.r_hat(pair));
        let mut r = rng(ctx.seed);
        let votes = (0..self.votes_m)
            .map(|_| if r.random::<f64>() < self.eta { 1 - correct } else { correct })
            .collect();
        Ok(OracleResponse::from_votes(votes))
    }

    fn model(&self) -> &str {
        "simulated"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{default_names, VarPair};
    use crate::indep::PremiseSet;

    fn ask(o: &SimulatedOracle, i: usize, j: usize, seed: u64) -> OracleResponse {
        let p = PremiseSet::new(default_names(3), vec![], false).unwrap();
        let q = OracleQuery::new(&p, VarPair::new(i, j).unwrap());
        o.query(&q, &QueryContext { query_id: "q".into(), seed }).unwrap()
    }

    #[test]
    fn noiseless_answers_follow_reachability() {
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let fork = Dag::from_edges(3, &[(1, 0), (1, 2)]).unwrap();
        assert_eq!(ask(&SimulatedOracle::new(chain, 0.0, 3).unwrap(), 0, 2, 1).answer, 1);
        assert_eq!(ask(&SimulatedOracle::new(fork, 0.0, 3).unwrap(), 0, 2, 1).answer, 0);
    }

    #[test]
    fn rejects_invalid_noise() {
        assert!(matches!(SimulatedOracle::new(Dag::empty(2), 0.5, 3), Err(Error::Config(_))));
        assert!(SimulatedOracle::new(Dag::empty(2), 0.1, 4).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let o = SimulatedOracle::new(Dag::empty(3), 0.3, 5).unwrap();
        assert_eq!(ask(&o, 0, 1, 42), ask(&o, 0, 1, 42));
        assert_eq!(ask(&o, 0, 1, 42).votes.len(), 5);
    }
}
