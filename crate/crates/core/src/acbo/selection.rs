use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::posterior::{information_gain, Posterior};
use crate::dag::{Dag, VarPair};
use crate::error::{Error, Result};
use crate::seed::rng;

/// Gains at or below this are treated as zero.
pub const IG_EPSILON: f64 = 1e-12;

/// Reachability predictions of every hypothesis on every ordered pair.
#[derive(Debug, Clone)]
pub struct PredictionTable {
    pairs: Vec<VarPair>,
    /// `rows[p][k]`: hypothesis `k`'s prediction for `pairs[p]`.
    rows: Vec<Vec<bool>>,
}

impl PredictionTable {
    pub fn new(hypotheses: &[Dag]) -> Result<Self> {
        let first = hypotheses
            .first()
            .ok_or_else(|| Error::Input("no hypotheses".into()))?;
        if hypotheses.iter().any(|g| !g.same_variables(first)) {
            return Err(Error::Input("hypotheses are over different variable sets".into()));
        }
        let pairs = VarPair::all(first.num_vars());
        let rows = pairs
            .iter()
            .map(|&pair| hypotheses.iter().map(|g| g.r_hat(pair)).collect())
            .collect();
        Ok(PredictionTable { pairs, rows })
    }

    pub fn pairs(&self) -> &[VarPair] {
        &self.pairs
    }

    pub fn preds(&self, pair_index: usize) -> &[bool] {
        &self.rows[pair_index]
    }

    pub fn index_of(&self, pair: VarPair) -> Option<usize> {
        self.pairs.iter().position(|&p| p == pair)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub pair: VarPair,
    pub pair_index: usize,
    pub ig: f64,
    pub was_random: bool,
}

/// Information gain over the hypotheses still carrying mass.
pub fn alive_information_gain(pi: &Posterior, preds: &[bool], eta_eff: f64) -> f64 {
    let alive: Vec<usize> = pi.alive().collect();
    if alive.len() == pi.len() {
        return information_gain(pi, preds, eta_eff);
    }
    let Ok(sub) = Posterior::from_weights(alive.iter().map(|&k| pi.weights()[k]).collect()) else {
        return 0.0;
    };
    let sub_preds: Vec<bool> = alive.iter().map(|&k| preds[k]).collect();
    information_gain(&sub, &sub_preds, eta_eff)
}

/// With probability `eps` a uniformly random pair; otherwise the pair of
/// largest gain, lowest `(source, sink)` first among ties.
pub fn select_intervention(
    pi: &Posterior,
    table: &PredictionTable,
    eta_eff: f64,
    eps: f64,
    seed: u64,
) -> Result<Selection> {
    if pi.alive().nth(1).is_none() && eps <= 0.0 {
        return Err(Error::Stalled);
    }
    let mut r = rng(seed);
    let explore = r.random::<f64>() < eps;
    let random_pick = |r: &mut ChaCha8Rng| {
        let i = r.random_range(0..table.pairs.len());
        Selection {
            pair: table.pairs[i],
            pair_index: i,
            ig: alive_information_gain(pi, table.preds(i), eta_eff),
            was_random: true,
        }
    };
    if explore {
        return Ok(random_pick(&mut r));
    }
    let mut best: Option<(usize, f64)> = None;
    for i in 0..table.pairs.len() {
        let ig = alive_information_gain(pi, table.preds(i), eta_eff);
        if ig > IG_EPSILON && best.is_none_or(|(_, b)| ig > b + IG_EPSILON) {
            best = Some((i, ig));
        }
    }
    match best {
        Some((i, ig)) => Ok(Selection {
            pair: table.pairs[i],
            pair_index: i,
            ig,
            was_random: false,
        }),
        None if eps > 0.0 => Ok(random_pick(&mut r)),
        None => Err(Error::Stalled),
    }
}
