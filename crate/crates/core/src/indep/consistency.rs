//! Search for DAGs that reproduce a premise, and entailment over them.

use std::collections::HashSet;
use std::ops::ControlFlow;
use std::sync::{Arc, OnceLock};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dag::{bit, bits, default_names, for_each_dag, Dag, DEFAULT_ENUMERATION_CAP, HARD_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::indep::premise::{Hypothesis, PremiseSet};
use crate::seed::child_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exact,
    Sampled,
}

impl SearchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchMode::Exact => "exact",
            SearchMode::Sampled => "sampled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mode: SearchMode,
    /// Largest `d` accepted in exact mode.
    pub cap: usize,
    /// Maximum number of distinct DAGs returned in sampled mode.
    pub budget: usize,
    /// Restarts allowed per requested DAG in sampled mode.
    pub restarts_per_dag: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            mode: SearchMode::Exact,
            cap: DEFAULT_ENUMERATION_CAP,
            budget: 32,
            restarts_per_dag: 200,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn sampled(budget: usize, seed: u64) -> Self {
        SearchConfig {
            mode: SearchMode::Sampled,
            budget,
            seed,
            ..Self::default()
        }
    }

    /// Exact up to the default cap, sampled beyond it.
    pub fn auto(d: usize, seed: u64) -> Self {
        if d <= DEFAULT_ENUMERATION_CAP {
            Self::exact()
        } else {
            Self::sampled(Self::default().budget, seed)
        }
    }
}

/// DAGs over `p`'s variables that reproduce every statement of `p`.
///
/// Exact mode lists all of them; sampled mode returns up to `budget`
/// distinct ones. An empty result means no consistent DAG was found.
pub fn consistent_dags(p: &PremiseSet, cfg: &SearchConfig) -> Result<Vec<Dag>> {
    let mut out = Vec::new();
    visit_consistent(p, cfg, |g| {
        out.push(g);
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Whether `h` holds in every DAG consistent with `p`.
pub fn entails(p: &PremiseSet, h: &Hypothesis, cfg: &SearchConfig) -> Result<bool> {
    let d = p.num_vars();
    if h.a >= d || h.b >= d {
        return Err(Error::Input(format!("hypothesis index out of range for {d} variables")));
    }
    let mut any = false;
    let mut all = true;
    visit_consistent(p, cfg, |g| {
        any = true;
        if !h.holds_in(&g).unwrap_or(false) {
            all = false;
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })?;
    if !any {
        return Err(Error::Unsatisfiable);
    }
    Ok(all)
}

fn visit_consistent(
    p: &PremiseSet,
    cfg: &SearchConfig,
    mut f: impl FnMut(Dag) -> ControlFlow<()>,
) -> Result<()> {
    match cfg.mode {
        SearchMode::Exact => exact(p, cfg.cap, &mut f),
        SearchMode::Sampled => {
            sampled(p, cfg, &mut f);
            Ok(())
        }
    }
}

fn cached_dags(d: usize) -> &'static [Dag] {
    static CACHE: [OnceLock<Vec<Dag>>; DEFAULT_ENUMERATION_CAP + 1] =
        [const { OnceLock::new() }; DEFAULT_ENUMERATION_CAP + 1];
    CACHE[d].get_or_init(|| {
        let mut v = Vec::new();
        for_each_dag(d, DEFAULT_ENUMERATION_CAP, |g| v.push(g)).expect("within cap");
        v
    })
}

fn exact(p: &PremiseSet, cap: usize, f: &mut dyn FnMut(Dag) -> ControlFlow<()>) -> Result<()> {
    let d = p.num_vars();
    let cap = cap.min(HARD_ENUMERATION_CAP);
    if d > cap {
        return Err(Error::Capacity { d, cap });
    }
    let names: Arc<[String]> = p.names.clone().into();
    let default = default_names(d);
    let rename = |g: &Dag| -> Dag {
        if p.names == default {
            g.clone()
        } else {
            Dag::from_masks(names.clone(), g.children_rows().to_vec()).expect("acyclic")
        }
    };
    if d <= DEFAULT_ENUMERATION_CAP {
        for g in cached_dags(d) {
            if p.satisfied_by(g) && f(rename(g)).is_break() {
                break;
            }
        }
        return Ok(());
    }
    let mut stopped = false;
    for_each_dag(d, cap, |g| {
        if !stopped && p.satisfied_by(&g) && f(rename(&g)).is_break() {
            stopped = true;
        }
    })
}

/// Randomized search: a PC-style skeleton and orientation read off the
/// premise, a random completion, then greedy edge repair.
fn sampled(p: &PremiseSet, cfg: &SearchConfig, f: &mut dyn FnMut(Dag) -> ControlFlow<()>) {
    let d = p.num_vars();
    let names: Arc<[String]> = p.names.clone().into();
    let init = Skeleton::from_premise(p);
    let attempts = cfg.budget.saturating_mul(cfg.restarts_per_dag.max(1));
    let stale_limit = cfg.restarts_per_dag.max(1);
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut stale = 0;
    for attempt in 0..attempts {
        if seen.len() >= cfg.budget || stale >= stale_limit {
            break;
        }
        let mut rng = child_rng(cfg.seed, attempt as u64);
        let children = init.complete(&mut rng);
        let Ok(start) = Dag::from_masks(names.clone(), children) else {
            stale += 1;
            continue;
        };
        let g = repair(p, start, 8 * d * d + 32, &mut rng);
        if p.violations(&g) == 0 && seen.insert(g.children_rows().to_vec()) {
            stale = 0;
            if f(g).is_break() {
                return;
            }
        } else {
            stale += 1;
        }
    }
}

/// Partially directed graph over `d` nodes as adjacency and direction masks.
struct Skeleton {
    d: usize,
    adj: Vec<u64>,
    /// `dir[a] & bit(b)` marks `a -> b`.
    dir: Vec<u64>,
}

impl Skeleton {
    fn from_premise(p: &PremiseSet) -> Self {
        let d = p.num_vars();
        let mut adj = vec![0u64; d];
        let mut sepset: Vec<Option<u64>> = vec![None; d * d];
        for a in 0..d {
            for b in 0..d {
                if a != b {
                    adj[a] |= bit(b);
                }
            }
        }
        for s in &p.statements {
            if s.independent && sepset[s.x * d + s.y].is_none() {
                sepset[s.x * d + s.y] = Some(s.cond_mask());
                adj[s.x] &= !bit(s.y);
                adj[s.y] &= !bit(s.x);
            }
        }
        let mut sk = Skeleton {
            d,
            adj,
            dir: vec![0u64; d],
        };
        for c in 0..d {
            let nb: Vec<usize> = bits(sk.adj[c]).collect();
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if sk.adj[a] & bit(b) != 0 {
                        continue;
                    }
                    let (x, y) = (a.min(b), a.max(b));
                    if let Some(sep) = sepset[x * d + y] {
                        if sep & bit(c) == 0 && !sk.directed(c, a) && !sk.directed(c, b) {
                            sk.dir[a] |= bit(c);
                            sk.dir[b] |= bit(c);
                        }
                    }
                }
            }
        }
        sk.meek();
        sk
    }

    fn directed(&self, a: usize, b: usize) -> bool {
        self.dir[a] & bit(b) != 0
    }

    fn undirected(&self, a: usize, b: usize) -> bool {
        self.adj[a] & bit(b) != 0 && !self.directed(a, b) && !self.directed(b, a)
    }

    fn meek(&mut self) {
        let d = self.d;
        loop {
            let mut changed = false;
            for a in 0..d {
                for b in bits(self.adj[a]) {
                    if !self.undirected(a, b) {
                        continue;
                    }
                    // R1: c -> a - b, c and b non-adjacent
                    let r1 = (0..d).any(|c| self.directed(c, a) && self.adj[c] & bit(b) == 0 && c != b);
                    // R2: a -> c -> b
                    let r2 = (0..d).any(|c| self.directed(a, c) && self.directed(c, b));
                    // R3: a - c -> b, a - e -> b, c and e non-adjacent
                    let r3 = {
                        let cs: Vec<usize> = (0..d)
                            .filter(|&c| self.undirected(a, c) && self.directed(c, b))
                            .collect();
                        cs.iter().enumerate().any(|(i, &c)| {
                            cs[i + 1..].iter().any(|&e| self.adj[c] & bit(e) == 0)
                        })
                    };
                    if r1 || r2 || r3 {
                        self.dir[a] |= bit(b);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Orients every remaining edge along a random linear extension of the
    /// directed part; falls back to a uniformly random order if the directed
    /// part is cyclic.
    fn complete(&self, rng: &mut impl Rng) -> Vec<u64> {
        let d = self.d;
        let mut indeg: Vec<usize> = (0..d)
            .map(|v| (0..d).filter(|&u| self.directed(u, v)).count())
            .collect();
        let mut ready: Vec<usize> = (0..d).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(d);
        while !ready.is_empty() {
            let i = rng.random_range(0..ready.len());
            let v = ready.swap_remove(i);
            order.push(v);
            for w in bits(self.dir[v]) {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(w);
                }
            }
        }
        if order.len() < d {
            order = (0..d).collect();
            order.shuffle(rng);
        }
        let mut rank = vec![0; d];
        for (r, &v) in order.iter().enumerate() {
            rank[v] = r;
        }
        let mut children = vec![0u64; d];
        for a in 0..d {
            for b in bits(self.adj[a]) {
                if rank[a] < rank[b] {
                    children[a] |= bit(b);
                }
            }
        }
        children
    }
}

fn violations_below(p: &PremiseSet, g: &Dag, bound: usize) -> usize {
    let mut n = 0;
    for s in &p.statements {
        if !s.holds_in(g) {
            n += 1;
            if n >= bound {
                break;
            }
        }
    }
    n
}

/// First-improvement hill climbing over single-edge additions, deletions
/// and reversals, scored by the number of violated statements.
fn repair(p: &PremiseSet, mut g: Dag, max_steps: usize, rng: &mut impl Rng) -> Dag {
    let d = g.num_vars();
    let mut score = p.violations(&g);
    let mut pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|a| (0..d).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let mut steps = 0;
    while score > 0 && steps < max_steps {
        pairs.shuffle(rng);
        let mut improved = false;
        for &(a, b) in &pairs {
            let rows = g.children_rows();
            let mut candidates: Vec<Vec<u64>> = Vec::with_capacity(2);
            if rows[a] & bit(b) != 0 {
                let mut del = rows.to_vec();
                del[a] &= !bit(b);
                let mut rev = del.clone();
                rev[b] |= bit(a);
                candidates.push(del);
                candidates.push(rev);
            } else if rows[b] & bit(a) == 0 && g.descendants_mask(b) & bit(a) == 0 {
                let mut add = rows.to_vec();
                add[a] |= bit(b);
                candidates.push(add);
            }
            for c in candidates {
                let Ok(h) = Dag::from_masks(g.shared_names(), c) else {
                    continue;
                };
                let s = violations_below(p, &h, score);
                if s < score {
                    g = h;
                    score = s;
                    improved = true;
                    break;
                }
            }
            if improved {
                break;
            }
        }
        steps += 1;
        if !improved {
            break;
        }
    }
    g
}
