//! Directed acyclic graphs, do-interventions by graph mutilation, and the
//! structural predicates evaluated on them.
//!
//! Adjacency is stored as one `u64` bit row per variable, so graphs are
//! limited to [`MAX_VARS`] variables. Reachability (descendant and ancestor
//! sets) is computed once at construction; a `Dag` is immutable afterwards.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const MAX_VARS: usize = 64;

/// Largest `d` enumerated exhaustively unless the caller opts in to more.
pub const DEFAULT_ENUMERATION_CAP: usize = 5;

/// Absolute ceiling for exhaustive enumeration (3,781,503 DAGs at d = 6).
pub const HARD_ENUMERATION_CAP: usize = 6;

#[inline]
pub(crate) fn bit(i: usize) -> u64 {
    1u64 << i
}

pub(crate) fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

pub(crate) fn full_mask(d: usize) -> u64 {
    if d >= 64 {
        u64::MAX
    } else {
        bit(d) - 1
    }
}

/// Variable names: `A`..`Z`, then `A1`..`Z1`, `A2`, ...
pub fn var_name(i: usize) -> String {
    let letter = (b'A' + (i % 26) as u8) as char;
    match i / 26 {
        0 => letter.to_string(),
        round => format!("{letter}{round}"),
    }
}

pub fn default_names(d: usize) -> Vec<String> {
    (0..d).map(var_name).collect()
}

/// A do-intervention `do(V_target = v)`. The value is not modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Intervention {
    pub target: usize,
}

impl Intervention {
    pub fn new(target: usize) -> Self {
        Intervention { target }
    }
}

/// Ordered pair `(source, sink)`: intervene on `source`, observe `sink`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarPair {
    pub source: usize,
    pub sink: usize,
}

impl VarPair {
    pub fn new(source: usize, sink: usize) -> Result<Self> {
        if source == sink {
            return Err(Error::Input(format!(
                "variable pair must be distinct, got ({source}, {sink})"
            )));
        }
        Ok(VarPair { source, sink })
    }

    /// All ordered pairs over `d` variables in lexicographic order.
    pub fn all(d: usize) -> Vec<VarPair> {
        let mut out = Vec::with_capacity(d * d.saturating_sub(1));
        for source in 0..d {
            for sink in 0..d {
                if source != sink {
                    out.push(VarPair { source, sink });
                }
            }
        }
        out
    }
}

/// The six causal relation templates a hypothesis can assert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationTemplate {
    Parent,
    Child,
    Ancestor,
    Descendant,
    Collider,
    Confounder,
}

impl RelationTemplate {
    pub const ALL: [RelationTemplate; 6] = [
        RelationTemplate::Parent,
        RelationTemplate::Child,
        RelationTemplate::Ancestor,
        RelationTemplate::Descendant,
        RelationTemplate::Collider,
        RelationTemplate::Confounder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationTemplate::Parent => "parent",
            RelationTemplate::Child => "child",
            RelationTemplate::Ancestor => "ancestor",
            RelationTemplate::Descendant => "descendant",
            RelationTemplate::Collider => "collider",
            RelationTemplate::Confounder => "confounder",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RelationTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationTemplate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RelationTemplate::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Input(format!("unknown relation template '{s}'")))
    }
}

/// An acyclic directed graph over named variables.
#[derive(Clone)]
pub struct Dag {
    names: Arc<[String]>,
    children: Vec<u64>,
    parents: Vec<u64>,
    descendants: Vec<u64>,
    ancestors: Vec<u64>,
}

impl PartialEq for Dag {
    fn eq(&self, other: &Self) -> bool {
        self.children == other.children && self.names == other.names
    }
}

impl Eq for Dag {}

impl std::hash::Hash for Dag {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.children.hash(state);
        self.names.hash(state);
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<String> = self
            .edges()
            .into_iter()
            .map(|(a, b)| format!("{}->{}", self.names[a], self.names[b]))
            .collect();
        write!(f, "Dag[{}]{{{}}}", self.names.join(","), edges.join(", "))
    }
}

/// Kahn's algorithm, lowest index first among ready nodes.
fn kahn_order(parents: &[u64]) -> Result<Vec<usize>> {
    let d = parents.len();
    let mut remaining = full_mask(d);
    let mut order = Vec::with_capacity(d);
    while remaining != 0 {
        let ready = bits(remaining).find(|&v| parents[v] & remaining == 0);
        match ready {
            Some(v) => {
                order.push(v);
                remaining &= !bit(v);
            }
            None => {
                return Err(Error::Structure(format!(
                    "directed cycle among variables {:?}",
                    bits(remaining).collect::<Vec<_>>()
                )))
            }
        }
    }
    Ok(order)
}

impl Dag {
    /// Builds a DAG from explicit names and `(source, destination)` edges.
    pub fn new(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let d = names.len();
        check_names(&names)?;
        let mut children = vec![0u64; d];
        for &(a, b) in edges {
            if a >= d || b >= d {
                return Err(Error::Input(format!(
                    "edge ({a}, {b}) out of range for {d} variables"
                )));
            }
            if a == b {
                return Err(Error::Structure(format!("self-edge on variable {a}")));
            }
            children[a] |= bit(b);
        }
        Self::from_masks(names.into(), children)
    }

    /// Builds a DAG with default variable names (`A`, `B`, ...).
    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(default_names(d), edges)
    }

    pub fn empty(d: usize) -> Self {
        Self::from_edges(d, &[]).expect("empty graph is acyclic")
    }

    pub(crate) fn from_masks(names: Arc<[String]>, children: Vec<u64>) -> Result<Self> {
        let d = names.len();
        if d == 0 || d > MAX_VARS {
            return Err(Error::Input(format!(
                "number of variables must be in 1..={MAX_VARS}, got {d}"
            )));
        }
        debug_assert_eq!(children.len(), d);
        let mut parents = vec![0u64; d];
        for (a, &row) in children.iter().enumerate() {
            if row & bit(a) != 0 {
                return Err(Error::Structure(format!("self-edge on variable {a}")));
            }
            if row & !full_mask(d) != 0 {
                return Err(Error::Input("edge target out of range".into()));
            }
            for b in bits(row) {
                parents[b] |= bit(a);
            }
        }
        let order = kahn_order(&parents)?;
        let mut descendants = vec![0u64; d];
        for &v in order.iter().rev() {
            let mut reach = children[v];
            for c in bits(children[v]) {
                reach |= descendants[c];
            }
            descendants[v] = reach;
        }
        let mut ancestors = vec![0u64; d];
        for (a, &reach) in descendants.iter().enumerate() {
            for b in bits(reach) {
                ancestors[b] |= bit(a);
            }
        }
        Ok(Dag {
            names,
            children,
            parents,
            descendants,
            ancestors,
        })
    }

    /// Same edge set over new variable names.
    pub fn with_names(&self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_vars() {
            return Err(Error::Input("name count does not match variable count".into()));
        }
        check_names(&names)?;
        Self::from_masks(names.into(), self.children.clone())
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub(crate) fn shared_names(&self) -> Arc<[String]> {
        self.names.clone()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.children[a] & bit(b) != 0
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn children_mask(&self, v: usize) -> u64 {
        self.children[v]
    }

    pub fn parents_mask(&self, v: usize) -> u64 {
        self.parents[v]
    }

    pub fn descendants_mask(&self, v: usize) -> u64 {
        self.descendants[v]
    }

    pub fn ancestors_mask(&self, v: usize) -> u64 {
        self.ancestors[v]
    }

    pub(crate) fn children_rows(&self) -> &[u64] {
        &self.children
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(|r| r.count_ones() as usize).sum()
    }

    /// Edges as `(source, destination)`, sorted lexicographically.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(a, &row)| bits(row).map(move |b| (a, b)))
            .collect()
    }

    /// A topological order; ties go to the lowest index.
    pub fn topological_order(&self) -> Vec<usize> {
        kahn_order(&self.parents).expect("Dag invariant: acyclic")
    }

    /// Every variable reachable from `i` by a directed path, `i` excluded.
    pub fn descendants(&self, i: usize) -> Vec<usize> {
        bits(self.descendants[i]).collect()
    }

    /// Graph surgery for `do(V_target)`: drops every edge into the target.
    pub fn mutilate(&self, iv: Intervention) -> Dag {
        let t = iv.target;
        let mut children = self.children.clone();
        for p in bits(self.parents[t]) {
            children[p] &= !bit(t);
        }
        Self::from_masks(self.names.clone(), children).expect("removing edges keeps acyclicity")
    }

    /// Whether `do(source)` changes `sink`.
    ///
    /// Mutilation only removes edges into the source, so the source's
    /// descendant set in the mutilated graph equals its descendant set here.
    pub fn r_hat(&self, pair: VarPair) -> bool {
        self.descendants[pair.source] & bit(pair.sink) != 0
    }

    pub fn same_variables(&self, other: &Dag) -> bool {
        self.names == other.names
    }

    /// Evaluates a relation template for the ordered pair `(a, b)`.
    pub fn relation_holds(&self, template: RelationTemplate, a: usize, b: usize) -> Result<bool> {
        let d = self.num_vars();
        if a >= d || b >= d {
            return Err(Error::Input(format!("variable index out of range for {d} variables")));
        }
        if a == b {
            return Err(Error::Input("relation requires two distinct variables".into()));
        }
        Ok(match template {
            RelationTemplate::Parent => self.has_edge(a, b),
            RelationTemplate::Child => self.has_edge(b, a),
            RelationTemplate::Ancestor => {
                self.descendants[a] & bit(b) != 0 && !self.has_edge(a, b)
            }
            RelationTemplate::Descendant => {
                self.descendants[b] & bit(a) != 0 && !self.has_edge(b, a)
            }
            RelationTemplate::Collider => self.children[a] & self.children[b] != 0,
            RelationTemplate::Confounder => self.parents[a] & self.parents[b] != 0,
        })
    }
}

fn check_names(names: &[String]) -> Result<()> {
    let mut seen = HashMap::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Input(format!("invalid variable name '{n}'")));
        }
        if seen.insert(n.as_str(), i).is_some() {
            return Err(Error::Input(format!("duplicate variable name '{n}'")));
        }
    }
    Ok(())
}

/// Ordered pairs on which the two graphs' interventional predictions differ.
pub fn discrimination_set(g_plus: &Dag, g_minus: &Dag) -> Result<Vec<VarPair>> {
    if !g_plus.same_variables(g_minus) {
        return Err(Error::Input("graphs are over different variable sets".into()));
    }
    Ok(VarPair::all(g_plus.num_vars())
        .into_iter()
        .filter(|&p| g_plus.r_hat(p) != g_minus.r_hat(p))
        .collect())
}

/// Every labeled DAG on `d` variables, each exactly once.
///
/// Graphs are produced by their unique source-layer decomposition: layer 1 is
/// the set of sources, layer k holds the sources left after removing layers
/// 1..k-1, and every node in layer k >= 2 has at least one parent in layer k-1.
pub fn enumerate_dags(d: usize, cap: usize) -> Result<Vec<Dag>> {
    let mut out = Vec::new();
    for_each_dag(d, cap, |g| out.push(g))?;
    Ok(out)
}

/// Streaming form of [`enumerate_dags`]; avoids holding every graph at once.
pub fn for_each_dag(d: usize, cap: usize, mut f: impl FnMut(Dag)) -> Result<()> {
    let cap = cap.min(HARD_ENUMERATION_CAP);
    if d > cap {
        return Err(Error::Capacity { d, cap });
    }
    if d == 0 {
        return Err(Error::Input("need at least one variable".into()));
    }
    let names: Arc<[String]> = default_names(d).into();
    let mut parents = vec![0u64; d];
    let mut emit = |parents: &[u64]| {
        let mut children = vec![0u64; d];
        for (v, &p) in parents.iter().enumerate() {
            for u in bits(p) {
                children[u] |= bit(v);
            }
        }
        f(Dag::from_masks(names.clone(), children).expect("layered construction is acyclic"));
    };
    layer_step(0, 0, full_mask(d), &mut parents, &mut emit);
    Ok(())
}

type Emit<'a> = dyn FnMut(&[u64]) + 'a;

fn layer_step(placed: u64, prev: u64, remaining: u64, parents: &mut [u64], out: &mut Emit<'_>) {
    if remaining == 0 {
        out(parents);
        return;
    }
    // Nonempty subsets of `remaining` as the next layer.
    let mut layer = remaining;
    while layer != 0 {
        let nodes: Vec<usize> = bits(layer).collect();
        assign_parents(&nodes, 0, placed, prev, layer, remaining, parents, out);
        layer = (layer - 1) & remaining;
    }
}

#[allow(clippy::too_many_arguments)]
fn assign_parents(
    nodes: &[usize],
    k: usize,
    placed: u64,
    prev: u64,
    layer: u64,
    remaining: u64,
    parents: &mut [u64],
    out: &mut Emit<'_>,
) {
    if k == nodes.len() {
        layer_step(placed | layer, layer, remaining & !layer, parents, out);
        return;
    }
    let v = nodes[k];
    if prev == 0 {
        parents[v] = 0;
        assign_parents(nodes, k + 1, placed, prev, layer, remaining, parents, out);
        return;
    }
    // Subsets of `placed` that hit the previous layer.
    let mut sub = placed;
    loop {
        if sub & prev != 0 {
            parents[v] = sub;
            assign_parents(nodes, k + 1, placed, prev, layer, remaining, parents, out);
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & placed;
    }
    parents[v] = 0;
}

/// Random DAG: uniform random topological order, then each forward edge
/// independently with probability `edge_prob`.
pub fn random_dag(d: usize, edge_prob: f64, rng_seed: u64) -> Result<Dag> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::Input(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut rng = seed::rng(rng_seed);
    random_dag_with(d, edge_prob, &mut rng)
}

pub(crate) fn random_dag_with<R: Rng + ?Sized>(d: usize, edge_prob: f64, rng: &mut R) -> Result<Dag> {
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for a in 0..d {
        for b in (a + 1)..d {
            if rng.random::<f64>() < edge_prob {
                edges.push((order[a], order[b]));
            }
        }
    }
    Dag::from_edges(d, &edges)
}

/// Wire form: `{"d": 3, "names": ["A","B","C"], "edges": [[0,1],[1,2]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagJson {
    pub d: usize,
    pub names: Vec<String>,
    pub edges: Vec<[usize; 2]>,
}

impl From<&Dag> for DagJson {
    fn from(g: &Dag) -> Self {
        DagJson {
            d: g.num_vars(),
            names: g.names().to_vec(),
            edges: g.edges().into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }
}

impl TryFrom<DagJson> for Dag {
    type Error = Error;

    fn try_from(j: DagJson) -> Result<Self> {
        if j.names.len() != j.d {
            return Err(Error::Input(format!(
                "graph declares d = {} but lists {} names",
                j.d,
                j.names.len()
            )));
        }
        let edges: Vec<(usize, usize)> = j.edges.iter().map(|e| (e[0], e[1])).collect();
        Dag::new(j.names, &edges)
    }
}

impl Serialize for Dag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DagJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dag {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = DagJson::deserialize(de)?;
        Dag::try_from(j).map_err(serde::de::Error::custom)
    }
}
