use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::indep::{consistent_dags, PremiseSet, SearchConfig};
use crate::oracle::LlmClient;
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisMode {
    #[default]
    Exact,
    Sampled,
    OracleLlm,
}

/// Candidate graphs for one discrimination run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSet {
    pub graphs: Vec<Dag>,
    /// Position of the supplied true graph, if one was supplied.
    pub truth_index: Option<usize>,
    /// Whether the true graph had to be inserted because the candidate
    /// generator did not produce it.
    pub truth_forced: bool,
}

/// Builds up to `n` distinct candidate graphs consistent with `premise`.
///
/// `llm` is required in [`HypothesisMode::OracleLlm`].
pub fn generate_hypotheses(
    premise: &PremiseSet,
    n: usize,
    mode: HypothesisMode,
    include_truth: Option<&Dag>,
    seed: u64,
    llm: Option<&LlmClient>,
) -> Result<HypothesisSet> {
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 hypotheses, got {n}")));
    }
    let mut r = rng(seed);
    let mut graphs = match mode {
        HypothesisMode::Exact => {
            let all = consistent_dags(premise, &SearchConfig::exact())?;
            sample_n(all, n, &mut r)
        }
        HypothesisMode::Sampled => {
            consistent_dags(premise, &SearchConfig::sampled(n, derive_seed(seed, 1)))?
        }
        HypothesisMode::OracleLlm => {
            let client = llm.ok_or_else(|| Error::Config("oracle-llm hypothesis mode needs an LLM endpoint".into()))?;
            let reply = client.complete(&generation_prompt(premise, n)?)?;
            let mut found = parse_generated_graphs(&reply, premise);
            found.truncate(n);
            if found.len() < n {
                let extra = consistent_dags(premise, &SearchConfig::sampled(n, derive_seed(seed, 2)))?;
                for g in extra {
                    if found.len() >= n {
                        break;
                    }
                    if !found.contains(&g) {
                        found.push(g);
                    }
                }
            }
            found
        }
    };

    let mut truth_index = None;
    let mut truth_forced = false;
    if let Some(truth) = include_truth {
        if !truth.same_variables(graphs.first().unwrap_or(truth)) || truth.num_vars() != premise.num_vars() {
            return Err(Error::Input("true graph is over different variables".into()));
        }
        truth_index = graphs.iter().position(|g| g == truth);
        if truth_index.is_none() {
            truth_forced = true;
            if graphs.len() < n {
                graphs.push(truth.clone());
                truth_index = Some(graphs.len() - 1);
            } else {
                let k = r.random_range(0..graphs.len());
                graphs[k] = truth.clone();
                truth_index = Some(k);
            }
        }
    }
    if graphs.len() < 2 {
        return Err(Error::DegenerateHypotheses { found: graphs.len() });
    }
    Ok(HypothesisSet {
        graphs,
        truth_index,
        truth_forced,
    })
}

/// A uniform sample of `n` items, kept in their original order.
fn sample_n<T>(all: Vec<T>, n: usize, r: &mut impl Rng) -> Vec<T> {
    if all.len() <= n {
        return all;
    }
    let mut idx: Vec<usize> = (0..all.len()).collect();
    idx.shuffle(r);
    let mut keep: Vec<usize> = idx[..n].to_vec();
    keep.sort_unstable();
    let keep: HashSet<usize> = keep.into_iter().collect();
    all.into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, g)| g)
        .collect()
}

pub fn generation_prompt(premise: &PremiseSet, n: usize) -> Result<String> {
    Ok(format!(
        "{} List up to {n} distinct causal graphs over these variables that are consistent with \
         the statistical relations above. Reply with JSON only, in the form \
         {{\"graphs\": [[[\"X\", \"Y\"], ...], ...]}}, where each pair [\"X\", \"Y\"] is a directed edge X -> Y.",
        premise.text()?
    ))
}

/// Extracts graphs from a generation reply, keeping distinct acyclic graphs
/// that reproduce the premise. Malformed entries are skipped.
pub fn parse_generated_graphs(reply: &str, premise: &PremiseSet) -> Vec<Dag> {
    let (Some(start), Some(end)) = (reply.find('{'), reply.rfind('}')) else {
        return Vec::new();
    };
    if end < start {
        return Vec::new();
    }
    let Ok(v) = serde_json::from_str::<Value>(&reply[start..=end]) else {
        return Vec::new();
    };
    let Some(list) = v.get("graphs").and_then(Value::as_array) else {
        return Vec::new();
    };
    let mut out: Vec<Dag> = Vec::new();
    for g in list {
        let Some(edges) = g.as_array() else { continue };
        let parsed: Option<Vec<(usize, usize)>> = edges
            .iter()
            .map(|e| {
                let e = e.as_array()?;
                let a = premise.index_of(e.first()?.as_str()?)?;
                let b = premise.index_of(e.get(1)?.as_str()?)?;
                Some((a, b))
            })
            .collect();
        let Some(parsed) = parsed else { continue };
        let Ok(dag) = Dag::new(premise.names.clone(), &parsed) else {
            continue;
        };
        if premise.satisfied_by(&dag) && !out.contains(&dag) {
            out.push(dag);
        }
    }
    if out.is_empty() {
        log::warn!("generation reply contained no usable graphs");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indep::all_ci_statements;

    fn chain_premise() -> (Dag, PremiseSet) {
        let chain = Dag::from_edges(3, &[(0, 2), (2, 1)]).unwrap();
        let p = PremiseSet::new(chain.names().to_vec(), all_ci_statements(&chain, 1), true).unwrap();
        (chain, p)
    }

    #[test]
    fn exact_mode_returns_small_classes_whole() {
        let (chain, p) = chain_premise();
        let h = generate_hypotheses(&p, 8, HypothesisMode::Exact, None, 1, None).unwrap();
        assert_eq!(h.graphs.len(), 3);
        assert!(h.graphs.contains(&chain));
        assert_eq!(h.truth_index, None);
    }

    #[test]
    fn exact_mode_samples_large_classes() {
        let p = PremiseSet::closed(crate::dag::default_names(4), vec![]).unwrap();
        let all = consistent_dags(&p, &SearchConfig::exact()).unwrap();
        assert_eq!(all.len(), 24);
        let h = generate_hypotheses(&p, 5, HypothesisMode::Exact, Some(&all[17]), 4, None).unwrap();
        assert_eq!(h.graphs.len(), 5);
        let t = h.truth_index.unwrap();
        assert_eq!(h.graphs[t], all[17]);
        let distinct: HashSet<_> = h.graphs.iter().map(|g| g.edges()).collect();
        assert_eq!(distinct.len(), 5);
    }

    #[test]
    fn truth_is_forced_in() {
        let (_, p) = chain_premise();
        let outsider = Dag::from_edges(3, &[(0, 1)]).unwrap();
        let h = generate_hypotheses(&p, 8, HypothesisMode::Exact, Some(&outsider), 1, None).unwrap();
        assert!(h.truth_forced);
        assert_eq!(h.graphs[h.truth_index.unwrap()], outsider);
    }

    #[test]
    fn singleton_class_is_degenerate() {
        let collider = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let p = PremiseSet::new(collider.names().to_vec(), all_ci_statements(&collider, 1), true).unwrap();
        assert!(matches!(
            generate_hypotheses(&p, 8, HypothesisMode::Exact, None, 1, None),
            Err(Error::DegenerateHypotheses { found: 1 })
        ));
    }

    #[test]
    fn generated_graph_parsing() {
        let (_, p) = chain_premise();
        let reply = r#"Sure: {"graphs": [[["A","C"],["C","B"]], [["C","A"],["C","B"]], [["A","B"]], [["A","Q"]], [["A","C"],["C","B"]]]}"#;
        let gs = parse_generated_graphs(reply, &p);
        assert_eq!(gs.len(), 2);
        assert!(parse_generated_graphs("no json here", &p).is_empty());
    }

    #[test]
    fn llm_mode_needs_a_client() {
        let (_, p) = chain_premise();
        assert!(matches!(
            generate_hypotheses(&p, 4, HypothesisMode::OracleLlm, None, 1, None),
            Err(Error::Config(_))
        ));
    }
}
