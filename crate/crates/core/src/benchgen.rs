//! Benchmark instance generation, JSONL persistence, splits and manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dag::{random_dag_with, Dag, RelationTemplate, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::indep::{consistent_dags, entails, parse_premise, render_premise, CiPolicy, Hypothesis, PremiseSet, SearchConfig};
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Entailment over the full consistent set.
    Exact,
    /// Entailment over a sampled subset of the consistent set.
    Approximate,
    /// Label taken from an external record.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            _ => Err(Error::Input(format!("unknown split '{s}'"))),
        }
    }
}

/// One benchmark record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchInstance {
    pub id: String,
    pub d: usize,
    pub premise: String,
    pub hypothesis: String,
    pub relation_type: RelationTemplate,
    pub label: u8,
    pub label_mode: LabelMode,
    #[serde(default)]
    pub split: Split,
    pub graph: Option<Dag>,
    pub seed: Option<u64>,
}

impl BenchInstance {
    pub fn premise_set(&self) -> Result<PremiseSet> {
        parse_premise(&self.premise)
    }

    /// The structured hypothesis, resolved with the recorded template.
    pub fn hypothesis_struct(&self, names: &[String]) -> Result<Hypothesis> {
        hypothesis_from_text(self.relation_type, &self.hypothesis, names)
    }
}

/// Parses hypothesis text whose template is known, undoing the role swap of
/// the child and descendant phrasings.
pub fn hypothesis_from_text(template: RelationTemplate, text: &str, names: &[String]) -> Result<Hypothesis> {
    let h = Hypothesis::parse(text, names)?;
    let resolved = match (template, h.template) {
        (RelationTemplate::Child, RelationTemplate::Parent)
        | (RelationTemplate::Descendant, RelationTemplate::Ancestor) => Hypothesis::new(template, h.b, h.a)?,
        (t, p) if t == p => h,
        (t, p) => {
            return Err(Error::parse(
                "hypothesis",
                format!("text reads as {p} but the record says {t}"),
            ))
        }
    };
    Ok(resolved)
}

/// Generation knobs; `None` picks the depth-dependent default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenPolicy {
    pub edge_prob: Option<f64>,
    pub ci_policy: Option<CiPolicy>,
    /// Consistent graphs sampled per instance above the enumeration cap.
    pub sampled_budget: usize,
}

impl Default for GenPolicy {
    fn default() -> Self {
        GenPolicy {
            edge_prob: None,
            ci_policy: None,
            sampled_budget: 16,
        }
    }
}

impl GenPolicy {
    /// `min(0.5, 3 / (d - 1))`: mean degree about 3.
    pub fn edge_prob_for(&self, d: usize) -> f64 {
        self.edge_prob
            .unwrap_or_else(|| if d < 2 { 0.0 } else { (3.0 / (d - 1) as f64).min(0.5) })
    }

    /// Full closed-world listing up to the enumeration cap; marginal
    /// statements only above it.
    pub fn ci_policy_for(&self, d: usize) -> CiPolicy {
        self.ci_policy.unwrap_or(if d <= DEFAULT_ENUMERATION_CAP {
            CiPolicy::Full
        } else {
            CiPolicy::MinimalSeparators { max_size: 0 }
        })
    }
}

/// An unlabeled draw: graph, premise and hypothesis.
#[derive(Debug, Clone)]
pub struct InstanceDraw {
    pub index: usize,
    pub seed: u64,
    pub graph: Dag,
    pub premise_text: String,
    pub premise: PremiseSet,
    pub hypothesis: Hypothesis,
}

/// Seed of instance `index` at depth `d`.
pub fn instance_seed(master: u64, d: usize, index: usize) -> u64 {
    derive_seed(derive_seed(master, d as u64), index as u64)
}

pub fn draw_instance(d: usize, index: usize, master: u64, policy: &GenPolicy) -> Result<InstanceDraw> {
    if d < 2 {
        return Err(Error::Input(format!("instances need at least 2 variables, got {d}")));
    }
    let seed = instance_seed(master, d, index);
    let mut r = rng(seed);
    let graph = random_dag_with(d, policy.edge_prob_for(d), &mut r)?;
    let template = RelationTemplate::ALL[r.random_range(0..RelationTemplate::ALL.len())];
    let a = r.random_range(0..d);
    let mut b = r.random_range(0..d - 1);
    if b >= a {
        b += 1;
    }
    let (premise_text, premise) = render_premise(&graph, policy.ci_policy_for(d))?;
    Ok(InstanceDraw {
        index,
        seed,
        graph,
        premise_text,
        premise,
        hypothesis: Hypothesis::new(template, a, b)?,
    })
}

/// Entailment label of a draw, exact up to the enumeration cap.
///
/// Above the cap the generating graph joins the sampled consistent graphs,
/// so the label never claims a relation the generating graph lacks.
pub fn label_draw(draw: &InstanceDraw, policy: &GenPolicy) -> Result<(u8, LabelMode)> {
    let d = draw.graph.num_vars();
    if d <= DEFAULT_ENUMERATION_CAP {
        let l = entails(&draw.premise, &draw.hypothesis, &SearchConfig::exact())?;
        return Ok((u8::from(l), LabelMode::Exact));
    }
    if !draw.hypothesis.holds_in(&draw.graph)? {
        return Ok((0, LabelMode::Approximate));
    }
    let found = consistent_dags(
        &draw.premise,
        &SearchConfig::sampled(policy.sampled_budget, derive_seed(draw.seed, 1)),
    )?;
    for g in &found {
        if !draw.hypothesis.holds_in(g)? {
            return Ok((0, LabelMode::Approximate));
        }
    }
    Ok((1, LabelMode::Approximate))
}

pub fn instance_id(d: usize, index: usize) -> String {
    format!("d{d:02}-{index:06}")
}

/// `count` labeled instances at depth `d`, in index order.
pub fn generate(d: usize, count: usize, seed: u64, policy: &GenPolicy) -> Result<Vec<BenchInstance>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let draw = draw_instance(d, i, seed, policy)?;
            let (label, label_mode) = label_draw(&draw, policy)?;
            Ok(BenchInstance {
                id: instance_id(d, i),
                d,
                hypothesis: draw.hypothesis.text(draw.graph.names()),
                relation_type: draw.hypothesis.template,
                premise: draw.premise_text,
                label,
                label_mode,
                split: Split::Unassigned,
                graph: Some(draw.graph),
                seed: Some(draw.seed),
            })
        })
        .collect()
}

/// Seeded shuffle; the first `test_n` become test, the next `dev_n` dev,
/// the rest train. Order of `instances` is preserved.
pub fn split_assign(instances: &mut [BenchInstance], dev_n: usize, test_n: usize, seed: u64) -> Result<()> {
    if instances.len() < dev_n + test_n {
        return Err(Error::Input(format!(
            "{} instances cannot fill {dev_n} dev and {test_n} test slots",
            instances.len()
        )));
    }
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut rng(seed));
    for (rank, &i) in order.iter().enumerate() {
        instances[i].split = if rank < test_n {
            Split::Test
        } else if rank < test_n + dev_n {
            Split::Dev
        } else {
            Split::Train
        };
    }
    Ok(())
}

pub fn write_jsonl(out: &mut impl Write, instances: &[BenchInstance]) -> Result<()> {
    for inst in instances {
        let line = serde_json::to_string(inst)?;
        writeln!(out, "{line}").map_err(|e| Error::io("<jsonl output>", e))?;
    }
    Ok(())
}

pub fn to_jsonl(instances: &[BenchInstance]) -> Result<String> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, instances)?;
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

/// Parses benchmark JSONL. Records lacking generator fields (an external
/// premise/hypothesis/label triple) are accepted with `label_mode =
/// external` and no graph.
pub fn read_jsonl(input: impl BufRead) -> Result<Vec<BenchInstance>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let pos = format!("line {}", i + 1);
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::parse(pos.clone(), e.to_string()))?;
        let inst = if value.get("id").is_some() {
            serde_json::from_value(value).map_err(|e| Error::parse(pos.clone(), e.to_string()))?
        } else {
            external_record(&value, i).map_err(|e| match e {
                Error::Parse { message, .. } => Error::parse(pos.clone(), message),
                other => Error::parse(pos.clone(), other.to_string()),
            })?
        };
        out.push(inst);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct ExternalRecord {
    premise: String,
    hypothesis: String,
    label: u8,
    #[serde(default)]
    relation_type: Option<RelationTemplate>,
}

fn external_record(value: &serde_json::Value, line: usize) -> Result<BenchInstance> {
    let rec: ExternalRecord = serde_json::from_value(value.clone())?;
    let premise = parse_premise(&rec.premise)?;
    let parsed = Hypothesis::parse(&rec.hypothesis, &premise.names)?;
    let relation_type = rec.relation_type.unwrap_or(parsed.template);
    hypothesis_from_text(relation_type, &rec.hypothesis, &premise.names)?;
    if rec.label > 1 {
        return Err(Error::Input(format!("label must be 0 or 1, got {}", rec.label)));
    }
    Ok(BenchInstance {
        id: format!("ext-{:06}", line),
        d: premise.num_vars(),
        premise: rec.premise,
        hypothesis: rec.hypothesis,
        relation_type,
        label: rec.label,
        label_mode: LabelMode::External,
        split: Split::Unassigned,
        graph: None,
        seed: None,
    })
}

/// Per-depth statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub depth: usize,
    pub n_samples: usize,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub mean_tokens_premise: f64,
    pub pct_positive: f64,
    /// Distinct word tokens over this depth and every smaller one in the
    /// dataset.
    pub vocab_size: usize,
}

pub fn premise_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

pub fn manifest(instances: &[BenchInstance]) -> Result<Vec<ManifestRow>> {
    if instances.is_empty() {
        return Err(Error::Input("manifest of an empty dataset".into()));
    }
    let mut by_depth: BTreeMap<usize, Vec<&BenchInstance>> = BTreeMap::new();
    for inst in instances {
        by_depth.entry(inst.d).or_default().push(inst);
    }
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    let mut rows = Vec::new();
    for (depth, group) in by_depth {
        let n = group.len();
        let count = |s: Split| group.iter().filter(|i| i.split == s).count();
        let tokens: usize = group.iter().map(|i| premise_tokens(&i.premise)).sum();
        let positives = group.iter().filter(|i| i.label == 1).count();
        for inst in &group {
            vocab.extend(words(&inst.premise));
            vocab.extend(words(&inst.hypothesis));
        }
        rows.push(ManifestRow {
            depth,
            n_samples: n,
            n_train: count(Split::Train),
            n_dev: count(Split::Dev),
            n_test: count(Split::Test),
            mean_tokens_premise: tokens as f64 / n as f64,
            pct_positive: 100.0 * positives as f64 / n as f64,
            vocab_size: vocab.len(),
        });
    }
    Ok(rows)
}

pub fn manifest_csv(rows: &[ManifestRow]) -> String {
    let mut s = String::from("d,n_samples,n_train,n_dev,n_test,tokens_per_premise,pct_positive,vocab\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{:.1},{:.2},{}\n",
            r.depth, r.n_samples, r.n_train, r.n_dev, r.n_test, r.mean_tokens_premise, r.pct_positive, r.vocab_size
        ));
    }
    s
}

/// Template of each of `count` draws at depth `d`, without labeling.
pub fn template_draws(d: usize, count: usize, seed: u64, policy: &GenPolicy) -> Result<Vec<RelationTemplate>> {
    (0..count)
        .map(|i| draw_instance(d, i, seed, policy).map(|x| x.hypothesis.template))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_labeled() {
        let a = generate(4, 30, 7, &GenPolicy::default()).unwrap();
        let b = generate(4, 30, 7, &GenPolicy::default()).unwrap();
        assert_eq!(to_jsonl(&a).unwrap(), to_jsonl(&b).unwrap());
        for inst in &a {
            assert_eq!(inst.label_mode, LabelMode::Exact);
            let p = inst.premise_set().unwrap();
            let h = inst.hypothesis_struct(&p.names).unwrap();
            assert_eq!(h.template, inst.relation_type);
            let l = entails(&p, &h, &SearchConfig::exact()).unwrap();
            assert_eq!(u8::from(l), inst.label);
            assert!(p.satisfied_by(inst.graph.as_ref().unwrap()));
        }
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let mut insts = generate(3, 10, 1, &GenPolicy::default()).unwrap();
        split_assign(&mut insts, 3, 3, 5).unwrap();
        let text = to_jsonl(&insts).unwrap();
        let back = read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, insts);
        assert_eq!(to_jsonl(&back).unwrap(), text);

        let bad = format!("{}\n{{\"id\": \"x\"}}\n", text.lines().next().unwrap());
        match read_jsonl(bad.as_bytes()) {
            Err(Error::Parse { position, .. }) => assert_eq!(position, "line 2"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn external_records() {
        let line = r#"{"premise": "Suppose there is a closed system of 2 variables A and B. All the statistical relations among these 2 variables are as follows: A correlates with B.", "hypothesis": "A directly causes B.", "label": 0}"#;
        let v = read_jsonl(line.as_bytes()).unwrap();
        assert_eq!(v[0].label_mode, LabelMode::External);
        assert_eq!(v[0].graph, None);
        assert_eq!(v[0].relation_type, RelationTemplate::Parent);
        assert_eq!(v[0].d, 2);
    }

    #[test]
    fn splits() {
        let mut insts = generate(2, 12, 1, &GenPolicy::default()).unwrap();
        split_assign(&mut insts, 4, 4, 2).unwrap();
        let rows = manifest(&insts).unwrap();
        assert_eq!((rows[0].n_train, rows[0].n_dev, rows[0].n_test), (4, 4, 4));
        let mut exact = generate(2, 4, 1, &GenPolicy::default()).unwrap();
        split_assign(&mut exact, 2, 2, 2).unwrap();
        assert!(exact.iter().all(|i| i.split != Split::Train));
        assert!(split_assign(&mut exact, 3, 2, 2).is_err());
    }

    #[test]
    fn child_and_descendant_text_resolve() {
        let names = crate::dag::default_names(3);
        for t in RelationTemplate::ALL {
            let h = Hypothesis::new(t, 0, 2).unwrap();
            assert_eq!(hypothesis_from_text(t, &h.text(&names), &names).unwrap(), h);
        }
    }

    #[test]
    fn edge_probability_policy() {
        let p = GenPolicy::default();
        assert_eq!(p.edge_prob_for(4), 0.5);
        assert!((p.edge_prob_for(13) - 0.25).abs() < 1e-12);
    }
}
