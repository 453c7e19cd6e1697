//! End-to-end runs over a benchmark: hypothesis generation, the
//! discrimination loop, label prediction and scoring.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, ConvergenceStats, MetricsReport, Prediction};
use crate::acbo::{
    generate_hypotheses, run, AcboConfig, HypothesisMode, Posterior, RoundLog, StopRule,
};
use crate::benchgen::{generate, read_jsonl, BenchInstance, GenPolicy};
use crate::dag::{Dag, RelationTemplate, VarPair};
use crate::error::{Error, Result};
use crate::oracle::{
    write_transcript, InterventionalOracle, LlmClient, LlmOracle, OracleConfig, OracleMode, RecordingOracle,
    ReplayOracle, SimulatedOracle, TranscriptRecord,
};
use crate::seed::derive_seed;

pub const RESULTS_FILE: &str = "results.jsonl";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PredictionRule {
    /// The hypothesis evaluated on the MAP graph.
    #[default]
    Map,
    /// Posterior probability of the hypothesis thresholded at 0.5.
    Posterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GoldLabel {
    /// The dataset's entailment label.
    #[default]
    Dataset,
    /// Whether the hypothesis holds in the generating graph.
    Structural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSpec {
    pub depths: Vec<usize>,
    pub per_depth: usize,
    pub seed: u64,
    pub policy: GenPolicy,
}

impl Default for GenerationSpec {
    fn default() -> Self {
        GenerationSpec {
            depths: vec![3, 4, 5],
            per_depth: 20,
            seed: 0,
            policy: GenPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Benchmark JSONL to run on; exclusive with `generate`.
    pub dataset: Option<PathBuf>,
    pub generate: Option<GenerationSpec>,
    pub acbo: AcboConfig,
    /// The oracle actually queried; its `eta` is the true per-vote error.
    pub oracle: OracleConfig,
    pub hypothesis_mode: HypothesisMode,
    pub trials: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub prediction_rule: PredictionRule,
    pub gold: GoldLabel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            generate: Some(GenerationSpec::default()),
            acbo: AcboConfig::default(),
            oracle: OracleConfig::default(),
            hypothesis_mode: HypothesisMode::Exact,
            trials: 1,
            seed: 0,
            output_dir: PathBuf::from("acbo-out"),
            workers: 0,
            prediction_rule: PredictionRule::Map,
            gold: GoldLabel::Dataset,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset, &self.generate) {
            (Some(_), Some(_)) => return Err(Error::Config("set either dataset or generate, not both".into())),
            (None, None) => return Err(Error::Config("one of dataset or generate is required".into())),
            (Some(p), None) if !p.exists() => {
                return Err(Error::Config(format!("dataset {} does not exist", p.display())))
            }
            _ => {}
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.acbo.validate()?;
        self.oracle.validate()?;
        if self.oracle.votes_m != self.acbo.votes_m {
            return Err(Error::Config(format!(
                "oracle votes ({}) and likelihood votes ({}) differ",
                self.oracle.votes_m, self.acbo.votes_m
            )));
        }
        match self.oracle.mode {
            OracleMode::Llm if self.oracle.llm.is_none() => {
                Err(Error::Config("llm oracle mode needs an llm section".into()))
            }
            OracleMode::Replay if self.oracle.transcript.as_ref().is_none_or(|p| !p.exists()) => {
                Err(Error::Config("replay oracle mode needs an existing transcript".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn load_instances(&self) -> Result<Vec<BenchInstance>> {
        if let Some(path) = &self.dataset {
            let f = File::open(path).map_err(|e| Error::io(path, e))?;
            return read_jsonl(BufReader::new(f));
        }
        let spec = self.generate.as_ref().ok_or_else(|| Error::Config("no instance source".into()))?;
        let mut out = Vec::new();
        for &d in &spec.depths {
            out.extend(generate(d, spec.per_depth, spec.seed, &spec.policy)?);
        }
        Ok(out)
    }
}

/// Outcome of one (instance, trial) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub index: usize,
    pub instance_id: String,
    pub trial: usize,
    pub master_seed: u64,
    pub seed: u64,
    pub prediction_rule: PredictionRule,
    pub depth: usize,
    pub relation_type: RelationTemplate,
    pub map_graph: Dag,
    pub map_mass: f64,
    pub rounds_used: usize,
    pub converged: bool,
    pub stop_rule: StopRule,
    pub n_hypotheses: usize,
    pub truth_in_hypotheses: Option<bool>,
    pub predicted: u8,
    pub label: u8,
    pub structural: Option<u8>,
    pub error: Option<String>,
    pub trajectory: Vec<RoundLog>,
}

impl InstanceResult {
    pub fn gold(&self, gold: GoldLabel) -> Option<u8> {
        match gold {
            GoldLabel::Dataset => Some(self.label),
            GoldLabel::Structural => self.structural,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub gold: GoldLabel,
    pub prediction_rule: PredictionRule,
    pub n_results: usize,
    pub n_errors: usize,
    pub metrics: MetricsReport,
    /// Accuracy against the dataset label, whatever `gold` is.
    pub dataset_label_accuracy: f64,
    /// Accuracy against the generating graph, when every instance has one.
    pub structural_accuracy: Option<f64>,
}

pub fn build_report(results: &[InstanceResult], gold: GoldLabel) -> Result<ExperimentReport> {
    let first = results.first().ok_or_else(|| Error::Input("no results to report".into()))?;
    let preds = results
        .iter()
        .map(|r| {
            Ok(Prediction {
                template: r.relation_type,
                depth: r.depth,
                gold: r.gold(gold).ok_or_else(|| {
                    Error::Input(format!("instance {} has no generating graph for a structural label", r.instance_id))
                })?,
                predicted: r.predicted,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut metrics = compute_metrics(&preds)?;
    let rounds: Vec<usize> = results.iter().map(|r| r.rounds_used).collect();
    let converged: Vec<bool> = results.iter().map(|r| r.converged).collect();
    metrics.convergence = ConvergenceStats::from_runs(&rounds, &converged);
    let acc = |gold: GoldLabel| -> Option<f64> {
        let mut hits = 0;
        for r in results {
            hits += usize::from(r.gold(gold)? == r.predicted);
        }
        Some(100.0 * hits as f64 / results.len() as f64)
    };
    Ok(ExperimentReport {
        seed: first.master_seed,
        gold,
        prediction_rule: first.prediction_rule,
        n_results: results.len(),
        n_errors: results.iter().filter(|r| r.error.is_some()).count(),
        metrics,
        dataset_label_accuracy: acc(GoldLabel::Dataset).expect("dataset labels are always present"),
        structural_accuracy: acc(GoldLabel::Structural),
    })
}

enum SharedOracle {
    Simulated,
    Llm(RecordingOracle<LlmOracle>),
    Replay(ReplayOracle),
}

impl SharedOracle {
    fn transcript(&self) -> Option<Vec<TranscriptRecord>> {
        match self {
            SharedOracle::Llm(o) => {
                let mut records = o.records();
                records.sort_by(|a, b| a.query_id.cmp(&b.query_id));
                Some(records)
            }
            _ => None,
        }
    }
}

fn build_oracle(cfg: &OracleConfig) -> Result<SharedOracle> {
    Ok(match cfg.mode {
        OracleMode::Simulated => SharedOracle::Simulated,
        OracleMode::Llm => {
            let llm = cfg.llm.clone().ok_or_else(|| Error::Config("missing llm section".into()))?;
            SharedOracle::Llm(RecordingOracle::new(LlmOracle::new(LlmClient::new(llm), cfg.votes_m)?))
        }
        OracleMode::Replay => {
            let path = cfg
                .transcript
                .as_ref()
                .ok_or_else(|| Error::Config("missing transcript path".into()))?;
            SharedOracle::Replay(ReplayOracle::from_file(path)?)
        }
    })
}

fn is_fatal(e: &Error) -> bool {
    matches!(e, Error::OracleUnavailable(_) | Error::TranscriptIncomplete(_) | Error::Io { .. })
}

fn run_one(
    cfg: &ExperimentConfig,
    shared: &SharedOracle,
    index: usize,
    inst: &BenchInstance,
    trial: usize,
) -> Result<InstanceResult> {
    let seed = derive_seed(derive_seed(cfg.seed, index as u64), trial as u64);
    let premise = inst.premise_set()?;
    let hypothesis = inst.hypothesis_struct(&premise.names)?;
    let structural = match &inst.graph {
        Some(g) => Some(u8::from(hypothesis.holds_in(g)?)),
        None => None,
    };
    let llm_client;
    let llm = match (&cfg.hypothesis_mode, &cfg.oracle.llm) {
        (HypothesisMode::OracleLlm, Some(c)) => {
            llm_client = LlmClient::new(c.clone());
            Some(&llm_client)
        }
        _ => None,
    };
    let base = |map_graph: Dag, map_mass: f64, n: usize, truth_in: Option<bool>| InstanceResult {
        index,
        instance_id: inst.id.clone(),
        trial,
        master_seed: cfg.seed,
        seed,
        prediction_rule: cfg.prediction_rule,
        depth: inst.d,
        relation_type: inst.relation_type,
        map_graph,
        map_mass,
        rounds_used: 0,
        converged: true,
        stop_rule: cfg.acbo.stop_rule,
        n_hypotheses: n,
        truth_in_hypotheses: truth_in,
        predicted: 0,
        label: inst.label,
        structural,
        error: None,
        trajectory: Vec::new(),
    };

    let hyps = match generate_hypotheses(
        &premise,
        cfg.acbo.candidates_n,
        cfg.hypothesis_mode,
        None,
        derive_seed(seed, 0),
        llm,
    ) {
        Ok(h) => h.graphs,
        Err(Error::DegenerateHypotheses { found: 1 }) => {
            // a single consistent graph: nothing to discriminate
            let only = crate::indep::consistent_dags(&premise, &crate::indep::SearchConfig::auto(inst.d, seed))?;
            let g = only.into_iter().next().ok_or(Error::Unsatisfiable)?;
            let truth_in = inst.graph.as_ref().map(|t| *t == g);
            let mut r = base(g.clone(), 1.0, 1, truth_in);
            r.predicted = u8::from(hypothesis.holds_in(&g)?);
            return Ok(r);
        }
        Err(e) => return Err(e),
    };
    let truth_in = inst.graph.as_ref().map(|t| hyps.contains(t));

    let simulated;
    let oracle: &dyn InterventionalOracle = match shared {
        SharedOracle::Simulated => {
            let truth = inst.graph.clone().ok_or_else(|| {
                Error::Input(format!("instance {} has no graph for the simulated oracle", inst.id))
            })?;
            simulated = SimulatedOracle::from_config(truth, &cfg.oracle)?;
            &simulated
        }
        SharedOracle::Llm(o) => o,
        SharedOracle::Replay(o) => o,
    };

    let run_id = format!("{}/t{}", inst.id, trial);
    let (pi, trajectory, rounds, converged, error) =
        match run(&premise, &hyps, oracle, &cfg.acbo, &run_id, derive_seed(seed, 1)) {
            Ok(r) => {
                let pi = r
                    .trajectory
                    .last()
                    .map(|l| l.posterior_after.clone())
                    .unwrap_or(Posterior::uniform(hyps.len())?);
                (pi, r.trajectory, r.rounds_used, r.converged, None)
            }
            Err(f) if is_fatal(&f.error) => return Err(f.error),
            Err(f) => {
                let pi = f
                    .partial
                    .last()
                    .map(|l| l.posterior_after.clone())
                    .unwrap_or(Posterior::uniform(hyps.len())?);
                let rounds = f.partial.len();
                (pi, f.partial, rounds, false, Some(f.error.to_string()))
            }
        };
    let map = pi.map_index();
    let predicted = match cfg.prediction_rule {
        PredictionRule::Map => u8::from(hypothesis.holds_in(&hyps[map])?),
        PredictionRule::Posterior => {
            let mut p = 0.0;
            for (k, g) in hyps.iter().enumerate() {
                if hypothesis.holds_in(g)? {
                    p += pi.weights()[k];
                }
            }
            u8::from(p >= 0.5)
        }
    };
    let mut r = base(hyps[map].clone(), pi.max(), hyps.len(), truth_in);
    r.rounds_used = rounds;
    r.converged = converged;
    r.predicted = predicted;
    r.error = error;
    r.trajectory = trajectory;
    Ok(r)
}

pub fn read_results(path: &Path) -> Result<Vec<InstanceResult>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::parse(format!("{}:{}", path.display(), i + 1), e.to_string()))?,
        );
    }
    Ok(out)
}

fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for it in items {
        serde_json::to_writer(&mut w, &it)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TrajectoryLine<'a> {
    instance_id: &'a str,
    trial: usize,
    round: usize,
    chosen_pair: VarPair,
    ig_score: f64,
    was_random: bool,
    response: &'a crate::oracle::OracleResponse,
    posterior_after: &'a Posterior,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub results: Vec<InstanceResult>,
    pub report: ExperimentReport,
}

/// Runs every (instance, trial) and writes results, trajectories and the
/// report to `cfg.output_dir`. With `resume`, results already present in
/// the output directory are kept and their runs skipped.
///
/// A fatal oracle error stops the run after flushing completed results.
pub fn run_experiment(cfg: &ExperimentConfig, resume: bool) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let instances = cfg.load_instances()?;
    if instances.is_empty() {
        return Err(Error::Input("dataset is empty".into()));
    }
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let results_path = out.join(RESULTS_FILE);

    let mut done: Vec<InstanceResult> = if resume && results_path.exists() {
        read_results(&results_path)?
    } else {
        Vec::new()
    };
    let done_keys: HashSet<(String, usize)> = done.iter().map(|r| (r.instance_id.clone(), r.trial)).collect();
    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..cfg.trials).map(move |t| (i, t)))
        .filter(|&(i, t)| !done_keys.contains(&(instances[i].id.clone(), t)))
        .collect();

    let checkpoint = OpenOptions::new()
        .create(true)
        .append(resume)
        .write(true)
        .truncate(!resume)
        .open(&results_path)
        .map_err(|e| Error::io(&results_path, e))?;
    let writer = Mutex::new(BufWriter::new(checkpoint));
    let fresh = Mutex::new(Vec::with_capacity(jobs.len()));
    let shared = build_oracle(&cfg.oracle)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcome: Result<()> = pool.install(|| {
        jobs.par_iter().try_for_each(|&(i, t)| {
            let r = run_one(cfg, &shared, i, &instances[i], t)?;
            let line = serde_json::to_string(&r)?;
            {
                let mut w = writer.lock().expect("checkpoint lock");
                writeln!(w, "{line}").map_err(|e| Error::io(&results_path, e))?;
                w.flush().map_err(|e| Error::io(&results_path, e))?;
            }
            fresh.lock().expect("results lock").push(r);
            Ok(())
        })
    });
    drop(writer);
    if let Some(records) = shared.transcript() {
        write_transcript(&out.join(TRANSCRIPT_FILE), &records)?;
    }
    outcome?;

    done.extend(fresh.into_inner().expect("results lock"));
    done.sort_by_key(|r| (r.index, r.trial));
    write_lines(&results_path, &done)?;
    write_lines(
        &out.join(TRAJECTORIES_FILE),
        done.iter().flat_map(|r| {
            r.trajectory.iter().map(move |l| TrajectoryLine {
                instance_id: &r.instance_id,
                trial: r.trial,
                round: l.round,
                chosen_pair: l.chosen_pair,
                ig_score: l.ig_score,
                was_random: l.was_random,
                response: &l.response,
                posterior_after: &l.posterior_after,
            })
        }),
    )?;
    let report = build_report(&done, cfg.gold)?;
    let report_path = out.join(REPORT_FILE);
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&report_path, e))?;
    Ok(ExperimentOutcome { results: done, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            generate: Some(GenerationSpec {
                depths: vec![3, 4],
                per_depth: 6,
                seed: 2,
                policy: GenPolicy::default(),
            }),
            acbo: AcboConfig {
                candidates_n: 64,
                ..AcboConfig::default()
            },
            oracle: OracleConfig {
                eta: 0.1,
                ..OracleConfig::default()
            },
            seed: 5,
            output_dir: dir.to_path_buf(),
            gold: GoldLabel::Structural,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn runs_are_reproducible_and_resumable() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let first = run_experiment(&config(a.path()), false).unwrap();
        assert_eq!(first.results.len(), 12);
        run_experiment(&config(b.path()), false).unwrap();
        let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
        assert_eq!(read(a.path(), REPORT_FILE), read(b.path(), REPORT_FILE));
        assert_eq!(read(a.path(), RESULTS_FILE), read(b.path(), RESULTS_FILE));

        // drop half the checkpoint and resume
        let text = String::from_utf8(read(b.path(), RESULTS_FILE)).unwrap();
        let kept: Vec<&str> = text.lines().step_by(2).collect();
        fs::write(b.path().join(RESULTS_FILE), kept.join("\n") + "\n").unwrap();
        run_experiment(&config(b.path()), true).unwrap();
        assert_eq!(read(a.path(), REPORT_FILE), read(b.path(), REPORT_FILE));
        assert_eq!(read(a.path(), RESULTS_FILE), read(b.path(), RESULTS_FILE));
    }

    #[test]
    fn config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path());
        c.dataset = Some(dir.path().join("missing.jsonl"));
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.generate = None;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = config(dir.path());
        c.oracle.mode = OracleMode::Replay;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn config_json_defaults() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"seed": 3, "acbo": {"budget_t": 5}}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.acbo.budget_t, 5);
        assert_eq!(c.acbo.candidates_n, 8);
        assert_eq!(c.oracle.votes_m, 3);
    }
}
