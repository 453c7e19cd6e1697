use serde::{Deserialize, Serialize};

use crate::dag::RelationTemplate;
use crate::error::{Error, Result};

/// Depth bands reported separately, inclusive.
pub const DEPTH_BANDS: [(usize, usize); 4] = [(7, 10), (11, 15), (16, 20), (21, 24)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub template: RelationTemplate,
    pub depth: usize,
    pub gold: u8,
    pub predicted: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, gold: u8, predicted: u8) {
        match (gold, predicted) {
            (1, 1) => self.tp += 1,
            (0, 1) => self.fp += 1,
            (1, _) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Binary F1 of the positive class in percent; 100 when there are no
    /// positives in either gold or prediction.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            100.0
        } else {
            100.0 * (2 * self.tp) as f64 / denom as f64
        }
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| 100.0 * (self.tp + self.tn) as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateScore {
    pub template: RelationTemplate,
    pub present: bool,
    pub confusion: Confusion,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandAccuracy {
    pub lo: usize,
    pub hi: usize,
    pub n: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStats {
    pub mean_rounds: f64,
    pub median_rounds: f64,
    pub fraction_converged: f64,
}

impl ConvergenceStats {
    pub fn from_runs(rounds: &[usize], converged: &[bool]) -> Option<Self> {
        if rounds.is_empty() {
            return None;
        }
        let mut sorted = rounds.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
        };
        Some(ConvergenceStats {
            mean_rounds: sorted.iter().sum::<usize>() as f64 / n as f64,
            median_rounds: median,
            fraction_converged: converged.iter().filter(|&&c| c).count() as f64 / converged.len().max(1) as f64,
        })
    }
}

/// All scores in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub per_template: Vec<TemplateScore>,
    /// Unweighted mean F1 over the templates present in the data.
    pub macro_f1: f64,
    /// Templates absent from the data (excluded from `macro_f1`).
    pub missing_templates: Vec<RelationTemplate>,
    pub accuracy: f64,
    /// Share of gold-negative instances predicted negative.
    pub rejection_accuracy: Option<f64>,
    pub depth_bands: Vec<BandAccuracy>,
    pub convergence: Option<ConvergenceStats>,
}

pub fn compute_metrics(preds: &[Prediction]) -> Result<MetricsReport> {
    if preds.is_empty() {
        return Err(Error::Input("no predictions to score".into()));
    }
    let mut per = [Confusion::default(); 6];
    let mut bands = [Confusion::default(); 4];
    let mut overall = Confusion::default();
    for p in preds {
        per[p.template.index()].add(p.gold, p.predicted);
        overall.add(p.gold, p.predicted);
        if let Some(b) = DEPTH_BANDS.iter().position(|&(lo, hi)| (lo..=hi).contains(&p.depth)) {
            bands[b].add(p.gold, p.predicted);
        }
    }
    let per_template: Vec<TemplateScore> = RelationTemplate::ALL
        .iter()
        .map(|&t| {
            let c = per[t.index()];
            let present = c.total() > 0;
            TemplateScore {
                template: t,
                present,
                confusion: c,
                f1: present.then(|| c.f1()),
            }
        })
        .collect();
    let present: Vec<f64> = per_template.iter().filter_map(|s| s.f1).collect();
    let negatives = overall.tn + overall.fp;
    Ok(MetricsReport {
        n: preds.len(),
        macro_f1: present.iter().sum::<f64>() / present.len() as f64,
        missing_templates: per_template.iter().filter(|s| !s.present).map(|s| s.template).collect(),
        per_template,
        accuracy: overall.accuracy().expect("non-empty"),
        rejection_accuracy: (negatives > 0).then(|| 100.0 * overall.tn as f64 / negatives as f64),
        depth_bands: DEPTH_BANDS
            .iter()
            .zip(&bands)
            .map(|(&(lo, hi), c)| BandAccuracy {
                lo,
                hi,
                n: c.total(),
                accuracy: c.accuracy(),
            })
            .collect(),
        convergence: None,
    })
}
