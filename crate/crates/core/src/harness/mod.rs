//! Experiment orchestration: benchmark runs, convergence studies, kernel
//! sweeps and scoring.

pub mod convergence;
pub mod experiment;
pub mod metrics;
pub mod sweep;

pub use convergence::{
    distinguishable_hypotheses, run_convergence, write_convergence, write_csv, ConvergenceConfig, ConvergenceReport,
    SummaryRow, TrajectoryRow, TrialRow,
};
pub use experiment::{
    build_report, read_results, run_experiment, ExperimentConfig, ExperimentOutcome, ExperimentReport, GenerationSpec,
    GoldLabel, InstanceResult, PredictionRule, REPORT_FILE, RESULTS_FILE, TRAJECTORIES_FILE, TRANSCRIPT_FILE,
};
pub use metrics::{compute_metrics, BandAccuracy, Confusion, ConvergenceStats, MetricsReport, Prediction, TemplateScore, DEPTH_BANDS};
pub use sweep::{parse_depth_range, sweep_csv, write_sweep};
