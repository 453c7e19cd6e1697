//! The active discrimination loop over candidate causal graphs.

pub mod hypotheses;
pub mod posterior;
pub mod run;
pub mod selection;
pub mod theory;

pub use hypotheses::{generate_hypotheses, HypothesisMode, HypothesisSet};
pub use posterior::{bayes_update, entropy, information_gain, predictive_response_prob, Posterior};
pub use run::{run, AcboConfig, RoundLog, RunFailure, RunResult, StopRule};
pub use selection::{select_intervention, PredictionTable, Selection};
pub use theory::{expected_log_ratio_drift, query_capacity_ceiling, theoretical_rounds, RoundBound};
