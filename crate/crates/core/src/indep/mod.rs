//! Conditional independence: d-separation, Markov equivalence, premises and
//! entailment.

pub mod consistency;
pub mod dsep;
pub mod mec;
pub mod premise;

pub use consistency::{consistent_dags, entails, SearchConfig, SearchMode};
pub use dsep::d_separated;
pub use mec::{markov_equivalent, mec_descriptor, MecDescriptor};
pub use premise::{
    all_ci_statements, parse_premise, render_premise, CiPolicy, CiStatement, Hypothesis, PremiseSet,
};
