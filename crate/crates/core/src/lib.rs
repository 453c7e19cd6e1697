//! Active causal structure learning with an interventional oracle.
//!
//! The crate covers graph primitives ([`dag`]), the conditional-independence
//! engine ([`indep`]), oracles, the A-CBO loop, the kernel margin bound,
//! benchmark generation, and the experiment harness.

pub mod acbo;
pub mod benchgen;
pub mod dag;
pub mod error;
pub mod harness;
pub mod indep;
pub mod kernel;
pub mod oracle;
pub mod seed;

pub use dag::{Dag, Intervention, RelationTemplate, VarPair};
pub use error::{Error, Result};
