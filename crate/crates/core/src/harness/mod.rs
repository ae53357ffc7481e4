//! Configuration, the run driver, reciprocity and verification.

pub mod config;
pub mod metrics;
pub mod reciprocity;
pub mod run;
pub mod verify;

pub use config::RunConfig;
pub use reciprocity::{reciprocity_test, run_reciprocity, ReciprocityReport};
pub use run::{run, RunOutput, Simulation};
pub use verify::{verify, VerifyKind, VerifyReport};
