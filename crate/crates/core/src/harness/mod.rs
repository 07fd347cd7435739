//! Seeded instance generators and the verification suites.

mod generators;
mod rng;
mod suites;

pub use generators::*;
pub use rng::{case_rng, derive_seed, label_hash};
pub use suites::{run_suite, CaseFailure, Mutation, SuiteConfig, SuiteId, SuiteReport, SuiteResult};
