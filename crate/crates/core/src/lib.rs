//! Counterfactual regret minimization (CFR, CFR+, DCFR, PCFR, PCFR+) over
//! sequence-form strategies, written as sparse linear algebra.

pub mod cli;
pub mod game;
pub mod metrics;
pub mod operators;
pub mod oracle;
pub mod solver;
pub mod sparse;
pub mod tfsdp;
