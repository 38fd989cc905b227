//! Causal structure discovery from pooled observational and interventional
//! discrete data.
//!
//! The pipeline pools multi-regime datasets into a single augmented table with
//! binary environment indicator columns, samples plausible augmented graphs by
//! structure MCMC constrained to the legal edge space, trains a cascaded
//! skeleton classifier plus an orientation classifier on the sampled pairs,
//! and emits a partially directed graph over system and environment nodes
//! together with the detected intervention targets.

pub mod bayesnet;
pub mod citest;
pub mod cli;
pub mod featurize;
pub mod graphlib;
pub mod ismcmc;
pub mod jci;
pub mod metrics;
pub mod rng;
pub mod scl;
