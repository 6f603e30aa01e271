//! Desk-scale laboratory for representation-learning reinforcement learning
//! in low-rank partially observable MDPs.
//!
//! The crate is organized around a tabular POMDP substrate ([`pomdp`]), a set
//! of benchmark environments ([`env`]), belief filtering and the memory-state
//! approximation machinery ([`belief`], [`design`], [`approx`]), a finite-class
//! maximum-likelihood oracle ([`mle`]), elliptical exploration bonuses
//! ([`exploration`]), a backward value-iteration planner over memory states
//! ([`planner`]), the outer learning drivers ([`driver`]), and evaluation /
//! experiment plumbing ([`eval`], [`harness`]).
//!
//! Everything is deterministic given a seed: randomness flows through
//! [`rng::RandomStream`], which supports derivation of independent child
//! streams so that concurrent or reordered work cannot perturb results.

pub mod approx;
pub mod belief;
pub mod config;
pub mod design;
pub mod driver;
pub mod env;
pub mod error;
pub mod eval;
pub mod exploration;
pub mod harness;
pub mod linalg;
pub mod mle;
pub mod model_io;
pub mod planner;
pub mod policy;
pub mod pomdp;
pub mod rng;

pub use error::{Error, Result};
