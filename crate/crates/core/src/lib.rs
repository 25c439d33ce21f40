//! Exact and Monte Carlo analysis of hitting times for finite Markov chains.
//!
//! The crate computes mean hitting times, survival curves, Green functions and
//! taboo probabilities by subtraction-free solves, certifies recurrence to a
//! reference pair `(x0, G)`, compares metastability hypotheses, and checks the
//! explicit deviation envelope for the exponential law of `tau_G^{x0} / T`.

pub mod chain;
pub mod checks;
pub mod config;
pub mod error;
pub mod expbounds;
pub mod fit;
pub mod hitting;
pub mod hypotheses;
pub mod linalg;
pub mod models;
pub mod montecarlo;
pub mod network;
pub mod recurrence;

pub use chain::{Diagnostics, Layout, MarkovChain, ReferencePair, StateDistribution};
pub use config::Tolerances;
pub use error::{Error, Result};
