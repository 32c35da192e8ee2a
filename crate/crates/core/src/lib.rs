//! Maximum-entropy pairwise modeling of multi-voice symbolic music.
//!
//! The crate learns a pairwise exponential-family model over n-voice chord
//! sequences by L1-regularized pseudo-likelihood, generates new sequences
//! with a constrained single-cell Metropolis-Hastings sampler, and measures
//! style imitation and chord invention against reference corpora.

pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod fixtures;
pub mod harmonizer;
pub mod model;
pub mod sampler;
pub mod symbol;
pub mod trainer;

pub use error::{Error, Result};
pub use symbol::{ChordSequence, Symbol};
