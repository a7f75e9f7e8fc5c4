//! Hierarchical Bayesian segmentation of grouped sequential data.
//!
//! The crate is `no_std` and needs only `alloc`. It contains the
//! degree-of-sharing taxonomy ([`dos`]), the three-level corpus and latent
//! state model ([`corpus`]), forward samplers ([`generative`]), collapsed
//! Dirichlet-multinomial topic machinery ([`topics`]), the blocked Gibbs
//! segmenter ([`inference`]) and segmentation metrics ([`eval`]).
//!
//! File formats, the CLI and anything touching the filesystem live in the
//! companion `hiseg` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod dos;
pub mod eval;
pub mod generative;
pub mod inference;
pub mod math;
pub mod rng;
pub mod topics;

pub use corpus::{GoldSegmentation, GroupedCorpus, LatentState, PrevScope, TopicId, Transcript};
pub use dos::{Dimensionality, DosClassification, ShareMode};
pub use generative::{GenerativeConfig, GenerativeMode, SyntheticCorpus};
pub use inference::{InferenceParams, InferenceResult};
pub use topics::{CountTables, TopicMatrix};
