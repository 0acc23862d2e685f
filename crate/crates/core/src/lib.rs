//! Identity-seeking self-supervised representation learning.
//!
//! Cross-frame positive pairs are mined by optimal bipartite matching between two
//! frames of the same video, weighted by a softmax reliability score, and contrasted
//! against cross-video negatives held in a FIFO memory queue. The crate is `no_std`
//! (with `alloc`); file formats, timing and the command line live in the `isr` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod losses;
pub mod matching;
pub mod optim;
pub mod queue;
pub mod rng;
pub mod trainer;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use types::{
    cosine_cost, l2_normalize, AssociationMatrix, FeatureMatrix, LossConfig, Matrix, Modulation,
    NegativeSelection,
};
