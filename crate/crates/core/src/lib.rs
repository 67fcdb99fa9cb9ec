//! Composition of discrete generative processes.
//!
//! The crate combines one unconditional and any number of conditional
//! categorical distributions as a weighted product of experts, and drives
//! masked (parallel-token) and autoregressive samplers with the composed
//! distributions. Enumerable toy worlds supply exact posteriors to check the
//! samplers against, and a patch codebook maps pixel grids to token grids.
//!
//! Everything here is `no_std` with `alloc`; file formats, timing and the
//! command-line front end live in the `discomp` crate.
#![no_std]
#![deny(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod compose;
pub mod error;
pub mod eval;
pub mod rng;
pub mod sampler;
pub mod vq;
pub mod world;

pub use compose::{
    apply_temperature, compose, logsumexp, normalize, ComposeConfig, LogProbVector, WeightVector,
};
pub use error::{Error, Result};
pub use sampler::{
    count_evaluations, Composer, ConditionalModel, CountingModel, MaskedState, OrderPolicy,
    RunStats, SamplerSchedule, SamplingMode,
};
pub use world::{
    check_conditions, enumerate_posterior, Attribute, ConditionSpec, CountModel, ExactModel,
    Relation, TokenLayout, WorldJoint, WorldSpec,
};

/// Token id in a grid. `MaskedState` wraps these in `Option` for the mask.
pub type Token = u16;
