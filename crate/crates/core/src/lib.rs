//! Decentralized non-convex optimization with local updates.
//!
//! The crate simulates `N` nodes that each own a shard of data and a
//! differentiable objective, run `tau` local steps between communication
//! rounds, and gossip through a doubly stochastic mixing matrix. The main
//! algorithms are the dual-slow estimators (slow gradient tracking plus slow
//! partial averaging), either with a momentum-based variance-reduced
//! direction ([`Algorithm::DseMvr`]) or plain mini-batch SGD
//! ([`Algorithm::DseSgd`]). Gossip SGD ([`Algorithm::Dsgd`]) and local SGD
//! with periodic gossip ([`Algorithm::Dlsgd`]) are provided as baselines.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the common double-precision instantiation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod metrics;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod scalar;
pub mod theory;
pub mod topology;

pub use error::{Error, Result};
pub use metrics::MetricsRow;
pub use optimizers::{
    AlgoParams, Algorithm, AlphaSchedule, Batching, DirectionReset, Engine, GammaSchedule,
    NodeState, SwarmState,
};
pub use problems::{GradientOracle, LocalShard, Problem, ProblemKind, Sample};
pub use rng::{StreamKey, StreamTag};
pub use scalar::Scalar;
pub use theory::{CorollaryId, Preset, TheoryInputs};
pub use topology::{Graph, MixingMatrix};

pub type MixingMatrix64 = MixingMatrix<f64>;
pub type Problem64 = Problem<f64>;
pub type GradientOracle64 = GradientOracle<f64>;
pub type Engine64<'a> = Engine<'a, f64>;
pub type SwarmState64 = SwarmState<f64>;
pub type MetricsRow64 = MetricsRow<f64>;

pub type MixingMatrix32 = MixingMatrix<f32>;
pub type Problem32 = Problem<f32>;
pub type Engine32<'a> = Engine<'a, f32>;
