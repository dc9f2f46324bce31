//! Personalized collaborative stochastic optimization.
//!
//! One agent (index 0) minimizes its own objective `f_0` while receiving
//! stochastic gradients from `N` collaborators whose objectives differ from
//! its own. The crate provides
//!
//! - quadratic agent objectives with Gaussian gradient oracles ([`objective`]),
//! - the gradient-combination rules: training alone, weighted gradient
//!   averaging (WGA), bias correction (BC) with an exponential moving average
//!   of the observed bias, and BC driven by a noisy bias oracle
//!   ([`aggregators`]),
//! - step sizes, EMA rates, collaboration weights and the collaborator
//!   mixture QP prescribed by the convergence analysis ([`schedules`]),
//! - explicit-constant convergence bounds ([`bounds`]),
//! - a seeded, reproducible training-loop simulator with replication and
//!   parameter sweeps ([`simulator`]).
//!
//! All numerical code is generic over the scalar type through [`Scalar`];
//! the aliases at the crate root fix it to `f64` (and `f32` where useful).

// `!(x > 0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregators;
pub mod bounds;
mod error;
pub mod objective;
pub mod report;
pub mod rng;
mod scalar;
pub mod schedules;
pub mod simulator;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use aggregators::{Aggregator, BcState, CollaborationWeights};
pub use bounds::BoundInputs;
pub use objective::{GradientSample, QuadraticTask, SimilarityParams};
pub use rng::{NoiseStream, StreamId};
pub use schedules::ScheduleInputs;
pub use simulator::{C0Policy, RunConfig, RunResult, StepSize, SweepAxis, Trace};

/// Quadratic agent objective in double precision.
pub type Task = QuadraticTask<f64>;
/// Quadratic agent objective in single precision.
pub type Task32 = QuadraticTask<f32>;
pub type Similarity = SimilarityParams<f64>;
pub type Weights = CollaborationWeights<f64>;
pub type Schedule = ScheduleInputs<f64>;
pub type Bounds = BoundInputs<f64>;
pub type Config = RunConfig<f64>;
pub type Config32 = RunConfig<f32>;
pub type RunTrace = Trace<f64>;
pub type Replicated = RunResult<f64>;
