//! Directly denoising diffusion models at desk scale.
//!
//! The crate trains a small conditioned network `F_θ(x₀⁽ⁿ⁾, x_t, t)` whose
//! induced map `f_θ = x_t − F_θ` is pushed towards the probability-flow ODE
//! solution by iterating on a per-sample estimate bank, and samples by
//! running the same fixed-point iteration from pure noise.
//!
//! Module map:
//! - [`scheduler`]: discrete noise schedule, diffusion kernel, continuous ᾱ(t)
//! - [`micronet`]: the MLP with hand-written reverse mode, Adam and EMA
//! - [`metrics`]: base distances and the pseudo wrapper `√(d + c²) − c`
//! - [`trainer`]: estimate bank and the training epoch
//! - [`sampler`]: one-step and multi-step fixed-point generation
//! - [`oracle`]: closed-form Gaussian score and an RK4 probability-flow solver
//! - [`data`]: seeded toy datasets with normalization records
//! - [`eval`]: sliced Wasserstein, MMD and SVG scatter plots
//! - [`checkpoint`], [`config`], [`commands`]: run plumbing behind the CLI

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod micronet;
pub mod oracle;
pub mod points;
pub mod rng;
pub mod sampler;
pub mod scheduler;
pub mod trainer;

pub use error::{Error, Result};
pub use points::SampleSet;
pub use scheduler::Schedule;
