//! Scaling laws for pre-training and continual pre-training (CPT).
//!
//! The crate fits Chinchilla-style and extended CPT loss laws to training-run
//! logs with a robust Huber objective on log loss, derives compute-optimal
//! parameter/token allocations, and measures cross-lingual transfer (tokens
//! and FLOPs saved) and replay/forgetting curves.
//!
//! Everything here is pure computation over in-memory values and builds
//! without `std` (an allocator is required). File formats, the CLI and other
//! IO live in the companion `cptlaw` crate.
//!
//! Units are raw: parameters `N`, tokens `D`, FLOPs `C = 6ND`, loss in nats.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style guards reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod allocator;
pub mod catalog;
mod error;
pub mod fitter;
pub mod laws;
mod math;
pub mod numeric;
pub mod optimize;
pub mod run;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};
pub use laws::{ChinchillaParams, ExtendedCptParams, FrontierParams, LawRecord, ScalingLaw};
pub use run::{LossRecord, RunSet, Strategy, TrainingRun};
