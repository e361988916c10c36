//! Cycle-level simulation of neuron-centric versus destination-centric
//! (address-merged) spike transmission on many-core neuromorphic meshes.

// `!(x > 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod coord;
pub mod deploy;
pub mod error;
pub mod metrics;
pub mod neurocore;
pub mod noc;
pub mod partition;
pub mod pipeline;
pub mod schedule;
pub mod snn;
pub mod system;

pub use coord::Coord;
pub use error::{Error, Result};
