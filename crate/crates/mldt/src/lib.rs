//! Multilevel detection and decoding for collided users over Rayleigh fading,
//! with uncoded analysis, LDPC/tuple-domain and rateless coded receivers,
//! spread-spectrum chains, and capacity estimation.

pub mod analysis;
pub mod channel;
pub mod detector;
pub mod error;
pub mod gspa;
pub mod harness;
pub mod ldpc;
pub mod mcds;
pub mod raptor;
pub mod rng;
pub mod spread;

pub use error::{Error, Result};
