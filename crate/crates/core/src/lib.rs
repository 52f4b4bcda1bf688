//! Feature inference for block fused multiply-add (matrix multiplier) units.
//!
//! The crate generates format-parameterised test vectors, classifies the
//! outputs a device returns for them, and ships a bit-exact configurable
//! simulator of block-FMA units that serves as a reference model and as a
//! verification target for the inference driver.

pub mod backend;
pub mod cli;
pub mod formats;
pub mod inference;
pub mod probes;
pub mod simulator;
