//! Audio-text cross-attention (ATCA) environmental-sound deepfake detection.
//!
//! This crate is `no_std` (it needs `alloc`) and holds every algorithm of the
//! pipeline: the acoustic frontend, the toy text embedder, a small reverse-mode
//! autodiff engine, the ATCA network and its trainer, EER scoring, the stacked
//! regression ensemble and the synthetic corpus generator. File formats, the
//! corpus writer and the command-line tool live in the `atca` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod atca;
pub mod autodiff;
pub mod baseline;
pub mod dsp;
pub mod ensemble;
mod error;
pub mod math;
pub mod metrics;
pub mod protocol;
pub mod rng;
pub mod synth;
pub mod text;
pub mod train;

pub use error::{Error, Result};
