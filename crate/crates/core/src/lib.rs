//! Motif-channel stereo matching at desk scale.
//!
//! A deterministic stereo pipeline built from first principles: dense tensor
//! kernels, motif-channel attention over feature maps, a motif-modulated
//! group correlation volume, GRU-based iterative disparity refinement, and a
//! reconstruction-error penalty stage. Everything is seeded and reproducible;
//! no GPU, no autodiff — gradients are checked and fitted by finite
//! differences.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line
//! live in the companion `stereo-motif-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod kernels;
pub mod motif;
pub mod pipeline;
pub mod pyramid;
pub mod refine;
pub mod rng;
pub mod scene;
pub mod tensor;
pub mod train;
pub mod updater;
pub mod volume;

pub use tensor::{Axis, AxisRole, ComplexTensor, CoreError, CoreResult, Mask, Scalar, Tensor};
