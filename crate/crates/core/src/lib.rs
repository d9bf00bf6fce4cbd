//! Sparse data optimisation for homogeneous diffusion inpainting.
//!
//! The crate provides the inpainting solver itself, spatial optimisers that
//! choose which pixels to keep, tonal optimisers that choose the values stored
//! at those pixels, and an experiment harness that ties them together.

pub mod corpus;
pub mod error;
pub mod harness;
pub mod image;
pub mod pnm;
pub mod solver;
pub mod spatial;
pub mod tonal;

pub use error::{Error, Result};
pub use image::{mse, psnr, Dims, Image, KnownData, Mask, MaskKind};
pub use solver::{apply_laplacian, inpaint, inpaint_with_guess, residual_norm, SolverParams};
