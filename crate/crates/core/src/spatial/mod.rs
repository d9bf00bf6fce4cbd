//! Spatial optimisation: choosing which pixels to keep.

mod analytic;
mod nlpe;
mod random;
mod sparsify;

pub use analytic::{floyd_steinberg, laplace_magnitude, mask_analytic, AnalyticMask};
pub use nlpe::{nlpe, NlpeOutcome, NlpeParams};
pub use random::mask_random;
pub use sparsify::{sparsify, SparsifyOutcome, SparsifyParams};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Dims;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of mask pixels for density `d`, at least one.
pub(crate) fn target_count(dims: Dims, d: f64) -> Result<usize> {
    if d == 0.0 {
        return Err(Error::EmptyMask);
    }
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::InvalidParameter(format!("density {d} outside (0, 1]")));
    }
    match (d * dims.len() as f64).round() as usize {
        0 => Err(Error::EmptyMask),
        n => Ok(n),
    }
}

/// Channel-summed squared error per pixel.
pub(crate) fn error_map(u: &[Vec<f64>], f: &[Vec<f64>]) -> Vec<f64> {
    let n = f[0].len();
    let mut e = vec![0.0; n];
    for (uc, fc) in u.iter().zip(f) {
        for i in 0..n {
            let d = uc[i] - fc[i];
            e[i] += d * d;
        }
    }
    e
}

pub(crate) fn planes_mse(u: &[Vec<f64>], f: &[Vec<f64>]) -> f64 {
    let total: f64 = error_map(u, f).iter().sum();
    total / (f.len() * f[0].len()) as f64
}
