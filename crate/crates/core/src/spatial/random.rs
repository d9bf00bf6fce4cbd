use rand::seq::index;

use super::{rng, target_count};
use crate::error::Result;
use crate::image::{Dims, Mask};

/// Uniformly random mask with exactly `round(d · n_x · n_y)` pixels.
pub fn mask_random(dims: Dims, d: f64, seed: u64) -> Result<Mask> {
    let count = target_count(dims, d)?;
    let mut rng = rng(seed);
    let picked = index::sample(&mut rng, dims.len(), count);
    Mask::from_indices(dims, picked.iter())
}
