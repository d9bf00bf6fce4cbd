//! Nonlocal pixel exchange.

use rand::seq::index;
use rand::Rng;

use super::{error_map, planes_mse, rng};
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::solver::{InpaintProblem, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlpeParams {
    /// Each cycle runs as many exchange attempts as there are mask pixels.
    pub cycles: usize,
    /// Pixels moved per exchange attempt.
    pub swap_size: usize,
    pub seed: u64,
}

impl NlpeParams {
    pub fn new(seed: u64) -> Self {
        Self {
            cycles: 5,
            swap_size: 1,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NlpeOutcome {
    pub mask: Mask,
    /// MSE before the first cycle and after each cycle; non-increasing.
    pub mse_trace: Vec<f64>,
    pub accepted: usize,
    pub attempts: usize,
}

/// Size of a decile pool, never smaller than the swap.
fn decile(len: usize, swap: usize) -> usize {
    len.div_ceil(10).max(swap).min(len)
}

/// Pixels of `pool` with the `size` largest errors. Ties are broken by the
/// random `tiebreak` values so that flat regions are not taken in raster
/// order.
fn worst_pool(pool: &[usize], err: &[f64], tiebreak: &[u32], size: usize) -> Vec<usize> {
    let mut v = pool.to_vec();
    let cmp = |a: &usize, b: &usize| {
        err[*b]
            .total_cmp(&err[*a])
            .then(tiebreak[*b].cmp(&tiebreak[*a]))
    };
    if size < v.len() {
        v.select_nth_unstable_by(size, cmp);
        v.truncate(size);
    }
    v.sort_unstable();
    v
}

/// Refines a binary mask by accept-if-better exchanges.
///
/// Each attempt moves `swap_size` uniformly drawn mask pixels to
/// `swap_size` non-mask pixels drawn from the decile with the largest
/// inpainting error. The error at a mask pixel is always zero, so the mask
/// side carries no error ranking. The exchange is kept
/// only if the global MSE decreases, so the density is preserved exactly and
/// the MSE never increases.
pub fn nlpe(f: &Image, c: &Mask, params: &NlpeParams, solver: &SolverParams) -> Result<NlpeOutcome> {
    c.require_binary()?;
    solver.validate()?;
    if f.dims() != c.dims() {
        return Err(Error::dims(f.dims(), c.dims()));
    }
    if params.swap_size == 0 {
        return Err(Error::InvalidParameter("swap size must be positive".into()));
    }
    let dims = f.dims();
    let mut known = c.as_bools();
    let count = known.iter().filter(|&&k| k).count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    if count == dims.len() {
        return Err(Error::InvalidParameter("mask density must be below 1".into()));
    }
    let swap = params.swap_size.min(count).min(dims.len() - count);
    let planes = f.planes();
    let mut rng = rng(params.seed);

    let mut u = InpaintProblem::new(dims, &known)?.solve_planes(&planes, None, solver)?;
    let mut mse = planes_mse(&u, &planes);
    let mut mse_trace = vec![mse];
    let mut accepted = 0;
    let mut attempts = 0;
    let mut pools: Option<(Vec<usize>, Vec<usize>)> = None;

    for _ in 0..params.cycles {
        for _ in 0..count {
            attempts += 1;
            let (from_pool, to_pool) = pools.get_or_insert_with(|| {
                let err = error_map(&u, &planes);
                let tiebreak: Vec<u32> = (0..err.len()).map(|_| rng.random()).collect();
                let (inside, outside): (Vec<usize>, Vec<usize>) =
                    (0..known.len()).partition(|&i| known[i]);
                let to = worst_pool(&outside, &err, &tiebreak, decile(outside.len(), swap));
                (inside, to)
            });
            let from: Vec<usize> = index::sample(&mut rng, from_pool.len(), swap)
                .iter()
                .map(|k| from_pool[k])
                .collect();
            let to: Vec<usize> = index::sample(&mut rng, to_pool.len(), swap)
                .iter()
                .map(|k| to_pool[k])
                .collect();

            for &i in &from {
                known[i] = false;
            }
            for &i in &to {
                known[i] = true;
            }
            let trial = InpaintProblem::new(dims, &known)?.solve_planes(&planes, Some(&u), solver)?;
            let trial_mse = planes_mse(&trial, &planes);
            if trial_mse < mse {
                u = trial;
                mse = trial_mse;
                accepted += 1;
                pools = None;
            } else {
                for &i in &to {
                    known[i] = false;
                }
                for &i in &from {
                    known[i] = true;
                }
            }
        }
        mse_trace.push(mse);
    }

    Ok(NlpeOutcome {
        mask: Mask::from_bools(dims, &known)?,
        mse_trace,
        accepted,
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::mask_random;

    fn test_image() -> Image {
        Image::from_fn(16, 16, |x, y| {
            if (x as i64 - 8).pow(2) + (y as i64 - 8).pow(2) < 20 {
                0.9
            } else {
                0.1 + 0.02 * y as f64
            }
        })
        .unwrap()
    }

    #[test]
    fn zero_cycles_is_identity() {
        let f = test_image();
        let c = mask_random(f.dims(), 0.1, 1).unwrap();
        let params = NlpeParams {
            cycles: 0,
            swap_size: 1,
            seed: 0,
        };
        let out = nlpe(&f, &c, &params, &SolverParams::default()).unwrap();
        assert_eq!(out.mask, c);
        assert_eq!(out.attempts, 0);
    }

    #[test]
    fn preserves_density_and_never_worsens() {
        let f = test_image();
        let c = mask_random(f.dims(), 0.1, 2).unwrap();
        let out = nlpe(&f, &c, &NlpeParams::new(4), &SolverParams::default()).unwrap();
        assert_eq!(out.mask.count(), c.count());
        assert_eq!(out.attempts, 5 * c.count());
        assert!(out.accepted > 0);
        for w in out.mse_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(out.mse_trace.last() < out.mse_trace.first());
    }

    #[test]
    fn larger_swaps_preserve_density() {
        let f = test_image();
        let c = mask_random(f.dims(), 0.15, 2).unwrap();
        let params = NlpeParams {
            cycles: 2,
            swap_size: 3,
            seed: 1,
        };
        let out = nlpe(&f, &c, &params, &SolverParams::default()).unwrap();
        assert_eq!(out.mask.count(), c.count());
    }

    #[test]
    fn rejects_full_mask() {
        let f = test_image();
        let c = Mask::full(f.dims());
        assert!(nlpe(&f, &c, &NlpeParams::new(0), &SolverParams::default()).is_err());
    }
}
