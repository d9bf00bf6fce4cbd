//! Analytic mask: Floyd–Steinberg dithering of the Laplace magnitude.

use rand::seq::index;

use super::{mask_random, rng, target_count};
use crate::error::{Error, Result};
use crate::image::{Dims, Image, Mask};
use crate::solver::{LinearOperator, NegLaplacian};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticMask {
    pub mask: Mask,
    /// The Laplace magnitude vanished everywhere and a random mask was used.
    pub fell_back: bool,
}

/// `|Δf|` per pixel, averaged over channels.
pub fn laplace_magnitude(f: &Image) -> Vec<f64> {
    let op = NegLaplacian { dims: f.dims() };
    let mut mag = vec![0.0; f.pixel_count()];
    for plane in f.planes() {
        for (m, v) in mag.iter_mut().zip(op.apply_vec(&plane)) {
            *m += v.abs();
        }
    }
    let k = f.channels() as f64;
    mag.iter_mut().for_each(|m| *m /= k);
    mag
}

/// Binarises values in `[0, 1]` by error diffusion with threshold 1/2,
/// scanning rows left to right.
pub fn floyd_steinberg(dims: Dims, values: &[f64]) -> Vec<bool> {
    let (w, h) = (dims.width, dims.height);
    let mut buf = values.to_vec();
    let mut out = vec![false; buf.len()];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let old = buf[i];
            let on = old >= 0.5;
            out[i] = on;
            let err = old - if on { 1.0 } else { 0.0 };
            if x + 1 < w {
                buf[i + 1] += err * 7.0 / 16.0;
            }
            if y + 1 < h {
                if x > 0 {
                    buf[i + w - 1] += err * 3.0 / 16.0;
                }
                buf[i + w] += err * 5.0 / 16.0;
                if x + 1 < w {
                    buf[i + w + 1] += err * 1.0 / 16.0;
                }
            }
        }
    }
    out
}

fn clamped_mean(mag: &[f64], scale: f64) -> f64 {
    mag.iter().map(|&m| (scale * m).min(1.0)).sum::<f64>() / mag.len() as f64
}

/// Finds the multiplicative scale for which the clamped magnitudes have mean `d`.
fn density_scale(mag: &[f64], d: f64) -> f64 {
    // min(1, s·m) <= s·m gives the lower bracket; at the upper one every
    // nonzero pixel saturates. A fixed number of steps keeps the cost
    // independent of d.
    let mean = mag.iter().sum::<f64>() / mag.len() as f64;
    let smallest = mag.iter().cloned().filter(|&m| m > 0.0).fold(f64::INFINITY, f64::min);
    let mut lo = d / mean;
    let mut hi = (1.0 / smallest).max(lo);
    for _ in 0..64 {
        let mid = (lo * hi).sqrt();
        if clamped_mean(mag, mid) < d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Analytic spatial optimisation at density `d`.
///
/// The Laplace magnitude is scaled so that, after clamping to 1, its mean is
/// `d`, then dithered. Pixels are added or removed at random until exactly
/// `round(d · n_x · n_y)` remain. A constant image falls back to
/// [`mask_random`].
pub fn mask_analytic(f: &Image, d: f64, seed: u64) -> Result<AnalyticMask> {
    let dims = f.dims();
    let target = target_count(dims, d)?;
    if d >= 1.0 {
        return Err(Error::InvalidParameter(format!("density {d} outside (0, 1)")));
    }
    let mag = laplace_magnitude(f);
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    if peak <= 1e-12 {
        return Ok(AnalyticMask {
            mask: mask_random(dims, d, seed)?,
            fell_back: true,
        });
    }
    let scale = density_scale(&mag, d);
    let scaled: Vec<f64> = mag.iter().map(|&m| (scale * m).min(1.0)).collect();
    let mut bits = floyd_steinberg(dims, &scaled);

    let count = bits.iter().filter(|&&b| b).count();
    if count != target {
        let mut rng = rng(seed);
        let (pool, flip_to): (Vec<usize>, bool) = if count > target {
            ((0..bits.len()).filter(|&i| bits[i]).collect(), false)
        } else {
            ((0..bits.len()).filter(|&i| !bits[i]).collect(), true)
        };
        let amount = count.abs_diff(target);
        for k in index::sample(&mut rng, pool.len(), amount) {
            bits[pool[k]] = flip_to;
        }
    }
    Ok(AnalyticMask {
        mask: Mask::from_bools(dims, &bits)?,
        fell_back: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_falls_back_to_random() {
        let f = Image::filled(16, 16, 1, 0.4).unwrap();
        let aa = mask_analytic(&f, 0.1, 3).unwrap();
        assert!(aa.fell_back);
        assert_eq!(aa.mask, mask_random(f.dims(), 0.1, 3).unwrap());
    }

    #[test]
    fn bright_dot_selects_its_stencil() {
        let mut f = Image::filled(9, 9, 1, 0.0).unwrap();
        f.set(4, 4, 0, 1.0);
        // hand-computed |Δf|: 4 at the centre, 1 at its four neighbours
        let mag = laplace_magnitude(&f);
        let stencil = [31, 39, 40, 41, 49];
        for (i, &m) in mag.iter().enumerate() {
            let expected = match i {
                40 => 4.0,
                31 | 39 | 41 | 49 => 1.0,
                _ => 0.0,
            };
            assert_eq!(m, expected);
        }
        let aa = mask_analytic(&f, 5.0 / 81.0, 0).unwrap();
        assert!(!aa.fell_back);
        assert_eq!(aa.mask.indices(), stencil.to_vec());

        let aa = mask_analytic(&f, 3.0 / 81.0, 0).unwrap();
        let picked = aa.mask.indices();
        assert_eq!(picked.len(), 3);
        assert!(picked.contains(&40));
        assert!(picked.iter().all(|i| stencil.contains(i)));
    }

    #[test]
    fn dither_preserves_mean_roughly() {
        let dims = Dims::new(32, 32);
        let vals = vec![0.25; dims.len()];
        let bits = floyd_steinberg(dims, &vals);
        let ones = bits.iter().filter(|&&b| b).count();
        // error pushed past the right and bottom edges is lost
        assert!((ones as f64 - 256.0).abs() <= 16.0, "{ones}");
    }

    #[test]
    fn hits_target_count_exactly() {
        let f = Image::from_fn(40, 30, |x, y| {
            let r = ((x as f64 - 20.0).powi(2) + (y as f64 - 15.0).powi(2)).sqrt();
            if r < 9.0 { 0.8 } else { 0.1 + 0.005 * x as f64 }
        })
        .unwrap();
        for d in [0.01, 0.05, 0.1, 0.2, 0.5] {
            let aa = mask_analytic(&f, d, 1).unwrap();
            assert_eq!(aa.mask.count(), (d * 1200.0).round() as usize);
        }
    }
}
