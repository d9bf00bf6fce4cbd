//! Procedural test images with natural-image ingredients: sharp edges,
//! smooth ramps, periodic texture and multi-scale noise.
//!
//! Every image is quantised to 8 bits so that it survives a PGM round trip
//! unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::Image;

pub const NAMES: [&str; 5] = ["edges", "ramps", "texture", "blobs", "scene"];

fn quantised(size: usize, f: impl Fn(f64, f64) -> f64) -> Image {
    let s = size as f64;
    Image::from_fn(size, size, |x, y| {
        let v = f((x as f64 + 0.5) / s, (y as f64 + 0.5) / s);
        (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
    })
    .expect("positive size")
}

fn edges(size: usize) -> Image {
    quantised(size, |x, y| {
        let mut v = 0.25 + 0.2 * x;
        if (x - 0.35).powi(2) + (y - 0.4).powi(2) < 0.06 {
            v = 0.8 - 0.15 * y;
        }
        if (0.55..0.88).contains(&x) && (0.5..0.9).contains(&y) {
            v = 0.12;
        }
        // triangle
        if y > 0.1 && y < 0.45 && (x - 0.75).abs() < (y - 0.1) * 0.5 {
            v = 0.95;
        }
        v
    })
}

fn ramps(size: usize) -> Image {
    use std::f64::consts::PI;
    quantised(size, |x, y| {
        let base = 0.5 + 0.25 * (2.0 * PI * 1.5 * x).sin() * (2.0 * PI * y).cos() + 0.15 * (y - 0.5);
        if x + 0.6 * y > 0.9 {
            base - 0.2
        } else {
            base
        }
    })
}

fn texture(size: usize) -> Image {
    use std::f64::consts::PI;
    quantised(size, |x, y| {
        if y < 0.5 {
            // chirped stripes
            0.5 + 0.35 * (2.0 * PI * (3.0 * x + 6.0 * x * x)).sin()
        } else if x < 0.5 {
            let cx = (x * 8.0).floor() as i64;
            let cy = (y * 8.0).floor() as i64;
            if (cx + cy) % 2 == 0 {
                0.7
            } else {
                0.3
            }
        } else {
            0.2 + 0.6 * ((x - 0.5) * 2.0) * (y - 0.5) * 2.0
        }
    })
}

fn blobs(size: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb10b);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..12)
        .map(|_| {
            (
                rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random_range(0.03..0.15),
                rng.random_range(-0.35..0.35),
            )
        })
        .collect();
    quantised(size, |x, y| {
        0.5 + bumps
            .iter()
            .map(|&(cx, cy, s, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
            .sum::<f64>()
    })
}

/// Bilinear value noise summed over octaves with halving amplitude.
fn value_noise(seed: u64, octaves: usize) -> impl Fn(f64, f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grids: Vec<(usize, Vec<f64>)> = (0..octaves)
        .map(|o| {
            let n = 4usize << o;
            (n, (0..(n + 1) * (n + 1)).map(|_| rng.random::<f64>() - 0.5).collect())
        })
        .collect();
    move |x, y| {
        let mut amp = 1.0;
        let mut total = 0.0;
        for (n, g) in &grids {
            let fx = x * *n as f64;
            let fy = y * *n as f64;
            let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let at = |i: usize, j: usize| g[j.min(*n) * (n + 1) + i.min(*n)];
            let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
            let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
            total += amp * (top * (1.0 - ty) + bottom * ty);
            amp *= 0.5;
        }
        total
    }
}

fn scene(size: usize) -> Image {
    let noise = value_noise(0x5ce4e, 5);
    quantised(size, move |x, y| {
        let horizon = 0.45 + 0.08 * (6.0 * x).sin();
        let n = noise(x, y);
        if y < horizon {
            0.7 - 0.3 * y + 0.25 * n
        } else {
            0.3 + 0.5 * n
        }
    })
}

/// Synthetic image by name, `size × size`, single channel.
pub fn synthetic(name: &str, size: usize) -> Option<Image> {
    Some(match name {
        "edges" => edges(size),
        "ramps" => ramps(size),
        "texture" => texture(size),
        "blobs" => blobs(size),
        "scene" => scene(size),
        _ => return None,
    })
}

/// All five synthetic images.
pub fn synthetic_corpus(size: usize) -> Vec<(String, Image)> {
    NAMES
        .iter()
        .map(|&n| (n.to_string(), synthetic(n, size).expect("known name")))
        .collect()
}

/// A three-channel variant built from three of the grey images.
pub fn synthetic_colour(size: usize) -> Image {
    let r = edges(size).into_data();
    let g = blobs(size).into_data();
    let b = scene(size).into_data();
    let dims = crate::image::Dims::new(size, size);
    Image::from_planes(dims, &[r, g, b]).expect("planes share dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_are_quantised_and_in_range() {
        for (name, img) in synthetic_corpus(32) {
            for &v in img.data() {
                assert!((0.0..=1.0).contains(&v), "{name}");
                assert_eq!((v * 255.0).round() / 255.0, v);
            }
            // every image has structure
            let mean = img.data().iter().sum::<f64>() / img.data().len() as f64;
            assert!(img.data().iter().any(|v| (v - mean).abs() > 0.1), "{name}");
        }
        assert!(synthetic("nope", 8).is_none());
        assert_eq!(synthetic_colour(16).channels(), 3);
    }
}
