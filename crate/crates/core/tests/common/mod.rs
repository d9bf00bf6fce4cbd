//! Dense reference solvers and the randomized suites built on them. Shared by
//! the oracle tests and the acceptance target.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use inpaint_opt::tonal::{tonal_echo, tonal_lsq, TonalMethod, TonalParams};
use inpaint_opt::{inpaint, residual_norm, Dims, Image, KnownData, Mask, SolverParams};

/// Solver tolerance of the oracle comparisons.
pub const TIGHT: f64 = 1e-12;

/// Solves `c·(u − f) − (1 − c)·Δu = 0` densely, straight from the grid
/// stencil: known rows are identity rows, unknown rows the 5-point Laplacian
/// whose missing (out of grid) neighbours are mirrored onto the centre.
pub fn dense_inpaint(dims: Dims, known: &[bool], values: &[f64]) -> Vec<f64> {
    let (w, h) = (dims.width as i64, dims.height as i64);
    let n = dims.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if known[i] {
                a[(i, i)] = 1.0;
                b[i] = values[i];
                continue;
            }
            for (dx, dy) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && nx < w && ny >= 0 && ny < h {
                    let j = (ny * w + nx) as usize;
                    a[(i, j)] += 1.0;
                    a[(i, i)] -= 1.0;
                }
            }
        }
    }
    let u = a.lu().solve(&b).expect("inpainting system is regular");
    u.iter().copied().collect()
}

/// Least squares optimal mask values from the explicit normal equations.
/// Column `j` of B is the dense inpainting of a unit value at mask pixel `j`.
pub fn dense_tonal(dims: Dims, known: &[bool], f: &[f64]) -> Vec<f64> {
    let n = dims.len();
    let positions: Vec<usize> = (0..n).filter(|&i| known[i]).collect();
    let mut b = DMatrix::<f64>::zeros(n, positions.len());
    for (j, &p) in positions.iter().enumerate() {
        let mut unit = vec![0.0; n];
        unit[p] = 1.0;
        b.set_column(j, &DVector::from_vec(dense_inpaint(dims, known, &unit)));
    }
    let bt = b.transpose();
    let g = (&bt * &b)
        .cholesky()
        .expect("BᵀB is positive definite")
        .solve(&(&bt * DVector::from_column_slice(f)));
    g.iter().copied().collect()
}

/// Random grid of at most `max_pixels` pixels with a nonempty random mask.
pub fn random_instance(rng: &mut ChaCha8Rng, max_pixels: usize) -> (Dims, Vec<bool>, Vec<f64>) {
    let w = rng.random_range(1..=8usize);
    let h = rng.random_range(1..=(max_pixels / w).clamp(1, 8));
    let dims = Dims::new(w, h);
    let density = rng.random_range(0.05..0.9);
    let mut known: Vec<bool> = (0..dims.len()).map(|_| rng.random_bool(density)).collect();
    if !known.contains(&true) {
        let i = rng.random_range(0..dims.len());
        known[i] = true;
    }
    let values = (0..dims.len()).map(|_| rng.random::<f64>()).collect();
    (dims, known, values)
}

pub fn known_data(dims: Dims, known: &[bool], values: &[f64]) -> KnownData {
    let f = Image::new(dims.width, dims.height, 1, values.to_vec()).unwrap();
    KnownData::from_image(&f, &Mask::from_bools(dims, known).unwrap()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
pub struct OracleReport {
    pub instances: usize,
    pub max_error: f64,
    pub max_residual: f64,
}

/// Iterative against dense inpainting on `instances` random small grids.
pub fn solver_oracle_suite(instances: usize, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = SolverParams::with_tolerance(TIGHT);
    let mut report = OracleReport {
        instances,
        max_error: 0.0,
        max_residual: 0.0,
    };
    for _ in 0..instances {
        let (dims, known, values) = random_instance(&mut rng, 64);
        let kd = known_data(dims, &known, &values);
        let u = inpaint(&kd, &params).unwrap();
        let expected = dense_inpaint(dims, &known, &values);
        report.max_error = report.max_error.max(max_abs_diff(u.data(), &expected));
        report.max_residual = report.max_residual.max(residual_norm(&u, &kd).unwrap());
    }
    report
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

/// Grid, nonempty mask and two value planes.
fn instance_strategy() -> impl Strategy<Value = (Dims, Vec<bool>, Vec<f64>, Vec<f64>)> {
    (1..=8usize, 1..=8usize).prop_flat_map(|(w, h)| {
        let n = w * h;
        (
            Just(Dims::new(w, h)),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
            0..n,
        )
            .prop_map(|(dims, mut known, a, b, forced)| {
                known[forced] = true;
                (dims, known, a, b)
            })
    })
}

fn solve(dims: Dims, known: &[bool], values: &[f64]) -> Vec<f64> {
    inpaint(&known_data(dims, known, values), &SolverParams::with_tolerance(TIGHT))
        .unwrap()
        .into_data()
}

/// The inpainting never leaves the range of the known values.
pub fn max_principle(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&instance_strategy(), |(dims, known, values, _)| {
            let u = solve(dims, &known, &values);
            let kv = values.iter().zip(&known).filter(|(_, &k)| k).map(|(v, _)| *v);
            let lo = kv.clone().fold(f64::INFINITY, f64::min);
            let hi = kv.fold(f64::NEG_INFINITY, f64::max);
            for &x in &u {
                prop_assert!(x >= lo - 1e-9 && x <= hi + 1e-9, "{x} outside [{lo}, {hi}]");
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// inpaint(α·g₁ + β·g₂) = α·inpaint(g₁) + β·inpaint(g₂).
pub fn linearity(cases: u32) -> Result<(), String> {
    let strategy = (instance_strategy(), -3.0..3.0f64, -3.0..3.0f64);
    runner(cases)
        .run(&strategy, |((dims, known, g1, g2), alpha, beta)| {
            let mix: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = solve(dims, &known, &mix);
            let u1 = solve(dims, &known, &g1);
            let u2 = solve(dims, &known, &g2);
            let rhs: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| alpha * a + beta * b).collect();
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-8);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Adding a constant to the data adds it to the inpainting.
pub fn shift_invariance(cases: u32) -> Result<(), String> {
    let strategy = (instance_strategy(), -5.0..5.0f64);
    runner(cases)
        .run(&strategy, |((dims, known, g, _), shift)| {
            let shifted: Vec<f64> = g.iter().map(|v| v + shift).collect();
            let u = solve(dims, &known, &g);
            let us = solve(dims, &known, &shifted);
            let back: Vec<f64> = us.iter().map(|v| v - shift).collect();
            prop_assert!(max_abs_diff(&u, &back) < 1e-8);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Tight settings for comparisons against the dense tonal oracle.
pub fn tight_tonal(method: TonalMethod) -> TonalParams {
    TonalParams {
        method,
        outer_tolerance: 1e-12,
        max_outer_iterations: 10_000,
        inner: SolverParams::with_tolerance(TIGHT),
        ..TonalParams::default()
    }
}

/// Largest deviation of tonal_lsq from the dense normal equations over
/// `instances` random grids with at most 16 mask pixels.
pub fn tonal_oracle_suite(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (dims, mut known, values) = random_instance(&mut rng, 64);
        let mut set: Vec<usize> = (0..dims.len()).filter(|&i| known[i]).collect();
        while set.len() > 16 {
            let k = rng.random_range(0..set.len());
            known[set.swap_remove(k)] = false;
        }
        let f = Image::new(dims.width, dims.height, 1, values.clone()).unwrap();
        let c = Mask::from_bools(dims, &known).unwrap();
        let out = tonal_lsq(&f, &c, &tight_tonal(TonalMethod::Lsq)).unwrap();
        let expected = dense_tonal(dims, &known, &values);
        worst = worst.max(max_abs_diff(out.known.values(), &expected));
    }
    worst
}

/// Random smooth-plus-noise test image.
pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    let (a, b, c) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64 / w as f64, (i / w) as f64 / h as f64);
            (0.3 + 0.4 * (6.0 * a * x + 4.0 * b * y + c).sin() * x + 0.2 * rng.random::<f64>()).clamp(0.0, 1.0)
        })
        .collect();
    Image::new(w, h, 1, data).unwrap()
}

/// Number of instances (out of `instances`) on which optimised values gave a
/// larger MSE than the original ones.
pub fn tonal_never_worse_suite(instances: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worse = 0;
    for _ in 0..instances {
        let w = rng.random_range(4..=16);
        let h = rng.random_range(4..=16);
        let f = random_image(&mut rng, w, h);
        let d = rng.random_range(0.03..0.5);
        let c = inpaint_opt::spatial::mask_random(f.dims(), d, rng.random()).unwrap();
        let plain = inpaint(&KnownData::from_image(&f, &c).unwrap(), &SolverParams::with_tolerance(1e-10)).unwrap();
        let plain_mse = inpaint_opt::mse(&plain, &f).unwrap();
        let out = tonal_lsq(&f, &c, &TonalParams::default()).unwrap();
        if out.mse > plain_mse {
            worse += 1;
        }
    }
    worse
}

/// Worst relative MSE gap between 50 echo sweeps and least squares on
/// `instances` random 32×32 images.
pub fn echo_vs_lsq_suite(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let f = random_image(&mut rng, 32, 32);
        let c = inpaint_opt::spatial::mask_random(f.dims(), rng.random_range(0.02..0.1), rng.random()).unwrap();
        let lsq = tonal_lsq(&f, &c, &tight_tonal(TonalMethod::Lsq)).unwrap();
        let echo_params = TonalParams {
            echo_sweeps: 50,
            seed: rng.random(),
            ..tight_tonal(TonalMethod::Echo)
        };
        let echo = tonal_echo(&f, &c, &echo_params).unwrap();
        worst = worst.max((echo.mse - lsq.mse).abs() / lsq.mse);
    }
    worst
}
