//! Homogeneous diffusion inpainting.
//!
//! The discrete Laplacian uses the 5-point stencil with grid size 1 and
//! reflecting boundaries: a neighbour outside the domain mirrors the centre
//! pixel, so its stencil weight cancels against the centre weight.
//!
//! Known pixels are eliminated from the inpainting system. What remains is
//! the negated Laplacian restricted to the unknown pixels, which is symmetric
//! positive definite whenever at least one pixel is known, and is solved with
//! plain conjugate gradients.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Dims, Image, KnownData};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Stop once `‖b − Mx‖ ≤ rel_tolerance · ‖b‖` for the reduced system.
    pub rel_tolerance: f64,
    /// `None` means `10 · n_x · n_y`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-6,
            max_iterations: None,
        }
    }
}

impl SolverParams {
    pub fn with_tolerance(rel_tolerance: f64) -> Self {
        Self {
            rel_tolerance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "relative tolerance {} outside (0, 1)",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    pub fn iteration_budget(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(10 * n).max(1)
    }
}

/// A matrix-free linear map on vectors of length `len()`.
pub trait LinearOperator {
    fn len(&self) -> usize;

    fn apply(&self, x: &[f64], out: &mut [f64]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.apply(x, &mut out);
        out
    }
}

/// `out = −A x`: per pixel, (number of in-domain neighbours) · x_i − Σ x_j.
fn neg_laplacian(dims: Dims, x: &[f64], out: &mut [f64]) {
    let (w, h) = (dims.width, dims.height);
    for y in 0..h {
        let row = y * w;
        for xx in 0..w {
            let i = row + xx;
            let c = x[i];
            let mut acc = 0.0;
            if xx > 0 {
                acc += c - x[i - 1];
            }
            if xx + 1 < w {
                acc += c - x[i + 1];
            }
            if y > 0 {
                acc += c - x[i - w];
            }
            if y + 1 < h {
                acc += c - x[i + w];
            }
            out[i] = acc;
        }
    }
}

/// The negated discrete Laplacian `−A` with reflecting boundaries.
#[derive(Debug, Clone, Copy)]
pub struct NegLaplacian {
    pub dims: Dims,
}

impl LinearOperator for NegLaplacian {
    fn len(&self) -> usize {
        self.dims.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        neg_laplacian(self.dims, x, out);
    }
}

/// `−A` restricted to the unknown pixels, acting on full-length vectors.
/// Entries at known pixels are treated as zero on input and set to zero on
/// output.
#[derive(Debug, Clone, Copy)]
pub struct ReducedOperator<'a> {
    dims: Dims,
    known: &'a [bool],
}

impl<'a> ReducedOperator<'a> {
    pub fn new(dims: Dims, known: &'a [bool]) -> Self {
        assert_eq!(known.len(), dims.len());
        Self { dims, known }
    }
}

impl LinearOperator for ReducedOperator<'_> {
    fn len(&self) -> usize {
        self.dims.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (w, h) = (self.dims.width, self.dims.height);
        let k = self.known;
        let val = |j: usize| if k[j] { 0.0 } else { x[j] };
        for y in 0..h {
            let row = y * w;
            for xx in 0..w {
                let i = row + xx;
                if k[i] {
                    out[i] = 0.0;
                    continue;
                }
                let c = x[i];
                let mut acc = 0.0;
                if xx > 0 {
                    acc += c - val(i - 1);
                }
                if xx + 1 < w {
                    acc += c - val(i + 1);
                }
                if y > 0 {
                    acc += c - val(i - w);
                }
                if y + 1 < h {
                    acc += c - val(i + w);
                }
                out[i] = acc;
            }
        }
    }
}

/// The full, nonsymmetric inpainting operator `(I − C) A − C` for a
/// (possibly non-binary) confidence vector.
#[derive(Debug, Clone, Copy)]
pub struct InpaintingOperator<'a> {
    dims: Dims,
    confidence: &'a [f64],
}

impl<'a> InpaintingOperator<'a> {
    pub fn new(dims: Dims, confidence: &'a [f64]) -> Self {
        assert_eq!(confidence.len(), dims.len());
        Self { dims, confidence }
    }
}

impl LinearOperator for InpaintingOperator<'_> {
    fn len(&self) -> usize {
        self.dims.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        neg_laplacian(self.dims, x, out);
        for ((o, &c), &xi) in out.iter_mut().zip(self.confidence).zip(x) {
            *o = -(1.0 - c) * *o - c * xi;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// True residual relative to `‖b‖` at exit.
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator.
///
/// `x` holds the initial guess and receives the solution. Convergence is
/// judged on the true residual: when the recursively updated residual meets
/// the tolerance, the residual is recomputed and the iteration restarted if
/// drift left it above tolerance.
pub fn conjugate_gradient(
    op: &impl LinearOperator,
    b: &[f64],
    x: &mut [f64],
    rel_tolerance: f64,
    max_iterations: usize,
) -> Result<CgOutcome> {
    let n = op.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let target = rel_tolerance * b_norm;
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut iterations = 0;

    loop {
        op.apply(x, &mut q);
        for i in 0..n {
            r[i] = b[i] - q[i];
        }
        let mut rr = dot(&r, &r);
        if rr.sqrt() <= target {
            return Ok(CgOutcome {
                iterations,
                relative_residual: rr.sqrt() / b_norm,
            });
        }
        if iterations >= max_iterations {
            return Err(Error::Convergence {
                iterations,
                residual: rr.sqrt() / b_norm,
            });
        }
        p.copy_from_slice(&r);
        while iterations < max_iterations {
            op.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if pq <= 0.0 {
                // only reachable for an indefinite operator
                return Err(Error::Convergence {
                    iterations,
                    residual: rr.sqrt() / b_norm,
                });
            }
            let alpha = rr / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            iterations += 1;
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= target {
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
    }
}

const NO_NEIGHBOUR: u32 = u32::MAX;

/// The reduced operator stored over the unknown pixels only, with a
/// neighbour table. Equivalent to [`ReducedOperator`] but its cost scales
/// with the number of unknowns instead of the grid size.
#[derive(Debug, Clone)]
pub struct CompactOperator {
    pixels: Vec<usize>,
    neighbours: Vec<[u32; 4]>,
    degree: Vec<f64>,
}

impl CompactOperator {
    pub fn new(dims: Dims, known: &[bool]) -> Self {
        assert_eq!(known.len(), dims.len());
        let (w, h) = (dims.width, dims.height);
        let mut slot = vec![NO_NEIGHBOUR; dims.len()];
        let mut pixels = Vec::new();
        for (i, &k) in known.iter().enumerate() {
            if !k {
                slot[i] = pixels.len() as u32;
                pixels.push(i);
            }
        }
        let mut neighbours = Vec::with_capacity(pixels.len());
        let mut degree = Vec::with_capacity(pixels.len());
        for &i in &pixels {
            let (x, y) = (i % w, i / w);
            let mut nb = [NO_NEIGHBOUR; 4];
            let mut deg = 0.0;
            if x > 0 {
                nb[0] = slot[i - 1];
                deg += 1.0;
            }
            if x + 1 < w {
                nb[1] = slot[i + 1];
                deg += 1.0;
            }
            if y > 0 {
                nb[2] = slot[i - w];
                deg += 1.0;
            }
            if y + 1 < h {
                nb[3] = slot[i + w];
                deg += 1.0;
            }
            neighbours.push(nb);
            degree.push(deg);
        }
        Self {
            pixels,
            neighbours,
            degree,
        }
    }

    /// Grid index of every unknown, in compact order.
    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.pixels.iter().map(|&p| full[p]).collect()
    }
}

impl LinearOperator for CompactOperator {
    fn len(&self) -> usize {
        self.pixels.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (k, (nb, &deg)) in self.neighbours.iter().zip(&self.degree).enumerate() {
            let mut acc = deg * x[k];
            for &j in nb {
                if j != NO_NEIGHBOUR {
                    acc -= x[j as usize];
                }
            }
            out[k] = acc;
        }
    }
}

/// One inpainting problem: a grid and the set of known pixels.
#[derive(Debug, Clone)]
pub struct InpaintProblem<'a> {
    dims: Dims,
    known: &'a [bool],
    compact: CompactOperator,
}

impl<'a> InpaintProblem<'a> {
    pub fn new(dims: Dims, known: &'a [bool]) -> Result<Self> {
        if known.len() != dims.len() {
            return Err(Error::dims(dims.len(), known.len()));
        }
        if !known.iter().any(|&k| k) {
            return Err(Error::EmptyMask);
        }
        Ok(Self {
            dims,
            known,
            compact: CompactOperator::new(dims, known),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn known(&self) -> &[bool] {
        self.known
    }

    /// Right-hand side of the reduced system: for each unknown pixel, the sum
    /// of its known neighbours' values.
    pub fn rhs(&self, values: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.dims.len()];
        for (&p, v) in self.compact.pixels.iter().zip(self.compact_rhs(values)) {
            b[p] = v;
        }
        b
    }

    fn compact_rhs(&self, values: &[f64]) -> Vec<f64> {
        let (w, h) = (self.dims.width, self.dims.height);
        let k = self.known;
        self.compact
            .pixels
            .iter()
            .map(|&i| {
                let (x, y) = (i % w, i / w);
                let mut acc = 0.0;
                if x > 0 && k[i - 1] {
                    acc += values[i - 1];
                }
                if x + 1 < w && k[i + 1] {
                    acc += values[i + 1];
                }
                if y > 0 && k[i - w] {
                    acc += values[i - w];
                }
                if y + 1 < h && k[i + w] {
                    acc += values[i + w];
                }
                acc
            })
            .collect()
    }

    /// Adjoint of [`rhs`](Self::rhs): scatters each unknown entry of `y` onto
    /// its known neighbours. Entries at unknown pixels of the result are zero.
    pub fn rhs_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let (w, h) = (self.dims.width, self.dims.height);
        let k = self.known;
        let mut out = vec![0.0; self.dims.len()];
        for &i in &self.compact.pixels {
            let v = y[i];
            let (x, yy) = (i % w, i / w);
            if x > 0 && k[i - 1] {
                out[i - 1] += v;
            }
            if x + 1 < w && k[i + 1] {
                out[i + 1] += v;
            }
            if yy > 0 && k[i - w] {
                out[i - w] += v;
            }
            if yy + 1 < h && k[i + w] {
                out[i + w] += v;
            }
        }
        out
    }

    /// The reduced operator on full-length vectors.
    pub fn operator(&self) -> ReducedOperator<'a> {
        ReducedOperator::new(self.dims, self.known)
    }

    fn run_cg(&self, b: &[f64], x: &mut [f64], params: &SolverParams) -> Result<CgOutcome> {
        conjugate_gradient(
            &self.compact,
            b,
            x,
            params.rel_tolerance,
            params.iteration_budget(self.dims.len()),
        )
    }

    /// Solves the reduced SPD system `M y = b` for a full-length right-hand
    /// side supported on the unknown pixels. `y` holds the initial guess;
    /// its known entries are zeroed.
    pub fn solve_reduced(&self, b: &[f64], y: &mut [f64], params: &SolverParams) -> Result<CgOutcome> {
        let bc = self.compact.gather(b);
        let mut yc = self.compact.gather(y);
        let outcome = self.run_cg(&bc, &mut yc, params)?;
        y.iter_mut().zip(self.known).filter(|(_, &k)| k).for_each(|(v, _)| *v = 0.0);
        for (&p, v) in self.compact.pixels.iter().zip(yc) {
            y[p] = v;
        }
        Ok(outcome)
    }

    /// Inpaints one channel. `values` is a full-length plane of which only
    /// the known entries are read; the result equals them exactly there.
    pub fn solve(
        &self,
        values: &[f64],
        guess: Option<&[f64]>,
        params: &SolverParams,
    ) -> Result<(Vec<f64>, CgOutcome)> {
        let b = self.compact_rhs(values);
        let mut x = match guess {
            Some(g) => self.compact.gather(g),
            None => vec![0.0; b.len()],
        };
        let outcome = self.run_cg(&b, &mut x, params)?;
        let mut u: Vec<f64> = values
            .iter()
            .zip(self.known)
            .map(|(&v, &k)| if k { v } else { 0.0 })
            .collect();
        for (&p, v) in self.compact.pixels.iter().zip(x) {
            u[p] = v;
        }
        Ok((u, outcome))
    }

    /// Inpaints every plane, channels in parallel.
    pub fn solve_planes(
        &self,
        values: &[Vec<f64>],
        guess: Option<&[Vec<f64>]>,
        params: &SolverParams,
    ) -> Result<Vec<Vec<f64>>> {
        values
            .par_iter()
            .enumerate()
            .map(|(c, v)| {
                let g = guess.map(|g| g[c].as_slice());
                self.solve(v, g, params).map(|(u, _)| u)
            })
            .collect()
    }
}

/// Applies the discrete Laplacian `A` to a single-channel image.
pub fn apply_laplacian(img: &Image) -> Result<Image> {
    if img.channels() != 1 {
        return Err(Error::InvalidParameter(
            "the Laplacian acts on single-channel images".into(),
        ));
    }
    let mut out = NegLaplacian { dims: img.dims() }.apply_vec(img.data());
    out.iter_mut().for_each(|v| *v = -*v);
    Image::new(img.width(), img.height(), 1, out)
}

fn scatter(known: &KnownData) -> Vec<Vec<f64>> {
    let n = known.dims().len();
    (0..known.channels())
        .map(|c| {
            let mut plane = vec![0.0; n];
            for (k, &p) in known.positions().iter().enumerate() {
                plane[p] = known.value(k, c);
            }
            plane
        })
        .collect()
}

/// Homogeneous diffusion inpainting of `known`, channel by channel.
pub fn inpaint(known: &KnownData, params: &SolverParams) -> Result<Image> {
    inpaint_with_guess(known, params, None)
}

/// As [`inpaint`], starting CG from `guess` (same shape as the result).
pub fn inpaint_with_guess(known: &KnownData, params: &SolverParams, guess: Option<&Image>) -> Result<Image> {
    params.validate()?;
    if known.is_empty() {
        return Err(Error::EmptyMask);
    }
    let dims = known.dims();
    let guess_planes = match guess {
        Some(g) if g.dims() != dims || g.channels() != known.channels() => {
            return Err(Error::dims(dims, g.dims()));
        }
        Some(g) => Some(g.planes()),
        None => None,
    };
    let bits = known.mask().as_bools();
    let problem = InpaintProblem::new(dims, &bits)?;
    let planes = problem.solve_planes(&scatter(known), guess_planes.as_deref(), params)?;
    Image::from_planes(dims, &planes)
}

/// Mean squared residual of the inpainting equation,
/// `‖(I − C) A u − C (u − g)‖² / (n_x n_y)`, averaged over channels.
pub fn residual_norm(u: &Image, known: &KnownData) -> Result<f64> {
    if u.dims() != known.dims() || u.channels() != known.channels() {
        return Err(Error::dims(
            format!("{} with {} channels", known.dims(), known.channels()),
            format!("{} with {} channels", u.dims(), u.channels()),
        ));
    }
    let dims = u.dims();
    let c: Vec<f64> = known.mask().values().to_vec();
    let g = scatter(known);
    let op = InpaintingOperator::new(dims, &c);
    let n = dims.len() as f64;
    let total: f64 = (0..u.channels())
        .map(|ch| {
            let plane = u.plane(ch);
            let mut r = op.apply_vec(&plane);
            // (I − C)Au − Cu + Cg
            for i in 0..r.len() {
                r[i] += c[i] * g[ch][i];
            }
            dot(&r, &r) / n
        })
        .sum();
    Ok(total / u.channels() as f64)
}
