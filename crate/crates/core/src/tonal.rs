//! Tonal optimisation: the values stored at a fixed binary mask.
//!
//! For a mask with known set `K`, inpainting is a linear map `B` from the
//! stored values `g ∈ R^|K|` to the image, `B = [I; M⁻¹E]`. Here `M` is the
//! reduced SPD Laplacian on the unknown pixels and `E` collects known
//! neighbours into its right-hand side. The least-squares optimum of
//! `‖B g − f‖²` is found matrix-free: every application of `B` or `Bᵀ` is one
//! inpainting solve with the same operator `M`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Dims, Image, KnownData, Mask};
use crate::solver::{InpaintProblem, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TonalMethod {
    Lsq,
    Echo,
}

impl std::str::FromStr for TonalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lsq" => Ok(TonalMethod::Lsq),
            "echo" => Ok(TonalMethod::Echo),
            other => Err(Error::InvalidParameter(format!("unknown tonal method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TonalParams {
    pub method: TonalMethod,
    /// Normal-equations CG stops at `‖Bᵀ(Bg − f)‖ ≤ outer_tolerance · ‖Bᵀf‖`.
    pub outer_tolerance: f64,
    pub max_outer_iterations: usize,
    pub echo_sweeps: usize,
    pub seed: u64,
    /// Tolerance of every inner inpainting solve.
    pub inner: SolverParams,
}

impl Default for TonalParams {
    fn default() -> Self {
        Self {
            method: TonalMethod::Lsq,
            outer_tolerance: 1e-4,
            max_outer_iterations: 1000,
            echo_sweeps: 10,
            seed: 0,
            inner: SolverParams::with_tolerance(1e-8),
        }
    }
}

impl TonalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tolerance > 0.0 && self.outer_tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "outer tolerance {} outside (0, 1)",
                self.outer_tolerance
            )));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidParameter("max_outer_iterations must be >= 1".into()));
        }
        if self.echo_sweeps == 0 {
            return Err(Error::InvalidParameter("echo_sweeps must be >= 1".into()));
        }
        self.inner.validate()
    }
}

#[derive(Debug, Clone)]
pub struct TonalOutcome {
    pub known: KnownData,
    /// Outer iterations (lsq) or sweeps (echo), summed over channels.
    pub iterations: usize,
    /// MSE of the inpainting from `known` against `f`.
    pub mse: f64,
}

/// The linear map from stored values to the inpainted channel.
struct ValueMap<'a> {
    problem: InpaintProblem<'a>,
    positions: &'a [usize],
    inner: SolverParams,
}

impl ValueMap<'_> {
    fn n(&self) -> usize {
        self.problem.dims().len()
    }

    fn scatter(&self, g: &[f64]) -> Vec<f64> {
        let mut plane = vec![0.0; self.n()];
        for (&p, &v) in self.positions.iter().zip(g) {
            plane[p] = v;
        }
        plane
    }

    /// `B g`.
    fn forward(&self, g: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        Ok(self.problem.solve(&self.scatter(g), guess, &self.inner)?.0)
    }

    /// `Bᵀ r = r_K + Eᵀ M⁻¹ r_U`, using that `M` is symmetric.
    fn adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        let known = self.problem.known();
        let r_unknown: Vec<f64> = r
            .iter()
            .zip(known)
            .map(|(&v, &k)| if k { 0.0 } else { v })
            .collect();
        let mut y = vec![0.0; self.n()];
        self.problem.solve_reduced(&r_unknown, &mut y, &self.inner)?;
        let scattered = self.problem.rhs_adjoint(&y);
        Ok(self
            .positions
            .iter()
            .map(|&p| r[p] + scattered[p])
            .collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// CGLS on one channel, started from the original values `f|K`.
fn lsq_channel(map: &ValueMap<'_>, f: &[f64], params: &TonalParams) -> Result<(Vec<f64>, usize)> {
    let mut g: Vec<f64> = map.positions.iter().map(|&p| f[p]).collect();
    let scale = dot_norm(&map.adjoint(f)?);
    if scale == 0.0 {
        return Ok((vec![0.0; g.len()], 0));
    }
    let target = params.outer_tolerance * scale;

    let mut u = map.forward(&g, None)?;
    let mut r: Vec<f64> = f.iter().zip(&u).map(|(a, b)| a - b).collect();
    let mut s = map.adjoint(&r)?;
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    let mut iterations = 0;
    while gamma.sqrt() > target && iterations < params.max_outer_iterations {
        let q = map.forward(&p, None)?;
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for (gi, pi) in g.iter_mut().zip(&p) {
            *gi += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        iterations += 1;
        // refresh the residual periodically against drift from inexact solves
        if iterations % 25 == 0 {
            u = map.forward(&g, Some(&u))?;
            r = f.iter().zip(&u).map(|(a, b)| a - b).collect();
        }
        s = map.adjoint(&r)?;
        let gamma_new = dot(&s, &s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    Ok((g, iterations))
}

fn dot_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Randomised Gauss–Seidel with inpainting echoes on one channel.
/// `trace` receives the squared error after every update.
fn echo_channel(
    map: &ValueMap<'_>,
    f: &[f64],
    g: &mut [f64],
    sweeps: usize,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<()> {
    let mut u = map.forward(g, None)?;
    let mut resid: Vec<f64> = f.iter().zip(&u).map(|(a, b)| a - b).collect();
    let mut order: Vec<usize> = (0..g.len()).collect();
    let mut unit = vec![0.0; g.len()];
    for _ in 0..sweeps {
        order.shuffle(rng);
        for &k in &order {
            unit[k] = 1.0;
            let echo = map.forward(&unit, None)?;
            unit[k] = 0.0;
            let ee = dot(&echo, &echo);
            let step = dot(&echo, &resid) / ee;
            g[k] += step;
            for i in 0..u.len() {
                u[i] += step * echo[i];
                resid[i] -= step * echo[i];
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(dot(&resid, &resid));
            }
        }
    }
    Ok(())
}

fn check_inputs(f: &Image, c: &Mask) -> Result<()> {
    c.require_binary()?;
    if f.dims() != c.dims() {
        return Err(Error::dims(f.dims(), c.dims()));
    }
    if c.count() == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

/// Least-squares optimal tonal values for mask `c`.
pub fn tonal_lsq(f: &Image, c: &Mask, params: &TonalParams) -> Result<TonalOutcome> {
    params.validate()?;
    check_inputs(f, c)?;
    let bits = c.as_bools();
    let positions = c.indices();
    let map = ValueMap {
        problem: InpaintProblem::new(f.dims(), &bits)?,
        positions: &positions,
        inner: params.inner,
    };
    let results: Vec<(Vec<f64>, usize)> = f
        .planes()
        .par_iter()
        .map(|plane| lsq_channel(&map, plane, params))
        .collect::<Result<_>>()?;
    finish(f, c, results, params)
}

/// Tonal optimisation by echo-based randomised Gauss–Seidel, starting from
/// the original values.
pub fn tonal_echo(f: &Image, c: &Mask, params: &TonalParams) -> Result<TonalOutcome> {
    let start = KnownData::from_image(f, c)?;
    tonal_echo_from(f, &start, params, None)
}

/// As [`tonal_echo`], starting from given values. When `trace` is given it
/// receives the summed squared error after every single update (grey images).
pub fn tonal_echo_from(
    f: &Image,
    start: &KnownData,
    params: &TonalParams,
    trace: Option<&mut Vec<f64>>,
) -> Result<TonalOutcome> {
    params.validate()?;
    let c = start.mask();
    check_inputs(f, &c)?;
    if start.channels() != f.channels() {
        return Err(Error::dims(f.channels(), start.channels()));
    }
    let bits = c.as_bools();
    let positions = c.indices();
    let map = ValueMap {
        problem: InpaintProblem::new(f.dims(), &bits)?,
        positions: &positions,
        inner: params.inner,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trace = trace;
    let mut results = Vec::with_capacity(f.channels());
    for (ch, plane) in f.planes().iter().enumerate() {
        let mut g = start.channel_values(ch);
        echo_channel(&map, plane, &mut g, params.echo_sweeps, &mut rng, trace.as_deref_mut())?;
        results.push((g, params.echo_sweeps));
    }
    finish(f, &c, results, params)
}

fn finish(f: &Image, c: &Mask, results: Vec<(Vec<f64>, usize)>, params: &TonalParams) -> Result<TonalOutcome> {
    let iterations = results.iter().map(|r| r.1).sum();
    let values: Vec<Vec<f64>> = results.into_iter().map(|r| r.0).collect();
    let known = KnownData::from_channel_values(c, &values)?;
    let u = crate::solver::inpaint(&known, &params.inner)?;
    let n = f.data().len() as f64;
    let mse = sq_dist(u.data(), f.data()) / n;
    Ok(TonalOutcome { known, iterations, mse })
}

/// Dispatches on `params.method`.
pub fn optimise(f: &Image, c: &Mask, params: &TonalParams) -> Result<TonalOutcome> {
    match params.method {
        TonalMethod::Lsq => tonal_lsq(f, c, params),
        TonalMethod::Echo => tonal_echo(f, c, params),
    }
}

/// `%.9g`-style formatting: nine significant digits, shortest layout.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

/// Serialises known data in the TONAL text format:
/// `TONAL <n_x> <n_y> <channels> <count>` followed by `x y v…` lines in
/// row-major order.
pub fn encode_known(kd: &KnownData) -> String {
    let d = kd.dims();
    let mut out = format!("TONAL {} {} {} {}\n", d.width, d.height, kd.channels(), kd.len());
    for (k, &p) in kd.positions().iter().enumerate() {
        let (x, y) = d.coords(p);
        let _ = write!(out, "{x} {y}");
        for c in 0..kd.channels() {
            let _ = write!(out, " {}", format_sig9(kd.value(k, c)));
        }
        out.push('\n');
    }
    out
}

pub fn decode_known(text: &str) -> Result<KnownData> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let bad = |line: usize, reason: &str| Error::TonalFormat {
        line,
        reason: reason.to_string(),
    };
    let (hline, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "TONAL" {
        return Err(bad(hline, "expected 'TONAL <n_x> <n_y> <channels> <count>'"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad(hline, "header fields must be non-negative integers"));
    let (width, height, channels, count) = (num(fields[1])?, num(fields[2])?, num(fields[3])?, num(fields[4])?);
    if width == 0 || height == 0 {
        return Err(bad(hline, "zero image size"));
    }
    if channels != 1 && channels != 3 {
        return Err(bad(hline, "channels must be 1 or 3"));
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let dims = Dims::new(width, height);
    let mut entries: Vec<(usize, Vec<f64>)> = Vec::with_capacity(count);
    let mut seen = vec![false; dims.len()];
    for (line, body) in lines {
        if entries.len() == count {
            return Err(bad(line, &format!("more entries than the declared {count}")));
        }
        let tok: Vec<&str> = body.split_whitespace().collect();
        if tok.len() != 2 + channels {
            return Err(bad(line, &format!("expected x, y and {channels} value(s)")));
        }
        let x: usize = tok[0].parse().map_err(|_| bad(line, "bad x coordinate"))?;
        let y: usize = tok[1].parse().map_err(|_| bad(line, "bad y coordinate"))?;
        if x >= width || y >= height {
            return Err(Error::CoordinateOutOfRange { line, x, y, width, height });
        }
        let p = dims.index(x, y);
        if seen[p] {
            return Err(Error::DuplicateCoordinate { line, x, y });
        }
        seen[p] = true;
        let vals = tok[2..]
            .iter()
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| bad(line, "bad value"))?;
        entries.push((p, vals));
    }
    if entries.len() != count {
        return Err(bad(hline, &format!("header declares {count} entries, found {}", entries.len())));
    }
    entries.sort_by_key(|e| e.0);
    let positions = entries.iter().map(|e| e.0).collect();
    let values = entries.into_iter().flat_map(|e| e.1).collect();
    KnownData::new(dims, channels, positions, values)
}

/// Writes to a temporary sibling and renames, so readers never see a
/// partially written file.
pub fn save_known(kd: &KnownData, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tonal.partial");
    fs::write(&tmp, encode_known(kd)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_known(path: impl AsRef<Path>) -> Result<KnownData> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_known(&text)
}
