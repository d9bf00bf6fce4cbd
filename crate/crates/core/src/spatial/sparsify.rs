//! Probabilistic sparsification.

use rand::seq::index;

use super::{error_map, rng, target_count};
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::solver::{InpaintProblem, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsifyParams {
    /// Fraction of the current mask removed as candidates per iteration.
    pub candidate_fraction: f64,
    /// Fraction of the candidates, those with the largest error, put back.
    pub return_fraction: f64,
    pub target_density: f64,
    pub seed: u64,
}

impl SparsifyParams {
    pub fn new(target_density: f64, seed: u64) -> Self {
        Self {
            candidate_fraction: 0.02,
            return_fraction: 0.98,
            target_density,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.candidate_fraction;
        let q = self.return_fraction;
        let d = self.target_density;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("candidate fraction {p} outside (0, 1]")));
        }
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("return fraction {q} outside [0, 1)")));
        }
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::InvalidParameter(format!("target density {d} outside (0, 1)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SparsifyOutcome {
    pub mask: Mask,
    /// Mask size at the start and after every iteration.
    pub counts: Vec<usize>,
}

/// Sparsifies a full mask down to the target density.
///
/// Each iteration removes a random `p`-fraction of the mask, inpaints, and
/// puts back the `q`-fraction of those candidates whose own pixel is worst
/// reconstructed. At least one candidate is always dropped. The final
/// iteration puts back extra candidates so that exactly
/// `round(d · n_x · n_y)` pixels remain.
pub fn sparsify(f: &Image, params: &SparsifyParams, solver: &SolverParams) -> Result<SparsifyOutcome> {
    params.validate()?;
    solver.validate()?;
    let dims = f.dims();
    let n = dims.len();
    let target = target_count(dims, params.target_density)?;
    let planes = f.planes();
    let mut rng = rng(params.seed);

    let mut known = vec![true; n];
    let mut members: Vec<usize> = (0..n).collect();
    let mut u = planes.clone();
    let mut counts = vec![n];

    while members.len() > target {
        let count = members.len();
        let n_cand = ((params.candidate_fraction * count as f64).round() as usize).clamp(1, count - 1);
        let mut picked: Vec<usize> = index::sample(&mut rng, count, n_cand).into_vec();
        picked.sort_unstable();
        let candidates: Vec<usize> = picked.iter().map(|&k| members[k]).collect();
        for &c in &candidates {
            known[c] = false;
        }

        let problem = InpaintProblem::new(dims, &known)?;
        u = problem.solve_planes(&planes, Some(&u), solver)?;
        let err = error_map(&u, &planes);

        let n_back = (params.return_fraction * n_cand as f64).round() as usize;
        let mut n_drop = n_cand.saturating_sub(n_back).max(1);
        if count - n_drop < target {
            n_drop = count - target;
        }
        let mut ranked = candidates.clone();
        // largest error first, index order among ties
        ranked.sort_by(|&a, &b| err[b].total_cmp(&err[a]).then(a.cmp(&b)));
        for &c in &ranked[..n_cand - n_drop] {
            known[c] = true;
        }
        members.retain(|&i| known[i]);
        counts.push(members.len());
    }

    Ok(SparsifyOutcome {
        mask: Mask::from_bools(dims, &known)?,
        counts,
    })
}
