//! Monte Carlo check of the block projection's two properties: coverage of
//! short vectors and the tail bound for long ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::planner::tail_bound;

/// Relative slack allowed on `min_i |A_i x| <= |x|`.
pub const COVERAGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaParams {
    pub d: usize,
    pub k: usize,
    pub c: f64,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailAudit {
    /// Vectors of norm `c` mapped by block 1 to norm `<= alpha`.
    pub mapped_short: u64,
    pub empirical_probability: f64,
    pub analytic_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageAudit {
    pub trials: u64,
    pub violations: u64,
    /// Largest `min_i |A_i x|` seen over unit vectors.
    pub worst_min_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub d: usize,
    pub k: usize,
    pub padded_dim: usize,
    pub c: f64,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub tail: TailAudit,
    pub coverage: CoverageAudit,
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize, padded: usize, length: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let n = linalg::norm(&v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x *= length / n);
            v.resize(padded, 0.0);
            return v;
        }
    }
}

pub fn verify_lemma(p: &LemmaParams) -> Result<LemmaReport> {
    if p.d == 0 || p.k == 0 || p.k > p.d {
        return Err(Error::invalid(format!("need 1 <= k <= d (got d={}, k={})", p.d, p.k)));
    }
    if p.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if !(p.c > 0.0 && p.alpha > 0.0 && p.c.is_finite() && p.alpha.is_finite()) {
        return Err(Error::invalid("c and alpha must be positive"));
    }
    let padded = p.d.div_ceil(p.k) * p.k;
    let basis = linalg::random_orthonormal_basis(padded, p.seed)?;
    let blocks = linalg::block_mappings(&basis, p.k)?;

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(1);

    let mut mapped_short = 0u64;
    for _ in 0..p.trials {
        let x = random_direction(&mut rng, p.d, padded, p.c);
        let y = linalg::project_point(&blocks[0], &x)?;
        if linalg::norm(&y) <= p.alpha {
            mapped_short += 1;
        }
    }

    let mut violations = 0u64;
    let mut worst = 0.0f64;
    const CHUNK: usize = 1024;
    let mut done = 0;
    while done < p.trials {
        let m = CHUNK.min(p.trials - done);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| random_direction(&mut rng, p.d, padded, 1.0)).collect();
        let proj = linalg::project_batch(&Matrix::from_rows(&rows)?, &basis, p.k)?;
        for j in 0..m {
            let min = (0..proj.num_blocks())
                .map(|i| linalg::norm(proj.get(j, i)))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(min);
            if min > 1.0 + COVERAGE_TOLERANCE {
                violations += 1;
            }
        }
        done += m;
    }

    Ok(LemmaReport {
        d: p.d,
        k: p.k,
        padded_dim: padded,
        c: p.c,
        alpha: p.alpha,
        trials: p.trials,
        seed: p.seed,
        tail: TailAudit {
            mapped_short,
            empirical_probability: mapped_short as f64 / p.trials as f64,
            analytic_bound: tail_bound(p.k, p.alpha, p.c)?,
        },
        coverage: CoverageAudit {
            trials: p.trials as u64,
            violations,
            worst_min_norm: worst,
        },
    })
}
