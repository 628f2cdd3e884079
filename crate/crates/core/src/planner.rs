//! Parameter selection: the reduced-space approximation factor, the bound on
//! the reduced dimension and the per-block tail probability, combined into a
//! concrete [`ReductionPlan`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced-space factor used for every `c >= 2`. Any constant with
/// `ln 2 > ln alpha + 1/2` (i.e. `alpha < 2 e^{-1/2} ~ 1.2131`) works.
pub const ALPHA_WIDE: f64 = 1.2;

/// Probability that a block maps a vector of length `>= c` to length
/// `<= alpha`, bounded by `exp(k/2 (1 - (a/c)^2 + ln (a/c)^2))`, clamped to 1.
pub fn tail_bound(k: usize, alpha: f64, c: f64) -> Result<f64> {
    if k == 0 || !(alpha > 0.0) || !(c > 0.0) || !alpha.is_finite() || !c.is_finite() {
        return Err(Error::invalid(format!(
            "tail_bound needs k >= 1 and positive alpha, c (got k={k}, alpha={alpha}, c={c})"
        )));
    }
    let r2 = (alpha / c).powi(2);
    let exponent = 0.5 * k as f64 * (1.0 - r2 + r2.ln());
    Ok(exponent.exp().min(1.0))
}

/// `2(1 - nu) / ((alpha/c)^2 - 1 - 2 ln(alpha/c))`.
pub fn gamma_bound(alpha: f64, c: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if !(alpha >= 1.0) || !(alpha < c) || !c.is_finite() {
        return Err(Error::invalid(format!(
            "gamma_bound needs 1 <= alpha < c (got alpha={alpha}, c={c})"
        )));
    }
    let r = alpha / c;
    let denom = r * r - 1.0 - 2.0 * r.ln();
    Ok(2.0 * (1.0 - nu) / denom)
}

/// `(c+1)/2` below 2, [`ALPHA_WIDE`] from 2 on.
pub fn choose_alpha(c: f64) -> Result<f64> {
    check_c(c)?;
    Ok(if c < 2.0 { (c + 1.0) / 2.0 } else { ALPHA_WIDE })
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 1.0) || !c.is_finite() {
        return Err(Error::invalid(format!("approximation factor c must be > 1 (got {c})")));
    }
    Ok(())
}

fn check_nu(nu: f64) -> Result<()> {
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::invalid(format!("nu must lie in [0, 1) (got {nu})")));
    }
    Ok(())
}

/// Optional replacements for the derived parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanOverrides {
    pub k: Option<usize>,
    pub grid_side: Option<f64>,
    pub alpha: Option<f64>,
}

/// Every tuned parameter of one index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub n: usize,
    pub dim: usize,
    pub c: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub nu: f64,
    pub gamma: f64,
    pub k: usize,
    pub num_blocks: usize,
    pub padded_dim: usize,
    /// Query radius `R`. Plans are made for `R = 1`; inputs are rescaled by `1/R`.
    pub radius: f64,
    pub grid_side: f64,
    pub seed: u64,
    /// False when `gamma ln n >= d` and the plan keeps the original space.
    pub reduced: bool,
}

impl ReductionPlan {
    /// `c * R`, the acceptance threshold of the exact check.
    pub fn accept_distance(&self) -> f64 {
        self.c * self.radius
    }

    /// Per-block tail bound at the plan's own `alpha`.
    pub fn block_tail_bound(&self) -> f64 {
        tail_bound(self.k, self.alpha, self.c).unwrap_or(1.0)
    }

    /// Reduced-space distance at which a candidate can still be reported by
    /// the grid: the radius plus a cell diagonal, `1 + s sqrt(k)` for `R = 1`.
    pub fn effective_alpha(&self) -> f64 {
        (self.radius + self.grid_side * (self.k as f64).sqrt()) / self.radius
    }

    /// Diagnostic: `num_blocks * n * tail_bound(k, alpha, c)`, the expected
    /// number of far points that survive to the exact check.
    pub fn expected_false_positives(&self) -> f64 {
        self.num_blocks as f64 * self.n as f64 * self.block_tail_bound()
    }

    /// Checks the structural invariants; used when a plan is read back from disk.
    pub fn validate(&self) -> Result<()> {
        check_c(self.c)?;
        check_nu(self.nu)?;
        let ok = self.n >= 1
            && self.dim >= 1
            && self.alpha >= 1.0
            && self.alpha < self.c
            && self.k >= 1
            && self.k <= self.padded_dim
            && self.num_blocks * self.k == self.padded_dim
            && self.padded_dim >= self.dim
            && self.padded_dim - self.dim < self.k
            && self.radius > 0.0
            && self.radius.is_finite()
            && self.grid_side > 0.0
            && self.grid_side.is_finite()
            && (!self.reduced || self.k < self.dim);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("inconsistent plan: {self:?}")))
        }
    }
}

/// Derives a plan for `n` points in dimension `d` with approximation factor
/// `c` and trade-off `nu`. The reduced dimension is `ceil(gamma ln n)`; when
/// that reaches `d` the plan keeps the original space as a single block.
pub fn make_plan(n: usize, d: usize, c: f64, nu: f64, seed: u64, overrides: &PlanOverrides) -> Result<ReductionPlan> {
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!("need n >= 1 and d >= 1 (got n={n}, d={d})")));
    }
    check_c(c)?;
    check_nu(nu)?;

    let alpha = match overrides.alpha {
        Some(a) => {
            if !(a >= 1.0 && a < c) {
                return Err(Error::invalid(format!(
                    "alpha override must satisfy 1 <= alpha < c (got {a})"
                )));
            }
            a
        }
        None => choose_alpha(c)?,
    };
    let gamma = gamma_bound(alpha, c, nu)?;

    let k = match overrides.k {
        Some(0) => return Err(Error::invalid("k override must be at least 1")),
        Some(k) if k > d => return Err(Error::invalid(format!("k override {k} exceeds dimension {d}"))),
        Some(k) => k,
        None => {
            let raw = (gamma * (n as f64).ln()).ceil();
            if raw >= d as f64 {
                d
            } else {
                (raw as usize).max(1)
            }
        }
    };
    let reduced = k < d;
    let num_blocks = d.div_ceil(k);
    let padded_dim = num_blocks * k;

    let grid_side = match overrides.grid_side {
        Some(s) => {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::invalid(format!("grid side override must be positive (got {s})")));
            }
            s
        }
        None if alpha > 1.0 => (alpha - 1.0) / (k as f64).sqrt(),
        None => {
            return Err(Error::invalid(
                "alpha = 1 leaves no default grid side; supply a grid side override",
            ))
        }
    };

    let plan = ReductionPlan {
        n,
        dim: d,
        c,
        epsilon: c - 1.0,
        alpha,
        nu,
        gamma,
        k,
        num_blocks,
        padded_dim,
        radius: 1.0,
        grid_side,
        seed,
        reduced,
    };
    plan.validate()?;
    Ok(plan)
}
