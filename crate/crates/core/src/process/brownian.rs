use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{block_layout, GridPath};
use crate::error::{Error, Result};
use crate::stable::{gaussian_tail, open_unit};

/// Brownian motion with `Var{W(1)} = var_rate` on `n_steps` steps of `dt`.
pub fn simulate_bm<R: Rng + ?Sized>(
    n_steps: usize,
    dt: f64,
    var_rate: f64,
    rng: &mut R,
) -> Result<GridPath> {
    if n_steps == 0 {
        return Err(Error::config("n_steps must be at least 1"));
    }
    check_positive("var_rate", var_rate)?;
    check_positive("dt", dt)?;
    let sd = (var_rate * dt).sqrt();
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut level = 0.0;
    values.push(level);
    for _ in 0..n_steps {
        let z: f64 = StandardNormal.sample(rng);
        level += sd * z;
        values.push(level);
    }
    GridPath::new(dt, values)
}

/// Halve the grid step by drawing each midpoint from the Brownian bridge
/// between its neighbours. Coarse values are kept, so grid suprema can only
/// grow.
pub fn refine_bm_midpoints<R: Rng + ?Sized>(
    path: &GridPath,
    var_rate: f64,
    rng: &mut R,
) -> Result<GridPath> {
    check_positive("var_rate", var_rate)?;
    let half = 0.5 * path.dt;
    let sd = (var_rate * half / 2.0).sqrt();
    let mut values = Vec::with_capacity(2 * path.values.len() - 1);
    for w in path.values.windows(2) {
        values.push(w[0]);
        let z: f64 = StandardNormal.sample(rng);
        values.push(0.5 * (w[0] + w[1]) + sd * z);
    }
    values.push(*path.values.last().expect("non-empty path"));
    GridPath::new(half, values)
}

/// Maximum of a Brownian block of length `q` given its endpoint increment,
/// drawn exactly from the reflection law
/// `P{M ≥ m | W(q) = w_end} = exp(−2m(m − w_end)/(var_rate·q))`.
pub fn bm_block_max_exact<R: Rng + ?Sized>(w_end: f64, q: f64, var_rate: f64, rng: &mut R) -> f64 {
    bm_block_max_from_uniform(w_end, q, var_rate, open_unit(rng))
}

/// Inverse transform behind [`bm_block_max_exact`] for a given uniform `u ∈ (0, 1]`.
pub fn bm_block_max_from_uniform(w_end: f64, q: f64, var_rate: f64, u: f64) -> f64 {
    0.5 * (w_end + (w_end * w_end - 2.0 * var_rate * q * u.ln()).sqrt())
}

/// `P{sup_{t∈[0,1]} B(t) − B(⌊t/q⌋q) ≤ ε}` by the exact block product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactDeviation {
    pub probability: f64,
    pub full_blocks: u64,
    pub residual: f64,
    /// A per-block factor `1 − 2Φ̄(·)` was negative and clamped to zero.
    pub clamped: bool,
}

/// Exact one-sided deviation probability for Brownian motion over `[0, 1]`:
/// `(1 − 2Φ̄(ε/√(Cq)))^{⌊1/q⌋} · (1 − 2Φ̄(ε/√(C(1 − ⌊1/q⌋q))))`.
pub fn bm_exact_deviation_prob(epsilon: f64, q: f64, var_rate: f64) -> Result<ExactDeviation> {
    check_positive("epsilon", epsilon)?;
    check_positive("var_rate", var_rate)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::domain(format!("block length q must lie in (0, 1], got {q}")));
    }
    let (n, residual) = block_layout(q, 1.0);
    let mut clamped = false;
    let mut factor = |len: f64| {
        let f = 1.0 - 2.0 * gaussian_tail(epsilon / (var_rate * len).sqrt());
        if f < 0.0 {
            clamped = true;
            0.0
        } else {
            f
        }
    };
    let base = factor(q);
    let tail = if residual == 0.0 { 1.0 } else { factor(residual) };
    // n·ln(base) keeps precision when base is within 1e-16 of 1
    let log_base = if base == 0.0 {
        f64::NEG_INFINITY
    } else {
        (-2.0 * gaussian_tail(epsilon / (var_rate * q).sqrt())).ln_1p()
    };
    let probability = if base == 0.0 {
        0.0
    } else {
        (n as f64 * log_base).exp() * tail
    };
    Ok(ExactDeviation {
        probability,
        full_blocks: n,
        residual,
        clamped,
    })
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}
