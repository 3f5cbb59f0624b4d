//! Path simulation for Brownian motion, stable Lévy motion and linear
//! fractional stable motion, and the sampled-path deviation statistic.

mod brownian;
mod levy;
mod lfsm;

pub use brownian::{
    bm_block_max_exact, bm_block_max_from_uniform, bm_exact_deviation_prob, refine_bm_midpoints,
    simulate_bm, ExactDeviation,
};
pub use levy::simulate_stable_levy;
pub use lfsm::{
    lfsm_kernel, lfsm_scale_sigma1, lfsm_truncation_bound, simulate_lfsm, LfsmSimulator,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stable::StableParams;

/// One- or two-sided deviation, matching the two forms of the limit laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sided {
    One,
    Two,
}

impl Sided {
    /// Index used by the Brownian sampling rates `q_1` and `q_2`.
    pub fn index(self) -> u8 {
        match self {
            Sided::One => 1,
            Sided::Two => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sided::One => "one",
            Sided::Two => "two",
        }
    }
}

impl std::fmt::Display for Sided {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sided {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "one" => Ok(Sided::One),
            "2" | "two" => Ok(Sided::Two),
            other => Err(Error::config(format!(
                "sidedness must be one of 1, 2, one, two; got {other:?}"
            ))),
        }
    }
}

/// Discretization of the moving-average integral defining LFSM.
///
/// `None` fields take their defaults when a simulator is built: the noise
/// step equals the output step, and the right truncation point is the
/// smallest one whose analytic tail bound is within `alpha_norm_tol` of the
/// full α-norm at every output time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfsmDiscretization {
    pub noise_step: Option<f64>,
    pub trunc_right: Option<f64>,
    pub alpha_norm_tol: f64,
}

impl Default for LfsmDiscretization {
    fn default() -> Self {
        Self {
            noise_step: None,
            trunc_right: None,
            alpha_norm_tol: 1e-3,
        }
    }
}

/// Linear fractional stable motion driven by totally skewed (`β = −1`) noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfsmSpec {
    pub alpha: f64,
    pub hurst: f64,
    pub noise_scale: f64,
    pub disc: LfsmDiscretization,
}

impl LfsmSpec {
    pub fn new(alpha: f64, hurst: f64, noise_scale: f64) -> Result<Self> {
        let spec = Self {
            alpha,
            hurst,
            noise_scale,
            disc: LfsmDiscretization::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_disc(mut self, disc: LfsmDiscretization) -> Result<Self> {
        self.disc = disc;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(Error::domain(format!(
                "LFSM needs alpha in (1, 2), got {}",
                self.alpha
            )));
        }
        if !(self.hurst > 1.0 / self.alpha && self.hurst < 1.0) {
            return Err(Error::domain(format!(
                "LFSM needs hurst in (1/alpha, 1) = ({:.6}, 1), got {}",
                1.0 / self.alpha,
                self.hurst
            )));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::domain(format!(
                "noise scale must be positive, got {}",
                self.noise_scale
            )));
        }
        let d = &self.disc;
        if let Some(h) = d.noise_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config(format!("noise_step must be positive, got {h}")));
            }
        }
        if let Some(r) = d.trunc_right {
            if !(r > 0.0) {
                return Err(Error::config(format!("trunc_right must be positive, got {r}")));
            }
        }
        if !(d.alpha_norm_tol > 0.0 && d.alpha_norm_tol < 1.0) {
            return Err(Error::config(format!(
                "alpha_norm_tol must lie in (0, 1), got {}",
                d.alpha_norm_tol
            )));
        }
        Ok(())
    }
}

/// The processes the toolkit can calibrate and simulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case")]
pub enum ProcessSpec {
    BrownianMotion { var_rate: f64 },
    StableLevy { params: StableParams },
    Lfsm(LfsmSpec),
}

impl ProcessSpec {
    pub fn brownian(var_rate: f64) -> Result<Self> {
        if !(var_rate > 0.0 && var_rate.is_finite()) {
            return Err(Error::domain(format!(
                "variance rate must be positive, got {var_rate}"
            )));
        }
        Ok(ProcessSpec::BrownianMotion { var_rate })
    }

    pub fn stable_levy(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        Ok(ProcessSpec::StableLevy {
            params: StableParams::new(alpha, beta, sigma)?,
        })
    }

    pub fn lfsm(alpha: f64, hurst: f64, noise_scale: f64) -> Result<Self> {
        Ok(ProcessSpec::Lfsm(LfsmSpec::new(alpha, hurst, noise_scale)?))
    }

    /// Short selector name used in reports: `bm`, `stable` or `lfsm`.
    pub fn name(&self) -> &'static str {
        match self {
            ProcessSpec::BrownianMotion { .. } => "bm",
            ProcessSpec::StableLevy { .. } => "stable",
            ProcessSpec::Lfsm(_) => "lfsm",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            ProcessSpec::BrownianMotion { .. } => None,
            ProcessSpec::StableLevy { params } => Some(params.alpha()),
            ProcessSpec::Lfsm(s) => Some(s.alpha),
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match self {
            ProcessSpec::BrownianMotion { .. } => None,
            ProcessSpec::StableLevy { params } => Some(params.beta()),
            ProcessSpec::Lfsm(_) => Some(-1.0),
        }
    }

    /// Hurst index of an LFSM; `None` for the other processes.
    pub fn hurst(&self) -> Option<f64> {
        match self {
            ProcessSpec::Lfsm(s) => Some(s.hurst),
            _ => None,
        }
    }

    /// Whether increments over disjoint intervals are independent.
    pub fn has_independent_increments(&self) -> bool {
        !matches!(self, ProcessSpec::Lfsm(_))
    }
}

/// A path sampled on the uniform grid `t_j = j·dt`, pinned at `values[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl GridPath {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(format!("grid step must be positive, got {dt}")));
        }
        if values.len() < 2 {
            return Err(Error::config("a grid path needs at least two points"));
        }
        if values[0] != 0.0 {
            return Err(Error::config(format!(
                "grid paths start at 0, got {}",
                values[0]
            )));
        }
        Ok(Self {
            t0: 0.0,
            dt,
            values,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.n_steps() as f64 * self.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }
}

/// Supremum of `ξ(t) − ξ(⌊t/q⌋q)` over the grid, and of its absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationStat {
    pub one_sided: f64,
    pub two_sided: f64,
}

impl DeviationStat {
    pub fn get(&self, sided: Sided) -> f64 {
        match sided {
            Sided::One => self.one_sided,
            Sided::Two => self.two_sided,
        }
    }
}

/// Number of grid steps per block when `q/dt` is a positive integer.
pub fn steps_per_block(q: f64, dt: f64) -> Result<usize> {
    if !(q > 0.0 && dt > 0.0) {
        return Err(Error::config(format!(
            "block length and grid step must be positive, got q={q}, dt={dt}"
        )));
    }
    let ratio = q / dt;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::config(format!(
            "block length q={q} is not a positive integer multiple of the grid step dt={dt}"
        )));
    }
    Ok(m as usize)
}

/// Split `[0, horizon]` into `n_full` blocks of length `q` plus a residual.
/// Residuals below `1e-12·horizon` count as zero.
pub fn block_layout(q: f64, horizon: f64) -> (u64, f64) {
    let ratio = horizon / q;
    let mut n = ratio.floor();
    // floor(1/q) can land one short when 1/q is an integer up to rounding
    if (ratio - ratio.round()).abs() <= 1e-12 * ratio.max(1.0) {
        n = ratio.round();
    }
    let residual = horizon - n * q;
    if residual <= 1e-12 * horizon {
        (n as u64, 0.0)
    } else {
        (n as u64, residual)
    }
}

/// Grid supremum of the deviation between a path and its piecewise-constant
/// sampled version with sampling interval `q`. Block anchors are the grid
/// points `k·m` with `m = q/dt`, found by integer division.
pub fn sup_deviation(path: &GridPath, q: f64) -> Result<DeviationStat> {
    let m = steps_per_block(q, path.dt)?;
    Ok(sup_deviation_steps(&path.values, m))
}

pub(crate) fn sup_deviation_steps(values: &[f64], m: usize) -> DeviationStat {
    let mut one: f64 = 0.0;
    let mut two: f64 = 0.0;
    for block in values.chunks(m) {
        let anchor = block[0];
        for &v in &block[1..] {
            let dev = v - anchor;
            one = one.max(dev);
            two = two.max(dev.abs());
        }
    }
    DeviationStat {
        one_sided: one,
        two_sided: two,
    }
}
