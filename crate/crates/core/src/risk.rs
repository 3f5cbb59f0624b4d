//! High-quantile workflows: a simulation-based level with a `2p` exceedance
//! certificate, and a calculator for stationary processes whose marginal tail
//! lies in a domain of attraction.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, LimitLaw, SamplingScales, TailShape};
use crate::error::{Error, Result};
use crate::mc::{wilson_ci, MCConfig};
use crate::process::{LfsmSimulator, ProcessSpec, Sided};
use crate::rng::substream;
use crate::stable::fill_stable;

/// `x` solving `p = 1 − exp(−κ e^{−x})`.
pub fn x_from_p(p: f64, law: &LimitLaw) -> Result<f64> {
    if law.fbar != TailShape::Gumbel {
        return Err(Error::Unsupported(
            "the limit law is only stated at x = 0; pass x directly".into(),
        ));
    }
    let kappa = law.kappa_value().ok_or_else(|| {
        Error::Unsupported("kappa is not stated for this process; pass x directly or fit kappa first".into())
    })?;
    check_p(p)?;
    Ok(-(-(-p).ln_1p() / kappa).ln())
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("p must lie in (0, 1), got {p}")))
    }
}

/// A solved quantile query: `u` is the level, `d = ε + x·w(ε)` the deviation
/// allowance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskQuery {
    pub p: f64,
    pub epsilon: f64,
    pub x: f64,
    pub u: f64,
    pub d: f64,
}

/// Result of [`quantile_sim`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimQuantile {
    pub query: RiskQuery,
    pub q: f64,
    pub w: f64,
    pub n_paths: u64,
    /// Empirical `(1 − p)`-quantile of the sampled maximum.
    pub sampled_quantile: f64,
    /// Wilson interval for `P{max_k ξ(kq) > u − d}`.
    pub exceed_ci: (f64, f64),
    /// `2p`: the bound on `P{sup ξ > u}` up to Monte Carlo and finite-`ε` error.
    pub bound: f64,
}

/// Level `u` with `P{sup_{[0,1]} ξ > u} ≤ 2p`: the empirical `(1 − p)`
/// quantile of `max_k ξ(kq)` over `k = 0..⌊1/q⌋`, plus `d = ε + x·w(ε)`.
pub fn quantile_sim(spec: &ProcessSpec, p: f64, epsilon: f64, x: f64, cfg: &MCConfig) -> Result<SimQuantile> {
    check_p(p)?;
    cfg.validate()?;
    if p * (cfg.n_paths as f64) < 10.0 {
        return Err(Error::Estimation(format!(
            "p = {p} is below 10/n_paths = {}; raise n_paths",
            10.0 / cfg.n_paths as f64
        )));
    }
    let scales = calibrate(spec, epsilon, Sided::One)?;
    let mut maxima = sampled_maxima(spec, &scales, cfg)?;
    maxima.sort_by(f64::total_cmp);
    let n = maxima.len();
    let idx = (((1.0 - p) * n as f64).ceil() as usize).clamp(1, n) - 1;
    let quantile = maxima[idx];
    let d = scales.threshold(x);
    let below = maxima.partition_point(|&m| m <= quantile) as u64;
    let (lo, hi) = wilson_ci(below, n as u64, cfg.ci_level);
    Ok(SimQuantile {
        query: RiskQuery {
            p,
            epsilon,
            x,
            u: quantile + d,
            d,
        },
        q: scales.q,
        w: scales.w,
        n_paths: cfg.n_paths,
        sampled_quantile: quantile,
        exceed_ci: (1.0 - hi, 1.0 - lo),
        bound: 2.0 * p,
    })
}

fn sampled_maxima(spec: &ProcessSpec, scales: &SamplingScales, cfg: &MCConfig) -> Result<Vec<f64>> {
    let steps = ((1.0 / scales.q) * (1.0 + 1e-12)).floor() as usize;
    if steps + 1 > cfg.path_cap {
        return Err(Error::Resource(format!(
            "{} sample points per path exceed the cap of {}",
            steps + 1,
            cfg.path_cap
        )));
    }
    let q = scales.q;
    let run = |fill: &(dyn Fn(&mut crate::rng::SimRng, &mut [f64]) + Sync)| -> Vec<f64> {
        (0..cfg.n_paths)
            .into_par_iter()
            .map_init(
                || vec![0.0; steps],
                |buf, i| {
                    let mut rng = substream(cfg.seed, i);
                    fill(&mut rng, buf);
                    let mut level = 0.0;
                    let mut best: f64 = 0.0;
                    for inc in buf.iter() {
                        level += inc;
                        best = best.max(level);
                    }
                    best
                },
            )
            .collect()
    };
    Ok(match spec {
        ProcessSpec::BrownianMotion { var_rate } => {
            let sd = (var_rate * q).sqrt();
            run(&|rng, buf| {
                for v in buf.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = sd * z;
                }
            })
        }
        ProcessSpec::StableLevy { params } => {
            let step = params.scaled(q.powf(1.0 / params.alpha()))?;
            run(&|rng, buf| fill_stable(&step, rng, buf))
        }
        ProcessSpec::Lfsm(s) => {
            let sim = LfsmSimulator::new(s, steps.max(1), q)?;
            (0..cfg.n_paths)
                .into_par_iter()
                .map_init(
                    || vec![0.0; steps.max(1) + 1],
                    |buf, i| {
                        let mut rng = substream(cfg.seed, i);
                        sim.sample_into(&mut rng, buf);
                        buf.iter().take(steps + 1).fold(0.0f64, |a, &v| a.max(v))
                    },
                )
                .collect()
        }
    })
}

/// Marginal tail model of a stationary process, in the form needed by
/// [`quantile_stationary`].
pub trait StationaryTailModel {
    /// `P{ξ(0) > u}`, strictly decreasing.
    fn marginal_tail(&self, u: f64) -> f64;
    /// Scale `w̃(u) > 0` of the domain-of-attraction limit.
    fn w_tilde(&self, u: f64) -> f64;
    /// Limit shape `H̄(y)`, with `H̄(0) = 1`.
    fn h_bar(&self, y: f64) -> f64;
    /// Open interval `J` on which `H̄` is defined.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    /// Starting point and initial step for bracketing the level.
    fn search_start(&self) -> (f64, f64) {
        (1.0, 1.0)
    }
}

/// `P{ξ(0) > u} = e^{−u}`, `w̃ ≡ 1`, `H̄(y) = e^{−y}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExponentialModel;

impl StationaryTailModel for ExponentialModel {
    fn marginal_tail(&self, u: f64) -> f64 {
        (-u).exp()
    }

    fn w_tilde(&self, _u: f64) -> f64 {
        1.0
    }

    fn h_bar(&self, y: f64) -> f64 {
        (-y).exp()
    }
}

/// Tail given by a table of `(u, P{ξ(0) > u})` pairs with strictly
/// increasing `u` and strictly decreasing tail.
///
/// The log tail is interpolated linearly, and extrapolated with the end
/// slopes. `w̃` is the local scale `−1/(d ln tail/du)`, taken per segment,
/// averaged at the nodes and interpolated linearly between them so it is
/// continuous. `H̄(y) = e^{−y}` on `J = ℝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedModel {
    u: Vec<f64>,
    log_tail: Vec<f64>,
    node_scale: Vec<f64>,
}

impl TabulatedModel {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::config("a tail table needs at least two rows"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::config(format!("tail table u values must increase strictly: {} then {}", w[0].0, w[1].0)));
            }
            if !(w[1].1 < w[0].1) {
                return Err(Error::config(format!(
                    "tail table values must decrease strictly: {} then {} at u = {}",
                    w[0].1, w[1].1, w[1].0
                )));
            }
        }
        if let Some(bad) = points.iter().find(|(u, t)| !(u.is_finite() && *t > 0.0 && *t <= 1.0)) {
            return Err(Error::config(format!("tail table row ({}, {}) is not a finite u with tail in (0, 1]", bad.0, bad.1)));
        }
        let u: Vec<f64> = points.iter().map(|p| p.0).collect();
        let log_tail: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
        let seg: Vec<f64> = (0..u.len() - 1)
            .map(|i| -(u[i + 1] - u[i]) / (log_tail[i + 1] - log_tail[i]))
            .collect();
        let mut node_scale = Vec::with_capacity(u.len());
        node_scale.push(seg[0]);
        for w in seg.windows(2) {
            node_scale.push(0.5 * (w[0] + w[1]));
        }
        node_scale.push(*seg.last().expect("non-empty"));
        Ok(Self { u, log_tail, node_scale })
    }

    /// Parse `u,tail` rows; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::config(format!("line {}: expected `u,tail`, got {line:?}", lineno + 1)))
            };
            let u = parse(cols.next())?;
            let t = parse(cols.next())?;
            if cols.next().is_some() {
                return Err(Error::config(format!("line {}: expected two columns", lineno + 1)));
            }
            rows.push((u, t));
        }
        Self::new(&rows)
    }

    // segment index and fraction for u, clamped to the end segments
    fn locate(&self, u: f64) -> (usize, f64) {
        let n = self.u.len();
        let i = self.u.partition_point(|&x| x <= u).clamp(1, n - 1) - 1;
        (i, (u - self.u[i]) / (self.u[i + 1] - self.u[i]))
    }
}

impl StationaryTailModel for TabulatedModel {
    fn marginal_tail(&self, u: f64) -> f64 {
        let (i, f) = self.locate(u);
        (self.log_tail[i] + f * (self.log_tail[i + 1] - self.log_tail[i])).exp()
    }

    fn w_tilde(&self, u: f64) -> f64 {
        let (i, f) = self.locate(u);
        let f = f.clamp(0.0, 1.0);
        self.node_scale[i] + f * (self.node_scale[i + 1] - self.node_scale[i])
    }

    fn h_bar(&self, y: f64) -> f64 {
        (-y).exp()
    }

    fn search_start(&self) -> (f64, f64) {
        let span = self.u[self.u.len() - 1] - self.u[0];
        (self.u[0], span.max(1e-12))
    }
}

/// Solution of the stationary quantile system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryQuantile {
    pub query: RiskQuery,
    pub y: f64,
    /// `(1/q + 1)·H̄(−y)·P{ξ(0) > u} − p` at the returned `u`.
    pub residual: f64,
    pub iterations: u32,
    pub bound: f64,
}

/// Solve `y·w̃(u) = ε + x·w(ε)` and `(1/q + 1)·H̄(−y)·P{ξ(0) > u} = p`
/// with `x` taken from `p` through the limit law.
pub fn quantile_stationary(
    model: &dyn StationaryTailModel,
    p: f64,
    scales: &SamplingScales,
    law: &LimitLaw,
) -> Result<StationaryQuantile> {
    let x = x_from_p(p, law)?;
    quantile_stationary_at(model, p, scales, x)
}

/// [`quantile_stationary`] with an explicit `x`.
///
/// Outer bisection on `u`: the bracket grows geometrically from the model's
/// starting point until the residual changes sign, then halves to machine
/// precision.
pub fn quantile_stationary_at(
    model: &dyn StationaryTailModel,
    p: f64,
    scales: &SamplingScales,
    x: f64,
) -> Result<StationaryQuantile> {
    check_p(p)?;
    let d = scales.threshold(x);
    if !(d > 0.0) {
        return Err(Error::domain(format!("d = epsilon + x*w must be positive, got {d}")));
    }
    let blocks = 1.0 / scales.q + 1.0;
    let residual = |u: f64| {
        let y = d / model.w_tilde(u);
        blocks * model.h_bar(-y) * model.marginal_tail(u) - p
    };
    let (start, step0) = model.search_start();
    let (mut lo, mut hi) = (start, start);
    let (mut r_lo, mut r_hi) = (residual(lo), residual(hi));
    let mut step = step0;
    let mut expansions = 0u32;
    while !(r_lo > 0.0 && r_hi < 0.0) {
        if expansions >= 200 || !(r_lo.is_finite() && r_hi.is_finite()) {
            return Err(Error::Numerical(format!(
                "no sign change of the quantile residual in [{lo:.6e}, {hi:.6e}] after {expansions} expansions (residuals {r_lo:.3e}, {r_hi:.3e}); the model may not be monotone"
            )));
        }
        if r_lo <= 0.0 {
            lo -= step;
            r_lo = residual(lo);
        }
        if r_hi >= 0.0 {
            hi += step;
            r_hi = residual(hi);
        }
        step *= 2.0;
        expansions += 1;
    }
    let mut iterations = 0u32;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || iterations >= 2000 {
            break;
        }
        let r = residual(mid);
        if r == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let (r_a, r_b) = (residual(lo), residual(hi));
    let u = if r_a.abs() <= r_b.abs() { lo } else { hi };
    let res = r_a.abs().min(r_b.abs()).copysign(if r_a.abs() <= r_b.abs() { r_a } else { r_b });
    let y = d / model.w_tilde(u);
    let (j_lo, j_hi) = model.domain();
    if !(-y > j_lo && -y < j_hi) {
        return Err(Error::domain(format!("-y = {} lies outside J = ({j_lo}, {j_hi})", -y)));
    }
    Ok(StationaryQuantile {
        query: RiskQuery {
            p,
            epsilon: scales.epsilon,
            x,
            u,
            d,
        },
        y,
        residual: res,
        iterations,
        bound: 2.0 * p,
    })
}
