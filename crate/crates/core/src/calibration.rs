//! Sampling rates `q(ε)`, deviation scales `w(ε)`, limit laws and the
//! deterministic condition probes built on the skewed-stable tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{lfsm_scale_sigma1, ProcessSpec, Sided};
use crate::stable::{b_alpha_sq, c_alpha, lambda_alpha, stable_tail_skewed};

/// Quadrature tolerance used whenever calibration needs `σ(ξ(1))`.
pub const SIGMA1_TOL: f64 = 1e-10;

/// Calibrated scales at one tolerance `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingScales {
    pub epsilon: f64,
    pub q: f64,
    pub w: f64,
    pub q_tilde: f64,
    pub q_hat: f64,
    #[serde(with = "ext_real")]
    pub q1: f64,
    pub q2: f64,
    /// The formula is admissible for every `ε` below this value.
    pub max_epsilon: f64,
}

impl SamplingScales {
    fn regular(epsilon: f64, q: f64, w: f64, q_tilde: f64, max_epsilon: f64) -> Self {
        Self {
            epsilon,
            q,
            w,
            q_tilde,
            q_hat: q_tilde,
            q1: f64::INFINITY,
            q2: 1.0,
            max_epsilon,
        }
    }

    /// Deviation threshold `ε + x·w`.
    pub fn threshold(&self, x: f64) -> f64 {
        self.epsilon + x * self.w
    }
}

// Extended reals: infinities travel as the strings "inf" and "-inf".
mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("not an extended real: {other:?}"))),
            },
        }
    }
}

/// The constant `κ` of a limit law; only existence is known for some processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kappa {
    Stated(f64),
    Unstated,
}

/// Tail shape `F̄` of a limit law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailShape {
    /// `F̄(x) = e^{−x}` on `J = ℝ`.
    Gumbel,
    /// Only `F̄(0) = 1` is available.
    PointAtZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    /// `ε ↓ 0` with the calibrated `q(ε)` and `w(ε)`.
    AsymptoticInEpsilon,
    /// `ε` fixed, `q ↓ 0`.
    FixedEpsilon,
}

/// `lim P{sup deviation ≤ ε + x·w(ε)} = exp(−κ F̄(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub kappa: Kappa,
    pub fbar: TailShape,
    pub kind: LimitKind,
}

impl LimitLaw {
    pub fn fbar_at(&self, x: f64) -> Result<f64> {
        match self.fbar {
            TailShape::Gumbel => Ok((-x).exp()),
            TailShape::PointAtZero if x == 0.0 => Ok(1.0),
            TailShape::PointAtZero => Err(Error::Unsupported(format!(
                "this limit law is only stated at x = 0, got x = {x}"
            ))),
        }
    }

    pub fn kappa_value(&self) -> Option<f64> {
        match self.kappa {
            Kappa::Stated(k) => Some(k),
            Kappa::Unstated => None,
        }
    }

    /// Limit probability at `x`, when `κ` is stated.
    pub fn probability(&self, x: f64) -> Result<Option<f64>> {
        let fbar = self.fbar_at(x)?;
        Ok(self.kappa_value().map(|k| (-k * fbar).exp()))
    }
}

/// Smallest `L* ≥ floor` such that `bracket(L) > 0` for all `L > L*`, where
/// `bracket` is increasing on `[floor, ∞)`. `L = ln(1/ε)`.
fn log_threshold(bracket: impl Fn(f64) -> f64, floor: f64) -> f64 {
    if floor > 0.0 && bracket(floor) > 0.0 {
        return floor;
    }
    let mut lo = floor;
    let mut hi = floor.max(1.0);
    while bracket(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if bracket(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Validate `ε` against a bracket and return `(L, bracket(L), ε_max)`.
fn admissible(
    what: &str,
    epsilon: f64,
    bracket: impl Fn(f64) -> f64,
    floor: f64,
) -> Result<(f64, f64, f64)> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let l_star = log_threshold(&bracket, floor);
    let max_epsilon = (-l_star).exp();
    let l = (1.0 / epsilon).ln();
    let b = if l > 0.0 { bracket(l) } else { f64::NAN };
    if !(l > 0.0 && l >= l_star && b > 0.0) {
        return Err(Error::CalibrationDomain {
            reason: format!("{what} bracket is not positive at epsilon = {epsilon}"),
            max_epsilon: Some(max_epsilon),
        });
    }
    Ok((l, b, max_epsilon))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

fn bm_bracket(l: f64, var_rate: f64, i: u8) -> f64 {
    let log_term = (2.0 * var_rate * i as f64 / (2.0 * std::f64::consts::PI).sqrt()).ln();
    4.0 * l + (4.0 * l).ln() + 2.0 * log_term
}

/// Brownian sampling interval
/// `q_i(ε) = (ε²/C) / [4 ln(1/ε) + ln(4 ln(1/ε)) + 2 ln(2Ci/√(2π))]`.
pub fn q_bm(epsilon: f64, var_rate: f64, i: u8) -> Result<f64> {
    Ok(calib_bm(epsilon, var_rate, i)?.q)
}

/// Brownian scales. `w = Cq/ε` is the overshoot scale of the Gaussian tail at
/// `ε/√(Cq)`, and `q̃ = 2w/ε` continues the stable pattern `αw/ε` to `α = 2`.
pub fn calib_bm(epsilon: f64, var_rate: f64, i: u8) -> Result<SamplingScales> {
    check_positive("variance rate", var_rate)?;
    if !(i == 1 || i == 2) {
        return Err(Error::domain(format!("Brownian rate index must be 1 or 2, got {i}")));
    }
    let (_, b, max_eps) = admissible("Brownian", epsilon, |l| bm_bracket(l, var_rate, i), 0.0)?;
    let q = epsilon * epsilon / var_rate / b;
    let w = var_rate * q / epsilon;
    Ok(SamplingScales::regular(epsilon, q, w, 2.0 * w / epsilon, max_eps))
}

/// Totally skewed stable Lévy motion `S_α(1, −1, 0)` at unit time:
/// `q = ε^α b_α^{−α/λ_α} B^{−α/(2λ_α)}` with
/// `B = 2α ln(1/ε) − (3 − 2α) ln(2α ln(1/ε)) − 2 ln(√(2πα)/b_α^{α/λ_α})`,
/// `w = ε/(2αλ_α ln(1/ε))`, `q̃ = αw/ε`.
pub fn calib_stable_skewed(epsilon: f64, alpha: f64) -> Result<SamplingScales> {
    let lambda = lambda_alpha(alpha)?;
    let b = b_alpha_sq(alpha)?.sqrt();
    if alpha >= 2.0 {
        return Err(Error::domain(format!("skewed stable calibration needs alpha in (1, 2), got {alpha}")));
    }
    let b_pow = b.powf(alpha / lambda);
    let konst = 2.0 * ((2.0 * std::f64::consts::PI * alpha).sqrt() / b_pow).ln();
    let c = 3.0 - 2.0 * alpha;
    let bracket = |l: f64| 2.0 * alpha * l - c * (2.0 * alpha * l).ln() - konst;
    let floor = if c > 0.0 { c / (2.0 * alpha) } else { 0.0 };
    let (l, br, max_eps) = admissible("skewed stable", epsilon, bracket, floor)?;
    let q = epsilon.powf(alpha) / b_pow * br.powf(-alpha / (2.0 * lambda));
    let w = epsilon / (2.0 * alpha * lambda * l);
    Ok(SamplingScales::regular(epsilon, q, w, alpha * w / epsilon, max_eps))
}

/// LFSM with `σ(ξ(1)) = sigma1`:
/// `q = (ε/(b_α^{1/λ_α}σ₁))^{1/H} B^{−1/(2Hλ_α)}` with
/// `B = (2/H) ln(1/ε) − ((Hλ_α − 1)/(Hλ_α)) ln((2/H) ln(1/ε)) − 2 ln(√(2πα)/(b_α^{1/λ_α}σ₁)^{1/H})`,
/// `w = Hε/(2λ_α ln(1/ε))`, `q̃ = w/(Hε)`.
pub fn calib_lfsm(epsilon: f64, alpha: f64, hurst: f64, sigma1: f64) -> Result<SamplingScales> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::domain(format!("LFSM calibration needs alpha in (1, 2), got {alpha}")));
    }
    if !(hurst > 1.0 / alpha && hurst < 1.0) {
        return Err(Error::domain(format!(
            "LFSM calibration needs hurst in (1/alpha, 1), got hurst={hurst}, alpha={alpha}"
        )));
    }
    check_positive("sigma1", sigma1)?;
    let lambda = lambda_alpha(alpha)?;
    let b = b_alpha_sq(alpha)?.sqrt();
    let base = b.powf(1.0 / lambda) * sigma1;
    let konst = 2.0 * ((2.0 * std::f64::consts::PI * alpha).sqrt() / base.powf(1.0 / hurst)).ln();
    let c = (hurst * lambda - 1.0) / (hurst * lambda);
    let bracket = |l: f64| (2.0 / hurst) * l - c * ((2.0 / hurst) * l).ln() - konst;
    let floor = if c > 0.0 { c * hurst / 2.0 } else { 0.0 };
    let (l, br, max_eps) = admissible("LFSM", epsilon, bracket, floor)?;
    let q = (epsilon / base).powf(1.0 / hurst) * br.powf(-1.0 / (2.0 * hurst * lambda));
    let w = hurst * epsilon / (2.0 * lambda * l);
    Ok(SamplingScales::regular(epsilon, q, w, w / (hurst * epsilon), max_eps))
}

fn reject_jumpy(alpha: f64, beta: f64) -> Error {
    Error::Unsupported(format!(
        "stable Levy motion with alpha={alpha}, beta={beta} has positive jumps: the deviation is governed by the distribution of the largest positive jump, so there is no epsilon-asymptotic calibration; use the fixed-epsilon limit with an explicit q"
    ))
}

fn reject_two_sided(name: &str) -> Error {
    Error::Unsupported(format!(
        "{name} is totally skewed: its negative jumps dominate the two-sided deviation, which has no calibrated Gumbel limit; use the one-sided statistic"
    ))
}

/// Calibrate any supported process. Stable scales follow from the unit-scale
/// formulas by `q = q₁(ε/σ)`, `w = σ·w₁(ε/σ)`.
pub fn calibrate(spec: &ProcessSpec, epsilon: f64, sided: Sided) -> Result<SamplingScales> {
    match spec {
        ProcessSpec::BrownianMotion { var_rate } => calib_bm(epsilon, *var_rate, sided.index()),
        ProcessSpec::StableLevy { params } => {
            let (alpha, beta, sigma) = (params.alpha(), params.beta(), params.sigma());
            if !(alpha > 1.0 && alpha < 2.0) {
                return Err(Error::domain(format!(
                    "skewed stable calibration needs alpha in (1, 2), got {alpha}"
                )));
            }
            if beta != -1.0 {
                return Err(reject_jumpy(alpha, beta));
            }
            if sided == Sided::Two {
                return Err(reject_two_sided("stable Levy motion with beta = -1"));
            }
            let unit = calib_stable_skewed(epsilon / sigma, alpha).map_err(|e| rescale_domain(e, sigma))?;
            Ok(SamplingScales {
                epsilon,
                w: sigma * unit.w,
                max_epsilon: sigma * unit.max_epsilon,
                ..unit
            })
        }
        ProcessSpec::Lfsm(s) => {
            if sided == Sided::Two {
                return Err(reject_two_sided("LFSM"));
            }
            let sigma1 = s.noise_scale * lfsm_scale_sigma1(s.hurst, s.alpha, SIGMA1_TOL)?;
            calib_lfsm(epsilon, s.alpha, s.hurst, sigma1)
        }
    }
}

fn rescale_domain(e: Error, sigma: f64) -> Error {
    match e {
        Error::CalibrationDomain { reason, max_epsilon } => Error::CalibrationDomain {
            reason,
            max_epsilon: max_epsilon.map(|m| m * sigma),
        },
        other => other,
    }
}

/// Limit law of the calibrated deviation probability.
pub fn limit_law(spec: &ProcessSpec, sided: Sided) -> Result<LimitLaw> {
    match spec {
        ProcessSpec::BrownianMotion { .. } => Ok(LimitLaw {
            kappa: Kappa::Stated(2.0),
            fbar: TailShape::PointAtZero,
            kind: LimitKind::AsymptoticInEpsilon,
        }),
        ProcessSpec::StableLevy { params } => {
            let (alpha, beta) = (params.alpha(), params.beta());
            if beta != -1.0 {
                return Err(reject_jumpy(alpha, beta));
            }
            if !(alpha > 1.0 && alpha < 2.0) {
                return Err(Error::domain(format!(
                    "the skewed stable limit needs alpha in (1, 2), got {alpha}"
                )));
            }
            if sided == Sided::Two {
                return Err(reject_two_sided("stable Levy motion with beta = -1"));
            }
            Ok(LimitLaw {
                kappa: Kappa::Unstated,
                fbar: TailShape::Gumbel,
                kind: LimitKind::AsymptoticInEpsilon,
            })
        }
        ProcessSpec::Lfsm(_) => {
            if sided == Sided::Two {
                return Err(reject_two_sided("LFSM"));
            }
            Ok(LimitLaw {
                kappa: Kappa::Stated(1.0),
                fbar: TailShape::Gumbel,
                kind: LimitKind::AsymptoticInEpsilon,
            })
        }
    }
}

/// `lim_{q↓0} P{sup deviation ≤ ε}` at fixed `ε` for stable Lévy motion:
/// `exp(−½C_α(1 + β)ε^{−α})` one-sided, `exp(−C_α ε^{−α})` two-sided.
pub fn fixed_eps_levy_limit(alpha: f64, beta: f64, epsilon: f64, sided: Sided) -> Result<f64> {
    if !(-1.0..=1.0).contains(&beta) {
        return Err(Error::domain(format!("beta must lie in [-1, 1], got {beta}")));
    }
    check_positive("epsilon", epsilon)?;
    let c = c_alpha(alpha)?;
    let rate = match sided {
        Sided::One => 0.5 * c * (1.0 + beta),
        Sided::Two => c,
    };
    Ok((-rate * epsilon.powf(-alpha)).exp())
}

/// The three tail ratios and their targets at one `(ε, x, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRatios {
    pub epsilon: f64,
    pub x: f64,
    pub r: f64,
    pub ratio31: f64,
    pub ratio32: f64,
    pub ratio33: f64,
    pub target31: f64,
    pub target32: f64,
    pub target33: f64,
}

/// Marginal law of `ξ(s)` for a totally skewed process: `S_α(scale(s), −1, 0)`.
#[derive(Debug, Clone, Copy)]
struct SkewedMarginal {
    alpha: f64,
    scale1: f64,
    exponent: f64,
}

impl SkewedMarginal {
    fn of(spec: &ProcessSpec) -> Result<Self> {
        match spec {
            ProcessSpec::StableLevy { params } if params.beta() == -1.0 => Ok(Self {
                alpha: params.alpha(),
                scale1: params.sigma(),
                exponent: 1.0 / params.alpha(),
            }),
            ProcessSpec::Lfsm(s) => Ok(Self {
                alpha: s.alpha,
                scale1: s.noise_scale * lfsm_scale_sigma1(s.hurst, s.alpha, SIGMA1_TOL)?,
                exponent: s.hurst,
            }),
            other => Err(Error::Unsupported(format!(
                "condition probes need a totally skewed stable or LFSM process, got {}",
                other.name()
            ))),
        }
    }

    fn tail(&self, s: f64, u: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        stable_tail_skewed(self.alpha, self.scale1 * s.powf(self.exponent), u)
    }
}

/// Deterministic check of the calibration algebra with the asymptotic tail:
/// `P{ξ(q) > ε}/q → 1`, `P{ξ(q) > ε + xw}/P{ξ(q) > ε} → e^{−x}` and
/// `P{ξ(q(1 − q̃r)) > ε + xw}/P{ξ(q) > ε} → e^{−x−r}`.
///
/// Both sides of every ratio use the same asymptotic tail, so this validates
/// `q`, `w` and `q̃` against the tail model, not the tail model itself.
pub fn probe_condition_ratios(spec: &ProcessSpec, epsilon: f64, x: f64, r: f64) -> Result<ProbeRatios> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!("r must be non-negative, got {r}")));
    }
    let marginal = SkewedMarginal::of(spec)?;
    let scales = calibrate(spec, epsilon, Sided::One)?;
    probe_with(&marginal, &scales, x, r)
}

/// Probe ratios over a schedule, computing `σ(ξ(1))` once.
pub fn probe_schedule(
    spec: &ProcessSpec,
    eps_schedule: &[f64],
    xs: &[f64],
    rs: &[f64],
) -> Result<Vec<ProbeRatios>> {
    if let Some(r) = rs.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::domain(format!("r must be non-negative, got {r}")));
    }
    if eps_schedule.is_empty() {
        return Ok(Vec::new());
    }
    let marginal = SkewedMarginal::of(spec)?;
    let mut out = Vec::with_capacity(eps_schedule.len() * xs.len() * rs.len());
    for &eps in eps_schedule {
        let scales = match spec {
            ProcessSpec::Lfsm(s) => calib_lfsm(eps, s.alpha, s.hurst, marginal.scale1)?,
            _ => calibrate(spec, eps, Sided::One)?,
        };
        for &x in xs {
            for &r in rs {
                out.push(probe_with(&marginal, &scales, x, r)?);
            }
        }
    }
    Ok(out)
}

fn probe_with(m: &SkewedMarginal, s: &SamplingScales, x: f64, r: f64) -> Result<ProbeRatios> {
    let level = s.threshold(x);
    if !(level > 0.0) {
        return Err(Error::domain(format!(
            "epsilon + x*w must be positive, got {level} at x = {x}"
        )));
    }
    let base = m.tail(s.q, s.epsilon)?;
    let shifted = m.tail(s.q, level)?;
    let shrunk = if x == 0.0 && r == 0.0 {
        base
    } else {
        m.tail(s.q * (1.0 - s.q_tilde * r), level)?
    };
    Ok(ProbeRatios {
        epsilon: s.epsilon,
        x,
        r,
        ratio31: base / s.q,
        ratio32: if x == 0.0 { 1.0 } else { shifted / base },
        ratio33: if x == 0.0 && r == 0.0 { 1.0 } else { shrunk / base },
        target31: 1.0,
        target32: (-x).exp(),
        target33: (-x - r).exp(),
    })
}
