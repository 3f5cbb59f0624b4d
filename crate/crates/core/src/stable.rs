//! Stable-law primitives in the `S_α(σ, β, μ)` parametrization of
//! Samorodnitsky and Taqqu: parameters, Chambers–Mallows–Stuck variates,
//! the Gaussian-form asymptotic right tail of totally skewed laws, and the
//! constants `λ_α`, `b_α²` and `C_α`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Parameters of `S_α(σ, β, 0)`. The shift is fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    alpha: f64,
    beta: f64,
    sigma: f64,
}

impl StableParams {
    pub fn new(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::domain(format!(
                "stability index alpha must lie in (0, 2], got {alpha}"
            )));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::domain(format!(
                "skewness beta must lie in [-1, 1], got {beta}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("scale sigma must be positive, got {sigma}")));
        }
        Ok(Self { alpha, beta, sigma })
    }

    /// `S_α(1, β, 0)`.
    pub fn standard(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Skewness; meaningless (and ignored) when `alpha == 2`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mu(&self) -> f64 {
        0.0
    }

    pub fn is_gaussian(&self) -> bool {
        self.alpha == 2.0
    }

    /// Same law with the scale multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, self.sigma * factor)
    }
}

/// `λ_α`, `b_α²` and `C_α` for a totally skewed law with `α ∈ (1, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableConstants {
    pub lambda_alpha: f64,
    pub b_alpha_sq: f64,
    pub c_alpha: f64,
}

impl StableConstants {
    pub fn for_alpha(alpha: f64) -> Result<Self> {
        Ok(Self {
            lambda_alpha: lambda_alpha(alpha)?,
            b_alpha_sq: b_alpha_sq(alpha)?,
            c_alpha: c_alpha(alpha)?,
        })
    }

    pub fn b_alpha(&self) -> f64 {
        self.b_alpha_sq.sqrt()
    }
}

/// `λ_α = α / (2(α − 1))`, defined for `α ∈ (1, 2]`.
pub fn lambda_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::domain(format!(
            "lambda_alpha needs alpha in (1, 2], got {alpha}"
        )));
    }
    Ok(alpha / (2.0 * (alpha - 1.0)))
}

/// `b_α² = α^{2λ_α} / (2(α − 1)|cos(πα/2)|^{2λ_α − 1})` for `α ∈ (1, 2)`.
pub fn b_alpha_sq(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::domain(format!(
            "b_alpha_sq needs alpha in (1, 2), got {alpha}"
        )));
    }
    let lambda = alpha / (2.0 * (alpha - 1.0));
    let cos = (PI * alpha / 2.0).cos().abs();
    // Work in logs: both powers overflow for alpha close to 1.
    let log_value = 2.0 * lambda * alpha.ln()
        - (2.0 * (alpha - 1.0)).ln()
        - (2.0 * lambda - 1.0) * cos.ln();
    Ok(log_value.exp())
}

/// `C_α = (∫₀^∞ x^{−α} sin x dx)^{−1}` for `α ∈ (0, 2)`.
///
/// The integral is split at `π`. The head uses the substitution
/// `x = t^{1/(2−α)}`, which turns `x^{−α} sin x dx` into a bounded integrand
/// `sinc(x) dt / (2 − α)`. The tail is an alternating series of half-period
/// cells summed with Euler acceleration.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::domain(format!(
            "c_alpha needs alpha in (0, 2), got {alpha}"
        )));
    }
    let integral = sine_power_integral(alpha)?;
    Ok(1.0 / integral)
}

fn sine_power_integral(alpha: f64) -> Result<f64> {
    let p = 1.0 / (2.0 - alpha);
    let sinc = |x: f64| if x == 0.0 { 1.0 } else { x.sin() / x };
    let head = quad::integrate(
        |t: f64| sinc(t.powf(p)),
        0.0,
        PI.powf(2.0 - alpha),
        1e-14,
        1e-13,
    )?
    .value
        * p;
    let tail = quad::euler_sum(
        |k| {
            let a = PI * (k as f64 + 1.0);
            Ok(quad::integrate(|x: f64| x.powf(-alpha) * x.sin(), a, a + PI, 1e-16, 1e-13)?.value)
        },
        1e-12,
        400,
    )?;
    Ok(head + tail)
}

/// `P{N(0, 1) > z}`, via the complementary error function.
pub fn gaussian_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

/// Gaussian-form asymptotic of `P{S_α(σ, −1, 0) > u}` for `α ∈ (1, 2)`:
/// `P{N(0, b_α²) > (u/σ)^{λ_α}} / √α`.
///
/// This is an asymptotic evaluation, accurate in shape for large `u/σ`. It is
/// not a CDF: against the exact law it runs low by a roughly constant factor
/// (about 1.42 at `α = 1.5`).
pub fn stable_tail_skewed(alpha: f64, sigma: f64, u: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::domain(format!(
            "skewed stable tail needs alpha in (1, 2), got {alpha}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("scale must be positive, got {sigma}")));
    }
    if !(u > 0.0) {
        return Err(Error::domain(format!(
            "asymptotic tail is only defined for u > 0, got {u}"
        )));
    }
    let lambda = lambda_alpha(alpha)?;
    let b = b_alpha_sq(alpha)?.sqrt();
    Ok(gaussian_tail((u / sigma).powf(lambda) / b) / alpha.sqrt())
}

/// One draw of `S_α(σ, β, 0)` by the Chambers–Mallows–Stuck transform.
pub fn sample_stable<R: Rng + ?Sized>(params: &StableParams, rng: &mut R) -> f64 {
    let StableParams { alpha, beta, sigma } = *params;
    if alpha == 2.0 {
        let z: f64 = StandardNormal.sample(rng);
        return sigma * SQRT_2 * z;
    }
    let v = PI * (open_unit(rng) - 0.5);
    let w: f64 = Exp1.sample(rng);
    if alpha == 1.0 {
        let a = FRAC_PI_2 + beta * v;
        let x = (a * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / a).ln()) / FRAC_PI_2;
        return sigma * x + beta * sigma * sigma.ln() / FRAC_PI_2;
    }
    sigma * cms_unit(alpha, beta, v, w)
}

/// Fill `out` with iid `S_α(σ, β, 0)` draws, hoisting the parameter-only
/// terms of the transform out of the loop.
pub fn fill_stable<R: Rng + ?Sized>(params: &StableParams, rng: &mut R, out: &mut [f64]) {
    let StableParams { alpha, beta, sigma } = *params;
    if alpha == 1.0 || alpha == 2.0 {
        for slot in out.iter_mut() {
            *slot = sample_stable(params, rng);
        }
        return;
    }
    let tan = beta * (PI * alpha / 2.0).tan();
    let shift = tan.atan() / alpha;
    let scale = sigma * (1.0 + tan * tan).powf(0.5 / alpha);
    let inv_alpha = 1.0 / alpha;
    let expo = (1.0 - alpha) / alpha;
    for slot in out.iter_mut() {
        let v = PI * (open_unit(rng) - 0.5);
        let w: f64 = Exp1.sample(rng);
        let arg = alpha * (v + shift);
        let cos_v = v.cos();
        *slot = scale * arg.sin() / cos_v.powf(inv_alpha) * ((v - arg).cos() / w).powf(expo);
    }
}

fn cms_unit(alpha: f64, beta: f64, v: f64, w: f64) -> f64 {
    let tan = beta * (PI * alpha / 2.0).tan();
    let shift = tan.atan() / alpha;
    let scale = (1.0 + tan * tan).powf(0.5 / alpha);
    let arg = alpha * (v + shift);
    scale * arg.sin() / v.cos().powf(1.0 / alpha) * ((v - arg).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Uniform on the open interval (0, 1).
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `P{S_α(1, β, 0) > 0} = 1/2 + arctan(β tan(πα/2)) / (πα)` for `α ≠ 1`.
pub fn positive_mass(alpha: f64, beta: f64) -> f64 {
    if alpha == 2.0 {
        return 0.5;
    }
    0.5 + (beta * (PI * alpha / 2.0).tan()).atan() / (PI * alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use statrs::function::gamma::gamma;

    // Closed form (1 − α) / (Γ(2 − α) cos(πα/2)), independent of the quadrature path.
    fn c_alpha_closed(alpha: f64) -> f64 {
        if alpha == 1.0 {
            return 2.0 / PI;
        }
        (1.0 - alpha) / (gamma(2.0 - alpha) * (PI * alpha / 2.0).cos())
    }

    #[test]
    fn lambda_alpha_values() {
        assert_eq!(lambda_alpha(1.5).unwrap(), 1.5);
        assert!((lambda_alpha(4.0 / 3.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(lambda_alpha(2.0).unwrap(), 1.0);
        assert!(matches!(lambda_alpha(1.0), Err(Error::Domain(_))));
        assert!(lambda_alpha(0.7).is_err());
    }

    #[test]
    fn b_alpha_sq_values() {
        assert!((b_alpha_sq(1.5).unwrap() - 6.75).abs() < 1e-12);
        // mpmath, 30 digits
        let golden = 2.183_660_800_087_52;
        assert!((b_alpha_sq(1.9).unwrap() / golden - 1.0).abs() < 1e-12);
        assert!(b_alpha_sq(1.01).unwrap() > b_alpha_sq(1.5).unwrap());
        assert!(b_alpha_sq(2.0).is_err());
        assert!(b_alpha_sq(1.0).is_err());
    }

    #[test]
    fn c_alpha_dirichlet() {
        assert!((c_alpha(1.0).unwrap() - 2.0 / PI).abs() < 1e-10);
    }

    #[test]
    fn c_alpha_matches_closed_form() {
        for &alpha in &[0.3, 0.5, 0.9, 1.1, 1.2, 1.5, 1.9] {
            let q = c_alpha(alpha).unwrap();
            let exact = c_alpha_closed(alpha);
            assert!((q / exact - 1.0).abs() < 1e-8, "alpha={alpha}: {q} vs {exact}");
        }
        // mpmath closed-form values
        assert!((c_alpha(0.5).unwrap() - 0.797_884_560_802_865_4).abs() < 1e-9);
        assert!((c_alpha(1.2).unwrap() - 0.555_915_716_520_413_5).abs() < 1e-9);
    }

    #[test]
    fn c_alpha_domain() {
        assert!(c_alpha(0.0).is_err());
        assert!(c_alpha(2.0).is_err());
    }

    #[test]
    fn gaussian_tail_values() {
        assert_eq!(gaussian_tail(0.0), 0.5);
        assert!((gaussian_tail(-1.0) - (1.0 - gaussian_tail(1.0))).abs() < 1e-15);
        let golden = 0.024_999_999_096_442_404;
        assert!((gaussian_tail(1.959_964) / golden - 1.0).abs() < 1e-12);
        // far tail keeps relative precision
        let golden_8 = 6.220_960_574_271_784e-16;
        assert!((gaussian_tail(8.0) / golden_8 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skewed_tail_values() {
        let direct = stable_tail_skewed(1.5, 1.0, 3.0).unwrap();
        let composed = gaussian_tail(3f64.powf(1.5) / 6.75f64.sqrt()) / 1.5f64.sqrt();
        assert!((direct - composed).abs() < 1e-16);
        assert!((direct / 0.018_575_404_951_342_95 - 1.0).abs() < 1e-12);
        let scaled = stable_tail_skewed(1.5, 2.5, 7.5).unwrap();
        assert_eq!(scaled, direct);
        assert!(stable_tail_skewed(1.5, 1.0, 2.0).unwrap() > direct);
        assert!(stable_tail_skewed(1.5, 1.0, 0.0).is_err());
        assert!(stable_tail_skewed(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(StableParams::new(2.5, 0.0, 1.0).is_err());
        assert!(StableParams::new(1.5, -1.5, 1.0).is_err());
        assert!(StableParams::new(1.5, 0.0, 0.0).is_err());
        let p = StableParams::new(2.0, 0.7, 1.0).unwrap();
        assert!(p.is_gaussian());
        assert_eq!(p.mu(), 0.0);
    }

    #[test]
    fn gaussian_case_variance() {
        let p = StableParams::new(2.0, 0.0, 1.0).unwrap();
        let mut rng = substream(11, 0);
        let n = 1_000_000;
        let mut buf = vec![0.0; n];
        fill_stable(&p, &mut rng, &mut buf);
        let mean = buf.iter().sum::<f64>() / n as f64;
        let var = buf.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        // Var of a sample variance for N(0, 2): 2·σ⁴/(n−1) with σ² = 2
        let se = (2.0 * 4.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - 2.0).abs() < 3.0 * se, "var={var} se={se}");
    }

    #[test]
    fn positive_mass_matches_sampler() {
        let p = StableParams::standard(1.5, -1.0).unwrap();
        let mut rng = substream(3, 1);
        let n = 400_000;
        let mut buf = vec![0.0; n];
        fill_stable(&p, &mut rng, &mut buf);
        let frac = buf.iter().filter(|&&x| x > 0.0).count() as f64 / n as f64;
        let expected = positive_mass(1.5, -1.0);
        assert!((expected - 2.0 / 3.0).abs() < 1e-12);
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((frac - expected).abs() < 4.0 * se);
    }

    #[test]
    fn single_and_batched_draws_agree() {
        let p = StableParams::new(1.3, 0.4, 0.7).unwrap();
        let mut a = substream(9, 2);
        let mut b = substream(9, 2);
        let single: Vec<f64> = (0..32).map(|_| sample_stable(&p, &mut a)).collect();
        let mut batch = vec![0.0; 32];
        fill_stable(&p, &mut b, &mut batch);
        for (x, y) in single.iter().zip(&batch) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn cauchy_branch_is_symmetric() {
        let p = StableParams::standard(1.0, 0.0).unwrap();
        let mut rng = substream(5, 0);
        let n = 200_000;
        let above = (0..n).filter(|_| sample_stable(&p, &mut rng) > 1.0).count() as f64 / n as f64;
        // S_1(1, 0, 0) is standard Cauchy: P{X > 1} = 1/4
        assert!((above - 0.25).abs() < 4.0 * (0.25 * 0.75 / n as f64).sqrt());
    }
}
