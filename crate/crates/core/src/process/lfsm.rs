//! Linear fractional stable motion
//! `ξ(t) = ∫ [((t + r)⁺)^{H−1/α} − (r⁺)^{H−1/α}] dL(r)` with totally skewed
//! driving noise.
//!
//! The synthesis splits the integration variable into a near field
//! `r ∈ [−T, R₀]`, discretized on a uniform noise grid and convolved with the
//! kernel by FFT, and a far field `r ∈ [R₀, R]` on geometrically growing
//! cells. For `r ≥ R₀ = 2T` the kernel is expanded in powers of `t/r`, so the
//! far field costs one pass over its cells per path regardless of how large
//! the truncation point `R` is.

use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use super::{steps_per_block, GridPath, LfsmSpec};
use crate::error::{Error, Result};
use crate::quad;
use crate::stable::{fill_stable, StableParams};

// Far-field cells grow by this ratio.
const FAR_CELL_RATIO: f64 = 1.05;
// Near field extends to this multiple of the path duration.
const NEAR_FIELD_FACTOR: f64 = 2.0;
// Terms of the t/r expansion; (1/2)^41 is far below f64 resolution of the sum.
const FAR_TERMS: usize = 40;

/// `((t + r)⁺)^{H−1/α} − (r⁺)^{H−1/α}`, with `x⁺` raised to a positive
/// power taken as 0 for `x ≤ 0`.
pub fn lfsm_kernel(t: f64, r: f64, hurst: f64, alpha: f64) -> f64 {
    let d = hurst - 1.0 / alpha;
    if r > 0.0 {
        increment_power(r, t, d)
    } else {
        pos_pow(t + r, d)
    }
}

fn pos_pow(x: f64, d: f64) -> f64 {
    if x > 0.0 {
        x.powf(d)
    } else {
        0.0
    }
}

// (r + t)^d − r^d for r > 0 without cancellation at large r.
fn increment_power(r: f64, t: f64, d: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if r + t <= 0.0 {
        return -r.powf(d);
    }
    r.powf(d) * (d * (t / r).ln_1p()).exp_m1()
}

fn check_hurst(hurst: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::domain(format!("LFSM needs alpha in (1, 2], got {alpha}")));
    }
    if !(hurst > 1.0 / alpha && hurst < 1.0) {
        return Err(Error::domain(format!(
            "LFSM needs hurst in (1/alpha, 1), got hurst={hurst}, alpha={alpha}"
        )));
    }
    Ok(hurst - 1.0 / alpha)
}

/// Upper bound on `∫_R^∞ |k(t, r)|^α dr`, from `(t + r)^d − r^d ≤ t·d·r^{d−1}`.
pub fn lfsm_truncation_bound(t: f64, r_cut: f64, hurst: f64, alpha: f64) -> f64 {
    let d = hurst - 1.0 / alpha;
    let e1 = alpha * (d - 1.0) + 1.0;
    (t * d).powf(alpha) * r_cut.powf(e1) / -e1
}

/// Scale `σ(ξ(1)) = (∫_{−1}^∞ |k(1, r)|^α dr)^{1/α}` of the LFSM marginal at
/// `t = 1` for unit noise.
///
/// The support is split at `r = −1` and `r = 0`; the half line is covered by
/// dyadic panels until the analytic bracket
/// `d^α (R + 1)^{α(d−1)+1} ≤ |α(d−1)+1| · tail ≤ d^α R^{α(d−1)+1}`
/// is narrower than `quad_tol` relative to the mass, and the bracket midpoint
/// stands in for the remainder.
pub fn lfsm_scale_sigma1(hurst: f64, alpha: f64, quad_tol: f64) -> Result<f64> {
    let d = check_hurst(hurst, alpha)?;
    if !(quad_tol > 0.0 && quad_tol < 1.0) {
        return Err(Error::config(format!("quad_tol must lie in (0, 1), got {quad_tol}")));
    }
    let panel_tol = quad_tol * 1e-2;
    let present = quad::integrate(|r: f64| (1.0 + r).powf(d * alpha), -1.0, 0.0, 0.0, panel_tol)?;
    let past = |r: f64| increment_power(r, 1.0, d).powf(alpha);
    let mut mass = present.value + quad::integrate(past, 0.0, 1.0, 0.0, panel_tol)?.value;
    let e1 = alpha * (d - 1.0) + 1.0;
    let coef = d.powf(alpha) / -e1;
    let mut lo: f64 = 1.0;
    for _ in 0..1000 {
        let upper = coef * lo.powf(e1);
        let lower = coef * (lo + 1.0).powf(e1);
        if upper - lower < 0.5 * quad_tol * mass {
            return Ok((mass + 0.5 * (upper + lower)).powf(1.0 / alpha));
        }
        let hi = 2.0 * lo;
        mass += quad::integrate(past, lo, hi, 0.0, panel_tol)?.value;
        lo = hi;
    }
    Err(Error::Numerical(format!(
        "alpha-norm tail of the LFSM kernel did not settle (hurst={hurst}, alpha={alpha})"
    )))
}

/// Precomputed LFSM synthesis for a fixed grid: kernel spectrum, far-field
/// cells and FFT plans. Sampling is `&self`, so one simulator serves many
/// threads.
pub struct LfsmSimulator {
    alpha: f64,
    hurst: f64,
    noise_scale: f64,
    n_steps: usize,
    dt: f64,
    noise_step: f64,
    // output stride in noise cells
    stride: usize,
    // noise cells covering [−T, R₀)
    n_past: usize,
    n_near: usize,
    fft_len: usize,
    kernel_spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    // cell averages of x₊^d over [i·h, (i + 1)·h], offset by n_past
    cell_kernel: Vec<f64>,
    far_cells: FarField,
    sigma1: f64,
    trunc_right: f64,
}

struct FarField {
    // noise scale of each cell, width^{1/α}
    noise: Vec<f64>,
    mids: Vec<f64>,
    // weights[i * FAR_TERMS + m] = (T/r_i)^{m+1} r_i^d
    weights: Vec<f64>,
    // binom(d, m + 1)
    binom: Vec<f64>,
}

impl std::fmt::Debug for LfsmSimulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LfsmSimulator")
            .field("alpha", &self.alpha)
            .field("hurst", &self.hurst)
            .field("n_steps", &self.n_steps)
            .field("dt", &self.dt)
            .field("noise_step", &self.noise_step)
            .field("fft_len", &self.fft_len)
            .field("far_cells", &self.far_cells.mids.len())
            .field("trunc_right", &self.trunc_right)
            .finish()
    }
}

impl LfsmSimulator {
    pub fn new(spec: &LfsmSpec, n_steps: usize, dt: f64) -> Result<Self> {
        spec.validate()?;
        if n_steps == 0 {
            return Err(Error::config("n_steps must be at least 1"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(format!("grid step must be positive, got {dt}")));
        }
        let (alpha, hurst) = (spec.alpha, spec.hurst);
        let d = hurst - 1.0 / alpha;
        let noise_step = spec.disc.noise_step.unwrap_or(dt);
        let stride = steps_per_block(dt, noise_step).map_err(|_| {
            Error::config(format!(
                "output step {dt} must be an integer multiple of the noise step {noise_step}"
            ))
        })?;
        let horizon = n_steps as f64 * dt;
        let sigma1 = lfsm_scale_sigma1(hurst, alpha, 1e-10)?;
        let default_trunc = truncation_radius(horizon, hurst, alpha, sigma1, spec.disc.alpha_norm_tol);
        let trunc_right = spec.disc.trunc_right.unwrap_or(default_trunc);
        if spec.disc.trunc_right.is_some() && trunc_right < default_trunc {
            return Err(Error::config(format!(
                "trunc_right={trunc_right} leaves more than alpha_norm_tol={} of the kernel alpha-norm; need at least {default_trunc:.6e}",
                spec.disc.alpha_norm_tol
            )));
        }
        let n_past = n_steps * stride;
        let near_end = (NEAR_FIELD_FACTOR * horizon).min(trunc_right);
        let n_near = (near_end / noise_step).ceil() as usize;
        let far_start = n_near as f64 * noise_step;

        let len = 2 * n_past + n_near;
        let fft_len = len.next_power_of_two();
        if fft_len > 1 << 27 {
            return Err(Error::Resource(format!(
                "LFSM convolution of length {fft_len} exceeds the supported size"
            )));
        }
        let h_d = noise_step.powf(d);
        // index s' = s + n_past of the shifted kernel
        let cell_kernel: Vec<f64> = (0..fft_len)
            .map(|sp| {
                if sp < n_past {
                    0.0
                } else {
                    h_d * cell_average_power((sp - n_past) as f64, d)
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut kernel_spectrum: Vec<Complex<f64>> =
            cell_kernel.iter().map(|&g| Complex::new(g, 0.0)).collect();
        forward.process(&mut kernel_spectrum);

        let far_cells = FarField::new(far_start, trunc_right, horizon, d, alpha);
        Ok(Self {
            alpha,
            hurst,
            noise_scale: spec.noise_scale,
            n_steps,
            dt,
            noise_step,
            stride,
            n_past,
            n_near,
            fft_len,
            kernel_spectrum,
            forward,
            inverse,
            cell_kernel,
            far_cells,
            sigma1,
            trunc_right,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn noise_step(&self) -> f64 {
        self.noise_step
    }

    pub fn trunc_right(&self) -> f64 {
        self.trunc_right
    }

    /// `σ(ξ(1))` for unit noise, by quadrature.
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    /// Number of stable draws per path.
    pub fn noise_count(&self) -> usize {
        self.n_past + self.n_near + self.far_cells.mids.len()
    }

    /// Draw one path.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GridPath {
        let mut values = vec![0.0; self.n_steps + 1];
        self.sample_into(rng, &mut values);
        GridPath::new(self.dt, values).expect("simulator grid is valid")
    }

    /// Draw one path into `values` (length `n_steps + 1`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, values: &mut [f64]) {
        assert_eq!(values.len(), self.n_steps + 1, "output buffer has the wrong length");
        let unit = StableParams::new(self.alpha, -1.0, 1.0).expect("validated alpha");
        let cell_scale = self.noise_scale * self.noise_step.powf(1.0 / self.alpha);

        let n_noise = self.n_past + self.n_near;
        let mut noise = vec![0.0; n_noise];
        fill_stable(&unit, rng, &mut noise);
        let mut buf: Vec<Complex<f64>> = Vec::with_capacity(self.fft_len);
        buf.extend(noise.iter().map(|&x| Complex::new(cell_scale * x, 0.0)));
        buf.resize(self.fft_len, Complex::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_spectrum) {
            *b = k * b.conj();
        }
        self.inverse.process(&mut buf);
        let norm = 1.0 / self.fft_len as f64;
        let base = buf[0].re;
        for (j, v) in values.iter_mut().enumerate() {
            *v = (buf[j * self.stride].re - base) * norm;
        }

        let far = &self.far_cells;
        if far.mids.is_empty() {
            return;
        }
        let mut far_noise = vec![0.0; far.mids.len()];
        fill_stable(&unit, rng, &mut far_noise);
        let mut coeffs = [0.0; FAR_TERMS];
        for (i, z) in far_noise.iter().enumerate() {
            let amp = self.noise_scale * far.noise[i] * z;
            let w = &far.weights[i * FAR_TERMS..(i + 1) * FAR_TERMS];
            for (c, wm) in coeffs.iter_mut().zip(w) {
                *c += wm * amp;
            }
        }
        for (c, b) in coeffs.iter_mut().zip(&far.binom) {
            *c *= b;
        }
        let horizon = self.n_steps as f64 * self.dt;
        for (j, v) in values.iter_mut().enumerate().skip(1) {
            let x = j as f64 * self.dt / horizon;
            let mut acc = 0.0;
            for c in coeffs.iter().rev() {
                acc = acc * x + c;
            }
            *v += acc * x;
        }
    }

    /// Exact scale of the simulated marginal at grid time `t_j`: every
    /// discrete kernel weight is non-negative, so `ξ(t_j)` is a sum of
    /// independent totally skewed stables and itself `S_α(σ_j, −1, 0)`.
    pub fn discrete_scale(&self, j: usize) -> f64 {
        assert!(j <= self.n_steps);
        let a = self.alpha;
        let shift = j * self.stride;
        let mut mass = 0.0;
        for k in 0..self.n_past + self.n_near {
            let w = self.cell_kernel[shift + k] - self.cell_kernel[k];
            mass += w.abs().powf(a);
        }
        mass *= self.noise_step;
        let t = j as f64 * self.dt;
        let d = self.hurst - 1.0 / a;
        let far = &self.far_cells;
        for (mid, noise) in far.mids.iter().zip(&far.noise) {
            mass += (increment_power(*mid, t, d) * noise).abs().powf(a);
        }
        self.noise_scale * mass.powf(1.0 / a)
    }

    /// Scale of `ξ(t_j)` under the exact law, `σ_L σ(ξ(1)) t_j^H`.
    pub fn exact_scale(&self, j: usize) -> f64 {
        self.noise_scale * self.sigma1 * (j as f64 * self.dt).powf(self.hurst)
    }
}

// (1/h)∫_{i h}^{(i+1) h} x^d dx divided by h^d, cancellation-free for large i.
fn cell_average_power(i: f64, d: f64) -> f64 {
    if i == 0.0 {
        1.0 / (d + 1.0)
    } else {
        i.powf(d + 1.0) * ((d + 1.0) * (1.0 / i).ln_1p()).exp_m1() / (d + 1.0)
    }
}

fn truncation_radius(horizon: f64, hurst: f64, alpha: f64, sigma1: f64, tol: f64) -> f64 {
    // tail bound at t = T over the full norm σ1^α T^{αH}, solved for R
    let d = hurst - 1.0 / alpha;
    let e1 = alpha * (d - 1.0) + 1.0;
    let target = tol * sigma1.powf(alpha) * horizon.powf(alpha * hurst);
    let scale = (horizon * d).powf(alpha) / -e1;
    (target / scale).powf(1.0 / e1)
}

impl FarField {
    fn new(start: f64, end: f64, horizon: f64, d: f64, alpha: f64) -> Self {
        let mut edges = Vec::new();
        if end > start {
            let mut a = start;
            edges.push(a);
            while a < end {
                a = (a * FAR_CELL_RATIO).min(end);
                edges.push(a);
            }
        }
        let mut noise = Vec::new();
        let mut mids = Vec::new();
        let mut weights = Vec::new();
        for w in edges.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            mids.push(mid);
            noise.push((w[1] - w[0]).powf(1.0 / alpha));
            let ratio = horizon / mid;
            let mut pw = mid.powf(d);
            for _ in 0..FAR_TERMS {
                pw *= ratio;
                weights.push(pw);
            }
        }
        let mut binom = Vec::with_capacity(FAR_TERMS);
        let mut b = 1.0;
        for m in 1..=FAR_TERMS {
            b *= (d - (m as f64 - 1.0)) / m as f64;
            binom.push(b);
        }
        Self {
            noise,
            mids,
            weights,
            binom,
        }
    }
}

/// One LFSM path on `n_steps` steps of `dt`.
pub fn simulate_lfsm<R: Rng + ?Sized>(
    n_steps: usize,
    dt: f64,
    spec: &LfsmSpec,
    rng: &mut R,
) -> Result<GridPath> {
    Ok(LfsmSimulator::new(spec, n_steps, dt)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::LfsmDiscretization;
    use crate::rng::substream;
    use crate::stats::ks_two_sample;

    const SIGMA1_A15_H08: f64 = 1.035_488_792_088_711_8;

    #[test]
    fn kernel_values() {
        assert_eq!(lfsm_kernel(1.0, -2.0, 0.8, 1.5), 0.0);
        assert_eq!(lfsm_kernel(0.0, 0.7, 0.8, 1.5), 0.0);
        assert_eq!(lfsm_kernel(0.0, -0.3, 0.8, 1.5), 0.0);
        assert_eq!(lfsm_kernel(1.0, 0.0, 0.8, 1.5), 1.0);
        let d = 0.8 - 1.0 / 1.5;
        let direct = 3.5f64.powf(d) - 2.5f64.powf(d);
        assert!((lfsm_kernel(1.0, 2.5, 0.8, 1.5) - direct).abs() < 1e-15);
    }

    #[test]
    fn sigma1_golden() {
        let s = lfsm_scale_sigma1(0.8, 1.5, 1e-10).unwrap();
        assert!((s / SIGMA1_A15_H08 - 1.0).abs() < 1e-9, "{s}");
        let s70 = lfsm_scale_sigma1(0.7, 1.5, 1e-10).unwrap();
        assert!((s70 / 0.982_844_770_287_237_9 - 1.0).abs() < 1e-9, "{s70}");
        let s75 = lfsm_scale_sigma1(0.75, 1.5, 1e-10).unwrap();
        assert!((s75 / 0.989_281_351_952_146_1 - 1.0).abs() < 1e-9, "{s75}");
    }

    #[test]
    fn sigma1_converges_with_tolerance() {
        for &tol in &[1e-4, 1e-6, 1e-8] {
            let coarse = lfsm_scale_sigma1(0.8, 1.5, tol).unwrap();
            let fine = lfsm_scale_sigma1(0.8, 1.5, tol / 2.0).unwrap();
            assert!((coarse - fine).abs() < tol, "tol {tol}: {coarse} vs {fine}");
        }
    }

    #[test]
    fn sigma1_domain() {
        assert!(lfsm_scale_sigma1(0.6, 1.5, 1e-8).is_err());
        assert!(lfsm_scale_sigma1(1.0, 1.5, 1e-8).is_err());
        assert!(lfsm_scale_sigma1(0.9, 1.5, 1e-8).unwrap() > 0.0);
    }

    #[test]
    fn truncation_bound_is_sound() {
        let (h, a) = (0.8, 1.5);
        let d = h - 1.0 / a;
        for &t in &[0.25, 1.0] {
            for &r in &[10.0, 1000.0] {
                let exact = quad::integrate(
                    |x: f64| increment_power(x, t, d).powf(a),
                    r,
                    1e3 * r,
                    0.0,
                    1e-10,
                )
                .unwrap()
                .value;
                assert!(exact <= lfsm_truncation_bound(t, r, h, a));
            }
        }
    }

    #[test]
    fn default_truncation_meets_tolerance_at_every_time() {
        let spec = LfsmSpec::new(1.5, 0.8, 1.0).unwrap();
        let sim = LfsmSimulator::new(&spec, 64, 1.0 / 64.0).unwrap();
        let r = sim.trunc_right();
        for j in 1..=64 {
            let t = j as f64 / 64.0;
            let full = SIGMA1_A15_H08.powf(1.5) * t.powf(1.5 * 0.8);
            assert!(lfsm_truncation_bound(t, r, 0.8, 1.5) <= 1e-3 * full * (1.0 + 1e-9));
        }
        let short = spec
            .with_disc(LfsmDiscretization {
                trunc_right: Some(10.0),
                ..LfsmDiscretization::default()
            })
            .unwrap();
        assert!(matches!(LfsmSimulator::new(&short, 64, 1.0 / 64.0), Err(Error::Config(_))));
    }

    #[test]
    fn origin_is_exactly_zero_and_replay_is_exact() {
        let spec = LfsmSpec::new(1.5, 0.8, 1.0).unwrap();
        let sim = LfsmSimulator::new(&spec, 100, 0.01).unwrap();
        let a = sim.sample(&mut substream(4, 2));
        let b = sim.sample(&mut substream(4, 2));
        assert_eq!(a.values[0], 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn noise_step_must_divide_output_step() {
        let spec = LfsmSpec::new(1.5, 0.8, 1.0)
            .unwrap()
            .with_disc(LfsmDiscretization {
                noise_step: Some(0.3),
                ..LfsmDiscretization::default()
            })
            .unwrap();
        assert!(LfsmSimulator::new(&spec, 10, 0.1).is_err());
    }

    #[test]
    fn convolution_matches_direct_sum() {
        // direct evaluation of Σ_k [G(j+k) − G(k)] ΔL_k plus the far field
        let spec = LfsmSpec::new(1.6, 0.85, 0.7).unwrap();
        let sim = LfsmSimulator::new(&spec, 12, 0.25).unwrap();
        let path = sim.sample(&mut substream(8, 8));

        let mut rng = substream(8, 8);
        let unit = StableParams::new(1.6, -1.0, 1.0).unwrap();
        let n_noise = sim.n_past + sim.n_near;
        let mut noise = vec![0.0; n_noise];
        fill_stable(&unit, &mut rng, &mut noise);
        let mut far = vec![0.0; sim.far_cells.mids.len()];
        fill_stable(&unit, &mut rng, &mut far);
        let cell = 0.7 * 0.25f64.powf(1.0 / 1.6);
        let d = 0.85 - 1.0 / 1.6;
        for j in 0..=12 {
            let mut v = 0.0;
            for (k, z) in noise.iter().enumerate() {
                v += (sim.cell_kernel[j + k] - sim.cell_kernel[k]) * cell * z;
            }
            let t = j as f64 * 0.25;
            for (i, z) in far.iter().enumerate() {
                v += increment_power(sim.far_cells.mids[i], t, d) * 0.7 * sim.far_cells.noise[i] * z;
            }
            assert!((v - path.values[j]).abs() < 1e-9 * v.abs().max(1.0), "j={j}: {v} vs {}", path.values[j]);
        }
    }

    #[test]
    fn discrete_scale_tracks_exact_scale() {
        let spec = LfsmSpec::new(1.5, 0.8, 1.0).unwrap();
        let sim = LfsmSimulator::new(&spec, 256, 1.0 / 256.0).unwrap();
        for &j in &[16usize, 64, 128, 256] {
            let rel = sim.discrete_scale(j) / sim.exact_scale(j) - 1.0;
            assert!(rel.abs() < 2e-3, "j={j}: {rel}");
        }
    }

    #[test]
    fn self_similarity_and_stationary_increments() {
        let spec = LfsmSpec::new(1.5, 0.8, 1.0).unwrap();
        let n = 256;
        let sim = LfsmSimulator::new(&spec, n, 1.0 / n as f64).unwrap();
        let paths = 2000;
        let mut half = Vec::with_capacity(paths);
        let mut one = Vec::with_capacity(paths);
        let mut inc = Vec::with_capacity(paths);
        let mut mid = Vec::with_capacity(paths);
        for i in 0..paths as u64 {
            let a = sim.sample(&mut substream(77, 2 * i));
            let b = sim.sample(&mut substream(77, 2 * i + 1));
            half.push(a.values[n / 2]);
            one.push(0.5f64.powf(0.8) * b.values[n]);
            // t = 0.7 and 0.2 are not grid points for n = 256; use 0.703125 and 0.203125
            inc.push(a.values[180] - a.values[52]);
            mid.push(b.values[128]);
        }
        assert!(ks_two_sample(&half, &one).p_value > 0.01);
        assert!(ks_two_sample(&inc, &mid).p_value > 0.01);
    }
}
