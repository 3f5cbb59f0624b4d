//! Monte Carlo estimation of deviation probabilities.
//!
//! Replicate `i` of a run draws from `substream(seed, i)` and contributes an
//! integer count, so estimates do not depend on the rayon worker count.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, fixed_eps_levy_limit, limit_law, SamplingScales};
use crate::error::{Error, Result};
use crate::process::{bm_block_max_exact, block_layout, LfsmSimulator, ProcessSpec, Sided};
use crate::rng::{derive_seed, substream};
use crate::stable::{fill_stable, StableParams};
use crate::stats::{normal_critical, student_critical};

/// Default cap on grid points per simulated path.
pub const DEFAULT_PATH_CAP: usize = 1 << 24;

const TAG_BLOCK: u64 = 1;
const TAG_RESIDUAL: u64 = 2;
const TAG_MARGINAL: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub n_paths: u64,
    /// Grid points per sampling block.
    pub refine_m: usize,
    pub seed: u64,
    pub ci_level: f64,
    #[serde(default = "default_cap")]
    pub path_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_PATH_CAP
}

impl Default for MCConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            refine_m: 64,
            seed: 0,
            ci_level: 0.95,
            path_cap: DEFAULT_PATH_CAP,
        }
    }
}

impl MCConfig {
    pub fn new(n_paths: u64, refine_m: usize, seed: u64) -> Self {
        Self {
            n_paths,
            refine_m,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::config("n_paths must be at least 1"));
        }
        if self.refine_m == 0 {
            return Err(Error::config("refine_m must be at least 1"));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::config(format!("ci_level must lie in (0, 1), got {}", self.ci_level)));
        }
        if self.path_cap < 2 {
            return Err(Error::config("path_cap must allow at least two grid points"));
        }
        Ok(())
    }
}

/// How the simulated supremum relates to the continuous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasNote {
    /// Exact block maxima: unbiased for the continuous supremum.
    ExactBlockMax,
    /// Grid supremum: biased low.
    GridUnderstated,
    None,
}

impl BiasNote {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasNote::ExactBlockMax => "exact-block-max",
            BiasNote::GridUnderstated => "grid-understated",
            BiasNote::None => "none",
        }
    }
}

impl std::fmt::Display for BiasNote {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A probability estimate. `k` counts the replicates in which the event
/// occurred; for direct estimates `p_hat = k/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub p_hat: f64,
    pub k: u64,
    pub n: u64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bias_note: BiasNote,
}

impl MCEstimate {
    pub fn from_counts(k: u64, n: u64, level: f64, bias_note: BiasNote) -> Self {
        let (ci_lo, ci_hi) = wilson_ci(k, n, level);
        Self {
            p_hat: k as f64 / n as f64,
            k,
            n,
            ci_lo,
            ci_hi,
            bias_note,
        }
    }

    /// Binomial standard error at `p_hat`.
    pub fn std_err(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.n as f64).sqrt()
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_lo <= p && p <= self.ci_hi
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_ci(k: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n >= 1 && k <= n, "wilson_ci needs 0 <= k <= n and n >= 1");
    let z = normal_critical(level);
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo.min(p), hi.max(p))
}

/// Per-path suprema of the deviation statistic, shared by estimates at
/// several thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSample {
    pub sided: Sided,
    pub q: f64,
    pub bias_note: BiasNote,
    pub values: Vec<f64>,
}

impl DeviationSample {
    /// Estimate of `P{sup deviation ≤ threshold}`.
    pub fn estimate(&self, threshold: f64, level: f64) -> MCEstimate {
        let k = self.values.iter().filter(|&&v| v <= threshold).count() as u64;
        MCEstimate::from_counts(k, self.values.len() as u64, level, self.bias_note)
    }
}

// Grid of one run: `n_full` blocks of `m` steps plus `tail_steps` steps.
#[derive(Debug, Clone, Copy)]
struct Layout {
    m: usize,
    dt: f64,
    n_full: u64,
    tail_steps: usize,
}

impl Layout {
    fn new(q: f64, horizon: f64, m: usize, cap: usize) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::domain(format!("sampling interval must be positive, got {q}")));
        }
        let (n_full, residual) = block_layout(q, horizon);
        let dt = q / m as f64;
        let tail_steps = if residual > 0.0 {
            ((residual / dt) * (1.0 + 1e-12)).floor() as usize
        } else {
            0
        };
        let layout = Self {
            m,
            dt,
            n_full,
            tail_steps,
        };
        let points = layout.n_steps() as f64 + 1.0;
        if points > cap as f64 {
            return Err(Error::Resource(format!(
                "a path would need {points:.0} grid points, above the cap of {cap}; raise epsilon, lower refine_m or raise the cap"
            )));
        }
        Ok(layout)
    }

    fn n_steps(&self) -> usize {
        self.n_full as usize * self.m + self.tail_steps
    }
}

// Running suprema at each nested grid level.
#[derive(Debug, Clone)]
struct LevelMax {
    strides: Vec<usize>,
    one: Vec<f64>,
    two: Vec<f64>,
}

impl LevelMax {
    fn new(strides: &[usize]) -> Self {
        Self {
            strides: strides.to_vec(),
            one: vec![0.0; strides.len()],
            two: vec![0.0; strides.len()],
        }
    }

    fn reset(&mut self) {
        self.one.iter_mut().for_each(|v| *v = 0.0);
        self.two.iter_mut().for_each(|v| *v = 0.0);
    }

    // `offset` is the fine index within the block, `dev` the value relative
    // to the block anchor.
    #[inline]
    fn observe(&mut self, offset: usize, dev: f64) {
        for (l, &st) in self.strides.iter().enumerate() {
            if offset % st == 0 {
                self.one[l] = self.one[l].max(dev);
                self.two[l] = self.two[l].max(dev.abs());
            }
        }
    }

    fn get(&self, l: usize, sided: Sided) -> f64 {
        match sided {
            Sided::One => self.one[l],
            Sided::Two => self.two[l],
        }
    }
}

enum GridEngine {
    Bm { sd: f64 },
    Levy { step: StableParams },
    Lfsm { sim: Box<LfsmSimulator> },
}

impl GridEngine {
    fn new(spec: &ProcessSpec, layout: &Layout) -> Result<Self> {
        Ok(match spec {
            ProcessSpec::BrownianMotion { var_rate } => GridEngine::Bm {
                sd: (var_rate * layout.dt).sqrt(),
            },
            ProcessSpec::StableLevy { params } => GridEngine::Levy {
                step: params.scaled(layout.dt.powf(1.0 / params.alpha()))?,
            },
            ProcessSpec::Lfsm(s) => GridEngine::Lfsm {
                sim: Box::new(LfsmSimulator::new(s, layout.n_steps(), layout.dt)?),
            },
        })
    }

    fn fill_increments<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            GridEngine::Bm { sd } => {
                for v in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = sd * z;
                }
            }
            GridEngine::Levy { step } => fill_stable(step, rng, out),
            GridEngine::Lfsm { .. } => unreachable!("LFSM paths are not built from increments"),
        }
    }

    fn run_path<R: Rng + ?Sized>(&self, layout: &Layout, rng: &mut R, buf: &mut Vec<f64>, acc: &mut LevelMax) {
        acc.reset();
        let m = layout.m;
        match self {
            GridEngine::Lfsm { sim } => {
                buf.resize(layout.n_steps() + 1, 0.0);
                sim.sample_into(rng, buf);
                for block in buf.chunks(m) {
                    let anchor = block[0];
                    for (j, v) in block.iter().enumerate().skip(1) {
                        acc.observe(j, v - anchor);
                    }
                }
            }
            _ => {
                // the last step of a full block only moves the next anchor
                let mut block = |len: usize, buf: &mut Vec<f64>, acc: &mut LevelMax| {
                    buf.resize(len, 0.0);
                    self.fill_increments(rng, buf);
                    let mut s = 0.0;
                    for (j, inc) in buf.iter().enumerate() {
                        s += inc;
                        acc.observe(j + 1, s);
                    }
                };
                for _ in 0..layout.n_full {
                    block(m - 1, buf, acc);
                }
                if layout.tail_steps > 0 {
                    block(layout.tail_steps, buf, acc);
                }
            }
        }
    }
}

/// Per-path deviation suprema at several nested grids: level `l` keeps every
/// `strides[l]`-th point of the finest grid with `m` points per block.
fn grid_levels(
    spec: &ProcessSpec,
    q: f64,
    horizon: f64,
    m: usize,
    strides: &[usize],
    sided: Sided,
    n_paths: u64,
    seed: u64,
    cap: usize,
) -> Result<Vec<Vec<f64>>> {
    let layout = Layout::new(q, horizon, m, cap)?;
    let engine = GridEngine::new(spec, &layout)?;
    let rows: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map_init(
            || (Vec::new(), LevelMax::new(strides)),
            |(buf, acc), i| {
                let mut rng = substream(seed, i);
                engine.run_path(&layout, &mut rng, buf, acc);
                (0..strides.len()).map(|l| acc.get(l, sided)).collect()
            },
        )
        .collect();
    let mut levels = vec![Vec::with_capacity(rows.len()); strides.len()];
    for row in rows {
        for (l, v) in row.into_iter().enumerate() {
            levels[l].push(v);
        }
    }
    Ok(levels)
}

/// One-sided Brownian suprema from exact block maxima.
fn bm_exact_sample(var_rate: f64, q: f64, horizon: f64, n_paths: u64, seed: u64) -> Vec<f64> {
    let (n_full, residual) = block_layout(q, horizon);
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let block = |len: f64, rng: &mut crate::rng::SimRng| {
                let z: f64 = StandardNormal.sample(rng);
                bm_block_max_exact((var_rate * len).sqrt() * z, len, var_rate, rng)
            };
            let mut sup: f64 = 0.0;
            for _ in 0..n_full {
                sup = sup.max(block(q, &mut rng));
            }
            if residual > 0.0 {
                sup = sup.max(block(residual, &mut rng));
            }
            sup
        })
        .collect()
}

fn sample_on(
    spec: &ProcessSpec,
    q: f64,
    horizon: f64,
    sided: Sided,
    cfg: &MCConfig,
    seed: u64,
) -> Result<DeviationSample> {
    cfg.validate()?;
    if let (ProcessSpec::BrownianMotion { var_rate }, Sided::One) = (spec, sided) {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::domain(format!("sampling interval must be positive, got {q}")));
        }
        return Ok(DeviationSample {
            sided,
            q,
            bias_note: BiasNote::ExactBlockMax,
            values: bm_exact_sample(*var_rate, q, horizon, cfg.n_paths, seed),
        });
    }
    let mut levels = grid_levels(spec, q, horizon, cfg.refine_m, &[1], sided, cfg.n_paths, seed, cfg.path_cap)?;
    Ok(DeviationSample {
        sided,
        q,
        bias_note: BiasNote::GridUnderstated,
        values: levels.pop().expect("one level"),
    })
}

/// Suprema over `[0, 1]` of the deviation from the sampled path with interval
/// `q`. One-sided Brownian runs use exact block maxima; everything else uses
/// a grid of `refine_m` points per block.
pub fn sample_deviations(spec: &ProcessSpec, q: f64, sided: Sided, cfg: &MCConfig) -> Result<DeviationSample> {
    sample_on(spec, q, 1.0, sided, cfg, cfg.seed)
}

/// `P{sup deviation ≤ threshold}` at an explicit sampling interval `q`.
pub fn estimate_at_q(
    spec: &ProcessSpec,
    q: f64,
    threshold: f64,
    sided: Sided,
    cfg: &MCConfig,
) -> Result<MCEstimate> {
    Ok(sample_deviations(spec, q, sided, cfg)?.estimate(threshold, cfg.ci_level))
}

/// `P{sup deviation ≤ ε + x·w(ε)}` with the calibrated `q(ε)` and `w(ε)`.
pub fn estimate_deviation_prob(
    spec: &ProcessSpec,
    epsilon: f64,
    x: f64,
    sided: Sided,
    cfg: &MCConfig,
) -> Result<MCEstimate> {
    Ok(estimate_deviation_curve(spec, epsilon, &[x], sided, cfg)?.1.remove(0))
}

/// Estimates at several `x` from one set of simulated paths.
pub fn estimate_deviation_curve(
    spec: &ProcessSpec,
    epsilon: f64,
    xs: &[f64],
    sided: Sided,
    cfg: &MCConfig,
) -> Result<(SamplingScales, Vec<MCEstimate>)> {
    let scales = calibrate(spec, epsilon, sided)?;
    let sample = sample_deviations(spec, scales.q, sided, cfg)?;
    let est = xs.iter().map(|&x| sample.estimate(scales.threshold(x), cfg.ci_level)).collect();
    Ok((scales, est))
}

/// Product estimator for processes with independent increments:
/// `p_b^{⌊1/q⌋}·p_r`, with the single-block probability `p_b` and the
/// residual-block probability `p_r` estimated from `n_paths` short blocks
/// each. The interval is the delta-method interval of the log product; `k`
/// and `n` describe the single-block sample.
pub fn block_product_estimator(
    spec: &ProcessSpec,
    epsilon: f64,
    q: f64,
    sided: Sided,
    cfg: &MCConfig,
) -> Result<MCEstimate> {
    if !spec.has_independent_increments() {
        return Err(Error::Unsupported(format!(
            "the block product needs independent increments; {} does not have them",
            spec.name()
        )));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::domain(format!("block length q must lie in (0, 1], got {q}")));
    }
    let (n_full, residual) = block_layout(q, 1.0);
    let level = cfg.ci_level;
    let block = sample_on(spec, q, q, sided, cfg, derive_seed(cfg.seed, TAG_BLOCK))?.estimate(epsilon, level);
    if residual == 0.0 && n_full == 1 {
        return Ok(block);
    }
    let tail = if residual > 0.0 {
        Some(sample_on(spec, residual, residual, sided, cfg, derive_seed(cfg.seed, TAG_RESIDUAL))?.estimate(epsilon, level))
    } else {
        None
    };
    let nf = n_full as f64;
    let p_tail = tail.map_or(1.0, |t| t.p_hat);
    let p_hat = block.p_hat.powf(nf) * p_tail;
    let interior = |e: &MCEstimate| e.k > 0 && e.k < e.n;
    let (ci_lo, ci_hi) = if interior(&block) && tail.as_ref().is_none_or(interior) {
        let var_log = |e: &MCEstimate| (1.0 - e.p_hat) / (e.n as f64 * e.p_hat);
        let var = nf * nf * var_log(&block) + tail.as_ref().map_or(0.0, var_log);
        let z = normal_critical(level);
        let half = z * var.sqrt();
        let log_p = p_hat.ln();
        ((log_p - half).exp(), (log_p + half).exp().min(1.0))
    } else {
        // a boundary count has no delta-method spread; raise the Wilson ends
        (
            block.ci_lo.powf(nf) * tail.map_or(1.0, |t| t.ci_lo),
            block.ci_hi.powf(nf) * tail.map_or(1.0, |t| t.ci_hi),
        )
    };
    Ok(MCEstimate {
        p_hat,
        k: block.k,
        n: block.n,
        ci_lo: ci_lo.min(p_hat),
        ci_hi: ci_hi.max(p_hat),
        bias_note: block.bias_note,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub refine_m: usize,
    pub estimate: MCEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub scales: SamplingScales,
    pub rows: Vec<RefinementRow>,
    /// First `m` whose change from the previous row is below half its Wilson width.
    pub converged_m: Option<usize>,
    /// Coarser grids are subsets of the finest one on every path.
    pub coupled: bool,
}

/// Grid-resolution study: every path is simulated once on the finest grid
/// and read off at each coarser nested grid, so each path's supremum is
/// non-decreasing in `m` and `p_hat` is non-increasing.
pub fn refinement_study(
    spec: &ProcessSpec,
    epsilon: f64,
    x: f64,
    sided: Sided,
    m_schedule: &[usize],
    cfg: &MCConfig,
) -> Result<RefinementStudy> {
    if m_schedule.is_empty() {
        return Err(Error::config("refinement schedule is empty"));
    }
    if !m_schedule.iter().all(|m| m.is_power_of_two()) || !m_schedule.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config(format!(
            "refinement schedule must be strictly increasing powers of 2, got {m_schedule:?}"
        )));
    }
    cfg.validate()?;
    let scales = calibrate(spec, epsilon, sided)?;
    let finest = *m_schedule.last().expect("non-empty");
    let strides: Vec<usize> = m_schedule.iter().map(|m| finest / m).collect();
    let levels = grid_levels(spec, scales.q, 1.0, finest, &strides, sided, cfg.n_paths, cfg.seed, cfg.path_cap)?;
    let threshold = scales.threshold(x);
    let rows: Vec<RefinementRow> = m_schedule
        .iter()
        .zip(levels)
        .map(|(&m, values)| RefinementRow {
            refine_m: m,
            estimate: DeviationSample {
                sided,
                q: scales.q,
                bias_note: BiasNote::GridUnderstated,
                values,
            }
            .estimate(threshold, cfg.ci_level),
        })
        .collect();
    let converged_m = rows.windows(2).find_map(|w| {
        let half = 0.5 * (w[1].estimate.ci_hi - w[1].estimate.ci_lo);
        ((w[1].estimate.p_hat - w[0].estimate.p_hat).abs() < half).then_some(w[1].refine_m)
    });
    Ok(RefinementStudy {
        scales,
        rows,
        converged_m,
        coupled: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub q: f64,
    pub w: f64,
    pub estimate: MCEstimate,
    /// `None` when the limit's `κ` is not stated.
    pub p_limit: Option<f64>,
    pub gap: Option<f64>,
}

/// Pair Monte Carlo estimates along a decreasing `ε` schedule with the limit
/// law's prediction at `x`.
pub fn convergence_to_limit(
    spec: &ProcessSpec,
    eps_schedule: &[f64],
    x: f64,
    sided: Sided,
    cfg: &MCConfig,
) -> Result<Vec<ConvergenceRow>> {
    if !eps_schedule.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::config(format!("epsilon schedule must be strictly decreasing, got {eps_schedule:?}")));
    }
    if eps_schedule.is_empty() {
        return Ok(Vec::new());
    }
    let law = limit_law(spec, sided)?;
    let p_limit = law.probability(x)?;
    eps_schedule
        .iter()
        .map(|&eps| {
            let (scales, mut est) = estimate_deviation_curve(spec, eps, &[x], sided, cfg)?;
            let estimate = est.remove(0);
            Ok(ConvergenceRow {
                epsilon: eps,
                q: scales.q,
                w: scales.w,
                estimate,
                p_limit,
                gap: p_limit.map(|p| estimate.p_hat - p),
            })
        })
        .collect()
}

/// Fixed-`ε` Lévy prediction for an explicit `q`, for stable Lévy motion.
pub fn fixed_eps_prediction(spec: &ProcessSpec, epsilon: f64, sided: Sided) -> Result<f64> {
    match spec {
        ProcessSpec::StableLevy { params } => fixed_eps_levy_limit(params.alpha(), params.beta(), epsilon, sided),
        other => Err(Error::Unsupported(format!(
            "the fixed-epsilon limit is stated for stable Levy motion, not {}",
            other.name()
        ))),
    }
}

/// Weighted least-squares fit of `−ln p̂ = κ e^{−x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaFit {
    pub kappa: f64,
    pub std_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
    pub n_used: usize,
    /// `−ln p̂ − κ̂ e^{−x}` at each used point, in input order.
    pub residuals: Vec<f64>,
    pub reduced_chi2: f64,
}

impl KappaFit {
    pub fn relative_width(&self) -> f64 {
        (self.ci_hi - self.ci_lo) / self.kappa
    }
}

/// Fit `κ` from estimates on an `x` grid under the Gumbel shape.
///
/// Weights are the inverse delta-method variances `n p/(1 − p)` of `−ln p̂`.
/// The standard error is inflated by `max(1, reduced χ²)^{1/2}` and the
/// interval uses Student-t quantiles with `n_used − 1` degrees of freedom, so
/// a misfitting shape widens the interval instead of hiding in it. Points
/// with `p̂ ∈ {0, 1}` are skipped.
pub fn fit_kappa_gumbel(xs: &[f64], estimates: &[MCEstimate], level: f64) -> Result<KappaFit> {
    if xs.len() != estimates.len() {
        return Err(Error::config("x grid and estimates differ in length"));
    }
    let pts: Vec<(f64, f64, f64)> = xs
        .iter()
        .zip(estimates)
        .filter(|(_, e)| e.p_hat > 0.0 && e.p_hat < 1.0)
        .map(|(&x, e)| {
            let weight = e.n as f64 * e.p_hat / (1.0 - e.p_hat);
            ((-x).exp(), -e.p_hat.ln(), weight)
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::Estimation(format!(
            "kappa fit needs at least 3 points with p_hat in (0, 1), got {}",
            pts.len()
        )));
    }
    let szz: f64 = pts.iter().map(|(z, _, w)| w * z * z).sum();
    let szy: f64 = pts.iter().map(|(z, y, w)| w * z * y).sum();
    let kappa = szy / szz;
    let residuals: Vec<f64> = pts.iter().map(|(z, y, _)| y - kappa * z).collect();
    let dof = pts.len() - 1;
    let chi2: f64 = pts.iter().zip(&residuals).map(|((_, _, w), r)| w * r * r).sum();
    let reduced_chi2 = chi2 / dof as f64;
    let std_err = (reduced_chi2.max(1.0) / szz).sqrt();
    let t = student_critical(level, dof as f64);
    Ok(KappaFit {
        kappa,
        std_err,
        ci_lo: kappa - t * std_err,
        ci_hi: kappa + t * std_err,
        level,
        n_used: pts.len(),
        residuals,
        reduced_chi2,
    })
}

/// `P{sup_{[0,h]} L > u}` against `P{L(h) > u}/P{L(h) > 0}` for stable
/// Lévy motion `S_α(1, β, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupInequalityReport {
    pub alpha: f64,
    pub beta: f64,
    pub h: f64,
    pub u: f64,
    pub grid_steps: usize,
    pub n_paths: u64,
    pub left: f64,
    pub left_se: f64,
    /// Left side on coarser nested grids of the same paths, as `(steps, estimate)`.
    pub left_coarse: Vec<(usize, f64)>,
    pub right: f64,
    pub right_se: f64,
    pub combined_se: f64,
    /// `right + 3·combined_se − left`.
    pub margin: f64,
    pub holds: bool,
}

/// Check the supremum inequality at one level `u`.
pub fn check_sup_inequality_52(alpha: f64, beta: f64, h: f64, u: f64, cfg: &MCConfig) -> Result<SupInequalityReport> {
    Ok(check_sup_inequality_52_levels(alpha, beta, h, &[u], cfg)?.remove(0))
}

/// Check the supremum inequality at several levels from one set of paths.
/// The left side uses `refine_m` grid steps on `[0, h]`; the right side uses
/// independent direct draws of `L(h)`.
pub fn check_sup_inequality_52_levels(
    alpha: f64,
    beta: f64,
    h: f64,
    us: &[f64],
    cfg: &MCConfig,
) -> Result<Vec<SupInequalityReport>> {
    cfg.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("h must be positive, got {h}")));
    }
    if let Some(u) = us.iter().find(|u| !(**u > 0.0)) {
        return Err(Error::domain(format!("u must be positive, got {u}")));
    }
    let unit = StableParams::new(alpha, beta, 1.0)?;
    let m = cfg.refine_m;
    if m + 1 > cfg.path_cap {
        return Err(Error::Resource(format!("{m} grid steps exceed the path cap")));
    }
    let step = unit.scaled((h / m as f64).powf(1.0 / alpha))?;
    let strides: Vec<usize> = [1usize, 2, 4, 8].into_iter().filter(|s| m % s == 0 && m / s >= 1).collect();
    let n = cfg.n_paths;

    let sups: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; m],
            |buf, i| {
                let mut rng = substream(cfg.seed, i);
                fill_stable(&step, &mut rng, buf);
                let mut best = vec![f64::NEG_INFINITY; strides.len()];
                let mut s = 0.0;
                for (j, inc) in buf.iter().enumerate() {
                    s += inc;
                    for (l, st) in strides.iter().enumerate() {
                        if (j + 1) % st == 0 {
                            best[l] = best[l].max(s);
                        }
                    }
                }
                best
            },
        )
        .collect();

    let marginal_seed = derive_seed(cfg.seed, TAG_MARGINAL);
    let scale = h.powf(1.0 / alpha);
    let ends: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(marginal_seed, i);
            let mut x = [0.0];
            fill_stable(&unit, &mut rng, &mut x);
            scale * x[0]
        })
        .collect();
    let nf = n as f64;
    let positive = ends.iter().filter(|&&v| v > 0.0).count() as f64 / nf;

    us.iter()
        .map(|&u| {
            let frac = |l: usize| sups.iter().filter(|b| b[l] > u).count() as f64 / nf;
            let left = frac(0);
            let left_se = (left * (1.0 - left) / nf).sqrt();
            let above = ends.iter().filter(|&&v| v > u).count() as f64 / nf;
            let (right, right_se) = if positive > 0.0 {
                let r = above / positive;
                // {L(h) > u} lies inside {L(h) > 0}
                let var = (above * (1.0 - above) + r * r * positive * (1.0 - positive)
                    - 2.0 * r * (above - above * positive))
                    / (nf * positive * positive);
                (r, var.max(0.0).sqrt())
            } else {
                (0.0, 0.0)
            };
            let combined_se = (left_se * left_se + right_se * right_se).sqrt();
            let margin = right + 3.0 * combined_se - left;
            Ok(SupInequalityReport {
                alpha,
                beta,
                h,
                u,
                grid_steps: m,
                n_paths: n,
                left,
                left_se,
                left_coarse: (1..strides.len()).map(|l| (m / strides[l], frac(l))).collect(),
                right,
                right_se,
                combined_se,
                margin,
                holds: margin >= 0.0,
            })
        })
        .collect()
}
