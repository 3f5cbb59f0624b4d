use rand::Rng;

use super::GridPath;
use crate::error::{Error, Result};
use crate::stable::{fill_stable, StableParams};

/// Stable Lévy motion on `n_steps` steps of `dt`: cumulative sums of iid
/// `S_α(σ·dt^{1/α}, β, 0)` increments.
pub fn simulate_stable_levy<R: Rng + ?Sized>(
    n_steps: usize,
    dt: f64,
    params: &StableParams,
    rng: &mut R,
) -> Result<GridPath> {
    if n_steps == 0 {
        return Err(Error::config("n_steps must be at least 1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("grid step must be positive, got {dt}")));
    }
    let mut values = vec![0.0; n_steps + 1];
    fill_levy_path(params, dt, rng, &mut values)?;
    GridPath::new(dt, values)
}

/// Overwrite `values` with a Lévy path on step `dt`, `values[0] = 0`.
pub(crate) fn fill_levy_path<R: Rng + ?Sized>(
    params: &StableParams,
    dt: f64,
    rng: &mut R,
    values: &mut [f64],
) -> Result<()> {
    let step = params.scaled(dt.powf(1.0 / params.alpha()))?;
    values[0] = 0.0;
    fill_stable(&step, rng, &mut values[1..]);
    let mut level = 0.0;
    for v in values[1..].iter_mut() {
        level += *v;
        *v = level;
    }
    Ok(())
}
