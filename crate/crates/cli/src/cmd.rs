use std::fs;
use std::path::Path;

use sampdev_core::calibration::{calibrate as calibrate_spec, limit_law, SamplingScales};
use sampdev_core::mc::{fixed_eps_prediction, sample_deviations};
use sampdev_core::report::{
    to_csv, ProbeRow, ResultRecord, RunManifest, SeedSource, VerifyRow, PROBE_COLUMNS, VERIFY_COLUMNS,
};
use sampdev_core::risk::{quantile_sim as sim, quantile_stationary_at, x_from_p, TabulatedModel};
use sampdev_core::{calibration, Error, ProcessSpec, Result, Sided};
use serde::Serialize;
use serde_json::json;

use crate::opts::{
    merge_config, CalibrateArgs, OutOpts, ProbeArgs, QuantileSimArgs, QuantileStationaryArgs, RunOpts, VerifyArgs,
};

fn sig6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.5e}")
    } else {
        format!("{v}")
    }
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn check_p(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(Error::Config(format!("p must lie in (0, 1), got {p}")))
    }
}

fn seed_of(run: &RunOpts) -> (u64, SeedSource) {
    match run.seed {
        Some(s) => (s, SeedSource::Flag),
        None => (rand::random(), SeedSource::Entropy),
    }
}

/// Runs `f` on a pool capped at `threads` workers.
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Resource(format!("cannot start {n} worker threads: {e}"))),
    }
}

/// Writes `<name>.csv` plus `manifest.json` under `--out`, or the CSV to stdout.
fn emit<T: Serialize>(out: &OutOpts, name: &str, columns: &[&str], rows: &[T], manifest: RunManifest) -> Result<()> {
    let text = to_csv(columns, rows)?;
    let Some(dir) = &out.out else {
        print!("{text}");
        return Ok(());
    };
    let file = format!("{name}.csv");
    let csv_path = dir.join(&file);
    let manifest_path = dir.join("manifest.json");
    if !out.force {
        if let Some(p) = [&csv_path, &manifest_path].into_iter().find(|p| p.exists()) {
            return Err(Error::Config(format!("{} exists; pass --force to overwrite", p.display())));
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    fs::write(&csv_path, text).map_err(|e| io_err(&csv_path, e))?;
    let mut manifest = manifest;
    manifest.results.push(ResultRecord {
        file,
        kind: name.to_string(),
        rows: rows.len(),
    });
    manifest.write(&manifest_path)?;
    eprintln!("wrote {} rows to {}", rows.len(), csv_path.display());
    Ok(())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

pub fn calibrate(args: CalibrateArgs) -> Result<()> {
    let a: CalibrateArgs = merge_config(&args, args.config.as_deref())?;
    let spec = a.process.spec()?;
    let sided = a.process.sided()?;
    let eps = need(a.epsilon, "epsilon")?;
    let s = calibrate_spec(&spec, eps, sided)?;
    println!("process = {}", spec.name());
    println!("mode = {sided}");
    println!("epsilon = {eps}");
    println!("q = {}", sig6(s.q));
    println!("w = {}", sig6(s.w));
    println!("q_tilde = {}", sig6(s.q_tilde));
    println!("q_hat = {}", sig6(s.q_hat));
    println!("Q1 = {}", sig6(s.q1));
    println!("Q2 = {}", sig6(s.q2));
    println!("admissible for epsilon < {}", sig6(s.max_epsilon));
    Ok(())
}

pub fn verify(args: VerifyArgs) -> Result<()> {
    let mut a: VerifyArgs = merge_config(&args, args.config.as_deref())?;
    a.out.force = args.out.force;
    let spec = a.process.spec()?;
    let sided = a.process.sided()?;
    let eps = a.epsilon.clone().filter(|e| !e.is_empty()).ok_or_else(|| Error::Config("--epsilon is required".into()))?;
    let xs = a.x.clone().unwrap_or_else(|| vec![0.0]);
    let (seed, source) = seed_of(&a.run);
    let cfg = a.run.mc_config(seed);
    cfg.validate()?;
    if a.q.is_some() && xs.iter().any(|&x| x != 0.0) {
        return Err(Error::Config("with --q the threshold is epsilon itself; use --x 0".into()));
    }
    let law = limit_law(&spec, sided).ok();
    let rows = with_threads(a.run.threads, || -> Result<Vec<VerifyRow>> {
        let mut rows = Vec::with_capacity(eps.len() * xs.len());
        for &e in &eps {
            let (q, w, p_fixed) = match a.q {
                Some(q) => (q, 0.0, fixed_eps_prediction(&spec, e, sided).ok()),
                None => {
                    let s = calibrate_spec(&spec, e, sided)?;
                    (s.q, s.w, None)
                }
            };
            let sample = sample_deviations(&spec, q, sided, &cfg)?;
            for &x in &xs {
                let est = sample.estimate(e + x * w, cfg.ci_level);
                let p_limit = match a.q {
                    Some(_) => p_fixed,
                    None => law.as_ref().and_then(|l| l.probability(x).ok().flatten()),
                };
                rows.push(VerifyRow {
                    process: spec.name().to_string(),
                    alpha: spec.alpha(),
                    beta: spec.beta(),
                    hurst: spec.hurst(),
                    epsilon: e,
                    x,
                    q,
                    w,
                    mode: sided,
                    n_paths: cfg.n_paths,
                    refine_m: cfg.refine_m,
                    k: est.k,
                    p_hat: est.p_hat,
                    ci_lo: est.ci_lo,
                    ci_hi: est.ci_hi,
                    p_limit,
                    gap: p_limit.map(|p| est.p_hat - p),
                    bias_note: est.bias_note,
                    seed,
                });
            }
        }
        Ok(rows)
    })??;
    let config = json!({ "args": a, "mc": cfg });
    emit(&a.out, "verify", &VERIFY_COLUMNS, &rows, RunManifest::new("verify", seed, source, config))
}

pub fn probe(args: ProbeArgs) -> Result<()> {
    let mut a: ProbeArgs = merge_config(&args, args.config.as_deref())?;
    a.out.force = args.out.force;
    let spec = a.process.spec()?;
    if matches!(spec, ProcessSpec::BrownianMotion { .. }) {
        return Err(Error::Unsupported("probe covers the stable and lfsm processes".into()));
    }
    let eps = a.epsilon.clone().unwrap_or_default();
    let xs = a.x.clone().unwrap_or_else(|| vec![0.0]);
    let rs = a.r.clone().unwrap_or_else(|| vec![0.0]);
    let ratios = calibration::probe_schedule(&spec, &eps, &xs, &rs)?;
    let rows: Vec<ProbeRow> = ratios.iter().map(|r| ProbeRow::new(spec.name(), r)).collect();
    let config = json!({ "args": a });
    emit(&a.out, "probe", &PROBE_COLUMNS, &rows, RunManifest::new("probe", 0, SeedSource::Flag, config))
}

pub fn quantile_sim(args: QuantileSimArgs) -> Result<()> {
    let a: QuantileSimArgs = merge_config(&args, args.config.as_deref())?;
    let spec = a.process.spec()?;
    let p = check_p(need(a.p, "p")?)?;
    let eps = need(a.epsilon, "epsilon")?;
    let x = match a.x {
        Some(x) => x,
        None => x_from_p(p, &limit_law(&spec, Sided::One)?)?,
    };
    let (seed, _) = seed_of(&a.run);
    let cfg = a.run.mc_config(seed);
    let r = with_threads(a.run.threads, || sim(&spec, p, eps, x, &cfg))??;
    let level = cfg.ci_level * 100.0;
    println!("process = {}", spec.name());
    println!("seed = {seed}");
    println!("p = {p}");
    println!("epsilon = {eps}");
    println!("x = {x}");
    println!("q = {}", sig6(r.q));
    println!("w = {}", sig6(r.w));
    println!("d = {}", sig6(r.query.d));
    println!("u = {}", sig6(r.query.u));
    println!("P{{sup > u}} ≤ 2p = {}", r.bound);
    println!(
        "MC interval: P{{max_k xi(kq) > u - d}} in [{}, {}] ({level}% Wilson, n = {})",
        sig6(r.exceed_ci.0),
        sig6(r.exceed_ci.1),
        r.n_paths
    );
    Ok(())
}

pub fn quantile_stationary(args: QuantileStationaryArgs) -> Result<()> {
    let a: QuantileStationaryArgs = merge_config(&args, args.config.as_deref())?;
    let p = check_p(need(a.p, "p")?)?;
    let eps = need(a.epsilon, "epsilon")?;
    let path = a.table.clone().ok_or_else(|| Error::Config("--table is required".into()))?;
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let model = TabulatedModel::parse(&text)?;
    let spec = a.process.process.as_ref().map(|_| a.process.spec()).transpose()?;
    let scales = match (a.q, a.w, &spec) {
        (Some(q), Some(w), _) => explicit_scales(eps, q, w)?,
        (None, None, Some(spec)) => calibrate_spec(spec, eps, Sided::One)?,
        _ => return Err(Error::Config("give either --process flags or both --q and --w".into())),
    };
    let x = match (a.x, &spec) {
        (Some(x), _) => x,
        (None, Some(spec)) => x_from_p(p, &limit_law(spec, Sided::One)?)?,
        (None, None) => return Err(Error::Config("--x is required without --process".into())),
    };
    let r = quantile_stationary_at(&model, p, &scales, x)?;
    println!("p = {p}");
    println!("epsilon = {eps}");
    println!("x = {x}");
    println!("q = {}", sig6(scales.q));
    println!("w = {}", sig6(scales.w));
    println!("u = {}", r.query.u);
    println!("y = {}", r.y);
    println!("d = {}", sig6(r.query.d));
    println!("residual = {:.3e} after {} iterations", r.residual, r.iterations);
    println!("P{{sup > u}} ≤ 2p = {}", r.bound);
    Ok(())
}

fn explicit_scales(epsilon: f64, q: f64, w: f64) -> Result<SamplingScales> {
    if !(q > 0.0 && q <= 1.0 && w >= 0.0 && epsilon > 0.0) {
        return Err(Error::Config(format!("need 0 < q <= 1, w >= 0, epsilon > 0; got q = {q}, w = {w}, epsilon = {epsilon}")));
    }
    Ok(SamplingScales {
        epsilon,
        q,
        w,
        q_tilde: f64::NAN,
        q_hat: f64::NAN,
        q1: f64::INFINITY,
        q2: 1.0,
        max_epsilon: f64::INFINITY,
    })
}
