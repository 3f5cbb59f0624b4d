//! Adaptive Gauss–Kronrod quadrature and Euler acceleration of alternating
//! series. Both back the oscillatory and power-law integrals in
//! [`crate::stable::c_alpha`] and [`crate::process::lfsm_scale_sigma1`].

use crate::error::{Error, Result};

// 15-point Kronrod abscissae on [-1, 1] (non-negative half) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// 7-point Gauss weights, attached to XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_err: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    // error estimate cannot drop below this
    floor: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut resabs = kronrod.abs();
    let mut fv = [0.0_f64; 14];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }
    let value = kronrod * half;
    let resasc = resasc * half.abs();
    let resabs = resabs * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(floor);
    }
    Panel {
        a,
        b,
        value,
        err,
        floor,
    }
}

/// Integrate `f` over the finite interval `[a, b]` by globally adaptive
/// bisection of the panel with the largest error estimate.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    const MAX_PANELS: usize = 2000;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical(format!(
            "integration limits must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            abs_err: 0.0,
            intervals: 0,
        });
    }
    let mut panels = vec![gk15(&f, a, b)];
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        let floor: f64 = panels.iter().map(|p| p.floor).sum();
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if err <= abs_tol.max(rel_tol * value.abs()).max(1.0001 * floor) {
            return Ok(Quadrature {
                value,
                abs_err: err,
                intervals: panels.len(),
            });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Numerical(format!(
                "quadrature on [{a}, {b}] did not reach tolerance: estimate {value:e}, error {err:e}"
            )));
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("non-empty panel list");
        let worst = panels.swap_remove(idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Numerical(format!(
                "panel [{}, {}] cannot be subdivided further",
                worst.a, worst.b
            )));
        }
        panels.push(gk15(&f, worst.a, mid));
        panels.push(gk15(&f, mid, worst.b));
    }
}

/// Sum an alternating series by repeated averaging of its partial sums
/// (the Euler–Knopp transform). `term(k)` is the k-th term. Iteration stops
/// once the accelerated estimate moves by less than `tol` times its
/// magnitude (floored at one) on two consecutive terms.
pub fn euler_sum<F: FnMut(usize) -> Result<f64>>(
    mut term: F,
    tol: f64,
    max_terms: usize,
) -> Result<f64> {
    // row[j] holds the j-fold averaged partial sum ending at the newest term.
    let mut row: Vec<f64> = Vec::with_capacity(max_terms);
    let mut partial = 0.0;
    let mut previous: Option<f64> = None;
    let mut quiet = 0;
    for k in 0..max_terms {
        partial += term(k)?;
        let mut carry = partial;
        for slot in row.iter_mut() {
            let averaged = 0.5 * (*slot + carry);
            *slot = carry;
            carry = averaged;
        }
        row.push(carry);
        let estimate = carry;
        if let Some(prev) = previous {
            if (estimate - prev).abs() < tol * estimate.abs().max(1.0) {
                quiet += 1;
                if quiet >= 2 {
                    return Ok(estimate);
                }
            } else {
                quiet = 0;
            }
        }
        previous = Some(estimate);
    }
    Err(Error::Numerical(format!(
        "alternating series did not settle within {max_terms} terms"
    )))
}
