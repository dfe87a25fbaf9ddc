//! Special functions and adaptive quadrature.
//!
//! Everything here is implemented from recurrences and series so that
//! results do not depend on a platform libm beyond the elementary functions.

use crate::error::{ensure, Error, Result};
use std::f64::consts::PI;

/// Physicists' Hermite polynomial `H_n(x)` from the forward recurrence
/// `H_{n+1} = 2x H_n - 2n H_{n-1}`.
///
/// Overflows to `±inf` once `|H_n(x)|` exceeds the f64 range; callers that
/// need large `n` should use [`hermite_function`], which carries the
/// Gaussian weight and normalisation through the recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    let mut h_prev = 1.0;
    if n == 0 {
        return h_prev;
    }
    let mut h = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * h - 2.0 * k as f64 * h_prev;
        h_prev = h;
        h = next;
    }
    h
}

/// Normalised Hermite function `h_n(x) = H_n(x) e^{-x^2/2} / sqrt(2^n n! sqrt(pi))`.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    hermite_functions(n, x)[n]
}

/// `h_0(x), ..., h_n(x)` in one pass.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let h0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(h0);
    if n == 0 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * x * h0);
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Derivative `h_n'(x) = sqrt(n/2) h_{n-1}(x) - sqrt((n+1)/2) h_{n+1}(x)`.
pub fn hermite_function_deriv(n: usize, x: f64) -> f64 {
    let h = hermite_functions(n + 1, x);
    let up = ((n + 1) as f64 / 2.0).sqrt() * h[n + 1];
    if n == 0 {
        -up
    } else {
        (n as f64 / 2.0).sqrt() * h[n - 1] - up
    }
}

/// Generalised Laguerre polynomial `L_n^k(x)` from the three-term recurrence
/// `(m+1) L_{m+1} = (2m+1+k-x) L_m - (m+k) L_{m-1}`.
///
/// Valid for any integer `k`; for `k >= -n` this is the usual polynomial.
pub fn laguerre_gen(n: usize, k: i64, x: f64) -> f64 {
    let kf = k as f64;
    let mut l_prev = 1.0;
    if n == 0 {
        return l_prev;
    }
    let mut l = 1.0 + kf - x;
    for m in 1..n {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0 + kf - x) * l - (mf + kf) * l_prev) / (mf + 1.0);
        l_prev = l;
        l = next;
    }
    l
}

const I0_SERIES_MAX: f64 = 30.0;

/// Modified Bessel function `I_0(x)` for `x >= 0`.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= I0_SERIES_MAX {
        i0_series(x)
    } else {
        x.exp() * i0_asymptotic_scaled(x)
    }
}

/// Exponentially scaled `e^{-x} I_0(x)`, finite for every `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x <= I0_SERIES_MAX {
        (-x).exp() * i0_series(x)
    } else {
        i0_asymptotic_scaled(x)
    }
}

fn i0_series(x: f64) -> f64 {
    // sum (x/2)^{2m} / (m!)^2, all terms positive
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= y / (m * m);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn i0_asymptotic_scaled(x: f64) -> f64 {
    // e^{-x} I_0(x) ~ (2 pi x)^{-1/2} sum_k ((2k-1)!!)^2 / (k! (8x)^k)
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * x);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// Bessel functions `J_0(x), ..., J_n(x)` by Miller's downward recurrence,
/// normalised with `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_j_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let ax = x.abs();
    if ax == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = (n as f64).max(ax);
    let mut m = (top + 20.0 + (40.0 * top).sqrt()).ceil() as usize;
    m += m % 2;
    let mut j_next = 0.0;
    let mut j = 1e-300;
    let mut norm = 2.0 * j;
    for k in (1..=m).rev() {
        let j_prev = 2.0 * k as f64 / ax * j - j_next;
        j_next = j;
        j = j_prev;
        let idx = k - 1;
        if idx <= n {
            out[idx] = j;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            let s = 1e-250;
            j *= s;
            j_next *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// Bessel function of the first kind `J_j(x)` for any integer order.
pub fn bessel_j(j: i64, x: f64) -> f64 {
    let n = j.unsigned_abs() as usize;
    let v = bessel_j_all(n, x)[n];
    if j < 0 && n % 2 == 1 {
        -v
    } else {
        v
    }
}

/// `ln Gamma(x)` via the Lanczos approximation (g = 7, nine terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln n!`, exact summation below 64 and Lanczos above.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Domain and accuracy settings for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub half_width: f64,
    pub tolerance: f64,
    pub max_depth: u32,
}

impl QuadratureSpec {
    pub fn new(half_width: f64, tolerance: f64, max_depth: u32) -> Result<Self> {
        ensure(half_width > 0.0 && half_width.is_finite(), || {
            format!("quadrature half-width must be positive, got {half_width}")
        })?;
        ensure(tolerance > 0.0, || format!("quadrature tolerance must be positive, got {tolerance}"))?;
        ensure(max_depth >= 1, || "quadrature depth must be at least 1".to_string())?;
        Ok(QuadratureSpec { half_width, tolerance, max_depth })
    }
}

/// Value and error estimate from an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// Integrate `f` over `[-half_width, half_width]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<Quadrature> {
    integrate_interval(f, -spec.half_width, spec.half_width, spec.tolerance, spec.max_depth)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS_K[7] * fc;
    let mut g = GK_WEIGHTS_G[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WEIGHTS_K[i] * s;
        if i % 2 == 1 {
            g += GK_WEIGHTS_G[i / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Panels are bisected until each meets its share of `tol` (proportional
/// to its width) or `max_depth` bisections have been made. Returns
/// [`Error::NonConvergence`] if the summed error estimate ends above
/// `10 * tol`.
pub fn integrate_interval<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0 });
    }
    let width = (b - a).abs();
    let mut value = 0.0;
    let mut error = 0.0;
    // start from a few panels so narrow features are not missed by the first rule
    const PANELS: usize = 16;
    let step = (b - a) / PANELS as f64;
    let mut stack: Vec<(f64, f64, u32)> =
        (0..PANELS).rev().map(|i| (a + i as f64 * step, if i + 1 == PANELS { b } else { a + (i + 1) as f64 * step }, 4)).collect();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gauss_kronrod(&f, lo, hi);
        let share = tol * (hi - lo).abs() / width;
        if e <= share || depth + 1 >= max_depth || e <= 1e-15 * v.abs() {
            value += v;
            error += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    if !value.is_finite() || error > 10.0 * tol {
        return Err(Error::NonConvergence { estimate: error, tolerance: tol });
    }
    Ok(Quadrature { value, error })
}
