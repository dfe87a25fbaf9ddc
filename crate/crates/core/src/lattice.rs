//! Rotating-frame lattice Hamiltonians and their Fock-space representation.
//!
//! Under the rotating-wave approximation a kicked oscillator at resonance
//! `tau = 2 pi / q0` is governed by
//! `H(X, P) = (K/q0) sum_j cos(X cos(2 pi j/q0) + P sin(2 pi j/q0))`,
//! a square lattice for `q0 = 4`, hexagonal for `q0 = 3, 6` and
//! quasiperiodic for `q0 = 5` or `q0 >= 7`.

use crate::error::{ensure, Error, Result};
use crate::grid::{linspace, PhaseGrid};
use crate::specfun::ln_factorial;
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Physical configuration shared by every simulation.
///
/// `tau` is derived from `q0` and cannot be set independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    k: f64,
    q0: u32,
    tau: f64,
    lambda: f64,
    kappa: f64,
    n0: f64,
}

impl ModelParams {
    /// Kick strength `k` (may be negative), resonance `q0 >= 3`, effective
    /// Planck constant `lambda > 0`; no dissipation.
    pub fn new(k: f64, q0: u32, lambda: f64) -> Result<Self> {
        ensure(k.is_finite(), || format!("K must be finite, got {k}"))?;
        ensure(q0 >= 3, || format!("q0 must be at least 3, got {q0}"))?;
        ensure(lambda > 0.0 && lambda.is_finite(), || format!("lambda must be positive, got {lambda}"))?;
        Ok(ModelParams { k, q0, tau: 2.0 * PI / q0 as f64, lambda, kappa: 0.0, n0: 0.0 })
    }

    /// Add a damping rate `kappa >= 0` and bath occupation `n0 >= 0`.
    pub fn with_dissipation(mut self, kappa: f64, n0: f64) -> Result<Self> {
        ensure(kappa >= 0.0 && kappa.is_finite(), || format!("kappa must be non-negative, got {kappa}"))?;
        ensure(n0 >= 0.0 && n0.is_finite(), || format!("n0 must be non-negative, got {n0}"))?;
        self.kappa = kappa;
        self.n0 = n0;
        Ok(self)
    }

    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn q0(&self) -> u32 {
        self.q0
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn n0(&self) -> f64 {
        self.n0
    }
}

/// A point `(X, P)` of the rotating-frame phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(x: f64, p: f64) -> Self {
        PhasePoint { x, p }
    }

    /// Coherent-state label `alpha = (X + iP) / sqrt(2 lambda)`.
    pub fn to_alpha(self, lambda: f64) -> C64 {
        C64::new(self.x, self.p) / (2.0 * lambda).sqrt()
    }

    pub fn from_alpha(alpha: C64, lambda: f64) -> Self {
        let s = (2.0 * lambda).sqrt();
        PhasePoint { x: s * alpha.re, p: s * alpha.im }
    }
}

/// Classical rotating-frame Hamiltonian at `pt`.
pub fn h_rwa_field(params: &ModelParams, pt: PhasePoint) -> f64 {
    let q0 = params.q0;
    if q0 == 4 {
        return 0.5 * params.k * (pt.x.cos() + pt.p.cos());
    }
    let mut s = 0.0;
    for j in 1..=q0 {
        let t = 2.0 * PI * j as f64 / q0 as f64;
        s += (pt.x * t.cos() + pt.p * t.sin()).cos();
    }
    params.k * s / q0 as f64
}

/// `h_rwa_field / K` sampled on a `nx x np` grid.
pub fn render_lattice(
    params: &ModelParams,
    x_range: (f64, f64),
    p_range: (f64, f64),
    nx: usize,
    np: usize,
) -> Result<PhaseGrid> {
    ensure(nx >= 2 && np >= 2, || format!("lattice resolution must be at least 2x2, got {nx}x{np}"))?;
    ensure(params.k != 0.0, || "K must be nonzero to scale the lattice field".to_string())?;
    let xs = linspace(x_range.0, x_range.1, nx);
    let ps = linspace(p_range.0, p_range.1, np);
    let k = params.k;
    Ok(PhaseGrid::from_fn(xs, ps, |x, p| h_rwa_field(params, PhasePoint::new(x, p)) / k))
}

/// Number-basis element `<l| exp(i(X cos t + P sin t)) |k>` for `l <= k`:
/// `e^{-lambda/4 + i(k-l)(pi/2 - t)} sqrt(l!/k!) (lambda/2)^{(k-l)/2} L_l^{k-l}(lambda/2)`.
pub fn displacement_element(l: usize, k: usize, lambda: f64, t: f64) -> C64 {
    assert!(l <= k, "displacement_element needs l <= k");
    let d = k - l;
    let x = 0.5 * lambda;
    let column = normalised_laguerre_column(d, x, l + 1);
    C64::from_polar(column[l], d as f64 * (0.5 * PI - t))
}

/// `e^{-x/2} x^{d/2} sqrt(n!/(n+d)!) L_n^d(x)` for `n < len`, by a
/// recurrence that never forms the factorials.
fn normalised_laguerre_column(d: usize, x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    let df = d as f64;
    let l0 = if d == 0 {
        (-0.5 * x).exp()
    } else if x == 0.0 {
        0.0
    } else {
        (-0.5 * x + 0.5 * df * x.ln() - 0.5 * ln_factorial(d)).exp()
    };
    out.push(l0);
    if len == 1 {
        return out;
    }
    out.push((1.0 + df - x) * l0 / (1.0 + df).sqrt());
    for n in 1..len - 1 {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + df - x) * out[n] - (nf * (nf + df)).sqrt() * out[n - 1])
            / ((nf + 1.0) * (nf + 1.0 + df)).sqrt();
        out.push(next);
    }
    out
}

/// Truncated `m x m` matrix of `exp(i(X cos t + P sin t))`; every entry is exact.
pub fn displacement_matrix(m: usize, lambda: f64, t: f64) -> DMatrix<C64> {
    let x = 0.5 * lambda;
    let mut mat = DMatrix::<C64>::zeros(m, m);
    for d in 0..m {
        let col = normalised_laguerre_column(d, x, m - d);
        let up = C64::from_polar(1.0, d as f64 * (0.5 * PI - t));
        let down = C64::from_polar(1.0, d as f64 * (0.5 * PI + t));
        for (n, &v) in col.iter().enumerate() {
            mat[(n, n + d)] = up * v;
            if d > 0 {
                mat[(n + d, n)] = down * v;
            }
        }
    }
    mat
}

/// Dense operator on the first `cutoff` number states.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub cutoff: usize,
    pub matrix: DMatrix<C64>,
    pub hermitian: bool,
}

impl FockOperator {
    pub fn identity(cutoff: usize) -> Self {
        FockOperator { cutoff, matrix: DMatrix::identity(cutoff, cutoff), hermitian: true }
    }

    /// `(A + A^dagger)/2`, flagged Hermitian.
    pub fn hermitian_part(matrix: DMatrix<C64>) -> Self {
        let cutoff = matrix.nrows();
        let h = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        FockOperator { cutoff, matrix: h, hermitian: true }
    }

    /// Sorted eigenvalues; requires the Hermitian flag.
    pub fn eigenvalues(&self) -> Vec<f64> {
        assert!(self.hermitian, "eigenvalues requested for a non-Hermitian operator");
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Largest deviation from Hermiticity, `max |A - A^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let a = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..self.cutoff {
            for j in 0..self.cutoff {
                worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

/// `cos(X cos t + P sin t)` on the first `m` number states.
pub fn cos_quadrature_fock(m: usize, lambda: f64, t: f64) -> FockOperator {
    FockOperator::hermitian_part(displacement_matrix(m, lambda, t))
}

/// `(K/2)(cos X + cos P)` on the first `m` number states.
pub fn build_hsq_fock(params: &ModelParams, m: usize) -> Result<FockOperator> {
    ensure(m >= 16, || format!("Fock cutoff must be at least 16, got {m}"))?;
    let cx = displacement_matrix(m, params.lambda, 0.0);
    let cp = displacement_matrix(m, params.lambda, 0.5 * PI);
    Ok(FockOperator::hermitian_part((cx + cp) * C64::new(0.5 * params.k, 0.0)))
}

/// General `q0` rotating-frame Hamiltonian on the first `m` number states.
pub fn build_hrwa_fock(params: &ModelParams, m: usize) -> Result<FockOperator> {
    if params.q0 == 4 {
        return build_hsq_fock(params, m);
    }
    ensure(m >= 16, || format!("Fock cutoff must be at least 16, got {m}"))?;
    let mut acc = DMatrix::<C64>::zeros(m, m);
    for j in 1..=params.q0 {
        let t = 2.0 * PI * j as f64 / params.q0 as f64;
        acc += displacement_matrix(m, params.lambda, t);
    }
    Ok(FockOperator::hermitian_part(acc * C64::new(params.k / params.q0 as f64, 0.0)))
}

/// Checks that the lowest `count` eigenvalues of the Hamiltonian move by less
/// than `tol` when the cutoff doubles from `m` to `2m`.
pub fn audit_cutoff(params: &ModelParams, m: usize, count: usize, tol: f64) -> Result<f64> {
    let a = build_hrwa_fock(params, m)?.eigenvalues();
    let b = build_hrwa_fock(params, 2 * m)?.eigenvalues();
    let shift = a.iter().zip(&b).take(count).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if shift > tol {
        return Err(Error::CutoffTooSmall {
            detail: format!("lowest {count} eigenvalues shift by {shift:.3e} when the cutoff doubles from {m}"),
        });
    }
    Ok(shift)
}

/// Number-basis coefficients `e^{-|alpha|^2/2} alpha^n / sqrt(n!)` for `n < m`.
pub fn coherent_vector(alpha: C64, m: usize) -> Vec<C64> {
    let mut c = Vec::with_capacity(m);
    let mut v = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..m {
        c.push(v);
        v = v * alpha / ((n + 1) as f64).sqrt();
    }
    c
}

/// `<alpha| op |alpha>` in the truncated basis.
///
/// Reliable while `cutoff >= 4|alpha|^2 + 40`; fails with
/// [`Error::CutoffTooSmall`] when the truncated coherent state has lost more
/// than `1e-8` of its norm.
pub fn coherent_expectation(op: &FockOperator, alpha: C64) -> Result<C64> {
    let c = coherent_vector(alpha, op.cutoff);
    let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    if norm < 1.0 - 1e-8 {
        return Err(Error::CutoffTooSmall {
            detail: format!("coherent state |alpha|^2 = {:.3} keeps norm {norm:.10} in {} levels", alpha.norm_sqr(), op.cutoff),
        });
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..op.cutoff {
        let row: C64 = c.iter().enumerate().map(|(j, cj)| op.matrix[(i, j)] * cj).sum();
        acc += c[i].conj() * row;
    }
    Ok(acc)
}

/// Area `S = Im(xi2 conj(xi1)) / 2` swept by composing displacements `xi1` then `xi2`;
/// the accumulated phase factor is `e^{iS/lambda}`.
pub fn geometric_phase(xi1: C64, xi2: C64) -> f64 {
    0.5 * (xi2 * xi1.conj()).im
}
