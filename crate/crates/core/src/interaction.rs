//! Phase-space interaction potentials.
//!
//! Two particles in the rotating frame interact through a potential of the
//! quantised phase-space distance `R_N = 2 sqrt(lambda (N + 1/2))`,
//! `U(R_N) = int dq V_q e^{-lambda q^2/2} L_N(lambda q^2)`, where
//! `V(x) = int dq V_q e^{iqx}`. Coherent-state pairs feel the direct and
//! exchange combinations `U_c = sum_N U(R_N) I_N` and
//! `U_e = sum_N (-1)^N U(R_N) I_N` with overlap weights `I_N`.

use crate::error::{ensure, Error, Result};
use crate::specfun::{bessel_i0_scaled, hermite_function, integrate, laguerre_gen, ln_factorial, ln_gamma, QuadratureSpec};
use crate::C64;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// `R_N = 2 sqrt(lambda (N + 1/2))`.
pub fn phase_distance(n: usize, lambda: f64) -> f64 {
    2.0 * (lambda * (n as f64 + 0.5)).sqrt()
}

/// Relative-motion eigenstate `Phi_N(Delta X)` of the distance operator.
///
/// `Delta X` and `Delta P` obey `[Delta X, Delta P] = 2 i lambda`, so `Phi_N`
/// is an oscillator eigenfunction with length scale `sqrt(2 lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeState {
    pub n: usize,
    pub lambda: f64,
}

impl RelativeState {
    pub fn new(n: usize, lambda: f64) -> Result<Self> {
        ensure(lambda > 0.0, || format!("lambda must be positive, got {lambda}"))?;
        Ok(RelativeState { n, lambda })
    }

    pub fn distance(&self) -> f64 {
        phase_distance(self.n, self.lambda)
    }

    pub fn phi(&self, dx: f64) -> f64 {
        let l = (2.0 * self.lambda).sqrt();
        hermite_function(self.n, dx / l) / l.sqrt()
    }

    /// `int |Phi_N|^2` by quadrature.
    pub fn norm(&self) -> Result<f64> {
        let half = (2.0 * self.lambda).sqrt() * ((2.0 * self.n as f64 + 1.0).sqrt() + 8.0);
        let spec = QuadratureSpec::new(half, 1e-12, 40)?;
        Ok(integrate(|x| self.phi(x).powi(2), &spec)?.value)
    }
}

/// Fourier coefficients `V_q` of a real, even pair potential.
pub type Vq = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied pair potential, described by its Fourier coefficients.
#[derive(Clone)]
pub struct CustomPotential {
    pub label: String,
    pub vq: Vq,
}

impl std::fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CustomPotential({})", self.label)
    }
}

impl CustomPotential {
    /// `V(x) = eps delta(x)`, i.e. `V_q = eps / 2 pi`.
    pub fn delta(eps: f64) -> Self {
        CustomPotential { label: format!("delta({eps})"), vq: Arc::new(move |_| eps / (2.0 * PI)) }
    }

    /// `V(x) = amp e^{-x^2/w^2}`.
    pub fn gaussian(amp: f64, width: f64) -> Self {
        CustomPotential {
            label: format!("gaussian({amp}, {width})"),
            vq: Arc::new(move |q| amp * width / (2.0 * PI.sqrt()) * (-0.25 * q * q * width * width).exp()),
        }
    }

    /// Piecewise-linear `V(|x|)` through `(xs[i], vs[i])`, zero beyond the
    /// table. `xs` must be non-negative and strictly increasing. `V_q` is the
    /// exact transform of the interpolant.
    pub fn tabulated(xs: Vec<f64>, vs: Vec<f64>) -> Result<Self> {
        ensure(xs.len() >= 2 && xs.len() == vs.len(), || "potential table needs at least two (x, V) rows".to_string())?;
        ensure(xs[0] >= 0.0, || "potential table must start at x >= 0".to_string())?;
        ensure(xs.windows(2).all(|w| w[1] > w[0]), || "potential table x values must increase".to_string())?;
        ensure(vs.iter().all(|v| v.is_finite()), || "potential table values must be finite".to_string())?;
        let n = xs.len();
        let label = format!("table({n} rows)");
        let vq = move |q: f64| {
            // (1/pi) int_0^inf V(x) cos(qx) dx over linear segments
            let mut s = 0.0;
            for i in 0..n - 1 {
                let (a, b) = (xs[i], xs[i + 1]);
                let (va, vb) = (vs[i], vs[i + 1]);
                let slope = (vb - va) / (b - a);
                if (q * b).abs() < 1e-4 {
                    // cos(qx) ~ 1 - (qx)^2/2 on the segment
                    let m0 = 0.5 * (va + vb) * (b - a);
                    let m2 = va * (b.powi(3) - a.powi(3)) / 3.0
                        + slope * ((b.powi(4) - a.powi(4)) / 4.0 - a * (b.powi(3) - a.powi(3)) / 3.0);
                    s += m0 - 0.5 * q * q * m2;
                } else {
                    s += (vb * (q * b).sin() - va * (q * a).sin()) / q + slope * ((q * b).cos() - (q * a).cos()) / (q * q);
                }
            }
            s / PI
        };
        Ok(CustomPotential { label, vq: Arc::new(vq) })
    }
}

/// Real-space pair potential.
#[derive(Debug, Clone)]
pub enum RealPotential {
    Contact { eps: f64 },
    Hardcore { a: f64 },
    Custom(CustomPotential),
}

/// How a potential table was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
}

/// Table `U(R_N)` for `N = 0..=N_max` with direct/exchange evaluators.
#[derive(Debug, Clone)]
pub struct PhaseSpacePotential {
    pub lambda: f64,
    pub table: Vec<f64>,
    pub provenance: Provenance,
    kind: TableKind,
}

#[derive(Debug, Clone, Copy)]
enum TableKind {
    Contact { eps: f64 },
    Hardcore,
    General,
}

impl PhaseSpacePotential {
    /// `(N, R_N, U_N)` rows. Hardcore tables pair `R_{2m}` with `R_{2m+1}`.
    pub fn rows(&self) -> Vec<(usize, f64, f64)> {
        self.table
            .iter()
            .enumerate()
            .map(|(n, &u)| {
                let rn = match self.kind {
                    TableKind::Hardcore => phase_distance(2 * (n / 2) + 1, self.lambda),
                    _ => phase_distance(n, self.lambda),
                };
                (n, rn, u)
            })
            .collect()
    }

    /// Direct and exchange potentials between coherent states a distance `r` apart.
    pub fn uc_ue(&self, r: f64) -> Result<(f64, f64)> {
        match self.kind {
            TableKind::Contact { eps } => Ok(uc_ue_contact(eps, self.lambda, r)),
            TableKind::Hardcore | TableKind::General => {
                let need = series_n_max(r, self.lambda);
                ensure(self.table.len() > need, || {
                    format!("potential table has {} entries, R = {r} needs {}", self.table.len(), need + 1)
                })?;
                let overlaps = match self.kind {
                    TableKind::Hardcore => hardcore_overlaps(self.lambda, r, self.table.len() - 1),
                    _ => overlap_coherent_table(self.lambda, r, self.table.len() - 1),
                };
                assemble_uc_ue(&self.table, &overlaps)
            }
        }
    }
}

/// Poisson tail bound `ceil(z) + 40 sqrt(max(1, z)) + 40` with `z = R^2/(4 lambda)`.
pub fn series_n_max(r: f64, lambda: f64) -> usize {
    let z = r * r / (4.0 * lambda);
    (z.ceil() + 40.0 * z.max(1.0).sqrt() + 40.0) as usize
}

/// `U_N` for a custom potential by adaptive quadrature of the Laguerre transform.
pub fn u_general(pot: &CustomPotential, lambda: f64, n_max: usize, quad: &QuadratureSpec) -> Result<PhaseSpacePotential> {
    ensure(lambda > 0.0, || format!("lambda must be positive, got {lambda}"))?;
    let mut table = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let vq = &pot.vq;
        // the integrand is even in q
        let f = |q: f64| vq(q) * (-0.5 * lambda * q * q).exp() * laguerre_gen(n, 0, lambda * q * q);
        let half = crate::specfun::integrate_interval(f, 0.0, quad.half_width, 0.5 * quad.tolerance, quad.max_depth)?;
        table.push(2.0 * half.value);
    }
    Ok(PhaseSpacePotential { lambda, table, provenance: Provenance::Quadrature, kind: TableKind::General })
}

/// Contact interaction `eps delta(x)`: zero at odd `N`, `eps/sqrt(2 pi lambda)` at
/// `N = 0`, and `eps (1+(-1)^N) Gamma((N+1)/2) / (N pi sqrt(2 lambda) Gamma(N/2))` otherwise.
pub fn u_contact(eps: f64, lambda: f64, n: usize) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    if n == 0 {
        return eps / (2.0 * PI * lambda).sqrt();
    }
    let nf = n as f64;
    let ratio = (ln_gamma(0.5 * (nf + 1.0)) - ln_gamma(0.5 * nf)).exp();
    2.0 * eps / (nf * PI * (2.0 * lambda).sqrt()) * ratio
}

pub fn contact_table(eps: f64, lambda: f64, n_max: usize) -> PhaseSpacePotential {
    PhaseSpacePotential {
        lambda,
        table: (0..=n_max).map(|n| u_contact(eps, lambda, n)).collect(),
        provenance: Provenance::ClosedForm,
        kind: TableKind::Contact { eps },
    }
}

/// Closed-form direct and exchange potentials for contact interactions:
/// `U_c = U_e = eps/sqrt(2 pi lambda) e^{-z} I_0(z)`, `z = R^2/(4 lambda)`.
pub fn uc_ue_contact(eps: f64, lambda: f64, r: f64) -> (f64, f64) {
    let z = r * r / (4.0 * lambda);
    let uc = eps / (2.0 * PI * lambda).sqrt() * bessel_i0_scaled(z);
    (uc, uc)
}

/// Largest odd `N` for which the hardcore double sum is evaluated exactly.
pub const HARDCORE_EXACT_MAX: usize = 127;

/// Hardcore interaction of radius `a`. Odd `N` use the double sum (evaluated
/// in exact integer arithmetic up to [`HARDCORE_EXACT_MAX`], where the f64
/// sum would lose all digits to cancellation) and the equivalent single
/// product [`hardcore_closed_form`] above it. Even `N` repeat `N + 1`.
pub fn u_hardcore(a: f64, lambda: f64, n: usize) -> f64 {
    let odd = 2 * (n / 2) + 1;
    let s = if odd <= HARDCORE_EXACT_MAX { hardcore_double_sum(odd) } else { hardcore_closed_form(odd) };
    a * (2.0 * lambda / PI).sqrt() * s
}

/// `2^N / N! sum_{k,l} (-1)^{k+l} (N!)^2 (N-k-l)! / (4^{k+l} k! l! (N-2k)! (N-2l)!)`
/// evaluated exactly with big integers and rounded once.
pub fn hardcore_double_sum(n: usize) -> f64 {
    let m = n / 2;
    let mut fact = vec![BigInt::one()];
    for i in 1..=n {
        let next = &fact[i - 1] * BigInt::from(i);
        fact.push(next);
    }
    // A_k = N! / (k! (N-2k)!) is an integer
    let a: Vec<BigInt> = (0..=m).map(|k| &fact[n] / (&fact[k] * &fact[n - 2 * k])).collect();
    let mut sum = BigInt::zero();
    for k in 0..=m {
        for l in 0..=m {
            let term = (&a[k] * &a[l] * &fact[n - k - l]) << (2 * (2 * m - k - l));
            if (k + l) % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
    }
    // value = sum * 2^N / (N! 4^{2m})
    let num = sum << n;
    let den = &fact[n] << (4 * m);
    ratio_to_f64(&num, &den)
}

fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = 80i64 - (num.bits() as i64 - den.bits() as i64);
    let q = if shift >= 0 { (num << shift as usize) / den } else { num / (den << (-shift) as usize) };
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    let mag = q.abs().to_f64().unwrap();
    sign * mag * 2f64.powi(-shift as i32)
}

/// The same hardcore sum for odd `N = 2m+1` as a single product:
/// `2 (2m+1) C(2m, m) / 4^m`. This follows from the half-range moment
/// `int_0^inf y h_N(y)^2 dy = N h_{N-1}(0)^2` of the Hermite functions.
pub fn hardcore_closed_form(n: usize) -> f64 {
    let m = n / 2;
    let central: f64 = (1..=m).map(|i| (2 * i - 1) as f64 / (2 * i) as f64).product();
    2.0 * (2 * m + 1) as f64 * central
}

pub fn hardcore_table(a: f64, lambda: f64, n_max: usize) -> PhaseSpacePotential {
    PhaseSpacePotential {
        lambda,
        table: (0..=n_max).map(|n| u_hardcore(a, lambda, n)).collect(),
        provenance: Provenance::ClosedForm,
        kind: TableKind::Hardcore,
    }
}

/// Returns a warning when `a` leaves the small-core regime `a << sqrt(lambda)`.
pub fn hardcore_validity_warning(a: f64, lambda: f64) -> Option<String> {
    (a > 0.3 * lambda.sqrt()).then(|| format!("hardcore radius a = {a} exceeds 0.3 sqrt(lambda); first-order result unreliable"))
}

/// Direct and exchange hardcore potentials: `U_c = 2 sum_m U(R_{2m+1}) I_{2m+1}`, `U_e = 0`.
/// `m_max` bounds the series (the Poisson weight beyond it should be negligible).
pub fn uc_hardcore(a: f64, lambda: f64, r: f64, m_max: usize) -> (f64, f64) {
    let z = r * r / (4.0 * lambda);
    let mut uc = 0.0;
    for m in 0..=m_max {
        let n = 2 * m + 1;
        uc += 2.0 * u_hardcore(a, lambda, n) * poisson(z, n);
    }
    (uc, 0.0)
}

/// `U_c` with the linear approximation `U(R_N) ~ (2a/pi) R_N` in place of the exact table.
pub fn uc_hardcore_linear(a: f64, lambda: f64, r: f64, m_max: usize) -> f64 {
    let z = r * r / (4.0 * lambda);
    (0..=m_max)
        .map(|m| {
            let n = 2 * m + 1;
            2.0 * (2.0 * a / PI) * phase_distance(n, lambda) * poisson(z, n)
        })
        .sum()
}

fn poisson(z: f64, n: usize) -> f64 {
    if z == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * z.ln() - z - ln_factorial(n)).exp()
}

/// Overlap weight of two coherent states a distance `r` apart:
/// `I_N = z^N e^{-z} / N!`, `z = R^2/(4 lambda)`.
pub fn overlap_coherent(n: usize, lambda: f64, r: f64) -> f64 {
    poisson(r * r / (4.0 * lambda), n)
}

pub fn overlap_coherent_table(lambda: f64, r: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max).map(|n| overlap_coherent(n, lambda, r)).collect()
}

/// Hardcore relative states come in degenerate pairs `Phi_{2m} = sgn(x) Phi_{2m+1}`;
/// each member of a pair carries the odd weight `I_{2m+1}`.
pub fn hardcore_overlaps(lambda: f64, r: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max).map(|n| overlap_coherent(2 * (n / 2) + 1, lambda, r)).collect()
}

/// Squeeze parameters `(v, u)` for a Gaussian of inverse width `beta`.
pub fn squeeze_params(beta: f64, lambda: f64) -> (f64, f64) {
    let b = lambda.sqrt() * beta;
    (0.5 * (b + 1.0 / b), 0.5 * (b - 1.0 / b))
}

/// `|<N| -gamma, -xi>|^2` for `N = 0..=n_max`: number-state weights of a
/// displaced squeezed state with real displacement `gamma` and real
/// squeeze parameters `v = cosh r`, `u = -e^{i theta} sinh r`.
pub fn overlap_squeezed_table(n_max: usize, gamma: f64, v: f64, u: f64) -> Result<Vec<f64>> {
    let deviation = v * v - u * u - 1.0;
    if deviation.abs() > 1e-10 || v < 1.0 - 1e-12 {
        return Err(Error::InvalidSqueeze { deviation });
    }
    let r = v.max(1.0).acosh();
    let (sh, ch) = (r.sinh(), r.cosh());
    let e_theta = if sh == 0.0 { C64::new(1.0, 0.0) } else { C64::new(-u / sh, 0.0) };
    let g = C64::new(gamma, 0.0);
    let y = g.conj() * e_theta * sh - g * ch;
    // omega = sqrt(e^{i(theta + pi)})
    let omega = (-e_theta).sqrt();
    let zeta = y / (omega * 2.0 * ch);
    let s2 = 0.5 * r.tanh();
    let envelope = (-g.norm_sqr() + 0.5 * (g.conj() * g.conj() * e_theta + g * g * e_theta.conj()).re * r.tanh()).exp() / ch;
    // g_N = (tanh r / 2)^{N/2} H_N(w) / sqrt(N!) with w s = zeta
    let mut out = Vec::with_capacity(n_max + 1);
    let mut prev = C64::new(0.0, 0.0);
    let mut cur = C64::new(1.0, 0.0);
    for n in 0..=n_max {
        out.push(cur.norm_sqr() * envelope);
        let nf = n as f64;
        let next = (cur * zeta * 2.0 - prev * (2.0 * nf.sqrt() * s2)) / (nf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    Ok(out)
}

pub fn overlap_squeezed(n: usize, gamma: f64, v: f64, u: f64) -> Result<f64> {
    Ok(overlap_squeezed_table(n, gamma, v, u)?[n])
}

/// `U_c = sum U_N I_N`, `U_e = sum (-1)^N U_N I_N`.
pub fn assemble_uc_ue(table: &[f64], overlaps: &[f64]) -> Result<(f64, f64)> {
    ensure(table.len() == overlaps.len(), || {
        format!("potential table ({}) and overlaps ({}) differ in length", table.len(), overlaps.len())
    })?;
    let mut uc = 0.0;
    let mut ue = 0.0;
    for n in 0..table.len() / 2 * 2 {
        if n % 2 == 1 {
            continue;
        }
        // pair terms so equal even/odd products cancel exactly in U_e
        let even = table[n] * overlaps[n];
        let odd = table[n + 1] * overlaps[n + 1];
        uc += even + odd;
        ue += even - odd;
    }
    if table.len() % 2 == 1 {
        let last = table.len() - 1;
        uc += table[last] * overlaps[last];
        ue += table[last] * overlaps[last];
    }
    Ok((uc, ue))
}
