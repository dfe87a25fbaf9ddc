//! Classical many-body dynamics of kicked oscillators.
//!
//! Lab-frame motion integrates `x'' = -x - sum V'(x_i - x_j)` between the
//! delta kicks `p <- p + K tau sin x` and samples every harmonic period.
//! The rotating-frame description replaces the kicks by the lattice
//! Hamiltonian and the pair potential by its time average `U_c(R)`.

use crate::error::{ensure, Error, Result};
use crate::lattice::ModelParams;
use crate::C64;
use serde::Serialize;
use std::f64::consts::PI;

/// Pair distance below which rotating-frame forces are treated as singular.
pub const R_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// `z = x + i p` in the laboratory frame.
    Lab,
    /// `Z = X + i P` in the frame rotating with the trap.
    Rotating,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManyBodyState {
    pub z: Vec<C64>,
    pub frame: Frame,
    pub t: f64,
}

impl ManyBodyState {
    pub fn new(z: Vec<C64>, frame: Frame) -> Result<Self> {
        ensure(!z.is_empty(), || "state needs at least one atom".to_string())?;
        ensure(z.iter().all(|v| v.re.is_finite() && v.im.is_finite()), || "state coordinates must be finite".to_string())?;
        Ok(ManyBodyState { z, frame, t: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Pair interaction, either a real-space model for the lab frame or the
/// time-averaged phase-space form for the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassicalPotentialSpec {
    /// `V(x) = (eps/pi) sigma/(x^2 + sigma^2)`.
    ContactSmoothed { eps: f64, sigma: f64 },
    /// `V(x) = (2a/x)^n`.
    HardcorePowerLaw { a: f64, n: u32 },
    /// `U_c(R) = eps/(pi R)`.
    RwaContact { eps: f64 },
    /// `U_c(R) = 2 a R/pi`.
    RwaHardcore { a: f64 },
}

impl ClassicalPotentialSpec {
    pub fn contact(eps: f64) -> Self {
        ClassicalPotentialSpec::ContactSmoothed { eps, sigma: 0.1 }
    }

    pub fn hardcore(a: f64) -> Self {
        ClassicalPotentialSpec::HardcorePowerLaw { a, n: 20 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassicalPotentialSpec::ContactSmoothed { eps, sigma } => {
                ensure(sigma > 0.0, || format!("sigma must be positive, got {sigma}"))?;
                ensure(eps.is_finite(), || "eps must be finite".to_string())
            }
            ClassicalPotentialSpec::HardcorePowerLaw { a, n } => {
                ensure(n >= 4 && n % 2 == 0, || format!("power-law exponent must be even and >= 4, got {n}"))?;
                ensure(a >= 0.0, || format!("hardcore radius must be non-negative, got {a}"))
            }
            ClassicalPotentialSpec::RwaContact { eps } => ensure(eps.is_finite(), || "eps must be finite".to_string()),
            ClassicalPotentialSpec::RwaHardcore { a } => {
                ensure(a >= 0.0, || format!("hardcore radius must be non-negative, got {a}"))
            }
        }
    }

    pub fn is_lab(&self) -> bool {
        matches!(self, ClassicalPotentialSpec::ContactSmoothed { .. } | ClassicalPotentialSpec::HardcorePowerLaw { .. })
    }

    /// The rotating-frame potential a lab-frame model averages to.
    pub fn rwa_counterpart(&self) -> Self {
        match *self {
            ClassicalPotentialSpec::ContactSmoothed { eps, .. } => ClassicalPotentialSpec::RwaContact { eps },
            ClassicalPotentialSpec::HardcorePowerLaw { a, .. } => ClassicalPotentialSpec::RwaHardcore { a },
            other => other,
        }
    }

    /// `dV/dx` of a lab-frame model.
    fn lab_dv(&self, d: f64) -> f64 {
        match *self {
            ClassicalPotentialSpec::ContactSmoothed { eps, sigma } => {
                let den = d * d + sigma * sigma;
                -2.0 * eps / PI * sigma * d / (den * den)
            }
            ClassicalPotentialSpec::HardcorePowerLaw { a, n } => {
                if a == 0.0 {
                    return 0.0;
                }
                -(n as f64) * (2.0 * a / d).powi(n as i32) / d
            }
            _ => 0.0,
        }
    }

    fn lab_v(&self, d: f64) -> f64 {
        match *self {
            ClassicalPotentialSpec::ContactSmoothed { eps, sigma } => eps / PI * sigma / (d * d + sigma * sigma),
            ClassicalPotentialSpec::HardcorePowerLaw { a, n } => (2.0 * a / d).powi(n as i32),
            _ => 0.0,
        }
    }

    /// `U_c(R)` of a rotating-frame model.
    pub fn rwa_u(&self, r: f64) -> f64 {
        match self.rwa_counterpart() {
            ClassicalPotentialSpec::RwaContact { eps } => eps / (PI * r),
            ClassicalPotentialSpec::RwaHardcore { a } => 2.0 * a * r / PI,
            _ => unreachable!(),
        }
    }

    /// `dU_c/dR` of a rotating-frame model.
    pub fn rwa_du(&self, r: f64) -> f64 {
        match self.rwa_counterpart() {
            ClassicalPotentialSpec::RwaContact { eps } => -eps / (PI * r * r),
            ClassicalPotentialSpec::RwaHardcore { a } => 2.0 * a / PI,
            _ => unreachable!(),
        }
    }
}

/// Tolerances for the adaptive lab-frame integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabIntegrator {
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
}

impl Default for LabIntegrator {
    fn default() -> Self {
        LabIntegrator { rtol: 1e-10, atol: 1e-12, min_step: 1e-12 }
    }
}

fn lab_rhs(y: &[f64], pot: &ClassicalPotentialSpec, dy: &mut [f64]) {
    let n = y.len() / 2;
    for i in 0..n {
        dy[2 * i] = y[2 * i + 1];
        dy[2 * i + 1] = -y[2 * i];
    }
    for i in 0..n {
        for j in i + 1..n {
            let f = pot.lab_dv(y[2 * i] - y[2 * j]);
            dy[2 * i + 1] -= f;
            dy[2 * j + 1] += f;
        }
    }
}

// Dormand-Prince 5(4) tableau; the flow is autonomous so the nodes are not needed
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates the free-plus-interaction flow from `t0` to `t1`, returning the
/// step size to try next.
fn dopri_segment(
    y: &mut [f64],
    t0: f64,
    t1: f64,
    mut h: f64,
    pot: &ClassicalPotentialSpec,
    opts: &LabIntegrator,
) -> Result<f64> {
    let m = y.len();
    let mut k = vec![vec![0.0; m]; 7];
    let mut tmp = vec![0.0; m];
    let mut y5 = vec![0.0; m];
    let mut t = t0;
    lab_rhs(y, pot, &mut k[0]);
    while t < t1 {
        let last = t + h >= t1;
        let step = if last { t1 - t } else { h };
        for s in 1..7 {
            for idx in 0..m {
                let mut acc = y[idx];
                for (r, kr) in k.iter().enumerate().take(s) {
                    acc += step * A[s][r] * kr[idx];
                }
                tmp[idx] = acc;
            }
            lab_rhs(&tmp, pot, &mut k[s]);
        }
        let mut err: f64 = 0.0;
        for idx in 0..m {
            let mut hi = y[idx];
            let mut lo = y[idx];
            for s in 0..7 {
                hi += step * B5[s] * k[s][idx];
                lo += step * B4[s] * k[s][idx];
            }
            y5[idx] = hi;
            let scale = opts.atol + opts.rtol * y[idx].abs().max(hi.abs());
            err = err.max(((hi - lo) / scale).abs());
        }
        if !err.is_finite() {
            err = 1e10;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + step };
            y.copy_from_slice(&y5);
            // first-same-as-last: the seventh stage is f at the new point
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        let proposal = step * factor;
        if err <= 1.0 && last {
            // keep the unclipped step for the next segment
            return Ok(if step < h { h } else { proposal });
        }
        h = proposal;
        if h < opts.min_step {
            return Err(Error::StepRejected { t, h });
        }
    }
    Ok(h)
}

/// Lab-frame kicked dynamics sampled every `2 pi` right after the kick at
/// that instant. `state` holds `x + i p`; the returned states hold `X + i P`,
/// which coincide with `x + i p` at the sampling times.
pub fn poincare_evolve(
    state: &ManyBodyState,
    params: &ModelParams,
    pot: &ClassicalPotentialSpec,
    n_periods: usize,
    opts: &LabIntegrator,
) -> Result<Vec<ManyBodyState>> {
    ensure(state.frame == Frame::Lab, || "poincare_evolve needs a lab-frame state".to_string())?;
    ensure(pot.is_lab(), || "poincare_evolve needs a lab-frame potential".to_string())?;
    pot.validate()?;
    let tau = params.tau();
    let kicks_per_period = params.q0() as usize;
    let strength = params.k() * tau;
    let free = match *pot {
        ClassicalPotentialSpec::ContactSmoothed { eps, .. } => eps == 0.0,
        ClassicalPotentialSpec::HardcorePowerLaw { a, .. } => a == 0.0,
        _ => false,
    };
    let mut y: Vec<f64> = state.z.iter().flat_map(|z| [z.re, z.im]).collect();
    let kick = |y: &mut [f64]| {
        for i in 0..y.len() / 2 {
            y[2 * i + 1] += strength * y[2 * i].sin();
        }
    };
    let (sn, cs) = tau.sin_cos();
    let sample = |y: &[f64], t: f64| ManyBodyState {
        z: (0..y.len() / 2).map(|i| C64::new(y[2 * i], y[2 * i + 1])).collect(),
        frame: Frame::Rotating,
        t,
    };
    let mut out = Vec::with_capacity(n_periods + 1);
    let mut t = state.t;
    let mut h = 0.01;
    kick(&mut y);
    out.push(sample(&y, t));
    for _ in 0..n_periods {
        for _ in 0..kicks_per_period {
            if free {
                for i in 0..y.len() / 2 {
                    let (x, p) = (y[2 * i], y[2 * i + 1]);
                    y[2 * i] = x * cs + p * sn;
                    y[2 * i + 1] = p * cs - x * sn;
                }
            } else {
                h = dopri_segment(&mut y, t, t + tau, h, pot, opts)?;
            }
            t += tau;
            kick(&mut y);
        }
        out.push(sample(&y, t));
    }
    Ok(out)
}

/// Lab-frame energy `sum (x^2 + p^2)/2 + sum_{i<j} V(x_i - x_j)` between kicks.
pub fn lab_energy(state: &ManyBodyState, pot: &ClassicalPotentialSpec) -> f64 {
    let mut e: f64 = state.z.iter().map(|z| 0.5 * z.norm_sqr()).sum();
    for i in 0..state.len() {
        for j in i + 1..state.len() {
            e += pot.lab_v(state.z[i].re - state.z[j].re);
        }
    }
    e
}

/// `d/dt (X + iP)` for the rotating-frame equations of motion.
fn rwa_rhs(z: &[C64], params: &ModelParams, pot: &ClassicalPotentialSpec, t: f64, out: &mut [C64]) -> Result<()> {
    let k = params.k();
    let q0 = params.q0();
    for (o, zi) in out.iter_mut().zip(z) {
        let (x, p) = (zi.re, zi.im);
        let (dh_dx, dh_dp) = if q0 == 4 {
            (-0.5 * k * x.sin(), -0.5 * k * p.sin())
        } else {
            let mut gx = 0.0;
            let mut gp = 0.0;
            for j in 0..q0 {
                let (sj, cj) = (2.0 * PI * j as f64 / q0 as f64).sin_cos();
                let s = (x * cj + p * sj).sin();
                gx -= cj * s;
                gp -= sj * s;
            }
            (k / q0 as f64 * gx, k / q0 as f64 * gp)
        };
        *o = C64::new(dh_dp, -dh_dx);
    }
    let mut terms = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        terms.clear();
        for j in 0..z.len() {
            if j == i {
                continue;
            }
            let d = z[i] - z[j];
            let r = d.norm();
            if r < R_MIN {
                return Err(Error::CollisionSingularity { t, i: i.min(j), j: i.max(j), r });
            }
            // dZ_i/dt gains -i U'(R) (Z_i - Z_j)/R
            terms.push(C64::new(0.0, -pot.rwa_du(r) / r) * d);
        }
        // summing in value order makes relabelling the atoms exact
        terms.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        out[i] += terms.iter().fold(C64::new(0.0, 0.0), |acc, v| acc + v);
    }
    Ok(())
}

/// Rotating-frame trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub states: Vec<ManyBodyState>,
}

impl Trajectory {
    /// Largest `|Z_i(t) - Z_i(0)|` per atom.
    pub fn max_excursions(&self) -> Vec<f64> {
        let z0 = &self.states[0].z;
        (0..z0.len())
            .map(|i| self.states.iter().map(|s| (s.z[i] - z0[i]).norm()).fold(0.0, f64::max))
            .collect()
    }
}

/// Default RK4 step for [`rwa_evolve`].
pub const RWA_DT: f64 = 2.0 * PI / 200.0;

/// Classic fourth-order Runge-Kutta on the rotating-frame equations up to
/// `t_end`, recording every `record_every` steps (and the final state).
pub fn rwa_evolve(
    state: &ManyBodyState,
    params: &ModelParams,
    pot: &ClassicalPotentialSpec,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    ensure(state.frame == Frame::Rotating, || "rwa_evolve needs a rotating-frame state".to_string())?;
    ensure(dt > 0.0 && t_end >= state.t, || "rwa_evolve needs dt > 0 and t_end >= t".to_string())?;
    ensure(record_every >= 1, || "record_every must be at least 1".to_string())?;
    pot.validate()?;
    let pot = pot.rwa_counterpart();
    let n = state.len();
    let steps = ((t_end - state.t) / dt).round() as usize;
    let mut z = state.z.clone();
    let mut t = state.t;
    let zero = C64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut tmp = vec![zero; n];
    let mut states = vec![ManyBodyState { z: z.clone(), frame: Frame::Rotating, t }];
    for step in 1..=steps {
        rwa_rhs(&z, params, &pot, t, &mut k1)?;
        for i in 0..n {
            tmp[i] = z[i] + k1[i] * (0.5 * dt);
        }
        rwa_rhs(&tmp, params, &pot, t, &mut k2)?;
        for i in 0..n {
            tmp[i] = z[i] + k2[i] * (0.5 * dt);
        }
        rwa_rhs(&tmp, params, &pot, t, &mut k3)?;
        for i in 0..n {
            tmp[i] = z[i] + k3[i] * dt;
        }
        rwa_rhs(&tmp, params, &pot, t, &mut k4)?;
        for i in 0..n {
            z[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
        }
        t = state.t + step as f64 * dt;
        if step % record_every == 0 || step == steps {
            states.push(ManyBodyState { z: z.clone(), frame: Frame::Rotating, t });
        }
    }
    Ok(Trajectory { states })
}

/// `H = sum (K/q0) sum_j cos(X cos(2 pi j/q0) + P sin(2 pi j/q0)) + sum_{i<j} U_c(R_ij)`.
pub fn rwa_energy(state: &ManyBodyState, params: &ModelParams, pot: &ClassicalPotentialSpec) -> f64 {
    let q0 = params.q0();
    let mut e = 0.0;
    for z in &state.z {
        e += if q0 == 4 {
            0.5 * params.k() * (z.re.cos() + z.im.cos())
        } else {
            (0..q0)
                .map(|j| {
                    let (sj, cj) = (2.0 * PI * j as f64 / q0 as f64).sin_cos();
                    (z.re * cj + z.im * sj).cos()
                })
                .sum::<f64>()
                * params.k()
                / q0 as f64
        };
    }
    for i in 0..state.len() {
        for j in i + 1..state.len() {
            e += pot.rwa_u((state.z[i] - state.z[j]).norm());
        }
    }
    e
}

/// Pair force `F_i = sum_{j != i} U'(R_ij) e_ji` at the given positions.
fn linear_forces(z: &[C64], pot: &ClassicalPotentialSpec) -> Vec<C64> {
    (0..z.len())
        .map(|i| {
            let mut f = C64::new(0.0, 0.0);
            for j in 0..z.len() {
                if j != i {
                    let d = z[j] - z[i];
                    let r = d.norm();
                    f += d / r * pot.rwa_du(r);
                }
            }
            f
        })
        .collect()
}

/// Small-displacement solution about lattice sites where `cos X = cos P = 1`:
/// `Z_i(t) = Z_i(0) + (2/K)(e^{iKt/2} - 1) sum_{j != i} U'(R_ij) e_ji`.
pub fn linear_solution(initials: &[C64], params: &ModelParams, pot: &ClassicalPotentialSpec, t: f64) -> Vec<C64> {
    let k = params.k();
    let phase = C64::from_polar(1.0, 0.5 * k * t) - 1.0;
    linear_forces(initials, &pot.rwa_counterpart())
        .into_iter()
        .zip(initials)
        .map(|(f, z0)| z0 + phase * f * (2.0 / k))
        .collect()
}

/// Linear-theory oscillation amplitude `2 |F_i| / |K|` per atom.
pub fn linear_amplitudes(initials: &[C64], params: &ModelParams, pot: &ClassicalPotentialSpec) -> Vec<f64> {
    linear_forces(initials, &pot.rwa_counterpart()).iter().map(|f| 2.0 * f.norm() / params.k().abs()).collect()
}

/// Radius of the stability circle around a lattice site.
pub fn survival_radius() -> f64 {
    (2f64.sqrt() - 1.0) * PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Threshold {
    /// Critical contact strength `eps_c = 12 (sqrt2 - 1) pi^2 |K|`.
    CriticalStrength(f64),
    /// Critical hardcore chain length `N_c = (sqrt2 - 1) pi^2 |K| / (4a)`.
    CriticalAtoms(f64),
}

pub fn crystal_thresholds(params: &ModelParams, pot: &ClassicalPotentialSpec) -> Threshold {
    let k = params.k().abs();
    match pot.rwa_counterpart() {
        ClassicalPotentialSpec::RwaContact { .. } => Threshold::CriticalStrength(12.0 * survival_radius() * PI * k),
        ClassicalPotentialSpec::RwaHardcore { a } => Threshold::CriticalAtoms(survival_radius() * PI * k / (4.0 * a)),
        _ => unreachable!(),
    }
}

/// Edge-atom amplitude of a long chain: `eps/(12 pi |K|)` for contact,
/// `4a(N-1)/(pi |K|)` for hardcore.
pub fn predicted_edge_amplitude(params: &ModelParams, pot: &ClassicalPotentialSpec, n_atoms: usize) -> f64 {
    let k = params.k().abs();
    match pot.rwa_counterpart() {
        ClassicalPotentialSpec::RwaContact { eps } => eps / (12.0 * PI * k),
        ClassicalPotentialSpec::RwaHardcore { a } => 4.0 * a * (n_atoms as f64 - 1.0) / (PI * k),
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrystalReport {
    pub n_atoms: usize,
    pub periods: usize,
    /// Largest `|Z_i(t) - Z_i(0)|` per atom.
    pub max_excursion: Vec<f64>,
    /// Oscillation amplitude per atom, half the largest excursion.
    pub amplitude: Vec<f64>,
    pub edge_amplitude: f64,
    pub predicted_edge_amplitude: f64,
    pub linear_amplitude: Vec<f64>,
    pub threshold: Threshold,
    pub survival_radius: f64,
    pub survived: bool,
}

/// Initial chain of atoms on the `P = 0` line at `X = 2 pi (j - (N-1)/2)`, rounded down.
pub fn chain_initials(n_atoms: usize) -> Vec<C64> {
    let shift = ((n_atoms - 1) / 2) as f64;
    (0..n_atoms).map(|j| C64::new(2.0 * PI * (j as f64 - shift), 0.0)).collect()
}

/// Evolves a chain for `n_periods` harmonic periods in the rotating frame
/// and checks whether the edge atoms stay inside the stability circle.
pub fn crystal_run(n_atoms: usize, params: &ModelParams, pot: &ClassicalPotentialSpec, n_periods: usize) -> Result<CrystalReport> {
    ensure(n_atoms >= 2, || format!("a chain needs at least two atoms, got {n_atoms}"))?;
    let z0 = chain_initials(n_atoms);
    let state = ManyBodyState::new(z0.clone(), Frame::Rotating)?;
    let traj = rwa_evolve(&state, params, pot, 2.0 * PI * n_periods as f64, RWA_DT, 1)?;
    let max_excursion = traj.max_excursions();
    let amplitude: Vec<f64> = max_excursion.iter().map(|e| 0.5 * e).collect();
    let edge_amplitude = amplitude[0].max(amplitude[n_atoms - 1]);
    Ok(CrystalReport {
        n_atoms,
        periods: n_periods,
        max_excursion,
        amplitude,
        edge_amplitude,
        predicted_edge_amplitude: predicted_edge_amplitude(params, pot, n_atoms),
        linear_amplitude: linear_amplitudes(&z0, params, pot),
        threshold: crystal_thresholds(params, pot),
        survival_radius: survival_radius(),
        survived: edge_amplitude < survival_radius(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_body_params() -> ModelParams {
        ModelParams::new(-0.02 / PI, 4, 1.0).unwrap()
    }

    fn three_body_initials() -> Vec<C64> {
        let tp = 2.0 * PI;
        vec![C64::new(0.0, tp), C64::new(-tp, -tp), C64::new(tp, -tp)]
    }

    #[test]
    fn free_poincare_is_stationary() {
        let p = ModelParams::new(0.0, 4, 1.0).unwrap();
        let s = ManyBodyState::new(vec![C64::new(1.3, -0.4), C64::new(-2.0, 0.7)], Frame::Lab).unwrap();
        let out = poincare_evolve(&s, &p, &ClassicalPotentialSpec::contact(0.0), 20, &LabIntegrator::default()).unwrap();
        for st in &out {
            for (a, b) in st.z.iter().zip(&s.z) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn single_atom_at_site_stays_put() {
        let p = three_body_params();
        let s = ManyBodyState::new(vec![C64::new(0.0, 2.0 * PI)], Frame::Lab).unwrap();
        let out = poincare_evolve(&s, &p, &ClassicalPotentialSpec::contact(0.0), 200, &LabIntegrator::default()).unwrap();
        let worst = out.iter().map(|st| (st.z[0] - s.z[0]).norm()).fold(0.0, f64::max);
        assert!(worst < 0.1, "{worst}");
    }

    #[test]
    fn interacting_lab_flow_matches_free_rotation_far_apart() {
        // widely separated atoms barely interact through a narrow Lorentzian
        let p = ModelParams::new(0.0, 4, 1.0).unwrap();
        let s = ManyBodyState::new(vec![C64::new(0.3, 0.0), C64::new(0.0, 0.2)], Frame::Lab).unwrap();
        let pot = ClassicalPotentialSpec::ContactSmoothed { eps: 1e-12, sigma: 0.1 };
        let out = poincare_evolve(&s, &p, &pot, 3, &LabIntegrator::default()).unwrap();
        for (a, b) in out[3].z.iter().zip(&s.z) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn lab_energy_conserved_between_kicks() {
        let p = ModelParams::new(0.0, 4, 1.0).unwrap();
        let s = ManyBodyState::new(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.5)], Frame::Lab).unwrap();
        let pot = ClassicalPotentialSpec::contact(0.5);
        let e0 = lab_energy(&s, &pot);
        let out = poincare_evolve(&s, &p, &pot, 5, &LabIntegrator::default()).unwrap();
        let e1 = lab_energy(&ManyBodyState { frame: Frame::Lab, ..out[5].clone() }, &pot);
        assert!((e1 - e0).abs() < 1e-8 * e0, "{e0} {e1}");
    }

    #[test]
    fn rwa_stationary_points() {
        let p = three_body_params();
        let s = ManyBodyState::new(vec![C64::new(0.0, PI)], Frame::Rotating).unwrap();
        let tr = rwa_evolve(&s, &p, &ClassicalPotentialSpec::RwaContact { eps: 0.0 }, 100.0, RWA_DT, 100).unwrap();
        assert!((tr.states.last().unwrap().z[0] - s.z[0]).norm() < 1e-14);
    }

    #[test]
    fn collision_detected() {
        let p = three_body_params();
        let s = ManyBodyState::new(vec![C64::new(0.0, 0.0), C64::new(1e-4, 0.0)], Frame::Rotating).unwrap();
        let r = rwa_evolve(&s, &p, &ClassicalPotentialSpec::RwaContact { eps: 0.1 }, 1.0, RWA_DT, 1);
        assert!(matches!(r, Err(Error::CollisionSingularity { .. })));
    }

    #[test]
    fn rwa_energy_conserved() {
        let p = three_body_params();
        let s = ManyBodyState::new(three_body_initials(), Frame::Rotating).unwrap();
        let pot = ClassicalPotentialSpec::RwaContact { eps: 0.194 };
        let e0 = rwa_energy(&s, &p, &pot);
        let tr = rwa_evolve(&s, &p, &pot, 2.0 * PI * 2000.0, RWA_DT, 1000).unwrap();
        for st in &tr.states {
            assert!((rwa_energy(st, &p, &pot) - e0).abs() < 1e-6 * e0.abs());
        }
    }

    #[test]
    fn translation_and_permutation() {
        let p = three_body_params();
        let pot = ClassicalPotentialSpec::RwaHardcore { a: 0.05 };
        let z = three_body_initials();
        let a = rwa_evolve(&ManyBodyState::new(z.clone(), Frame::Rotating).unwrap(), &p, &pot, 50.0, RWA_DT, 1000).unwrap();
        let perm = vec![z[2], z[0], z[1]];
        let b = rwa_evolve(&ManyBodyState::new(perm, Frame::Rotating).unwrap(), &p, &pot, 50.0, RWA_DT, 1000).unwrap();
        let (za, zb) = (&a.states.last().unwrap().z, &b.states.last().unwrap().z);
        assert_eq!(za[0], zb[1]);
        assert_eq!(za[1], zb[2]);
        assert_eq!(za[2], zb[0]);
        // without a lattice the interaction alone is translation covariant
        let flat = ModelParams::new(0.0, 4, 1.0).unwrap();
        let shift = C64::new(0.37, -1.1);
        let c = rwa_evolve(&ManyBodyState::new(z.clone(), Frame::Rotating).unwrap(), &flat, &pot, 20.0, RWA_DT, 1000).unwrap();
        let moved: Vec<C64> = z.iter().map(|v| v + shift).collect();
        let d = rwa_evolve(&ManyBodyState::new(moved, Frame::Rotating).unwrap(), &flat, &pot, 20.0, RWA_DT, 1000).unwrap();
        for (u, v) in c.states.last().unwrap().z.iter().zip(&d.states.last().unwrap().z) {
            assert!((u + shift - v).norm() < 1e-12);
        }
    }

    #[test]
    fn linear_solution_examples() {
        let p = three_body_params();
        let pot = ClassicalPotentialSpec::RwaContact { eps: 0.194 };
        let z = three_body_initials();
        assert_eq!(linear_solution(&z, &p, &pot, 0.0), z);
        let back = linear_solution(&z, &p, &pot, 4.0 * PI / p.k().abs());
        for (a, b) in back.iter().zip(&z) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn thresholds() {
        let p = three_body_params();
        match crystal_thresholds(&p, &ClassicalPotentialSpec::contact(0.1)) {
            Threshold::CriticalStrength(e) => assert!((e - 0.3123).abs() < 1e-4),
            _ => panic!(),
        }
        match crystal_thresholds(&p, &ClassicalPotentialSpec::hardcore(0.05)) {
            Threshold::CriticalAtoms(n) => assert!((n - 0.13).abs() < 0.005),
            _ => panic!(),
        }
        let pot = ClassicalPotentialSpec::RwaHardcore { a: 0.05 };
        let a2 = predicted_edge_amplitude(&p, &pot, 2);
        let a5 = predicted_edge_amplitude(&p, &pot, 5);
        assert!((a5 - 4.0 * a2).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(ClassicalPotentialSpec::HardcorePowerLaw { a: 0.05, n: 3 }.validate().is_err());
        assert!(ClassicalPotentialSpec::ContactSmoothed { eps: 0.1, sigma: 0.0 }.validate().is_err());
        assert!(crystal_run(1, &three_body_params(), &ClassicalPotentialSpec::RwaContact { eps: 0.1 }, 1).is_err());
    }
}
