//! Quasienergy bands of the square phase-space lattice `(K/2)(cos X + cos P)`
//! at rational `lambda / 2 pi = p/q`.
//!
//! In the Zak basis the Hamiltonian becomes a `q x q` cyclic tridiagonal
//! (Harper) matrix. We parametrise Bloch momenta by the phases
//! `theta_X = 2 pi p k_X` and `theta_P = 2 pi p k_P`; the spectrum depends on
//! them only through `cos theta_X + cos theta_P`.

use crate::error::{ensure, Error, Result};
use crate::grid::PhaseGrid;
use crate::C64;
use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reduced fraction `p/q` with `lambda = 2 pi p / q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RationalFlux {
    p: u32,
    q: u32,
}

impl RationalFlux {
    pub fn new(p: u32, q: u32) -> Result<Self> {
        ensure(p >= 1 && q >= 1, || format!("flux p/q needs p, q >= 1, got {p}/{q}"))?;
        ensure(gcd(p, q) == 1, || format!("p = {p} and q = {q} are not coprime"))?;
        Ok(RationalFlux { p, q })
    }
    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn q(&self) -> u32 {
        self.q
    }
    pub fn lambda(&self) -> f64 {
        TWO_PI * self.p as f64 / self.q as f64
    }
    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

/// Bloch momentum in the zone `0 <= k_X <= 1`, `0 <= k_P <= 1/p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochK {
    pub kx: f64,
    pub kp: f64,
}

impl BlochK {
    pub fn new(flux: &RationalFlux, kx: f64, kp: f64) -> Result<Self> {
        let kp_max = 1.0 / flux.p as f64;
        ensure((0.0..=1.0).contains(&kx), || format!("k_X = {kx} outside [0, 1]"))?;
        ensure((0.0..=kp_max).contains(&kp), || format!("k_P = {kp} outside [0, {kp_max}]"))?;
        Ok(BlochK { kx, kp })
    }

    fn thetas(&self, flux: &RationalFlux) -> (f64, f64) {
        (TWO_PI * flux.p as f64 * self.kx, TWO_PI * flux.p as f64 * self.kp)
    }
}

/// Which Zak-coefficient convention a Harper matrix is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// Periodic coefficients `u_{m+q} = u_m`; hoppings carry `e^{±i theta_P/q}`.
    /// These are the physical coefficients used for Q-functions.
    Periodic,
    /// `u_m e^{-i m theta_P / q}`: unit hoppings and a twist `e^{±i theta_P}`
    /// on the closing bond. Exactly periodic in `theta_P` with period `2 pi`.
    Twisted,
}

/// Diagonal entries `2 cos((theta_X + 2 pi (p m mod q)) / q)`.
fn harper_diagonal(flux: &RationalFlux, theta_x: f64) -> Vec<f64> {
    let q = flux.q as u64;
    (0..q)
        .map(|m| {
            let r = (flux.p as u64 * m) % q;
            2.0 * ((theta_x + TWO_PI * r as f64) / q as f64).cos()
        })
        .collect()
}

/// Harper matrix at Bloch phases `(theta_X, theta_P)`; eigenvalues times `K/4`
/// are the quasienergies.
pub fn harper_matrix_theta(flux: &RationalFlux, theta_x: f64, theta_p: f64, gauge: Gauge) -> DMatrix<C64> {
    let q = flux.q as usize;
    let diag = harper_diagonal(flux, theta_x);
    let mut h = DMatrix::<C64>::zeros(q, q);
    for m in 0..q {
        h[(m, m)] += C64::new(diag[m], 0.0);
    }
    match gauge {
        Gauge::Periodic => {
            let hop = C64::from_polar(1.0, theta_p / q as f64);
            for m in 0..q {
                h[(m, (m + q - 1) % q)] += hop;
                h[(m, (m + 1) % q)] += hop.conj();
            }
        }
        Gauge::Twisted => {
            let twist = C64::from_polar(1.0, theta_p);
            for m in 0..q {
                let down = if m == 0 { twist } else { C64::new(1.0, 0.0) };
                let up = if m == q - 1 { twist.conj() } else { C64::new(1.0, 0.0) };
                h[(m, (m + q - 1) % q)] += down;
                h[(m, (m + 1) % q)] += up;
            }
        }
    }
    h
}

/// Harper matrix at Bloch momentum `k` in the periodic gauge.
pub fn harper_matrix(flux: &RationalFlux, k: &BlochK) -> DMatrix<C64> {
    let (tx, tp) = k.thetas(flux);
    harper_matrix_theta(flux, tx, tp, Gauge::Periodic)
}

/// Ascending eigenvalues and matching eigenvectors (as columns).
fn hermitian_eigen(h: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = h.nrows();
    if n == 1 {
        return (vec![h[(0, 0)].re], DMatrix::from_element(1, 1, C64::new(1.0, 0.0)));
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `cos theta_X + cos theta_P - 1 - Tr(T_q ... T_1)/2` with
/// `T_j = [[x - 2 cos(j lambda), -1], [1, 0]]` and `x = 4E/K`.
pub fn secular_residual(flux: &RationalFlux, theta_x: f64, theta_p: f64, x: f64) -> f64 {
    let q = flux.q as u64;
    // running product [[a, b], [c, d]]
    let (mut a, mut b, mut c, mut d) = (1.0, 0.0, 0.0, 1.0);
    for j in 1..=q {
        let r = (flux.p as u64 * j) % q;
        let t = x - 2.0 * (TWO_PI * r as f64 / q as f64).cos();
        // [[t, -1], [1, 0]] * [[a, b], [c, d]]
        let (na, nb) = (t * a - c, t * b - d);
        c = a;
        d = b;
        a = na;
        b = nb;
    }
    theta_x.cos() + theta_p.cos() - 1.0 - 0.5 * (a + d)
}

const SECULAR_FAIL: f64 = 1e-6;

/// Distance in `x` from a root of the secular equation, from a quadratic
/// model of `f` about `x`. For large `q` the trace is steep, so the absolute
/// residual amplifies rounding in `x` while this stays near machine precision.
/// At band edges `f'` vanishes and the curvature term takes over.
pub fn secular_distance(flux: &RationalFlux, theta_x: f64, theta_p: f64, x: f64) -> f64 {
    let q = flux.q as u64;
    // [value, d/dx, d2/dx2] of each entry of the running product
    let mut m = [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]];
    for j in 1..=q {
        let r = (flux.p as u64 * j) % q;
        let t = x - 2.0 * (TWO_PI * r as f64 / q as f64).cos();
        let [a, b, c, d] = m;
        let row = |u: [f64; 3], w: [f64; 3]| [t * u[0] - w[0], u[0] + t * u[1] - w[1], 2.0 * u[1] + t * u[2] - w[2]];
        m = [row(a, c), row(b, d), a, b];
    }
    let f = theta_x.cos() + theta_p.cos() - 1.0 - 0.5 * (m[0][0] + m[3][0]);
    let f1 = (0.5 * (m[0][1] + m[3][1])).abs();
    let f2 = (0.5 * (m[0][2] + m[3][2])).abs();
    let linear = f.abs() / f1.max(1.0);
    let quadratic = (2.0 * f.abs() / f2.max(1.0)).sqrt();
    linear.min(quadratic)
}

/// Sorted quasienergies at Bloch phases, validated against the transfer-matrix
/// secular equation.
pub fn quasienergies_theta(flux: &RationalFlux, theta_x: f64, theta_p: f64, k: f64) -> Result<Vec<f64>> {
    let h = harper_matrix_theta(flux, theta_x, theta_p, Gauge::Periodic);
    let (xs, _) = hermitian_eigen(h);
    let mut worst: f64 = 0.0;
    for &x in &xs {
        worst = worst.max(secular_distance(flux, theta_x, theta_p, x));
    }
    if worst > SECULAR_FAIL {
        return Err(Error::SecularMismatch { residual: worst });
    }
    let mut es: Vec<f64> = xs.iter().map(|x| 0.25 * k * x).collect();
    es.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(es)
}

/// Sorted quasienergies at Bloch momentum `k` for kick strength `kick`.
pub fn quasienergies(flux: &RationalFlux, k: &BlochK, kick: f64) -> Result<Vec<f64>> {
    let (tx, tp) = k.thetas(flux);
    quasienergies_theta(flux, tx, tp, kick)
}

/// Quasienergies sampled over the zone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSpectrum {
    pub flux: RationalFlux,
    pub kxs: Vec<f64>,
    pub kps: Vec<f64>,
    /// `energies[i * kps.len() + j]` holds the sorted quasienergies at `(kxs[i], kps[j])`.
    pub energies: Vec<Vec<f64>>,
}

impl BandSpectrum {
    /// Largest `|E_b + E_{q-1-b}|` over all samples.
    pub fn chiral_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for es in &self.energies {
            let n = es.len();
            for b in 0..n {
                worst = worst.max((es[b] + es[n - 1 - b]).abs());
            }
        }
        worst
    }
}

/// Quasienergies on an `nkx x nkp` grid spanning `[0,1] x [0,1/p]`.
pub fn band_surface(flux: &RationalFlux, kick: f64, nkx: usize, nkp: usize) -> Result<BandSpectrum> {
    ensure(nkx >= 2 && nkp >= 2, || "band grid needs at least 2 points per axis".to_string())?;
    let kxs = crate::grid::linspace(0.0, 1.0, nkx);
    let kps = crate::grid::linspace(0.0, 1.0 / flux.p as f64, nkp);
    let mut energies = Vec::with_capacity(nkx * nkp);
    for &kx in &kxs {
        for &kp in &kps {
            energies.push(quasienergies(flux, &BlochK { kx, kp }, kick)?);
        }
    }
    Ok(BandSpectrum { flux: *flux, kxs, kps, energies })
}

/// Band intervals `[E_min, E_max]` for one flux.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ButterflyEntry {
    pub p: u32,
    pub q: u32,
    pub lambda_over_2pi: f64,
    pub bands: Vec<(f64, f64)>,
}

/// Union of quasienergies over a `samples x samples` grid of Bloch phases in
/// `[0, 2 pi]^2`, always including the band-edge phases `(0,0)` and `(pi,pi)`.
pub fn band_intervals(flux: &RationalFlux, kick: f64, samples: usize) -> Result<Vec<(f64, f64)>> {
    let q = flux.q as usize;
    let mut lo = vec![f64::INFINITY; q];
    let mut hi = vec![f64::NEG_INFINITY; q];
    let mut visit = |tx: f64, tp: f64| -> Result<()> {
        let es = quasienergies_theta(flux, tx, tp, kick)?;
        for b in 0..q {
            lo[b] = lo[b].min(es[b]);
            hi[b] = hi[b].max(es[b]);
        }
        Ok(())
    };
    visit(0.0, 0.0)?;
    visit(PI, PI)?;
    let thetas = crate::grid::linspace(0.0, TWO_PI, samples.max(2));
    for &tx in &thetas {
        for &tp in &thetas {
            visit(tx, tp)?;
        }
    }
    Ok(lo.into_iter().zip(hi).collect())
}

/// Band intervals for every reduced `p/q` in `(0, 1]` with `q <= q_max`,
/// ordered by `p/q`.
pub fn butterfly(q_max: u32, kick: f64, samples: usize) -> Result<Vec<ButterflyEntry>> {
    ensure(q_max >= 2, || format!("q_max must be at least 2, got {q_max}"))?;
    let mut fluxes = Vec::new();
    for q in 1..=q_max {
        for p in 1..=q {
            if gcd(p, q) == 1 {
                fluxes.push(RationalFlux { p, q });
            }
        }
    }
    fluxes.sort_by(|a, b| (a.p as u64 * b.q as u64).cmp(&(b.p as u64 * a.q as u64)));
    let work = |f: &RationalFlux| -> Result<ButterflyEntry> {
        Ok(ButterflyEntry { p: f.p, q: f.q, lambda_over_2pi: f.ratio(), bands: band_intervals(f, kick, samples)? })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        fluxes.par_iter().map(work).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        fluxes.iter().map(work).collect()
    }
}

/// The momentum shift `(q/p) mod 1` that maps each band onto itself.
pub fn degeneracy_shift(flux: &RationalFlux) -> f64 {
    (flux.q % flux.p) as f64 / flux.p as f64
}

/// Largest `|E_b(k_X, k_P) - E_b(k_X + (q/p mod 1), k_P)|` over an `n x n`
/// grid of `[0,1) x [0,1/p)`.
pub fn degeneracy_check(flux: &RationalFlux, kick: f64, n: usize) -> Result<f64> {
    let shift = degeneracy_shift(flux);
    let kp_max = 1.0 / flux.p as f64;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let kx = i as f64 / n as f64;
        let kx2 = (kx + shift).fract();
        for j in 0..n {
            let kp = kp_max * j as f64 / n as f64;
            let a = quasienergies(flux, &BlochK { kx, kp }, kick)?;
            let b = quasienergies(flux, &BlochK { kx: kx2, kp }, kick)?;
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    Ok(worst)
}

/// Gap closure threshold for Chern numbers.
pub const GAP_MIN: f64 = 1e-10;

/// Chern data for every band at one flux.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChernReport {
    pub p: u32,
    pub q: u32,
    pub grid: usize,
    pub per_band: Vec<i64>,
    pub gaps: Vec<GapLabel>,
}

/// Chern label of the gap above band `below` (1-based count of bands below).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapLabel {
    pub bands_below: usize,
    pub midpoint: f64,
    /// Sum over bands below the gap if it lies at negative energy, above otherwise.
    pub chern: i64,
    /// Sum over the bands below, regardless of sign of the midpoint.
    pub chern_below: i64,
    /// Solution `(s, t)` of `r = q s + p t` with `|t| <= q/2`.
    pub diophantine: (i64, i64),
}

/// `(s, t)` with `r = q s + p t` and `|t| <= q/2` (the smaller `|t|` when two qualify).
pub fn diophantine(flux: &RationalFlux, r: i64) -> (i64, i64) {
    let (p, q) = (flux.p as i64, flux.q as i64);
    let mut best: Option<(i64, i64)> = None;
    for t in -q..=q {
        if 2 * t.abs() > q {
            continue;
        }
        if (r - p * t).rem_euclid(q) == 0 {
            let s = (r - p * t) / q;
            if best.is_none_or(|(_, bt)| t.abs() < bt.abs()) {
                best = Some((s, t));
            }
        }
    }
    best.expect("a Diophantine solution with |t| <= q/2 always exists")
}

struct EigenGrid {
    nx: usize,
    np: usize,
    /// ascending energies and eigenvector columns per point, `idx = i * np + j`
    vals: Vec<Vec<f64>>,
    vecs: Vec<DMatrix<C64>>,
}

fn eigen_grid(flux: &RationalFlux, n_g: usize) -> EigenGrid {
    let q = flux.q as usize;
    let nx = n_g * q;
    let np = n_g;
    let point = |idx: usize| {
        let (i, j) = (idx / np, idx % np);
        let tx = TWO_PI * q as f64 * i as f64 / nx as f64;
        let tp = TWO_PI * j as f64 / np as f64;
        hermitian_eigen(harper_matrix_theta(flux, tx, tp, Gauge::Twisted))
    };
    #[cfg(feature = "parallel")]
    let pts: Vec<(Vec<f64>, DMatrix<C64>)> = {
        use rayon::prelude::*;
        (0..nx * np).into_par_iter().map(point).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let pts: Vec<(Vec<f64>, DMatrix<C64>)> = (0..nx * np).map(point).collect();
    let (vals, vecs) = pts.into_iter().unzip();
    EigenGrid { nx, np, vals, vecs }
}

/// `det <psi_a(n) | psi_b(n')>` over the selected (matrix-ordered) bands.
fn link(grid: &EigenGrid, from: usize, to: usize, bands: &[usize]) -> C64 {
    let nb = bands.len();
    let a = &grid.vecs[from];
    let b = &grid.vecs[to];
    let m = DMatrix::<C64>::from_fn(nb, nb, |r, c| {
        let (ca, cb) = (a.column(bands[r]), b.column(bands[c]));
        ca.iter().zip(cb.iter()).map(|(x, y)| x.conj() * y).sum()
    });
    let d = if nb == 1 { m[(0, 0)] } else { m.determinant() };
    d / d.norm()
}

fn chern_of(grid: &EigenGrid, bands: &[usize]) -> i64 {
    let (nx, np) = (grid.nx, grid.np);
    let at = |i: usize, j: usize| (i % nx) * np + (j % np);
    let mut total = 0.0;
    for i in 0..nx {
        for j in 0..np {
            let u1 = link(grid, at(i, j), at(i + 1, j), bands);
            let u2 = link(grid, at(i + 1, j), at(i + 1, j + 1), bands);
            let u3 = link(grid, at(i, j + 1), at(i + 1, j + 1), bands);
            let u4 = link(grid, at(i, j), at(i, j + 1), bands);
            total += (u1 * u2 * u3.conj() * u4.conj()).arg();
        }
    }
    // orientation: theta_P first, then theta_X, so that flux 1/3 at K > 0 reads (1, -2, 1)
    (-total / TWO_PI).round() as i64
}

fn minimum_gaps(flux: &RationalFlux, grid: &EigenGrid) -> Vec<f64> {
    let q = flux.q as usize;
    let mut gaps = vec![f64::INFINITY; q.saturating_sub(1)];
    let mut scan = |vals: &[f64]| {
        for b in 0..q.saturating_sub(1) {
            gaps[b] = gaps[b].min(vals[b + 1] - vals[b]);
        }
    };
    for v in &grid.vals {
        scan(v);
    }
    // the spectrum is extremal at cos theta_X + cos theta_P = +-2
    for (tx, tp) in [(0.0, 0.0), (PI, PI)] {
        let (v, _) = hermitian_eigen(harper_matrix_theta(flux, tx, tp, Gauge::Twisted));
        scan(&v);
    }
    gaps
}

/// Matrix eigen-index of energy band `b` (ascending in E) for kick sign.
fn matrix_index(q: usize, b: usize, kick: f64) -> usize {
    if kick >= 0.0 {
        b
    } else {
        q - 1 - b
    }
}

fn check_grid(n_g: usize, kick: f64) -> Result<()> {
    ensure(n_g >= 12, || format!("plaquette grid must be at least 12, got {n_g}"))?;
    ensure(kick != 0.0, || "K must be nonzero for band topology".to_string())
}

/// Chern number of band `b` (0-based, ascending energy) by the plaquette
/// link-variable method on an `(n_g q) x n_g` grid of the magnetic zone.
pub fn chern_number(flux: &RationalFlux, b: usize, kick: f64, n_g: usize) -> Result<i64> {
    chern_of_bands(flux, &[b], kick, n_g)
}

/// Total Chern number of a set of bands, via determinants of overlap matrices.
/// Fails with [`Error::GapClosure`] if any selected band touches an unselected neighbour.
pub fn chern_of_bands(flux: &RationalFlux, bands: &[usize], kick: f64, n_g: usize) -> Result<i64> {
    check_grid(n_g, kick)?;
    let q = flux.q as usize;
    ensure(!bands.is_empty() && bands.iter().all(|&b| b < q), || format!("band indices must lie in 0..{q}"))?;
    let grid = eigen_grid(flux, n_g);
    let gaps = minimum_gaps(flux, &grid);
    let mats: Vec<usize> = bands.iter().map(|&b| matrix_index(q, b, kick)).collect();
    for &m in &mats {
        for (lower, upper) in [(m.wrapping_sub(1), m), (m, m + 1)] {
            if upper >= q || lower >= q || mats.contains(&lower) && mats.contains(&upper) {
                continue;
            }
            if gaps[lower] < GAP_MIN {
                return Err(Error::GapClosure { lower, upper, gap: gaps[lower] });
            }
        }
    }
    Ok(chern_of(&grid, &mats))
}

/// Chern numbers of all bands plus symmetric gap labels.
pub fn chern_numbers(flux: &RationalFlux, kick: f64, n_g: usize) -> Result<ChernReport> {
    check_grid(n_g, kick)?;
    let q = flux.q as usize;
    let grid = eigen_grid(flux, n_g);
    let gaps = minimum_gaps(flux, &grid);
    if let Some((b, &g)) = gaps.iter().enumerate().find(|(_, &g)| g < GAP_MIN) {
        return Err(Error::GapClosure { lower: b, upper: b + 1, gap: g });
    }
    let per_band: Vec<i64> = (0..q).map(|b| chern_of(&grid, &[matrix_index(q, b, kick)])).collect();
    let mut labels = Vec::new();
    let edges = band_intervals(flux, kick, 2)?;
    for r in 1..q {
        let midpoint = 0.5 * (edges[r - 1].1 + edges[r].0);
        let below: i64 = per_band[..r].iter().sum();
        let above: i64 = per_band[r..].iter().sum();
        labels.push(GapLabel {
            bands_below: r,
            midpoint,
            chern: if midpoint < 0.0 { below } else { above },
            chern_below: below,
            diophantine: diophantine(flux, r as i64),
        });
    }
    Ok(ChernReport { p: flux.p, q: flux.q, grid: n_g, per_band, gaps: labels })
}

/// Gaussian window (in units of `sqrt(lambda)`) for the delta-comb sum.
pub const ZAK_WINDOW: f64 = 10.0;
const ZAK_WINDOW_CHECK: f64 = 12.0;
const ZAK_TOL: f64 = 1e-10;

/// Coherent-state overlaps `<alpha|psi_{b,k}>` for one Zak eigenstate.
pub struct ZakState {
    pub flux: RationalFlux,
    pub k: BlochK,
    pub band: usize,
    /// Periodic-gauge coefficients, `sum |u_m|^2 = 1`.
    pub u: Vec<C64>,
    /// `sum_m u_m e^{2 pi i m r / q}` for `r = 0..q`.
    dft: Vec<C64>,
}

impl ZakState {
    pub fn new(flux: &RationalFlux, k: &BlochK, band: usize, kick: f64) -> Result<Self> {
        let q = flux.q as usize;
        ensure(band < q, || format!("band index {band} out of range 0..{q}"))?;
        ensure(kick != 0.0, || "K must be nonzero".to_string())?;
        let (_, vecs) = hermitian_eigen(harper_matrix(flux, k));
        let col = matrix_index(q, band, kick);
        let u: Vec<C64> = vecs.column(col).iter().copied().collect();
        let dft = (0..q)
            .map(|r| (0..q).map(|m| u[m] * C64::from_polar(1.0, TWO_PI * (m * r) as f64 / q as f64)).sum())
            .collect();
        Ok(ZakState { flux: *flux, k: *k, band, u, dft })
    }

    fn overlap_window(&self, x0: f64, p0: f64, half: f64) -> C64 {
        let lam = self.flux.lambda();
        let q = self.flux.q as i64;
        let spacing = TWO_PI / q as f64;
        let offset = lam * self.k.kp;
        let l_lo = ((x0 - half - offset) / spacing).ceil() as i64;
        let l_hi = ((x0 + half - offset) / spacing).floor() as i64;
        let norm = (PI * lam).powf(-0.25);
        let mut acc = C64::new(0.0, 0.0);
        for l in l_lo..=l_hi {
            let xl = offset + spacing * l as f64;
            let dx = xl - x0;
            // conj <X_l|alpha>
            let bra = C64::from_polar(norm * (-dx * dx / (2.0 * lam)).exp(), -p0 * (xl - 0.5 * x0) / lam);
            let bloch = C64::from_polar(1.0, TWO_PI * self.k.kx * l as f64 / q as f64);
            acc += self.dft[l.rem_euclid(q) as usize] * bloch * bra;
        }
        acc * (lam / q as f64).sqrt()
    }

    /// `<alpha|psi>` for the coherent state centred at `(x0, p0)`.
    pub fn coherent_overlap(&self, x0: f64, p0: f64) -> Result<C64> {
        let s = self.flux.lambda().sqrt();
        let a = self.overlap_window(x0, p0, ZAK_WINDOW * s);
        let b = self.overlap_window(x0, p0, ZAK_WINDOW_CHECK * s);
        let change = (a - b).norm();
        if change > ZAK_TOL {
            return Err(Error::NonConvergence { estimate: change, tolerance: ZAK_TOL });
        }
        Ok(a)
    }

    /// Husimi value `|<alpha|psi>|^2 / pi`.
    pub fn q_value(&self, x0: f64, p0: f64) -> Result<f64> {
        Ok(self.coherent_overlap(x0, p0)?.norm_sqr() / PI)
    }
}

/// Husimi Q-function of the eigenstate `(b, k)` on the grid `xs x ps`.
pub fn eigenstate_q_function(
    flux: &RationalFlux,
    k: &BlochK,
    band: usize,
    kick: f64,
    xs: Vec<f64>,
    ps: Vec<f64>,
) -> Result<PhaseGrid> {
    let state = ZakState::new(flux, k, band, kick)?;
    let failure = std::sync::Mutex::new(None);
    let grid = PhaseGrid::from_fn(xs, ps, |x, p| match state.q_value(x, p) {
        Ok(v) => v,
        Err(e) => {
            *failure.lock().unwrap() = Some(e);
            f64::NAN
        }
    });
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(grid),
    }
}
