//! Sampled real fields over the (X, P) plane.

use serde::Serialize;

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { b } else { a + step * i as f64 }).collect()
        }
    }
}

/// Real samples on a rectangular (X, P) grid, stored with X as the slow index:
/// `values[i * ps.len() + j]` is the value at `(xs[i], ps[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Vec<f64>,
}

impl PhaseGrid {
    pub fn from_fn(xs: Vec<f64>, ps: Vec<f64>, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let np = ps.len();
        let row = |i: usize| -> Vec<f64> { ps.iter().map(|&p| f(xs[i], p)).collect() };
        #[cfg(feature = "parallel")]
        let rows: Vec<Vec<f64>> = {
            use rayon::prelude::*;
            (0..xs.len()).into_par_iter().map(row).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<Vec<f64>> = (0..xs.len()).map(row).collect();
        let mut values = Vec::with_capacity(xs.len() * np);
        for r in rows {
            values.extend(r);
        }
        PhaseGrid { xs, ps, values }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ps.len() + j]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Strict local maxima over a `(2r+1)^2` neighbourhood whose value is at
    /// least `rel_threshold` times the global maximum. Returns `(X, P, value)`.
    pub fn local_maxima(&self, r: usize, rel_threshold: f64) -> Vec<(f64, f64, f64)> {
        let (nx, np) = (self.xs.len(), self.ps.len());
        let floor = rel_threshold * self.max();
        let mut out = Vec::new();
        for i in 0..nx {
            for j in 0..np {
                let v = self.get(i, j);
                if v < floor {
                    continue;
                }
                let mut is_max = true;
                'scan: for di in -(r as isize)..=(r as isize) {
                    for dj in -(r as isize)..=(r as isize) {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (ii, jj) = (i as isize + di, j as isize + dj);
                        if ii < 0 || jj < 0 || ii >= nx as isize || jj >= np as isize {
                            continue;
                        }
                        let w = self.get(ii as usize, jj as usize);
                        // ties broken towards the lexicographically first cell
                        if w > v || (w == v && (di, dj) < (0, 0)) {
                            is_max = false;
                            break 'scan;
                        }
                    }
                }
                if is_max {
                    out.push((self.xs[i], self.ps[j], v));
                }
            }
        }
        out
    }
}
