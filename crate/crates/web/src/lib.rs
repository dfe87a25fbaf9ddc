//! Browser bindings: the rotating-frame lattice field, the quasienergy
//! butterfly and the phase-space interaction curves.
//!
//! Each operation has a plain Rust form returning `Result<Vec<f64>, String>`
//! and a `wasm_bindgen` wrapper that maps the error to a `JsError`.

use phasecrystal::bands;
use phasecrystal::grid::linspace;
use phasecrystal::interaction;
use phasecrystal::lattice::{self, ModelParams};
use wasm_bindgen::prelude::*;

const MAX_PIXELS: usize = 400;
const MAX_Q: u32 = 24;
const MAX_CURVE_POINTS: usize = 2000;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// `H / K` on an `n x n` grid over `[-half, half]^2`, row-major in `P`
/// (index `j * n + i` holds `X_i, P_j`).
pub fn lattice_field(k: f64, q0: u32, lambda: f64, half: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(2..=MAX_PIXELS).contains(&n) {
        return Err(format!("resolution must lie in 2..={MAX_PIXELS}, got {n}"));
    }
    let params = ModelParams::new(k, q0, lambda).map_err(err)?;
    let g = lattice::render_lattice(&params, (-half, half), (-half, half), n, n).map_err(err)?;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = g.get(i, j);
        }
    }
    Ok(out)
}

/// Band intervals as flat `[lambda/2pi, E_min, E_max]` triples.
pub fn butterfly(q_max: u32, kick: f64, samples: usize) -> Result<Vec<f64>, String> {
    if q_max > MAX_Q {
        return Err(format!("q_max must be at most {MAX_Q}, got {q_max}"));
    }
    let entries = bands::butterfly(q_max, kick, samples.clamp(2, 16)).map_err(err)?;
    Ok(entries.iter().flat_map(|e| e.bands.iter().flat_map(move |&(lo, hi)| [e.lambda_over_2pi, lo, hi])).collect())
}

/// Direct and exchange potentials as flat `[R, U_c, U_e]` triples for
/// `kind` = `"contact"` (strength `eps`) or `"hardcore"` (radius `a`).
pub fn interaction_curves(kind: &str, strength: f64, lambda: f64, r_max: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(2..=MAX_CURVE_POINTS).contains(&points) {
        return Err(format!("points must lie in 2..={MAX_CURVE_POINTS}, got {points}"));
    }
    if !(lambda > 0.0 && r_max > 0.0 && strength.is_finite()) {
        return Err("lambda and r_max must be positive".to_string());
    }
    let m_max = interaction::series_n_max(r_max, lambda) / 2 + 1;
    let mut out = Vec::with_capacity(3 * points);
    for r in linspace(0.0, r_max, points) {
        let (uc, ue) = match kind {
            "contact" => interaction::uc_ue_contact(strength, lambda, r),
            "hardcore" => interaction::uc_hardcore(strength, lambda, r, m_max),
            other => return Err(format!("unknown interaction kind `{other}`")),
        };
        out.extend([r, uc, ue]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = latticeField)]
pub fn lattice_field_js(k: f64, q0: u32, lambda: f64, half: f64, n: usize) -> Result<Vec<f64>, JsError> {
    lattice_field(k, q0, lambda, half, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = butterfly)]
pub fn butterfly_js(q_max: u32, kick: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    butterfly(q_max, kick, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = interactionCurves)]
pub fn interaction_curves_js(kind: &str, strength: f64, lambda: f64, r_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    interaction_curves(kind, strength, lambda, r_max, points).map_err(|e| JsError::new(&e))
}
