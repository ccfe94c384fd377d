//! Browser bindings for `www/index.html`.
//!
//! Each export wraps a plain Rust function so the same code runs in native
//! tests.

use plaquette::automaton::{rtpm_torus_config_entropy, run_dynamics, run_dynamics_with_snapshot};
use plaquette::lattice::{Boundary, Edge, Geometry, Model, Realization};
use plaquette::symmetry::SymmetryTableau;
use plaquette::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Number of points in [`scf_density`]: `p = k / (P_STEPS - 1)`.
pub const P_STEPS: usize = 21;

fn parse_model(name: &str) -> Result<Model> {
    name.parse()
}

/// Space-time picture of a cylinder with a free top edge, one line per
/// layer.
pub fn snapshot_text(model: &str, width: usize, height: usize, p: f64, fixed_bottom: bool, seed: u64) -> Result<String> {
    let g = Geometry::cylinder(parse_model(model)?, width, height)?;
    let bc = if fixed_bottom { Boundary::FIXED_BOTTOM } else { Boundary::FREE };
    let r = Realization::sample(g, bc, p, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9);
    let (_, snap) = run_dynamics_with_snapshot(&r, &mut rng)?;
    Ok(snap.to_string())
}

/// Disorder-averaged boundary symmetry entropy of the top-edge interval
/// `[0, L_A)` for `L_A = 0..=width`, on X-model cylinders of height
/// `2 * width` with a fixed bottom edge.
pub fn boundary_entropy_curve(width: usize, p: f64, realizations: usize, seed: u64) -> Result<Vec<f64>> {
    let g = Geometry::cylinder(Model::Rxpm, width, 2 * width)?;
    let mut sum = vec![0.0; width + 1];
    for k in 0..realizations {
        let r = Realization::sample(g, Boundary::FIXED_BOTTOM, p, seed.wrapping_add(k as u64))?;
        let group = run_dynamics(&r)?.boundary_group(Edge::Fixed);
        for (la, acc) in sum.iter_mut().enumerate() {
            let seg: Vec<usize> = g
                .top_layers()
                .into_iter()
                .flat_map(|t| (0..la).map(move |i| g.site(i, t)))
                .collect();
            *acc += group.sym_entropy(&seg)? as f64;
        }
    }
    Ok(sum.iter().map(|s| s / realizations.max(1) as f64).collect())
}

/// Disorder-averaged `S_cf / L^2` on an `L x L` torus at `P_STEPS` evenly
/// spaced values of `p`.
pub fn scf_density_curve(model: &str, width: usize, realizations: usize, seed: u64) -> Result<Vec<f64>> {
    let model = parse_model(model)?;
    let g = Geometry::torus(model, width, width)?;
    (0..P_STEPS)
        .map(|k| {
            let p = k as f64 / (P_STEPS - 1) as f64;
            let mut total = 0.0;
            for j in 0..realizations {
                let r = Realization::sample(g, Boundary::FREE, p, seed.wrapping_add((k * realizations + j) as u64))?;
                total += match model {
                    Model::Rtpm => rtpm_torus_config_entropy(&r)?,
                    Model::Rxpm => SymmetryTableau::from_realization(&r).config_entropy(),
                } as f64;
            }
            Ok(total / (realizations.max(1) * width * width) as f64)
        })
        .collect()
}

fn js(e: plaquette::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn snapshot(model: &str, width: usize, height: usize, p: f64, fixed_bottom: bool, seed: u32) -> std::result::Result<String, JsError> {
    snapshot_text(model, width, height, p, fixed_bottom, seed.into()).map_err(js)
}

#[wasm_bindgen]
pub fn boundary_entropy(width: usize, p: f64, realizations: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    boundary_entropy_curve(width, p, realizations, seed.into()).map_err(js)
}

#[wasm_bindgen]
pub fn scf_density(model: &str, width: usize, realizations: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    scf_density_curve(model, width, realizations, seed.into()).map_err(js)
}
