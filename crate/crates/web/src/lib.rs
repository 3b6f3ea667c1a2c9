//! Browser bindings for three interactive views over `renyi-core`.
//!
//! Every export returns a flat `Float64Array` so the page can plot without a
//! serialization layer; the `*_series` functions behind them are plain Rust and
//! carry the tests.

use wasm_bindgen::prelude::*;

use renyi_core::channels::Povm;
use renyi_core::entropy::{renyi_cmi, renyi_entropy, renyi_mutual_info, sandwiched_cmi};
use renyi_core::linalg::{c, CVec, SubsystemShape};
use renyi_core::measures::discord_pure_objective;
use renyi_core::reldiff::{delta_alpha, delta_tilde_alpha, random_instance};
use renyi_core::rng::stream_rng;
use renyi_core::states::{random_full_rank, PureState};
use renyi_core::Result;

/// Largest dimension the page offers; keeps every evaluation interactive.
pub const MAX_DIM: usize = 4;

fn js(e: renyi_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn dim_ok(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(renyi_core::Error::InvalidArgument(format!("dimension {d} outside 1..={MAX_DIM}")));
    }
    Ok(())
}

/// `[Delta_a..., Delta~_a...]` over `alphas` for the instance drawn from `seed`.
pub fn delta_series(seed: u64, d_in: usize, d_out: usize, alphas: &[f64]) -> Result<Vec<f64>> {
    dim_ok(d_in.max(2))?;
    dim_ok(d_out)?;
    let inst = random_instance(d_in, d_out, 1e-6, &mut stream_rng(seed, 0))?;
    let mut petz = Vec::with_capacity(alphas.len());
    let mut sandwiched = Vec::with_capacity(alphas.len());
    for &a in alphas {
        petz.push(delta_alpha(&inst, a)?);
        sandwiched.push(delta_tilde_alpha(&inst, a)?);
    }
    petz.extend(sandwiched);
    Ok(petz)
}

/// `cos(theta)|00> + sin(theta)|11>` on two qubits.
pub fn two_qubit_state(theta: f64) -> PureState {
    let mut v = CVec::zeros(4);
    v[0] = c(theta.cos(), 0.0);
    v[3] = c(theta.sin(), 0.0);
    PureState::normalized(v, SubsystemShape::bipartite(2, 2)).expect("unit vector")
}

/// Per order: `H_a(A)`, `I_a(A;B)`, the squashed closed form `H_{(2-a)/a}(A)` and the
/// discord objective at the computational basis, flattened row by row; orders in `(0, 2)`.
pub fn pure_state_series(theta: f64, alphas: &[f64]) -> Result<Vec<f64>> {
    if let Some(a) = alphas.iter().find(|&&a| !(a > 0.0 && a < 2.0)) {
        return Err(renyi_core::Error::InvalidArgument(format!("order {a} outside (0,2)")));
    }
    let psi = two_qubit_state(theta);
    let rho = psi.density();
    let rho_a = rho.marginal(&["A"])?;
    let povm = Povm::computational(2);
    let mut out = Vec::with_capacity(4 * alphas.len());
    for &a in alphas {
        out.push(renyi_entropy(&rho_a, a)?);
        out.push(renyi_mutual_info(&rho, &["A"], &["B"], a)?);
        out.push(renyi_entropy(&rho_a, (2.0 - a) / a)?);
        out.push(discord_pure_objective(&psi, &povm, a)?);
    }
    Ok(out)
}

/// `[I~_a..., I_a...]` for a random full-rank state on `d x d x d` drawn from `seed`.
pub fn cmi_series(seed: u64, d: usize, alphas: &[f64]) -> Result<Vec<f64>> {
    dim_ok(d)?;
    let shape = SubsystemShape::tripartite(d, d, d, ["A", "B", "C"]);
    let rho = random_full_rank(&shape, &mut stream_rng(seed, 0));
    let mut sandwiched = Vec::with_capacity(alphas.len());
    let mut sibson = Vec::with_capacity(alphas.len());
    for &a in alphas {
        sandwiched.push(sandwiched_cmi(&rho, &["A"], &["B"], &["C"], a)?);
        sibson.push(renyi_cmi(&rho, &["A"], &["B"], &["C"], a)?);
    }
    sandwiched.extend(sibson);
    Ok(sandwiched)
}

#[wasm_bindgen]
pub fn delta_curves(seed: u32, d_in: usize, d_out: usize, alphas: &[f64]) -> std::result::Result<Vec<f64>, JsValue> {
    delta_series(seed as u64, d_in, d_out, alphas).map_err(js)
}

#[wasm_bindgen]
pub fn pure_state_curves(theta: f64, alphas: &[f64]) -> std::result::Result<Vec<f64>, JsValue> {
    pure_state_series(theta, alphas).map_err(js)
}

#[wasm_bindgen]
pub fn cmi_curves(seed: u32, d: usize, alphas: &[f64]) -> std::result::Result<Vec<f64>, JsValue> {
    cmi_series(seed as u64, d, alphas).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: [f64; 5] = [0.3, 0.7, 1.5, 2.0, 3.0];

    #[test]
    fn delta_series_layout() {
        let v = delta_series(1, 3, 2, &GRID).unwrap();
        assert_eq!(v.len(), 2 * GRID.len());
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn maximally_entangled_point() {
        let ln2 = 2f64.ln();
        let v = pure_state_series(std::f64::consts::FRAC_PI_4, &[0.5, 1.5]).unwrap();
        for row in v.chunks(4) {
            assert!((row[0] - ln2).abs() < 1e-10);
            assert!((row[1] - 2.0 * ln2).abs() < 1e-10);
            assert!((row[2] - ln2).abs() < 1e-10);
            assert!((row[3] - ln2).abs() < 1e-10);
        }
    }

    #[test]
    fn product_point_has_no_correlations() {
        let v = pure_state_series(0.0, &[0.3, 0.7, 1.5, 1.9]).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-10), "{v:?}");
        assert!(pure_state_series(0.3, &[2.0]).is_err());
    }

    #[test]
    fn cmi_series_rejects_large_dimensions() {
        assert!(cmi_series(0, MAX_DIM + 1, &GRID).is_err());
        assert_eq!(cmi_series(0, 2, &GRID).unwrap().len(), 2 * GRID.len());
    }
}
