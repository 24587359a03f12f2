//! Browser bindings. Every export returns CSV text that the page plots.

use divperp::limitlaw::{cdf_thm11, cdf_thm15};
use divperp::model::CoefficientLaw;
use divperp::simulate::{scale_path, simulate_forward_chain_path, simulate_perpetuity_path, SimScenario};
use divperp::theorem21::{bundled, convergence_demo};
use wasm_bindgen::prelude::*;

fn js(e: divperp::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `x,cdf` rows of a limit law at time `u`; `param` is `c/a` for `thm11`
/// and `alpha` for `thm15`.
#[wasm_bindgen]
pub fn cdf_table(kind: &str, u: f64, param: f64, xs: &[f64]) -> Result<String, JsError> {
    cdf_csv(kind, u, param, xs).map_err(js)
}

/// Backward or forward path for the Cauchy-tail law, divided by `a n`.
#[wasm_bindgen]
pub fn scaled_path(a: f64, c: f64, n: u32, horizon: f64, seed: u32, forward: bool) -> Result<String, JsError> {
    path_csv(a, c, n as u64, horizon, seed as u64, forward).map_err(js)
}

/// `n,c_n,d_n` decay table of a bundled deterministic instance.
#[wasm_bindgen]
pub fn decay_table(instance: &str) -> Result<String, JsError> {
    decay_csv(instance).map_err(js)
}

fn cdf_csv(kind: &str, u: f64, param: f64, xs: &[f64]) -> divperp::Result<String> {
    let mut out = String::from("x,cdf\n");
    for &x in xs {
        let p = match kind {
            "thm11" => cdf_thm11(x, u, param, 1.0)?,
            "thm15" => cdf_thm15(x, u, param)?,
            _ => return Err(divperp::Error::Configuration(format!("unknown kind '{kind}'"))),
        };
        out.push_str(&format!("{x:?},{p:?}\n"));
    }
    Ok(out)
}

fn path_csv(a: f64, c: f64, n: u64, horizon: f64, seed: u64, forward: bool) -> divperp::Result<String> {
    let law = CoefficientLaw::cauchy_tail(a, c)?;
    let s = SimScenario::new(law, n, horizon, 0.0, seed)?;
    let sim = if forward {
        simulate_forward_chain_path(&s)?
    } else {
        simulate_perpetuity_path(&s)?
    };
    scale_path(&sim.path, a * n as f64)?.to_csv()
}

fn decay_csv(instance: &str) -> divperp::Result<String> {
    let spec = bundled::by_name(instance)?;
    let inst = spec.build()?;
    convergence_demo(&inst, spec.horizon)?.to_csv()
}
