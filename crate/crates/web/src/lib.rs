use serde::Serialize;
use wasm_bindgen::prelude::*;

use unicorr::bump::{build_bump, fejer_integral, BumpOptions, BumpParams, BumpReport};
use unicorr::homogeneous::sphere_dimension;
use unicorr::measure::{CylinderSpace, ProductCell};
use unicorr::systems::{atom_example_check, Trigonometric, Walsh};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn to_json(v: &impl Serialize) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(js_err)
}

#[derive(Serialize)]
struct BumpView {
    report: BumpReport,
    /// Real part of the bump, averaged down to `samples` points for plotting.
    g: Vec<f64>,
    /// `(n, |c_n|)` over the block.
    block: Vec<(usize, f64)>,
}

/// Builds one bump on `[a, b)` and returns its report plus plot data as JSON.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn bump(
    system: &str,
    log2_res: u32,
    a: f64,
    b: f64,
    gamma: f64,
    eps: f64,
    delta: f64,
    n_start: usize,
    samples: usize,
) -> Result<String, JsValue> {
    if !(8..=16).contains(&log2_res) {
        return Err(js_err("resolution must be 2^8 .. 2^16"));
    }
    let res = 1usize << log2_res;
    let space = CylinderSpace::interval(res).map_err(js_err)?;
    let params = BumpParams {
        cell: ProductCell::new(a, b, vec![0]),
        gamma,
        eps,
        delta,
        n_start,
    };
    let r = match system {
        "walsh" => {
            let sys = Walsh::new(&space, res).map_err(js_err)?;
            build_bump(&params, &sys, BumpOptions::new(res))
        }
        _ => {
            let n = Trigonometric::max_len(res);
            let sys = Trigonometric::new(&space, n).map_err(js_err)?;
            build_bump(&params, &sys, BumpOptions::new(n))
        }
    }
    .map_err(js_err)?;

    let samples = samples.clamp(16, res);
    let per = res / samples;
    let g = r
        .g
        .values()
        .chunks(per)
        .map(|c| c.iter().map(|z| z.re).sum::<f64>() / c.len() as f64)
        .collect();
    let block = r.block.coeffs().iter().map(|(&n, z)| (n, z.norm())).collect();
    to_json(&BumpView {
        report: r.report(),
        g,
        block,
    })
}

#[derive(Serialize)]
struct FejerPoint {
    j: i32,
    lambda: f64,
    integral: f64,
}

/// `int_0^1 t I(2^j t) dt` for `j` in `j_min..=j_max`, as JSON.
#[wasm_bindgen]
pub fn fejer_curve(duty: f64, j_min: i32, j_max: i32) -> Result<String, JsValue> {
    if !(duty > 0.0 && duty < 1.0) || j_max < j_min || j_max > 30 {
        return Err(js_err("need 0 < duty < 1 and j_min <= j_max <= 30"));
    }
    let pts: Vec<FejerPoint> = (j_min..=j_max)
        .map(|j| {
            let lambda = 2f64.powi(j);
            FejerPoint {
                j,
                lambda,
                integral: fejer_integral(|t| t, 0.0, 1.0, duty, lambda, 8),
            }
        })
        .collect();
    to_json(&pts)
}

/// Exact check of the atomic counterexample at `n`, as JSON.
#[wasm_bindgen]
pub fn atom_check(n: u32) -> Result<String, JsValue> {
    to_json(&atom_example_check(n).map_err(js_err)?)
}

/// Dimension of the degree-`rho` harmonics on `S^d`, as a decimal string.
#[wasm_bindgen]
pub fn harmonic_dimension(d: u32, rho: u32) -> Result<String, JsValue> {
    Ok(sphere_dimension(d, rho).map_err(js_err)?.to_string())
}
