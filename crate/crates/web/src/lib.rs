//! Browser bindings. Parameters travel as a 7-element array in the order
//! `rho, alpha1, beta, gamma, mu, length, thickness`.

use piezo_core::beam::{classify_stability, derive_constants, BeamParameters, DEFAULT_QMAX, DEFAULT_TOL};
use piezo_core::frequency::{frequency_response, transfer_damped};
use piezo_core::timedomain::{simulate, Grid, InitialData, SimConfig, SimMode};
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

/// Energy samples per simulation.
pub const ENERGY_SAMPLES: usize = 400;

pub fn parse_params(p: &[f64]) -> Result<BeamParameters, String> {
    match *p {
        [rho, alpha1, beta, gamma, mu, length, thickness] => {
            BeamParameters::new(rho, alpha1, beta, gamma, mu, length, thickness).map_err(|e| e.to_string())
        }
        _ => Err(format!("expected 7 parameters, got {}", p.len())),
    }
}

/// Stability class line, e.g. `EXPONENTIALLY_STABLE p=1 q=2 gap=1.1107 Tmin=5.657`.
pub fn classify_line(p: &[f64]) -> Result<String, String> {
    let params = parse_params(p)?;
    let dc = derive_constants(&params).map_err(|e| e.to_string())?;
    classify_stability(&dc, params.length, DEFAULT_QMAX, DEFAULT_TOL)
        .map(|r| r.to_string())
        .map_err(|e| e.to_string())
}

/// `|G(re + i y)|` (or `|G_d|` when `damped`) at `n` points `y` in `[-im_max, im_max]`.
pub fn transfer_magnitudes(p: &[f64], re: f64, im_max: f64, n: usize, damped: bool) -> Result<Vec<f64>, String> {
    let params = parse_params(p)?;
    let dc = derive_constants(&params).map_err(|e| e.to_string())?;
    if n < 2 {
        return Err("need at least two points".into());
    }
    let points: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(re, -im_max + 2.0 * im_max * k as f64 / (n - 1) as f64))
        .collect();
    if damped {
        points
            .iter()
            .map(|&s| transfer_damped(s, &dc, &params).map(|g| g.norm()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())
    } else {
        frequency_response(&points, &dc, &params)
            .map(|r| r.iter().map(|f| f.g.norm()).collect())
            .map_err(|e| e.to_string())
    }
}

/// Energy of a Gaussian pulse at `ENERGY_SAMPLES + 1` evenly spaced times in `[0, T]`.
/// `mode` is `closed`, `open` or `classical`.
pub fn energy_history(p: &[f64], mode: &str, gain: f64, final_time: f64, cells: usize) -> Result<Vec<f64>, String> {
    let params = parse_params(p)?;
    let dc = derive_constants(&params).map_err(|e| e.to_string())?;
    if !(final_time > 0.0) {
        return Err(format!("final time must be > 0, got {final_time}"));
    }
    let sim_mode = match mode {
        "closed" => SimMode::closed(gain),
        "open" => SimMode::free(),
        "classical" => SimMode::classical(gain),
        other => return Err(format!("unknown mode `{other}`")),
    };
    let grid = Grid::new(params.length, cells).map_err(|e| e.to_string())?;
    let init = InitialData::Gaussian {
        center: 0.6 * params.length,
        width: 0.05 * params.length,
        amplitude: 1.0,
    }
    .build(&grid, &dc)
    .map_err(|e| e.to_string())?;
    let cfg = SimConfig::new(sim_mode, final_time).with_sample_dt(final_time / ENERGY_SAMPLES as f64);
    simulate(&init, &params, &cfg)
        .map(|t| t.energies)
        .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn classify(params: &[f64]) -> Result<String, JsError> {
    classify_line(params).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn transfer_curve(params: &[f64], re: f64, im_max: f64, n: usize, damped: bool) -> Result<Vec<f64>, JsError> {
    transfer_magnitudes(params, re, im_max, n, damped).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate_energy(params: &[f64], mode: &str, gain: f64, final_time: f64, cells: usize) -> Result<Vec<f64>, JsError> {
    energy_history(params, mode, gain, final_time, cells).map_err(|e| JsError::new(&e))
}
