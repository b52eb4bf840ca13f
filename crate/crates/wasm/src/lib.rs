//! Browser bindings for three interactive plots: the detection weight of a
//! weakly measured packet, the clock pointer histogram, and the booster
//! transmission curve.

use wasm_bindgen::prelude::*;

use toa_core::booster::{transmission_curve, tune};
use toa_core::clock_model::{detection_weight, readout_distribution, ReadoutOptions};
use toa_core::{ClockPrior, GaussianEnvelope, PacketSpec, ToaError};

fn js(e: ToaError) -> JsError {
    JsError::new(&e.to_string())
}

/// Detection weight against `E·Δy` on `n` log-spaced points, with the clock
/// momentum scaled so that `p0·Δy` stays fixed. Returns `[x0, w0, x1, w1, ...]`.
#[wasm_bindgen]
pub fn detection_curve(
    m: f64,
    k0: f64,
    dx: f64,
    p0_dy: f64,
    edy_lo: f64,
    edy_hi: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    if !(m > 0.0
        && k0 > 0.0
        && dx > 0.0
        && p0_dy > 0.0
        && edy_lo > 0.0
        && edy_hi > edy_lo
        && n >= 2)
    {
        return Err(JsError::new(
            "need positive m, k0, dx, p0·dy, 0 < lo < hi and n ≥ 2",
        ));
    }
    let e = k0 * k0 / (2.0 * m);
    let g = GaussianEnvelope::new(k0, dx, 3.0 * dx);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let x = edy_lo * (edy_hi / edy_lo).powf(i as f64 / (n - 1) as f64);
        let dy = x / e;
        out.push(x);
        out.push(detection_weight(&g, &ClockPrior::new(p0_dy / dy, dy), m));
    }
    Ok(out)
}

#[wasm_bindgen]
pub struct Readout {
    y_lo: f64,
    y_hi: f64,
    detection_weight: f64,
    classical_toa: f64,
    density: Vec<f64>,
}

#[wasm_bindgen]
impl Readout {
    #[wasm_bindgen(getter)]
    pub fn y_lo(&self) -> f64 {
        self.y_lo
    }

    #[wasm_bindgen(getter)]
    pub fn y_hi(&self) -> f64 {
        self.y_hi
    }

    #[wasm_bindgen(getter)]
    pub fn detection_weight(&self) -> f64 {
        self.detection_weight
    }

    #[wasm_bindgen(getter)]
    pub fn classical_toa(&self) -> f64 {
        self.classical_toa
    }

    /// Density per bin, uniform bins over `[y_lo, y_hi]`.
    #[wasm_bindgen(getter)]
    pub fn density(&self) -> Vec<f64> {
        self.density.clone()
    }
}

/// Clock pointer histogram for a packet started at `x = -x0`, read out once
/// the packet has passed the detector.
#[wasm_bindgen]
pub fn clock_readout(
    m: f64,
    k0: f64,
    dx: f64,
    x0: f64,
    p0: f64,
    dy: f64,
    bins: usize,
) -> Result<Readout, JsError> {
    let s = PacketSpec::new(m, k0, dx, x0, p0, dy).map_err(js)?;
    let opts = ReadoutOptions {
        bins: bins.clamp(10, 1000),
        ..Default::default()
    };
    let h = readout_distribution(&s, s.late_time().map_err(js)?, &opts).map_err(js)?;
    Ok(Readout {
        y_lo: h.y_lo,
        y_hi: h.y_hi,
        detection_weight: h.detection_weight,
        classical_toa: s.classical_toa().map_err(js)?,
        density: h.density,
    })
}

/// Booster fluxes across the propagating window: `[k, J_R↓, J_L↑, ...]`.
#[wasm_bindgen]
pub fn booster_curve(
    m: f64,
    k: f64,
    k_prime: f64,
    lambda: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    let params = tune(m, k, k_prime, lambda).map_err(js)?;
    let (lo, hi) = params.window();
    let ks: Vec<f64> = (1..=n)
        .map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64)
        .collect();
    let rows = transmission_curve(&params, &ks).map_err(js)?;
    Ok(rows
        .iter()
        .flat_map(|r| [r.k_in, r.j_rdown, r.j_lup])
        .collect())
}
