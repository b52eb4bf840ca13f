// Error paths build a JsError, which needs a JS host; only the success paths
// run natively.

use toa_wasm::{booster_curve, clock_readout, detection_curve};

#[test]
fn detection_curve_rises_to_one() {
    let flat = detection_curve(1.0, 1.0, 20.0, 2.0, 1e-4, 100.0, 12)
        .ok()
        .unwrap();
    assert_eq!(flat.len(), 24);
    let w: Vec<f64> = flat.chunks(2).map(|p| p[1]).collect();
    assert!(w.windows(2).all(|p| p[1] > p[0]));
    assert!(w[0] < 0.05 && w[11] > 0.99);
}

#[test]
fn readout_peaks_near_classical_arrival() {
    let r = clock_readout(1.0, 5.0, 2.0, 30.0, 0.4, 5.0, 100)
        .ok()
        .unwrap();
    assert_eq!(r.density().len(), 100);
    let bw = (r.y_hi() - r.y_lo()) / 100.0;
    let mass: f64 = r.density().iter().sum::<f64>() * bw;
    assert!((mass - r.detection_weight()).abs() < 1e-3);
    let (i, _) = r
        .density()
        .iter()
        .enumerate()
        .fold((0, 0.0), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
    let peak = r.y_lo() + (i as f64 + 0.5) * bw;
    assert!((peak - r.classical_toa()).abs() < 3.0 * bw + 0.05 * r.classical_toa());
}

#[test]
fn booster_curve_conserves_flux() {
    let flat = booster_curve(1.0, 1.0, 2.0, 3.0, 50).ok().unwrap();
    assert_eq!(flat.len(), 150);
    for row in flat.chunks(3) {
        assert!((row[1] + row[2] - 1.0).abs() < 1e-10);
    }
}
