use toa_core::clock_model::{
    detection_weight_for_spec, readout_distribution, region_masses, weak_coupling_density,
    ReadoutOptions,
};
use toa_core::{PacketSpec, ToaError};

fn weak() -> PacketSpec {
    PacketSpec::new(1.0, 5.0, 2.0, 30.0, 0.4, 5.0).unwrap()
}

#[test]
fn histogram_integrates_to_detection_weight() {
    // p0*dy = 5 keeps the clock amplitude negligible at p = 0, so the
    // readout has no slowly decaying tails outside the window.
    let s = PacketSpec::new(1.0, 5.0, 2.0, 30.0, 1.0, 5.0).unwrap();
    let h = readout_distribution(&s, s.late_time().unwrap(), &ReadoutOptions::default()).unwrap();
    assert!(h.density.iter().all(|&d| d >= 0.0));
    assert!(h.outside_window().abs() < 1e-6, "{:e}", h.outside_window());
}

#[test]
fn cut_clock_amplitude_leaks_little_outside_window() {
    let s = weak();
    let t = s.late_time().unwrap();
    let h = readout_distribution(&s, t, &ReadoutOptions::default()).unwrap();
    let wide = ReadoutOptions {
        window: Some((h.y_lo - 40.0, h.y_hi + 40.0)),
        bins: 800,
        ..Default::default()
    };
    let w = readout_distribution(&s, t, &wide).unwrap();
    assert!(h.outside_window() > 0.0 && h.outside_window() < 1e-4);
    assert!(w.outside_window() < h.outside_window());
}

#[test]
fn readout_is_converged_in_quadrature() {
    let s = weak();
    let t = s.late_time().unwrap();
    let coarse = ReadoutOptions {
        bins: 60,
        ..Default::default()
    };
    let fine = ReadoutOptions {
        refine: 1.6,
        ..coarse
    };
    let a = readout_distribution(&s, t, &coarse).unwrap();
    let b = readout_distribution(&s, t, &fine).unwrap();
    assert!(a.relative_l2(&b) < 1e-8, "{:e}", a.relative_l2(&b));
}

#[test]
fn readout_is_time_independent_after_arrival() {
    let s = weak();
    let o = ReadoutOptions {
        bins: 60,
        ..Default::default()
    };
    let t = s.late_time().unwrap();
    let a = readout_distribution(&s, t, &o).unwrap();
    let b = readout_distribution(&s, 2.0 * t, &o).unwrap();
    assert_eq!(a.density, b.density);
}

#[test]
fn weak_coupling_readout_matches_gaussian_width_law() {
    let s = weak();
    let h = readout_distribution(&s, s.late_time().unwrap(), &ReadoutOptions::default()).unwrap();
    let tv = h.tv_distance_to(|y| weak_coupling_density(&s, y));
    assert!(tv < 0.05, "{tv}");
    let tc = s.classical_toa().unwrap();
    assert!((h.peak() - tc).abs() < 0.02 * tc, "{} vs {tc}", h.peak());
}

#[test]
fn premature_readout_is_rejected() {
    let s = weak();
    let err = readout_distribution(&s, 1.0, &ReadoutOptions::default()).unwrap_err();
    assert!(matches!(err, ToaError::PrematureReadout { .. }));
}

#[test]
fn probability_is_conserved_between_regions() {
    let s = weak();
    let expected = 1.0 - s.clock_tail_mass();
    for &t in &[0.0, 3.0, 6.0, 12.0, s.late_time().unwrap()] {
        let r = region_masses(&s, t, 32);
        assert!((r.total() - expected).abs() < 1e-6, "t={t}: {}", r.total());
    }
    let late = region_masses(&s, s.late_time().unwrap(), 32);
    let w = detection_weight_for_spec(&s);
    assert!((w + late.left - 1.0).abs() < 1e-4);
    // Right-hand mass after arrival is the detection weight itself.
    assert!((late.right - w).abs() < 1e-6);
}
