use proptest::prelude::*;

use toa_core::booster::{booster_channel, tune};
use toa_core::clock_model::{channel, detection_probability};
use toa_core::spin_trigger::trigger_clock_channel;

proptest! {
    #[test]
    fn clock_channel_conserves_flux(k in 0.01f64..50.0, p in 0.0f64..100.0, m in 0.1f64..10.0) {
        let ch = channel(k, p, m).unwrap();
        prop_assert!(ch.flux_error() < 1e-10, "{}", ch.flux_error());
        prop_assert!(ch.continuity_error() < 1e-10);
        let e = k * k / (2.0 * m);
        prop_assert!((ch.transmission() - detection_probability(e, p)).abs() < 1e-10);
    }

    #[test]
    fn trigger_channel_conserves_flux(
        alpha in 0.0f64..1e4,
        e in 1e-3f64..50.0,
        p in 0.0f64..100.0,
        m in 0.1f64..10.0,
    ) {
        let ch = trigger_clock_channel(alpha, e, p, m).unwrap();
        prop_assert!(ch.flux_error() < 1e-10, "{}", ch.flux_error());
        prop_assert!((0.0..=1.0).contains(&ch.detection()));
    }

    #[test]
    fn tuned_booster_transmits_everything(
        m in 0.2f64..5.0,
        k in 0.2f64..5.0,
        boost in 1.05f64..5.0,
        lambda in 0.2f64..10.0,
    ) {
        let params = tune(m, k, boost * k, lambda).unwrap();
        let ch = booster_channel(&params, k).unwrap();
        prop_assert!((ch.j_rdown - 1.0).abs() < 1e-9, "{}", ch.j_rdown);
        prop_assert!(ch.j_lup.abs() < 1e-9);
        let (lo, hi) = params.window();
        let off = booster_channel(&params, lo + 0.37 * (hi - lo)).unwrap();
        prop_assert!(off.flux_error() < 1e-10);
    }
}
