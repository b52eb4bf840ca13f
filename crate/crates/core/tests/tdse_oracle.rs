use num_complex::Complex64;
use toa_core::clock_model::channel;
use toa_core::common::free_packet;
use toa_core::tdse::*;
use toa_core::ToaError;

fn free_grid(nx: usize, dt: f64, richardson: bool) -> GridConfig {
    GridConfig {
        x_lo: -60.0,
        x_hi: 60.0,
        nx,
        dt,
        absorb_frac: 0.15,
        absorb_strength: 5.0,
        richardson,
    }
}

/// `∫|g|² F(k) dk / ∫|g|²` for the Gaussian envelope, by plain trapezoid.
fn packet_average(k0: f64, dx: f64, f: impl Fn(f64) -> f64) -> f64 {
    let s = 1.0 / (2.0 * dx);
    let n = 20_000;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=n {
        let k = k0 - 8.0 * s + 16.0 * s * i as f64 / n as f64;
        let w = (-2.0 * dx * dx * (k - k0).powi(2)).exp();
        num += w * f(k);
        den += w;
    }
    num / den
}

#[test]
fn zero_clock_momentum_is_free_evolution() {
    let init = |x: f64| free_packet(2.0, 2.0, 20.0, 1.0, x, 0.0);
    let grid = free_grid(4001, 0.005, true);
    let st = evolve_channel(
        &ChannelPotential::StepClock { p: 0.0 },
        1.0,
        &init,
        &grid,
        10.0,
    )
    .unwrap();
    let h = grid.h();
    let err: f64 = (0..grid.nx)
        .map(|j| (st.fields[0][j] - free_packet(2.0, 2.0, 20.0, 1.0, grid.x(j), 10.0)).norm_sqr())
        .sum::<f64>()
        * h;
    let rel = (err / st.initial_norm).sqrt();
    assert!(rel < 1e-5, "relative L2 error {rel:e}");
}

#[test]
fn richardson_beats_plain_stepping() {
    let init = |x: f64| free_packet(2.0, 2.0, 20.0, 1.0, x, 0.0);
    let exact: Vec<Complex64> = (0..2001)
        .map(|j| free_packet(2.0, 2.0, 20.0, 1.0, free_grid(2001, 0.01, false).x(j), 10.0))
        .collect();
    let err = |rich: bool| {
        let g = free_grid(2001, 0.01, rich);
        let st = evolve_channel(
            &ChannelPotential::StepClock { p: 0.0 },
            1.0,
            &init,
            &g,
            10.0,
        )
        .unwrap();
        st.fields[0]
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    assert!(err(true) < 0.05 * err(false));
}

#[test]
fn ledger_closes_with_absorption() {
    // Packet runs into the right absorber.
    let init = |x: f64| free_packet(4.0, 2.0, 0.0, 1.0, x, 0.0);
    let grid = free_grid(2001, 0.01, false);
    let st = evolve_channel(
        &ChannelPotential::StepClock { p: 0.3 },
        1.0,
        &init,
        &grid,
        20.0,
    )
    .unwrap();
    assert!(st.absorbed_right > 0.5 * st.initial_norm);
    assert!(st.ledger_error().abs() < 1e-8 * st.initial_norm);
    assert!(st.absorbed_left < st.absorbed_right);
}

#[test]
fn step_flux_matches_closed_form() {
    let (k0, dx, m) = (5.0, 10.0, 1.0);
    for p in [0.5, 8.0] {
        let f = step_flux_fractions(k0, dx, p, m).unwrap();
        let t = packet_average(k0, dx, |k| channel(k, p, m).unwrap().transmission());
        let r = packet_average(k0, dx, |k| channel(k, p, m).unwrap().reflection());
        assert!(
            (f.transmitted - t).abs() < 1e-3,
            "p = {p}: {} vs {t}",
            f.transmitted
        );
        assert!(
            (f.reflected - r).abs() < 1e-3,
            "p = {p}: {} vs {r}",
            f.reflected
        );
        assert!(f.residual.abs() < 1e-8);
    }
}

#[test]
fn hard_trigger_flips_half() {
    let flip = trigger_flip_fraction(1e3 * 5.0, 5.0, 3.0, 0.0, 1.0).unwrap();
    assert!((flip - 0.5).abs() < 1e-2, "{flip}");
}

#[test]
fn smooth_coupling_barely_reflects() {
    let slow = reflection_probe(2.0, 0.05, 1.0, 1.0, 10.0, false).unwrap();
    assert!(slow < 1e-4, "{slow:e}");
    let abrupt = reflection_probe(2.0, 1.0, 1.0, 1.0, 10.0, false).unwrap();
    assert!(abrupt > 1e-2, "{abrupt:e}");
}

#[test]
fn sharp_control_matches_step_reflection() {
    let r = reflection_probe(2.0, 0.05, 1.0, 1.0, 10.0, true).unwrap();
    let exact = packet_average(1.0, 10.0, |k| channel(k, 2.0, 1.0).unwrap().reflection());
    assert!((r - exact).abs() < 1e-3, "{r} vs {exact}");
}

#[test]
fn single_channel_readout_is_flat() {
    let init = |x: f64| free_packet(4.0, 2.0, 10.0, 1.0, x, 0.0);
    let grid = free_grid(1601, 0.01, false);
    let st = evolve_channel(
        &ChannelPotential::StepClock { p: 0.5 },
        1.0,
        &init,
        &grid,
        6.0,
    )
    .unwrap();
    let right = st.mass_between(0, 0.0, grid.x_hi);
    let hist = reconstruct_readout(
        &[WeightedChannel {
            p: 0.5,
            weight: 1.0,
            state: st,
        }],
        -5.0,
        5.0,
        20,
    )
    .unwrap();
    let d0 = hist.density[0];
    assert!(hist.density.iter().all(|d| (d - d0).abs() < 1e-12 * d0));
    assert!((d0 - right).abs() < 1e-12 * right);
}

#[test]
fn channels_at_different_times_rejected() {
    let init = |x: f64| free_packet(4.0, 2.0, 10.0, 1.0, x, 0.0);
    let grid = free_grid(401, 0.01, false);
    let pot = ChannelPotential::StepClock { p: 0.5 };
    let a = evolve_channel(&pot, 1.0, &init, &grid, 1.0).unwrap();
    let b = evolve_channel(&pot, 1.0, &init, &grid, 2.0).unwrap();
    let chans = [
        WeightedChannel {
            p: 0.5,
            weight: 1.0,
            state: a,
        },
        WeightedChannel {
            p: 0.6,
            weight: 1.0,
            state: b,
        },
    ];
    assert!(matches!(
        reconstruct_readout(&chans, -1.0, 1.0, 4),
        Err(ToaError::ChannelTimeMismatch { .. })
    ));
}

#[test]
fn coarse_grid_is_rejected() {
    let grid = free_grid(101, 0.01, false);
    assert!(matches!(
        grid.check_resolution(5.0),
        Err(ToaError::Resolution { .. })
    ));
}
