//! Spin trigger: a delta barrier `(α/2)(1 + σ_x) δ(x)` that only scatters
//! the `σ_x = +1` component, optionally coupled to a clock that runs while the
//! spin is up, `(1/2)(1 + σ_z) P_y`.
//!
//! In the clock-coupled problem the up channel (clock running) has
//! wavenumber `k_up = sqrt(2mE_k)` and the down channel (clock stopped)
//! `k_down = sqrt(2m(E_k + p))`. The particle enters in the up channel from
//! the left.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::common::I;
use crate::error::{require, Result};

/// Scattering amplitudes for one `(α, E_k, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerChannel {
    pub alpha: f64,
    pub p: f64,
    pub m: f64,
    pub e_k: f64,
    pub k_up: f64,
    pub k_down: f64,
    pub l_up: Complex64,
    pub l_down: Complex64,
    pub r_up: Complex64,
    pub r_down: Complex64,
}

/// Coupling that stands in for `α → ∞`.
pub fn alpha_limit(e_k: f64, p: f64, m: f64) -> f64 {
    let k_down = (2.0 * m * (e_k + p)).sqrt();
    1e6 * k_down / m
}

pub fn trigger_clock_channel(alpha: f64, e_k: f64, p: f64, m: f64) -> Result<TriggerChannel> {
    require(
        alpha >= 0.0 && alpha.is_finite(),
        "alpha",
        "must be finite and non-negative",
    )?;
    require(e_k > 0.0, "e_k", "must be positive")?;
    require(p >= 0.0, "p", "must be non-negative")?;
    require(m > 0.0, "m", "must be positive")?;
    let k_up = (2.0 * m * e_k).sqrt();
    let k_down = (2.0 * m * (e_k + p)).sqrt();
    // Derivative jumps: ik(2R - 2) = mα(R_up + R_down) per channel.
    let beta = m * alpha / 2.0;
    let s = 1.0 / (1.0 + I * beta * (1.0 / k_up + 1.0 / k_down));
    let r_up = 1.0 + beta * s / (I * k_up);
    let r_down = beta * s / (I * k_down);
    Ok(TriggerChannel {
        alpha,
        p,
        m,
        e_k,
        k_up,
        k_down,
        l_up: r_up - 1.0,
        l_down: r_down,
        r_up,
        r_down,
    })
}

impl TriggerChannel {
    pub fn flux_error(&self) -> f64 {
        let ratio = self.k_down / self.k_up;
        self.l_up.norm_sqr()
            + self.r_up.norm_sqr()
            + ratio * (self.l_down.norm_sqr() + self.r_down.norm_sqr())
            - 1.0
    }

    /// Largest violation of `φ_Ldown = φ_Rdown` and `φ_Lup = φ_Rup - 1`.
    pub fn continuity_error(&self) -> f64 {
        (self.l_down - self.r_down)
            .norm()
            .max((self.l_up - (self.r_up - 1.0)).norm())
    }

    /// Clock-stopped flux fraction.
    pub fn detection(&self) -> f64 {
        self.k_down / self.k_up * (self.r_down.norm_sqr() + self.l_down.norm_sqr())
    }
}

/// Total probability that the spin flips and the clock stops.
pub fn trigger_detection_probability(e_k: f64, p: f64, m: f64, alpha: f64) -> Result<f64> {
    Ok(trigger_clock_channel(alpha, e_k, p, m)?.detection())
}

/// Limit `|φ_Rdown| = √E_k / (√E_k + √(E_k + p))` for an infinitely strong barrier.
pub fn limit_transmitted_amplitude(e_k: f64, p: f64) -> f64 {
    e_k.sqrt() / (e_k.sqrt() + (e_k + p).sqrt())
}

/// Spin-basis decomposition of a trigger that reflects the `+x` spin
/// component and transmits the `-x` one: the final state
/// `(ψ_R|+x⟩ + ψ_T|-x⟩)/√2` equals `on |↑⟩ + off |↓⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipDecomposition {
    /// `(ψ_R + ψ_T)/2`.
    pub on: Vec<Complex64>,
    /// `(ψ_R - ψ_T)/2`.
    pub off: Vec<Complex64>,
    pub on_weight: f64,
    pub off_weight: f64,
    /// Norm of the final state, `(‖ψ_R‖² + ‖ψ_T‖²)/2`.
    pub total: f64,
}

impl FlipDecomposition {
    pub fn off_probability(&self) -> f64 {
        self.off_weight / self.total
    }
}

/// Decomposes sampled reflected and transmitted wavefunctions (grid spacing
/// `h`) into the spin-on and spin-off parts.
pub fn trigger_only_flip(
    reflected: &[Complex64],
    transmitted: &[Complex64],
    h: f64,
) -> Result<FlipDecomposition> {
    require(
        reflected.len() == transmitted.len(),
        "transmitted",
        "length must match reflected",
    )?;
    require(h > 0.0, "h", "must be positive")?;
    let on: Vec<Complex64> = reflected
        .iter()
        .zip(transmitted)
        .map(|(r, t)| (r + t) / 2.0)
        .collect();
    let off: Vec<Complex64> = reflected
        .iter()
        .zip(transmitted)
        .map(|(r, t)| (r - t) / 2.0)
        .collect();
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
    let total = 0.5 * (norm(reflected) + norm(transmitted));
    require(total > 0.0, "reflected", "state has zero norm")?;
    Ok(FlipDecomposition {
        on_weight: norm(&on),
        off_weight: norm(&off),
        on,
        off,
        total,
    })
}

/// `N` independent triggers in the strong limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiTrigger {
    pub n: u32,
    /// Probability that at least one spin flipped, `numerator / denominator`.
    pub numerator: u64,
    pub denominator: u64,
}

impl MultiTrigger {
    pub fn flip_probability(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

pub fn multi_trigger(n: i64) -> Result<MultiTrigger> {
    require(n >= 1, "n", "need at least one trigger")?;
    require(n <= 63, "n", "exact arithmetic limited to 63 triggers")?;
    let denominator = 1u64 << n;
    Ok(MultiTrigger {
        n: n as u32,
        numerator: denominator - 1,
        denominator,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerSweepRow {
    pub alpha: f64,
    pub e_k: f64,
    pub p: f64,
    pub det_prob: f64,
    pub flux_error: f64,
}

/// Detection probability over the cartesian product of the inputs.
pub fn trigger_sweep(
    alphas: &[f64],
    energies: &[f64],
    momenta: &[f64],
    m: f64,
) -> Result<Vec<TriggerSweepRow>> {
    let mut rows = Vec::with_capacity(alphas.len() * energies.len() * momenta.len());
    for &alpha in alphas {
        for &e_k in energies {
            for &p in momenta {
                let ch = trigger_clock_channel(alpha, e_k, p, m)?;
                rows.push(TriggerSweepRow {
                    alpha,
                    e_k,
                    p,
                    det_prob: ch.detection(),
                    flux_error: ch.flux_error(),
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock_model::detection_probability;

    #[test]
    fn strong_barrier_at_zero_clock_momentum() {
        let a = alpha_limit(0.5, 0.0, 1.0);
        let ch = trigger_clock_channel(a, 0.5, 0.0, 1.0).unwrap();
        assert!((ch.r_down.norm() - 0.5).abs() < 1e-4);
        assert!((ch.r_up.norm() - 0.5).abs() < 1e-4);
        assert!((ch.detection() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn strong_limit_is_converged() {
        for &(e, p) in &[(0.5, 0.3), (2.0, 40.0), (1.0, 1.0)] {
            let a = alpha_limit(e, p, 1.0);
            let x = trigger_clock_channel(a, e, p, 1.0).unwrap();
            let y = trigger_clock_channel(10.0 * a, e, p, 1.0).unwrap();
            assert!((x.r_down - y.r_down).norm() < 1e-5);
            assert!((x.r_down.norm() - limit_transmitted_amplitude(e, p)).abs() < 1e-4);
        }
    }

    #[test]
    fn large_clock_momentum_reflects_in_up_channel() {
        let (e, p) = (0.5, 1e5);
        let ch = trigger_clock_channel(alpha_limit(e, p, 1.0), e, p, 1.0).unwrap();
        assert!(ch.l_down.norm() < 0.01);
        assert!(ch.l_up.norm() > 0.99);
    }

    #[test]
    fn decoupled_channels_never_trigger() {
        let ch = trigger_clock_channel(0.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(ch.detection(), 0.0);
        assert_eq!(ch.r_up, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn strong_limit_is_half_of_direct_coupling() {
        for &(e, p) in &[(0.5, 0.1), (1.0, 3.0), (0.2, 50.0)] {
            let d = trigger_detection_probability(e, p, 1.0, alpha_limit(e, p, 1.0)).unwrap();
            assert!((2.0 * d - detection_probability(e, p)).abs() < 1e-5);
        }
    }

    #[test]
    fn multi_trigger_is_exact() {
        assert_eq!(multi_trigger(1).unwrap().flip_probability(), 0.5);
        let m3 = multi_trigger(3).unwrap();
        assert_eq!((m3.numerator, m3.denominator), (7, 8));
        let m10 = multi_trigger(10).unwrap();
        assert_eq!((m10.numerator, m10.denominator), (1023, 1024));
        assert!(multi_trigger(0).is_err());
        assert!(multi_trigger(-2).is_err());
    }

    #[test]
    fn flip_decomposition() {
        let h = 0.1;
        let psi: Vec<Complex64> = (0..200)
            .map(|i| {
                let x = -10.0 + i as f64 * h;
                Complex64::from_polar((-(x * x) / 2.0).exp(), 2.0 * x)
            })
            .collect();
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
        let psi: Vec<Complex64> = psi.iter().map(|z| z / n.sqrt()).collect();
        let zero = vec![Complex64::new(0.0, 0.0); psi.len()];
        let d = trigger_only_flip(&psi, &zero, h).unwrap();
        assert!(d
            .off
            .iter()
            .zip(&psi)
            .all(|(o, p)| (o - p / 2.0).norm() < 1e-15));
        assert!((d.off_weight - 0.25).abs() < 1e-12);
        assert!(((d.on_weight + d.off_weight) / d.total - 1.0).abs() < 1e-12);
        // Disjoint reflected and transmitted packets: the clock stops half the time.
        let shifted: Vec<Complex64> = (0..psi.len())
            .map(|i| if i >= 100 { psi[i - 100] } else { zero[0] })
            .collect();
        let left: Vec<Complex64> = (0..psi.len())
            .map(|i| if i < 100 { psi[i + 50] } else { zero[0] })
            .collect();
        let d = trigger_only_flip(&left, &shifted, h).unwrap();
        assert!((d.off_probability() - 0.5).abs() < 1e-6);
    }
}
