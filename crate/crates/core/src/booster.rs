//! Spin-flip energy booster built from localized interactions.
//!
//! Lengths are physical but energies are in reduced form, `2m = 1`: the
//! potentials `V1`, `V2`, `W` and the flip strength `α` are quoted in units of
//! wavenumber² (length⁻¹ for `α`), so the channel relations read
//! `k² = V1 - q² = W - λ² = k'² - V2`. Multiply by `1/2m` for physical
//! energies, see [`BoosterParams::physical`].

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::common::{MomentumEnvelope, I};
use crate::error::{require, Result, ToaError};
use crate::quad::Rule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoosterParams {
    pub m: f64,
    pub k: f64,
    pub k_prime: f64,
    pub lambda: f64,
    pub q: f64,
    pub alpha: f64,
    pub v1: f64,
    pub v2: f64,
    pub w: f64,
}

/// Physical strengths (energies, and energy × length for the delta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPotentials {
    pub alpha: f64,
    pub v1: f64,
    pub v2: f64,
    pub w: f64,
}

/// Parameters giving full transmission with spin flip at wavenumber `k`:
/// `q = λk'/k` and `α² = k'k + qλ`.
pub fn tune(m: f64, k: f64, k_prime: f64, lambda: f64) -> Result<BoosterParams> {
    require(m > 0.0, "m", "must be positive")?;
    require(k > 0.0, "k", "must be positive")?;
    require(lambda > 0.0, "lambda", "must be positive")?;
    if k_prime <= k {
        return Err(ToaError::Domain(format!(
            "boosted wavenumber {k_prime} must exceed k = {k}"
        )));
    }
    let q = lambda * k_prime / k;
    Ok(BoosterParams {
        m,
        k,
        k_prime,
        lambda,
        q,
        alpha: (k_prime * k + q * lambda).sqrt(),
        v1: k * k + q * q,
        v2: k_prime * k_prime - k * k,
        w: k * k + lambda * lambda,
    })
}

impl BoosterParams {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn physical(&self) -> PhysicalPotentials {
        let s = 1.0 / (2.0 * self.m);
        PhysicalPotentials {
            alpha: self.alpha * s,
            v1: self.v1 * s,
            v2: self.v2 * s,
            w: self.w * s,
        }
    }

    /// Largest violation of the three energy-matching identities.
    pub fn matching_error(&self) -> f64 {
        let k2 = self.k * self.k;
        let a = (self.v1 - self.q * self.q - k2).abs();
        let b = (self.w - self.lambda * self.lambda - k2).abs();
        let c = (self.k_prime * self.k_prime - self.v2 - k2).abs();
        a.max(b).max(c)
    }

    /// Largest violation of the two tuning conditions.
    pub fn tuning_error(&self) -> f64 {
        let a = (self.alpha * self.alpha - (self.k_prime * self.k + self.q * self.lambda)).abs();
        let b = (self.q - self.lambda * self.k_prime / self.k).abs();
        a.max(b)
    }

    /// Incident wavenumbers with a propagating input and evanescent side channels.
    pub fn window(&self) -> (f64, f64) {
        (0.0, self.w.min(self.v1).sqrt())
    }
}

/// Amplitudes and currents for one incident wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoosterChannel {
    pub k_in: f64,
    pub k_prime: f64,
    pub q: f64,
    pub lambda: f64,
    pub l_up: Complex64,
    pub l_down: Complex64,
    pub r_up: Complex64,
    pub r_down: Complex64,
    pub j_lup: f64,
    pub j_rdown: f64,
}

impl BoosterChannel {
    pub fn flux_error(&self) -> f64 {
        self.j_lup + self.j_rdown - 1.0
    }
}

/// Solves the matching conditions at `x = 0` for incident wavenumber `k_in`
/// with the channel wavenumbers recomputed from the fixed potentials.
pub fn booster_channel(params: &BoosterParams, k_in: f64) -> Result<BoosterChannel> {
    let (lo, hi) = params.window();
    if !(k_in > lo && k_in < hi) {
        return Err(ToaError::EvanescentInput { k_in, lo, hi });
    }
    let k2 = k_in * k_in;
    let q = (params.v1 - k2).sqrt();
    let lambda = (params.w - k2).sqrt();
    let kp = (k2 + params.v2).sqrt();
    let a = params.alpha;
    let c = |x: f64| Complex64::new(x, 0.0);
    let z = c(0.0);
    // Unknowns: L_up, L_down, R_up, R_down.
    let mat = Matrix4::new(
        c(-1.0),
        z,
        c(1.0),
        z,
        z,
        c(1.0),
        z,
        c(-1.0),
        I * k_in,
        z,
        c(-lambda),
        c(-a),
        z,
        c(-q),
        c(-a),
        I * kp,
    );
    let rhs = Vector4::new(c(1.0), z, I * k_in, z);
    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| ToaError::Stability(format!("singular matching system at k = {k_in}")))?;
    let residual = (mat * sol - rhs).norm();
    let scale = 1.0 + k_in + kp + q + lambda + a;
    if residual > 1e-12 * scale {
        return Err(ToaError::Stability(format!(
            "matching residual {residual:e} at k = {k_in}"
        )));
    }
    let (l_up, l_down, r_up, r_down) = (sol[0], sol[1], sol[2], sol[3]);
    Ok(BoosterChannel {
        k_in,
        k_prime: kp,
        q,
        lambda,
        l_up,
        l_down,
        r_up,
        r_down,
        j_lup: l_up.norm_sqr(),
        j_rdown: kp / k_in * r_down.norm_sqr(),
    })
}

/// Closed-form amplitudes `(φ_Lup, φ_Rdown)` at the design wavenumber.
pub fn design_amplitudes(params: &BoosterParams) -> (Complex64, Complex64) {
    let (k, kp, q, l, a) = (
        params.k,
        params.k_prime,
        params.q,
        params.lambda,
        params.alpha,
    );
    let num = Complex64::new(kp * k + q * l - a * a, k * q - kp * l);
    let den = Complex64::new(kp * k - q * l + a * a, kp * l + k * q);
    let l_up = num / den;
    let r_down = a / Complex64::new(-q, kp) * (1.0 + l_up);
    (l_up, r_down)
}

/// Centered difference `(J(k(1+δ)) - J(k(1-δ))) / (2δk)` of the boosted current.
pub fn transmission_slope(params: &BoosterParams, delta: f64) -> Result<f64> {
    let up = booster_channel(params, params.k * (1.0 + delta))?.j_rdown;
    let down = booster_channel(params, params.k * (1.0 - delta))?.j_rdown;
    Ok((up - down) / (2.0 * delta * params.k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoosterRow {
    pub k_in: f64,
    pub j_rdown: f64,
    pub j_lup: f64,
    pub flux_error: f64,
}

pub fn transmission_curve(params: &BoosterParams, k_values: &[f64]) -> Result<Vec<BoosterRow>> {
    k_values
        .iter()
        .map(|&k| {
            let ch = booster_channel(params, k)?;
            Ok(BoosterRow {
                k_in: k,
                j_rdown: ch.j_rdown,
                j_lup: ch.j_lup,
                flux_error: ch.flux_error(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketDistortion {
    /// `(k, J_Rdown(k))` at the quadrature nodes.
    pub curve: Vec<(f64, f64)>,
    /// Fraction of the packet that is boosted.
    pub boosted_fraction: f64,
    /// L¹ distance between the normalised incident and boosted spectra.
    pub metric: f64,
}

/// Compares `|g|²` with the boosted spectrum `J_Rdown(k)|g|²`, both normalised.
pub fn packet_distortion(
    params: &BoosterParams,
    g: &dyn MomentumEnvelope,
    nodes: usize,
) -> Result<PacketDistortion> {
    let (lo, hi) = params.window();
    let support = g.support();
    let s_lo = support.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let s_hi = support
        .iter()
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if s_lo <= lo || s_hi >= hi {
        return Err(ToaError::SupportViolation { lo: s_lo, hi: s_hi });
    }
    let mut curve = Vec::new();
    let (mut a_sum, mut b_sum) = (0.0, 0.0);
    let mut samples = Vec::new();
    for (a, b) in support {
        let rule = Rule::with_nodes(a, b, nodes);
        for (&k, &w) in rule.nodes.iter().zip(&rule.weights) {
            let j = booster_channel(params, k)?.j_rdown;
            let g2 = g.amplitude(k).norm_sqr();
            curve.push((k, j));
            samples.push((w, g2, j * g2));
            a_sum += w * g2;
            b_sum += w * j * g2;
        }
    }
    let metric = samples
        .iter()
        .map(|&(w, a, b)| w * (a / a_sum - b / b_sum).abs())
        .sum();
    Ok(PacketDistortion {
        curve,
        boosted_fraction: b_sum / a_sum,
        metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuning_example() {
        let p = tune(1.0, 1.0, 2.0, 3.0).unwrap();
        assert_eq!(p.q, 6.0);
        assert!((p.alpha - 20f64.sqrt()).abs() < 1e-15);
        assert_eq!((p.v1, p.w, p.v2), (37.0, 10.0, 3.0));
        assert!(p.matching_error() < 1e-12 && p.tuning_error() < 1e-12);
    }

    #[test]
    fn tuning_rejects_bad_input() {
        assert!(matches!(tune(1.0, 2.0, 2.0, 1.0), Err(ToaError::Domain(_))));
        assert!(tune(1.0, 1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn no_boost_limit() {
        let p = tune(1.0, 1.5, 1.5 + 1e-9, 1e-9).unwrap();
        assert!((p.alpha - 1.5).abs() < 1e-8);
        assert!(p.q < 1e-8 && p.v2 < 1e-8);
    }

    #[test]
    fn full_transmission_at_design_point() {
        let p = tune(1.0, 1.0, 2.0, 3.0).unwrap();
        let ch = booster_channel(&p, p.k).unwrap();
        assert!((ch.j_rdown - 1.0).abs() < 1e-10);
        assert!(ch.j_lup < 1e-10);
        let (l_up, r_down) = design_amplitudes(&p);
        assert!((l_up - ch.l_up).norm() < 1e-12);
        assert!((r_down - ch.r_down).norm() < 1e-12);
        assert!((ch.r_up - 1.0 - ch.l_up).norm() < 1e-12);
    }

    #[test]
    fn closed_form_matches_solver_off_tuning() {
        let p = tune(1.0, 1.0, 2.0, 3.0).unwrap().with_alpha(2.0);
        let (l_up, r_down) = design_amplitudes(&p);
        let ch = booster_channel(&p, p.k).unwrap();
        assert!((l_up - ch.l_up).norm() < 1e-12 && (r_down - ch.r_down).norm() < 1e-12);
    }

    #[test]
    fn decoupled_booster_reflects() {
        let p = tune(1.0, 1.0, 2.0, 3.0).unwrap().with_alpha(0.0);
        let ch = booster_channel(&p, p.k).unwrap();
        assert_eq!(ch.r_down, Complex64::new(0.0, 0.0));
        assert!((ch.j_lup - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evanescent_input_rejected() {
        let p = tune(1.0, 1.0, 2.0, 3.0).unwrap();
        assert!(matches!(
            booster_channel(&p, 4.0),
            Err(ToaError::EvanescentInput { .. })
        ));
        assert!(booster_channel(&p, -1.0).is_err());
    }

    #[test]
    fn design_point_is_a_maximum() {
        let p = tune(1.0, 1.0, 2.0, 3.0).unwrap();
        for i in 1..=50 {
            let d = 0.1 * i as f64 / 50.0;
            for k in [p.k * (1.0 + d), p.k * (1.0 - d)] {
                assert!(booster_channel(&p, k).unwrap().j_rdown <= 1.0 + 1e-12);
            }
        }
    }
}
