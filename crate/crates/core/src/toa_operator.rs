//! Time-of-arrival operator for a free particle arriving at `x = 0`,
//! `T = -m p^{-1/2} x p^{-1/2}`, acting in momentum space as
//! `Tψ = -im (ψ'/k - ψ/2k²)`.
//!
//! Its eigenfunctions are `⟨k|T±⟩ = θ(±k) sqrt(|k|/2πm) e^{iTk²/2m}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::common::{MomentumEnvelope, I};
use crate::error::{require, Result, ToaError};
use crate::quad::{linear_fit, richardson, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToaEigenfunction {
    pub t: f64,
    pub m: f64,
    pub branch: Branch,
    /// Amplitudes with `|k| < k_min` are set to zero.
    pub k_min: f64,
}

impl ToaEigenfunction {
    pub fn new(t: f64, m: f64, branch: Branch) -> Self {
        ToaEigenfunction {
            t,
            m,
            branch,
            k_min: 0.0,
        }
    }

    pub fn amplitude(&self, k: f64) -> Complex64 {
        let on_branch = match self.branch {
            Branch::Plus => k > 0.0,
            Branch::Minus => k < 0.0,
        };
        if !on_branch || k.abs() < self.k_min {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(
            (k.abs() / (2.0 * PI * self.m)).sqrt(),
            self.t * k * k / (2.0 * self.m),
        )
    }

    pub fn sample(&self, ks: &[f64]) -> Vec<Complex64> {
        ks.iter().map(|&k| self.amplitude(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub t: f64,
    pub t_prime: f64,
    /// Both branches, extrapolated to zero damping.
    pub value: Complex64,
    /// `+` branch alone, extrapolated.
    pub plus_branch: Complex64,
    /// `-i / (π(T - T'))`.
    pub predicted: Complex64,
    /// `(η, overlap)` for each damping `e^{-ηk²}`.
    pub per_scale: Vec<(f64, Complex64)>,
}

/// Dampings `η, η/2, η/4` scaled to the separation.
pub fn default_damping(t: f64, t_prime: f64, m: f64) -> Vec<f64> {
    let eta = 0.05 * (t - t_prime).abs() / m;
    vec![eta, eta / 2.0, eta / 4.0]
}

/// `∫dk |k|/(2πm) e^{-ηk²} e^{iτk²/2m}` over one branch.
fn damped_branch(tau: f64, m: f64, eta: f64) -> Complex64 {
    let k_max = (46.0 / eta).sqrt();
    let rate = tau.abs() * k_max / m + 1.0;
    let panels = ((k_max * rate / 2.0).ceil() as usize).max(8);
    let rule = Rule::composite(0.0, k_max, panels, 16);
    let mut sum = Complex64::new(0.0, 0.0);
    for (&k, &w) in rule.nodes.iter().zip(&rule.weights) {
        let k2 = k * k;
        sum += Complex64::from_polar(
            w * k / (2.0 * PI * m) * (-eta * k2).exp(),
            tau * k2 / (2.0 * m),
        );
    }
    sum
}

/// `⟨T|T'⟩` regularised by `e^{-ηk²}` and extrapolated to `η → 0`.
/// `damping` must halve at each step.
pub fn overlap(t: f64, t_prime: f64, m: f64, damping: &[f64]) -> Result<OverlapResult> {
    require(m > 0.0, "m", "must be positive")?;
    require(
        t != t_prime,
        "t_prime",
        "diagonal overlap is a delta function",
    )?;
    require(damping.len() >= 2, "damping", "need at least two scales")?;
    for w in damping.windows(2) {
        require(
            (w[0] / w[1] - 2.0).abs() < 1e-9,
            "damping",
            "scales must halve at each step",
        )?;
    }
    let tau = t_prime - t;
    let per_scale: Vec<(f64, Complex64)> = damping
        .iter()
        .map(|&eta| {
            // The minus branch equals the plus branch by k → -k.
            let plus = damped_branch(tau, m, eta);
            (eta, plus + damped_branch(tau, m, eta))
        })
        .collect();
    let re: Vec<f64> = per_scale.iter().map(|v| v.1.re).collect();
    let im: Vec<f64> = per_scale.iter().map(|v| v.1.im).collect();
    let value = Complex64::new(richardson(&re, 1), richardson(&im, 1));
    let n = re.len();
    let coarse = Complex64::new(richardson(&re[..n - 1], 1), richardson(&im[..n - 1], 1));
    let spread = (value - coarse).norm() / value.norm();
    if spread > 0.02 {
        return Err(ToaError::Regularization(format!(
            "extrapolated overlap moved by {:.2}% when adding the finest damping {}",
            100.0 * spread,
            damping[n - 1]
        )));
    }
    Ok(OverlapResult {
        t,
        t_prime,
        value,
        plus_branch: value / 2.0,
        predicted: -I / (PI * (t - t_prime)),
        per_scale,
    })
}

/// Closed form of the damped two-branch overlap, `1 / (2πmη - iπ(T' - T))`.
pub fn damped_overlap_exact(t: f64, t_prime: f64, m: f64, eta: f64) -> Complex64 {
    1.0 / Complex64::new(2.0 * PI * m * eta, -PI * (t_prime - t))
}

/// `⟨x|T+⟩` at the arrival instant, Abel-regularised with `e^{-εk}`:
/// `(2π)^{-1} m^{-1/2} ∫₀^∞ k^{1/2} e^{-(ε - ix)k} dk`.
pub fn arrival_wavefunction(x: f64, m: f64, eps: f64) -> Complex64 {
    // k = u², dk = 2u du removes the square-root cusp at k = 0.
    let u_max = (46.0 / eps).sqrt();
    let rate = 2.0 * x.abs() * u_max + 1.0;
    let panels = ((u_max * rate / 3.0).ceil() as usize).max(8);
    let rule = Rule::composite(0.0, u_max, panels, 8);
    let mut sum = Complex64::new(0.0, 0.0);
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        let k = u * u;
        sum += Complex64::from_polar(w * 2.0 * u * u * (-eps * k).exp(), k * x);
    }
    sum / (2.0 * PI * m.sqrt())
}

/// `⟨x = 0|e^{-iHt}|T+⟩` with `s = T - t`, regularised by `e^{-εk}`. For
/// `s ≠ 0` the integral is taken along the ray `arg k = ±π/4`, where the
/// free phase becomes a Gaussian, so it stays finite as `ε → 0`.
pub fn origin_amplitude(s: f64, m: f64, eps: f64) -> Complex64 {
    if s == 0.0 {
        return arrival_wavefunction_exact(0.0, m, eps);
    }
    let dir = Complex64::from_polar(1.0, s.signum() * PI / 4.0);
    let a = s.abs() / (2.0 * m);
    let u_max = (46.0 / a).powf(0.25);
    let rule = Rule::composite(0.0, u_max, 32, 16);
    let mut sum = Complex64::new(0.0, 0.0);
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        let r = u * u;
        let k = dir * r;
        sum += w * 2.0 * u * k.sqrt() * (-a * r * r - eps * k).exp();
    }
    sum * dir / (2.0 * PI * m.sqrt())
}

/// Closed form of [`arrival_wavefunction`]: `Γ(3/2) / (2π sqrt(m) (ε - ix)^{3/2})`.
pub fn arrival_wavefunction_exact(x: f64, m: f64, eps: f64) -> Complex64 {
    let gamma = PI.sqrt() / 2.0;
    gamma / (2.0 * PI * m.sqrt()) / Complex64::new(eps, -x).powf(1.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub r2: f64,
    pub eps: f64,
    /// `(x, |⟨x|T⟩|)`.
    pub points: Vec<(f64, f64)>,
}

/// Log-log slope of `|⟨x|T⟩|` at the arrival instant over `x_range`.
/// The regulator defaults to a tenth of the smallest distance.
pub fn position_tail(
    m: f64,
    x_range: (f64, f64),
    n_points: usize,
    eps: Option<f64>,
) -> Result<TailFit> {
    let (lo, hi) = x_range;
    require(lo > 0.0 && hi > lo, "x_range", "need 0 < lo < hi")?;
    require(
        hi / lo >= 100.0,
        "x_range",
        "must span at least two decades",
    )?;
    require(n_points >= 3, "n_points", "need at least three points")?;
    let eps = eps.unwrap_or(lo / 10.0);
    let points: Vec<(f64, f64)> = (0..n_points)
        .map(|i| {
            let x = lo * (hi / lo).powf(i as f64 / (n_points - 1) as f64);
            (x, arrival_wavefunction(x, m, eps).norm())
        })
        .collect();
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, _, r2) = linear_fit(&lx, &ly);
    if r2 < 0.99 {
        return Err(ToaError::PoorFit {
            r2,
            detail: format!("x range [{lo}, {hi}], eps = {eps}"),
        });
    }
    Ok(TailFit {
        slope,
        r2,
        eps,
        points,
    })
}

/// Uniform momentum grid `k_j = k_lo + j h`, `j < n`, used for the spectral
/// derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KGrid {
    pub k: Vec<f64>,
    pub h: f64,
}

impl KGrid {
    pub fn new(k_lo: f64, k_hi: f64, n: usize) -> Result<Self> {
        require(k_lo > 0.0, "k_lo", "grid must exclude k = 0")?;
        require(k_hi > k_lo, "k_hi", "must exceed k_lo")?;
        require(n >= 8, "n", "need at least 8 points")?;
        let h = (k_hi - k_lo) / n as f64;
        Ok(KGrid {
            k: (0..n).map(|j| k_lo + j as f64 * h).collect(),
            h,
        })
    }

    pub fn sample(&self, psi: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        self.k.iter().map(|&k| psi(k)).collect()
    }

    pub fn norm(&self, v: &[Complex64]) -> f64 {
        (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.h).sqrt()
    }

    /// Periodic spectral derivative.
    pub fn derivative(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        let mut planner = FftPlanner::<f64>::new();
        let mut buf = v.to_vec();
        planner.plan_fft_forward(n).process(&mut buf);
        let span = n as f64 * self.h;
        for (j, c) in buf.iter_mut().enumerate() {
            let freq = if j < n / 2 {
                j as f64
            } else if j == n / 2 && n.is_multiple_of(2) {
                0.0
            } else {
                j as f64 - n as f64
            };
            *c *= I * (2.0 * PI * freq / span);
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c / n as f64).collect()
    }

    /// `Tψ = -im (ψ'/k - ψ/2k²)`.
    pub fn apply_t(&self, v: &[Complex64], m: f64) -> Vec<Complex64> {
        let d = self.derivative(v);
        self.k
            .iter()
            .zip(v.iter().zip(&d))
            .map(|(&k, (&f, &df))| -I * m * (df / k - f / (2.0 * k * k)))
            .collect()
    }

    pub fn apply_h(&self, v: &[Complex64], m: f64) -> Vec<Complex64> {
        self.k
            .iter()
            .zip(v)
            .map(|(&k, &f)| f * (k * k / (2.0 * m)))
            .collect()
    }

    /// `(2π)^{-1/2} Σ_j h v_j e^{i k_j x}`.
    pub fn to_position(&self, v: &[Complex64], x: f64) -> Complex64 {
        let s: Complex64 = self
            .k
            .iter()
            .zip(v)
            .map(|(&k, &f)| f * Complex64::from_polar(1.0, k * x))
            .sum();
        s * self.h / (2.0 * PI).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyResult {
    /// `‖([T,H] - i)ψ‖ / ‖ψ‖`.
    pub residual_plus: f64,
    /// `‖([T,H] + i)ψ‖ / ‖ψ‖`.
    pub residual_minus: f64,
    /// `+1` if `[T,H] = +i` fits better, `-1` otherwise.
    pub best_sign: i8,
    pub residual: f64,
}

/// Residual of `[T, H] = ±i` on a state sampled on a grid that excludes
/// `k = 0` (where the projector onto `p = 0` acts trivially).
pub fn conjugacy_residual(psi: impl Fn(f64) -> Complex64, grid: &KGrid, m: f64) -> ConjugacyResult {
    let v = grid.sample(psi);
    let th = grid.apply_t(&grid.apply_h(&v, m), m);
    let ht = grid.apply_h(&grid.apply_t(&v, m), m);
    let norm = grid.norm(&v);
    let res = |sign: f64| {
        let r: Vec<Complex64> = th
            .iter()
            .zip(&ht)
            .zip(&v)
            .map(|((a, b), f)| a - b - sign * I * f)
            .collect();
        grid.norm(&r) / norm
    };
    let (rp, rm) = (res(1.0), res(-1.0));
    let (best_sign, residual) = if rp < rm { (1, rp) } else { (-1, rm) };
    ConjugacyResult {
        residual_plus: rp,
        residual_minus: rm,
        best_sign,
        residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorResult {
    pub epsilon: f64,
    /// `⟨ψ|[T, P_ε]|ψ⟩ / ε` for the window projector onto `|x| < ε/2`.
    pub lhs: Complex64,
    /// `i Re{ψ_ε(0) ∫dk ψ*(k) m/k²} / sqrt(2π)`, with `ψ_ε(0)` the window
    /// average of `ψ(x)`.
    pub rhs: Complex64,
    /// `-(i/2) Re{ψ_ε(0) ∫dk ψ*(k) m/k²}`, the commonly quoted normalisation.
    pub rhs_quoted: Complex64,
}

/// Compares both sides of the commutator identity with the arrival-point
/// projector smeared over a window of width `eps`.
pub fn projector_commutator(
    psi: impl Fn(f64) -> Complex64,
    grid: &KGrid,
    m: f64,
    eps: f64,
) -> Result<CommutatorResult> {
    require(eps > 0.0, "eps", "must be positive")?;
    let k_lo = grid.k[0];
    let k_hi = *grid.k.last().expect("grid is non-empty") + grid.h;
    let below = Rule::with_nodes(0.0, k_lo, 64).integrate(|k| psi(k).norm_sqr());
    let total = below + Rule::with_nodes(k_lo, k_hi, 512).integrate(|k| psi(k).norm_sqr());
    let weight = below / total;
    if weight > 1e-3 {
        return Err(ToaError::InfraredSingularity {
            weight,
            k_min: k_lo,
        });
    }
    let v = grid.sample(&psi);
    let tv = grid.apply_t(&v, m);
    let window = Rule::with_nodes(-eps / 2.0, eps / 2.0, 16);
    let mut w = Complex64::new(0.0, 0.0);
    let mut avg = Complex64::new(0.0, 0.0);
    for (&x, &wx) in window.nodes.iter().zip(&window.weights) {
        let px = grid.to_position(&v, x);
        w += wx * grid.to_position(&tv, x).conj() * px;
        avg += wx * px;
    }
    let lhs = 2.0 * I * w.im / eps;
    let avg = avg / eps;
    let moment: Complex64 = grid
        .k
        .iter()
        .zip(&v)
        .map(|(&k, f)| f.conj() * (m / (k * k)))
        .sum::<Complex64>()
        * grid.h;
    let re = (avg * moment).re;
    Ok(CommutatorResult {
        epsilon: eps,
        lhs,
        rhs: I * re / (2.0 * PI).sqrt(),
        rhs_quoted: -0.5 * I * re,
    })
}

/// `⟨k|T+⟩` restricted to `[k_min, k_max]` and normalised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedEigenstate {
    pub t: f64,
    pub m: f64,
    pub k_min: f64,
    pub k_max: f64,
}

pub fn truncated_eigenstate(t: f64, m: f64, k_min: f64, k_max: f64) -> Result<TruncatedEigenstate> {
    require(m > 0.0, "m", "must be positive")?;
    if !(k_min > 0.0 && k_max > k_min) {
        return Err(ToaError::Domain(format!("empty band [{k_min}, {k_max}]")));
    }
    Ok(TruncatedEigenstate { t, m, k_min, k_max })
}

impl TruncatedEigenstate {
    /// Arrival time of each momentum component by stationary phase,
    /// averaged over `|ψ(k)|²`.
    pub fn mean_classical_arrival(&self) -> f64 {
        // Component k starts at x = -kT/m and moves at k/m.
        let rule = Rule::with_nodes(self.k_min, self.k_max, 64);
        rule.integrate(|k| self.amplitude(k).norm_sqr() * (k * self.t / self.m) / (k / self.m))
    }
}

impl MomentumEnvelope for TruncatedEigenstate {
    fn amplitude(&self, k: f64) -> Complex64 {
        if k < self.k_min || k > self.k_max {
            return Complex64::new(0.0, 0.0);
        }
        let c = (2.0 / (self.k_max * self.k_max - self.k_min * self.k_min)).sqrt();
        Complex64::from_polar(c * k.sqrt(), self.t * k * k / (2.0 * self.m))
    }

    fn support(&self) -> Vec<(f64, f64)> {
        vec![(self.k_min, self.k_max)]
    }

    fn norm_sq(&self) -> f64 {
        1.0
    }

    fn resolution(&self) -> f64 {
        let band = self.k_max - self.k_min;
        let chirp = PI * self.m / (self.t.abs() * self.k_max + 1e-300);
        (band / 4.0).min(chirp)
    }

    fn phase_rate(&self) -> f64 {
        self.t.abs() * self.k_max / self.m
    }

    fn incident_left_mass(&self, m: f64, t: f64) -> f64 {
        crate::common::free_left_mass(self, m, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenfunction_modulus_is_independent_of_t() {
        let a = ToaEigenfunction::new(0.0, 1.3, Branch::Plus);
        let b = ToaEigenfunction::new(7.5, 1.3, Branch::Plus);
        let ks: Vec<f64> = (0..500).map(|i| -5.0 + 0.02 * i as f64).collect();
        for &k in &ks {
            assert!((a.amplitude(k).norm() - b.amplitude(k).norm()).abs() < 1e-12);
            if k <= 0.0 {
                assert_eq!(b.amplitude(k), Complex64::new(0.0, 0.0));
            }
        }
        let minus = ToaEigenfunction::new(1.0, 1.0, Branch::Minus);
        assert_eq!(minus.amplitude(1.0), Complex64::new(0.0, 0.0));
        assert!((minus.amplitude(-2.0).norm_sqr() - 2.0 / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn eigenvalue_equation_on_grid() {
        let m = 1.0;
        let grid = KGrid::new(0.5, 20.0, 2048).unwrap();
        // Smooth cutoff keeps the periodic derivative exact to roundoff.
        let env = |k: f64| (-(k - 8.0).powi(2)).exp();
        let e = ToaEigenfunction::new(2.0, m, Branch::Plus);
        let v = grid.sample(|k| e.amplitude(k) * env(k));
        let tv = grid.apply_t(&v, m);
        // T(gψ_T) = T gψ_T - im g'ψ_T/k.
        for (j, &k) in grid.k.iter().enumerate() {
            let dg = -2.0 * (k - 8.0) * env(k);
            let expected = 2.0 * v[j] - I * m * dg * e.amplitude(k) / k;
            assert!((tv[j] - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn overlap_swap_is_conjugate() {
        let a = overlap(1.0, 3.0, 1.0, &default_damping(1.0, 3.0, 1.0)).unwrap();
        let b = overlap(3.0, 1.0, 1.0, &default_damping(3.0, 1.0, 1.0)).unwrap();
        assert!((a.value - b.value.conj()).norm() < 1e-10);
    }

    #[test]
    fn damped_overlap_matches_closed_form() {
        for &(t, tp, eta) in &[(0.0, 1.0, 0.05), (2.0, -1.0, 0.1), (0.5, 0.0, 0.01)] {
            let num = damped_branch(tp - t, 1.0, eta) * 2.0;
            let exact = damped_overlap_exact(t, tp, 1.0, eta);
            assert!((num - exact).norm() < 1e-10 * exact.norm());
        }
    }

    #[test]
    fn arrival_wavefunction_matches_closed_form() {
        for &x in &[-3.0, 0.0, 10.0, 250.0] {
            let a = arrival_wavefunction(x, 2.0, 1.0);
            let b = arrival_wavefunction_exact(x, 2.0, 1.0);
            assert!((a - b).norm() < 1e-10 * b.norm(), "{x}: {a} vs {b}");
        }
    }

    #[test]
    fn origin_amplitude_is_finite_away_from_arrival() {
        // ∫₀^∞ r^{1/2} e^{-a r²} dr = Γ(3/4) / (2 a^{3/4}).
        let gamma_3_4 = 1.225_416_702_465_177_6;
        let (s, m) = (1.0f64, 1.0f64);
        let exact = gamma_3_4 / (2.0 * (s / (2.0 * m)).powf(0.75)) / (2.0 * PI);
        let a = origin_amplitude(s, m, 0.0);
        assert!((a.norm() - exact).abs() < 1e-10 * exact);
        assert!((origin_amplitude(s, m, 1e-4) - a).norm() < 1e-3 * exact);
        // At the arrival instant the density at the origin diverges as ε^{-3}.
        let r =
            origin_amplitude(0.0, m, 1e-2).norm_sqr() / origin_amplitude(0.0, m, 2e-2).norm_sqr();
        assert!((r - 8.0).abs() < 1e-9);
    }

    #[test]
    fn truncated_eigenstate_is_normalised() {
        let s = truncated_eigenstate(0.0, 1.0, 1.0, 10.0).unwrap();
        let n = Rule::with_nodes(1.0, 10.0, 64).integrate(|k| s.amplitude(k).norm_sqr());
        assert!((n - 1.0).abs() < 1e-10);
        let s = truncated_eigenstate(12.0, 1.5, 1.0, 3.0).unwrap();
        assert!((s.mean_classical_arrival() - 12.0).abs() < 1e-10);
        assert!(matches!(
            truncated_eigenstate(0.0, 1.0, 2.0, 2.0),
            Err(ToaError::Domain(_))
        ));
    }

    #[test]
    fn infrared_weight_is_rejected() {
        let grid = KGrid::new(0.5, 10.0, 256).unwrap();
        let err = projector_commutator(
            |k| Complex64::from((-(k - 0.6).powi(2)).exp()),
            &grid,
            1.0,
            0.1,
        );
        assert!(matches!(err, Err(ToaError::InfraredSingularity { .. })));
    }
}
