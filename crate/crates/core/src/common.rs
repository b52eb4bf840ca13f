//! Units (ħ = 1), Gaussian packet definitions, and the double-quadrature
//! synthesis engine shared by every model.
//!
//! A packet is the superposition `ψ = N ∫dk ∫₀^∞dp f(p) g(k) φ_kp(x, y, t)`
//! with `f(p) = exp(-Δy²(p-p₀)²)` for the clock and
//! `g(k) = exp(-Δx²(k-k₀)² + i k x₀)` for the particle. The clock amplitude is
//! restricted to `p > 0` and not renormalised afterwards; `PacketSpec`
//! exposes the discarded tail mass.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require, Result, ToaError};
use crate::quad::{merge_intervals, Rule};

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default truncation radius in units of the envelope scale (1/Δx, 1/Δy).
pub const DEFAULT_RADIUS: f64 = 6.0;
/// Default node count per quadrature axis.
pub const DEFAULT_NODES: usize = 128;

pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Gaussian packet parameters for the particle and the clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    /// Particle mass.
    pub m: f64,
    /// Mean particle wavenumber.
    pub k0: f64,
    /// Spatial width Δx of the particle packet.
    pub dx: f64,
    /// Initial offset; the packet starts centred at `x = -x0`.
    pub x0: f64,
    /// Mean clock momentum (an energy, since the clock Hamiltonian is `P_y`).
    pub p0: f64,
    /// Initial spread Δy of the clock pointer, i.e. the clock accuracy.
    pub dy: f64,
}

impl PacketSpec {
    pub fn new(m: f64, k0: f64, dx: f64, x0: f64, p0: f64, dy: f64) -> Result<Self> {
        let spec = PacketSpec {
            m,
            k0,
            dx,
            x0,
            p0,
            dy,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Hard constraints. The soft localisation conditions are reported by
    /// [`PacketSpec::regime_warnings`].
    pub fn validate(&self) -> Result<()> {
        require(self.m > 0.0 && self.m.is_finite(), "m", "must be positive")?;
        require(
            self.dx > 0.0 && self.dx.is_finite(),
            "dx",
            "must be positive",
        )?;
        require(
            self.dy > 0.0 && self.dy.is_finite(),
            "dy",
            "must be positive",
        )?;
        require(
            self.x0 > 0.0 && self.x0.is_finite(),
            "x0",
            "must be positive",
        )?;
        require(self.p0.is_finite(), "p0", "must be finite")?;
        require(self.k0.is_finite(), "k0", "must be finite")?;
        Ok(())
    }

    /// `N` with `N² = ΔxΔy / 2π³`.
    pub fn normalization(&self) -> f64 {
        (self.dx * self.dy / (2.0 * PI.powi(3))).sqrt()
    }

    /// Classical arrival time `m x0 / k0` at the detector.
    pub fn classical_toa(&self) -> Result<f64> {
        classical_toa(self.m, self.x0, self.k0)
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.k0 * self.k0 / (2.0 * self.m)
    }

    pub fn envelope(&self) -> GaussianEnvelope {
        GaussianEnvelope::new(self.k0, self.dx, self.x0)
    }

    pub fn clock(&self) -> ClockPrior {
        ClockPrior::new(self.p0, self.dy)
    }

    /// Mass of `|f|²` on `p < 0`, relative to the full-line Gaussian.
    pub fn clock_tail_mass(&self) -> f64 {
        self.clock().negative_tail_mass()
    }

    /// Mass of `|g|²` on `k < 0`.
    pub fn negative_k_mass(&self) -> f64 {
        0.5 * erfc(2f64.sqrt() * self.dx * self.k0)
    }

    /// Position-density mass of the free incident packet on `x > 0` at `t = 0`.
    pub fn initial_right_mass(&self) -> f64 {
        0.5 * erfc(self.x0 / (2f64.sqrt() * self.dx))
    }

    /// Mass of the freely propagated incident packet still on `x < 0` at time `t`.
    pub fn incident_left_mass(&self, t: f64) -> f64 {
        let centre = -self.x0 + self.k0 * t / self.m;
        let sigma = free_width(self.dx, self.m, t);
        0.5 * erfc(centre / (2f64.sqrt() * sigma))
    }

    /// Default late-time threshold `t_c + 5 m Δx / k0 + 5 Δy`.
    pub fn late_time(&self) -> Result<f64> {
        Ok(self.classical_toa()? + 5.0 * self.m * self.dx / self.k0 + 5.0 * self.dy)
    }

    /// Soft regime checks: tail masses above 10⁻³ and an initially
    /// delocalised packet.
    pub fn regime_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let tail = self.clock_tail_mass();
        if tail > 1e-3 {
            out.push(format!(
                "clock amplitude has {tail:.2e} of its mass on p < 0 (p0*dy = {:.3})",
                self.p0 * self.dy
            ));
        }
        let right = self.initial_right_mass();
        if right > 1e-3 || self.x0 < 3.0 * self.dx {
            out.push(format!(
                "packet not localized on the left: {right:.2e} of it starts on x > 0 (x0 = {}, dx = {})",
                self.x0, self.dx
            ));
        }
        let neg = self.negative_k_mass();
        if neg > 1e-3 {
            out.push(format!(
                "{neg:.2e} of the momentum distribution is on k < 0"
            ));
        }
        out
    }
}

/// Classical arrival time from `x = -x0` with wavenumber `k0`.
pub fn classical_toa(m: f64, x0: f64, k0: f64) -> Result<f64> {
    if k0 <= 0.0 {
        return Err(ToaError::NoClassicalArrival { k0 });
    }
    Ok(m * x0 / k0)
}

/// Standard deviation of the position density of a free Gaussian packet
/// that starts with standard deviation `dx`.
pub fn free_width(dx: f64, m: f64, t: f64) -> f64 {
    (dx * dx + (t / (2.0 * m * dx)).powi(2)).sqrt()
}

/// Closed form of `∫dk exp(-Δx²(k-k0)² + ik(x+x0) - ik²t/2m)`.
pub fn free_packet(k0: f64, dx: f64, x0: f64, m: f64, x: f64, t: f64) -> Complex64 {
    let a = Complex64::new(dx * dx, t / (2.0 * m));
    let b = Complex64::new(2.0 * dx * dx * k0, x + x0);
    let c = -dx * dx * k0 * k0;
    (Complex64::from(PI) / a).sqrt() * (b * b / (4.0 * a) + c).exp()
}

/// Momentum-space amplitude of the particle.
pub trait MomentumEnvelope: Sync {
    fn amplitude(&self, k: f64) -> Complex64;
    /// Disjoint intervals outside which the amplitude is negligible.
    fn support(&self) -> Vec<(f64, f64)>;
    /// `∫|g|² dk`.
    fn norm_sq(&self) -> f64;
    /// Scale in `k` of the envelope features (sets quadrature panel widths).
    fn resolution(&self) -> f64;
    /// Upper bound of `|d arg g / dk|` on the support, i.e. the initial
    /// distance of the packet from the origin.
    fn phase_rate(&self) -> f64;
    /// Mass of the freely propagated packet still on `x < 0` at time `t`,
    /// relative to its total mass.
    fn incident_left_mass(&self, m: f64, t: f64) -> f64;
}

/// `g(k) = exp(-Δx²(k-k0)² + i k x0)`, truncated at `radius / Δx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianEnvelope {
    pub k0: f64,
    pub dx: f64,
    pub x0: f64,
    pub radius: f64,
}

impl GaussianEnvelope {
    pub fn new(k0: f64, dx: f64, x0: f64) -> Self {
        GaussianEnvelope {
            k0,
            dx,
            x0,
            radius: DEFAULT_RADIUS,
        }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }
}

impl MomentumEnvelope for GaussianEnvelope {
    fn amplitude(&self, k: f64) -> Complex64 {
        let d = k - self.k0;
        Complex64::from_polar((-self.dx * self.dx * d * d).exp(), k * self.x0)
    }

    fn support(&self) -> Vec<(f64, f64)> {
        let r = self.radius / self.dx;
        vec![(self.k0 - r, self.k0 + r)]
    }

    fn norm_sq(&self) -> f64 {
        (PI / 2.0).sqrt() / self.dx
    }

    fn resolution(&self) -> f64 {
        1.0 / self.dx
    }

    fn phase_rate(&self) -> f64 {
        self.x0.abs()
    }

    fn incident_left_mass(&self, m: f64, t: f64) -> f64 {
        let centre = -self.x0 + self.k0 * t / m;
        0.5 * erfc(centre / (2f64.sqrt() * free_width(self.dx, m, t)))
    }
}

/// Two packets sharing everything but the mean wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimodalPacketSpec {
    /// Shared parameters; `base.k0` is ignored.
    pub base: PacketSpec,
    pub k1: f64,
    pub k2: f64,
    pub w1: f64,
    pub w2: f64,
}

impl BimodalPacketSpec {
    pub fn new(base: PacketSpec, k1: f64, k2: f64, w1: f64) -> Result<Self> {
        let s = BimodalPacketSpec {
            base,
            k1,
            k2,
            w1,
            w2: 1.0 - w1,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        require(self.k1 > 0.0, "k1", "must be positive")?;
        require(self.k2 > self.k1, "k2", "must exceed k1")?;
        require(
            self.w1 >= 0.0 && self.w2 >= 0.0 && ((self.w1 + self.w2) - 1.0).abs() < 1e-12,
            "w1",
            "weights must be non-negative and sum to one",
        )?;
        Ok(())
    }

    pub fn component(&self, which: usize) -> PacketSpec {
        let mut s = self.base;
        s.k0 = if which == 0 { self.k1 } else { self.k2 };
        s
    }

    pub fn envelope(&self) -> BimodalEnvelope {
        BimodalEnvelope {
            first: self.component(0).envelope(),
            second: self.component(1).envelope(),
            w1: self.w1,
            w2: self.w2,
        }
    }

    pub fn clock(&self) -> ClockPrior {
        self.base.clock()
    }
}

/// `g = √w1 g1 + √w2 g2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BimodalEnvelope {
    pub first: GaussianEnvelope,
    pub second: GaussianEnvelope,
    pub w1: f64,
    pub w2: f64,
}

impl MomentumEnvelope for BimodalEnvelope {
    fn amplitude(&self, k: f64) -> Complex64 {
        self.first.amplitude(k) * self.w1.sqrt() + self.second.amplitude(k) * self.w2.sqrt()
    }

    fn support(&self) -> Vec<(f64, f64)> {
        let mut iv = Vec::new();
        if self.w1 > 0.0 {
            iv.extend(self.first.support());
        }
        if self.w2 > 0.0 {
            iv.extend(self.second.support());
        }
        merge_intervals(iv)
    }

    fn norm_sq(&self) -> f64 {
        // Cross terms are kept: the overlap of the two Gaussians in k.
        let n1 = self.first.norm_sq();
        let n2 = self.second.norm_sq();
        let (a, b) = (self.first, self.second);
        let s = a.dx * a.dx + b.dx * b.dx;
        let cross =
            (PI / s).sqrt() * (-(a.dx * a.dx * b.dx * b.dx) * (a.k0 - b.k0).powi(2) / s).exp();
        self.w1 * n1 + self.w2 * n2 + 2.0 * (self.w1 * self.w2).sqrt() * cross
    }

    fn resolution(&self) -> f64 {
        self.first.resolution().min(self.second.resolution())
    }

    fn phase_rate(&self) -> f64 {
        self.first.phase_rate().max(self.second.phase_rate())
    }

    fn incident_left_mass(&self, m: f64, t: f64) -> f64 {
        let n1 = self.first.norm_sq() * self.w1;
        let n2 = self.second.norm_sq() * self.w2;
        (n1 * self.first.incident_left_mass(m, t) + n2 * self.second.incident_left_mass(m, t))
            / (n1 + n2)
    }
}

/// Clock momentum amplitude `f(p) = exp(-Δy²(p-p0)²)` on `p > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockPrior {
    pub p0: f64,
    pub dy: f64,
    pub radius: f64,
}

impl ClockPrior {
    pub fn new(p0: f64, dy: f64) -> Self {
        ClockPrior {
            p0,
            dy,
            radius: DEFAULT_RADIUS,
        }
    }

    pub fn amplitude(&self, p: f64) -> f64 {
        let d = p - self.p0;
        (-self.dy * self.dy * d * d).exp()
    }

    /// Integration range on the positive half-line.
    pub fn support(&self) -> (f64, f64) {
        let r = self.radius / self.dy;
        ((self.p0 - r).max(0.0), (self.p0 + r).max(0.0))
    }

    /// `∫_{-∞}^{∞}|f|² dp`; the normalisation uses the full line.
    pub fn full_norm_sq(&self) -> f64 {
        (PI / 2.0).sqrt() / self.dy
    }

    pub fn negative_tail_mass(&self) -> f64 {
        0.5 * erfc(2f64.sqrt() * self.dy * self.p0)
    }

    /// Mean of `|f|²` restricted to `p > 0`.
    pub fn mean_momentum(&self) -> f64 {
        let (a, b) = self.support();
        let rule = Rule::with_nodes(a, b, 128);
        let w = rule.integrate(|p| self.amplitude(p).powi(2));
        rule.integrate(|p| p * self.amplitude(p).powi(2)) / w
    }
}

/// Overall constant `N²` for arbitrary envelopes; reduces to `ΔxΔy/2π³`
/// for the Gaussian pair.
pub fn normalization_sq(g: &dyn MomentumEnvelope, f: &ClockPrior) -> f64 {
    1.0 / (4.0 * PI * PI * g.norm_sq() * f.full_norm_sq())
}

/// Quadrature nodes in `k` (full line) and `p` (positive half-line).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub k: Rule,
    pub p: Rule,
    /// Truncation radii in units of 1/Δx and 1/Δy.
    pub k_radius: f64,
    pub p_radius: f64,
}

impl QuadratureGrid {
    pub fn for_spec(spec: &PacketSpec) -> Self {
        Self::build(
            &spec.envelope(),
            &spec.clock(),
            DEFAULT_NODES,
            DEFAULT_NODES,
        )
    }

    pub fn build(g: &dyn MomentumEnvelope, f: &ClockPrior, nk: usize, np: usize) -> Self {
        let support = g.support();
        let total: f64 = support.iter().map(|(a, b)| b - a).sum();
        let k = Rule::concat(support.iter().map(|&(a, b)| {
            let share = ((b - a) / total * nk as f64).ceil() as usize;
            Rule::with_nodes(a, b, share.max(16))
        }));
        let (pa, pb) = f.support();
        let p = Rule::with_nodes(pa, pb, np);
        QuadratureGrid {
            k,
            p,
            k_radius: DEFAULT_RADIUS,
            p_radius: f.radius,
        }
    }

    /// Relative change of `∫|g|²` and `∫|f|²` when the outermost 10% of
    /// nodes (5% per truncated end) are dropped. Both must stay below 10⁻⁶.
    pub fn truncation_report(&self, g: &dyn MomentumEnvelope, f: &ClockPrior) -> (f64, f64) {
        let dk = drop_change(&self.k, true, |k| g.amplitude(k).norm_sqr());
        let lower_truncated = f.support().0 > 0.0;
        let dp = drop_change(&self.p, lower_truncated, |p| f.amplitude(p).powi(2));
        (dk, dp)
    }

    pub fn check(&self, g: &dyn MomentumEnvelope, f: &ClockPrior) -> Result<()> {
        let (dk, dp) = self.truncation_report(g, f);
        if dk >= 1e-6 {
            return Err(ToaError::Resolution {
                axis: "k",
                detail: format!("outer nodes carry {dk:.2e} of the |g|^2 mass"),
            });
        }
        if dp >= 1e-6 {
            return Err(ToaError::Resolution {
                axis: "p",
                detail: format!("outer nodes carry {dp:.2e} of the |f|^2 mass"),
            });
        }
        Ok(())
    }
}

fn drop_change(rule: &Rule, drop_lower: bool, h: impl Fn(f64) -> f64) -> f64 {
    let n = rule.len();
    let cut = (n as f64 * 0.05).ceil() as usize;
    let full: f64 = rule.integrate(&h);
    let lo = if drop_lower { cut } else { 0 };
    let inner: f64 = (lo..n - cut)
        .map(|i| rule.weights[i] * h(rule.nodes[i]))
        .sum();
    ((full - inner) / full).abs()
}

/// Eigenmode `φ_kp(x, y, t)` of a particle–clock Hamiltonian.
pub trait EigenMode: Sync {
    fn phi(&self, k: f64, p: f64, x: f64, y: f64, t: f64) -> Complex64;
}

/// Free particle with a free-running clock: `e^{ikx + ipy - iωt}`, `ω = k²/2m + p`.
#[derive(Debug, Clone, Copy)]
pub struct FreeMode {
    pub m: f64,
}

impl EigenMode for FreeMode {
    fn phi(&self, k: f64, p: f64, x: f64, y: f64, t: f64) -> Complex64 {
        let omega = k * k / (2.0 * self.m) + p;
        Complex64::from_polar(1.0, k * x + p * y - omega * t)
    }
}

/// Pre-weighted quadrature nodes for `ψ = N ∫dk ∫dp f g φ`.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    pub norm: f64,
    pub k_nodes: Vec<(f64, Complex64)>,
    pub p_nodes: Vec<(f64, f64)>,
}

impl Synthesizer {
    pub fn new(g: &dyn MomentumEnvelope, f: &ClockPrior, grid: &QuadratureGrid) -> Result<Self> {
        grid.check(g, f)?;
        Ok(Self::unchecked(g, f, grid, normalization_sq(g, f).sqrt()))
    }

    pub fn for_spec(spec: &PacketSpec, grid: &QuadratureGrid) -> Result<Self> {
        let g = spec.envelope();
        let f = spec.clock();
        grid.check(&g, &f)?;
        Ok(Self::unchecked(&g, &f, grid, spec.normalization()))
    }

    /// Skips the truncation check (single-node rules, custom weights).
    pub fn unchecked(
        g: &dyn MomentumEnvelope,
        f: &ClockPrior,
        grid: &QuadratureGrid,
        norm: f64,
    ) -> Self {
        let k_nodes = grid
            .k
            .nodes
            .iter()
            .zip(&grid.k.weights)
            .map(|(&k, &w)| (k, g.amplitude(k) * w))
            .collect();
        let p_nodes = grid
            .p
            .nodes
            .iter()
            .zip(&grid.p.weights)
            .map(|(&p, &w)| (p, f.amplitude(p) * w))
            .collect();
        Synthesizer {
            norm,
            k_nodes,
            p_nodes,
        }
    }

    pub fn psi(&self, mode: &dyn EigenMode, x: f64, y: f64, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(p, wf) in &self.p_nodes {
            let mut inner = Complex64::new(0.0, 0.0);
            for &(k, wg) in &self.k_nodes {
                inner += wg * mode.phi(k, p, x, y, t);
            }
            acc += inner * wf;
        }
        acc * self.norm
    }
}

/// One-shot form of [`Synthesizer::psi`].
pub fn synthesize(
    spec: &PacketSpec,
    mode: &dyn EigenMode,
    grid: &QuadratureGrid,
    x: f64,
    y: f64,
    t: f64,
) -> Result<Complex64> {
    Ok(Synthesizer::for_spec(spec, grid)?.psi(mode, x, y, t))
}

/// Fraction of a freely evolving packet found on `x < 0` at time `t`,
/// from an FFT of the sampled envelope.
pub fn free_left_mass(g: &dyn MomentumEnvelope, m: f64, t: f64) -> f64 {
    let support = g.support();
    let k_lo = support.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let k_hi = support
        .iter()
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let k_abs = k_lo.abs().max(k_hi.abs());
    let reach = g.phase_rate() + k_abs * t.abs() / m + 40.0 / g.resolution();
    let dk = 2.0 * PI / (4.0 * reach);
    let n = (((k_hi - k_lo) / dk).ceil() as usize)
        .max(4 * (reach * k_abs) as usize)
        .max(64);
    let n = n.next_power_of_two();
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            let k = k_lo + j as f64 * dk;
            if k > k_hi {
                return Complex64::new(0.0, 0.0);
            }
            g.amplitude(k) * Complex64::from_polar(1.0, -k * k * t / (2.0 * m))
        })
        .collect();
    rustfft::FftPlanner::<f64>::new()
        .plan_fft_inverse(n)
        .process(&mut buf);
    let (mut left, mut total) = (0.0, 0.0);
    for (idx, v) in buf.iter().enumerate() {
        let w = v.norm_sqr();
        total += w;
        if idx == 0 {
            left += 0.5 * w;
        } else if idx >= n / 2 {
            left += w;
        }
    }
    left / total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PacketSpec {
        PacketSpec::new(1.0, 5.0, 1.0, 10.0, 5.0, 1.0).unwrap()
    }

    #[test]
    fn normalization_constant() {
        let s = PacketSpec::new(1.0, 1.0, 1.0, 5.0, 1.0, 1.0).unwrap();
        assert!((s.normalization() - 0.126_987_3).abs() < 1e-6);
        let t = PacketSpec {
            dx: 2.0,
            dy: 0.5,
            ..s
        };
        assert!((t.normalization() - s.normalization()).abs() < 1e-15);
        let n2 = normalization_sq(&s.envelope(), &s.clock());
        assert!((n2 - s.normalization().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn classical_arrival() {
        let s = PacketSpec::new(1.0, 2.0, 1.0, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(s.classical_toa().unwrap(), 5.0);
        assert_eq!(classical_toa(2.0, 3.0, 1.5).unwrap(), 4.0);
        assert_eq!(classical_toa(1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            classical_toa(1.0, 1.0, 0.0),
            Err(ToaError::NoClassicalArrival { .. })
        ));
        assert!(classical_toa(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(PacketSpec::new(0.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(PacketSpec::new(1.0, 1.0, -1.0, 1.0, 1.0, 1.0).is_err());
        assert!(PacketSpec::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(PacketSpec::new(1.0, 1.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn grid_matches_analytic_gaussian_norms() {
        let s = spec();
        let grid = QuadratureGrid::for_spec(&s);
        let g = s.envelope();
        let f = s.clock();
        let gk = grid.k.integrate(|k| g.amplitude(k).norm_sqr());
        assert!((gk - g.norm_sq()).abs() < 1e-8 * g.norm_sq());
        // p0*dy = 5: the p < 0 tail is ~1e-22.
        let fp = grid.p.integrate(|p| f.amplitude(p).powi(2));
        assert!((fp - f.full_norm_sq()).abs() < 1e-8 * f.full_norm_sq());
        let (dk, dp) = grid.truncation_report(&g, &f);
        assert!(dk < 1e-6 && dp < 1e-6, "{dk} {dp}");
    }

    #[test]
    fn truncation_failure_names_axis() {
        let s = spec();
        let mut grid = QuadratureGrid::for_spec(&s);
        grid.k = Rule::with_nodes(4.5, 5.5, 64);
        let err = Synthesizer::for_spec(&s, &grid).unwrap_err();
        assert!(matches!(err, ToaError::Resolution { axis: "k", .. }));
    }

    #[test]
    fn single_node_quadrature_returns_the_mode() {
        let s = spec();
        let grid = QuadratureGrid {
            k: Rule {
                nodes: vec![5.0],
                weights: vec![1.0],
            },
            p: Rule {
                nodes: vec![5.0],
                weights: vec![1.0],
            },
            k_radius: 0.0,
            p_radius: 0.0,
        };
        let g = s.envelope();
        let f = s.clock();
        let syn = Synthesizer::unchecked(&g, &f, &grid, 1.0);
        let mode = FreeMode { m: 1.0 };
        let v = syn.psi(&mode, 0.3, 0.7, 1.1);
        let expect = g.amplitude(5.0) * f.amplitude(5.0) * mode.phi(5.0, 5.0, 0.3, 0.7, 1.1);
        assert!((v - expect).norm() < 1e-14);
    }

    #[test]
    fn free_synthesis_matches_spreading_gaussian() {
        let s = spec();
        let grid = QuadratureGrid::for_spec(&s);
        let syn = Synthesizer::for_spec(&s, &grid).unwrap();
        let mode = FreeMode { m: s.m };
        let f = s.clock();
        // Closed form: the free packet in x times the free clock packet in y.
        let clock_fac = |y: f64, t: f64| -> Complex64 {
            grid.p
                .nodes
                .iter()
                .zip(&grid.p.weights)
                .map(|(&p, &w)| Complex64::from_polar(w * f.amplitude(p), p * (y - t)))
                .sum()
        };
        for &(x, y, t) in &[
            (-10.0, 0.0, 0.0),
            (-8.0, 0.5, 0.5),
            (-4.0, 1.0, 1.2),
            (-5.5, 2.0, 1.0),
        ] {
            let got = syn.psi(&mode, x, y, t);
            let want =
                free_packet(s.k0, s.dx, s.x0, s.m, x, t) * clock_fac(y, t) * s.normalization();
            let scale = want.norm().max(1e-3);
            assert!(
                (got.norm_sqr() - want.norm_sqr()).abs() < 1e-6 * scale * scale,
                "x={x} t={t}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn synthesis_is_linear_in_the_envelope() {
        let s = spec();
        let b = BimodalPacketSpec::new(
            PacketSpec {
                dx: 2.0,
                x0: 20.0,
                ..s
            },
            4.0,
            6.0,
            0.3,
        )
        .unwrap();
        let env = b.envelope();
        let f = b.clock();
        let grid = QuadratureGrid::build(&env, &f, 128, 64);
        let mode = FreeMode { m: 1.0 };
        let both = Synthesizer::unchecked(&env, &f, &grid, 1.0).psi(&mode, -3.0, 0.2, 0.7);
        let one = Synthesizer::unchecked(&env.first, &f, &grid, 1.0).psi(&mode, -3.0, 0.2, 0.7);
        let two = Synthesizer::unchecked(&env.second, &f, &grid, 1.0).psi(&mode, -3.0, 0.2, 0.7);
        let sum = one * 0.3f64.sqrt() + two * 0.7f64.sqrt();
        assert!((both - sum).norm() < 1e-10);
    }

    #[test]
    fn bimodal_norm_matches_quadrature() {
        let base = PacketSpec::new(1.0, 1.0, 1.0, 10.0, 2.0, 1.0).unwrap();
        let b = BimodalPacketSpec::new(base, 1.0, 1.8, 0.4).unwrap();
        let env = b.envelope();
        let rule = Rule::with_nodes(-8.0, 10.0, 512);
        let num = rule.integrate(|k| env.amplitude(k).norm_sqr());
        assert!((num - env.norm_sq()).abs() < 1e-10);
    }

    #[test]
    fn regime_warnings() {
        let ok = PacketSpec::new(1.0, 5.0, 2.0, 30.0, 0.4, 5.0).unwrap();
        assert!(
            ok.regime_warnings().is_empty(),
            "{:?}",
            ok.regime_warnings()
        );
        let near = PacketSpec { x0: 4.0, ..ok };
        assert!(near
            .regime_warnings()
            .iter()
            .any(|w| w.contains("not localized")));
    }
}
