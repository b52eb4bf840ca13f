//! Classical particle driving a clock through a smooth coupling,
//! `H = p_x²/2m + p_y V(x)`.
//!
//! The particle comes in from `x → -∞`. The coupling is
//! `V(x) = -x_A²/x²` for `x ≤ -x_A` and `V = -1` beyond, so arrival is the
//! crossing of `x = -x_A` and the clock runs at unit rate afterwards.
//!
//! Sign convention: the clock reading is `τ = -(y(t_f) - y(t_i))`, which
//! decomposes as `τ = A + B + C` with `A = t_i - t_0` (minus the travel
//! time), `B = t_f - t_i` and `C = -∫_{t_i}^{t_0} V dt ≥ 0`.

use serde::{Deserialize, Serialize};

use crate::error::{require, Result, ToaError};
use crate::ode::Dopri5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradualConfig {
    pub m: f64,
    /// Conserved energy `p_x²/2m + p_y V(x)`.
    pub e: f64,
    pub p_y: f64,
    pub x_a: f64,
    /// Initial position, `x_i ≤ -10 x_A`.
    pub x_i: f64,
    pub t_i: f64,
    pub t_f: f64,
}

impl GradualConfig {
    /// Config whose window ends `extra` after the free-flight arrival.
    pub fn new(m: f64, e: f64, p_y: f64, x_a: f64, x_i: f64) -> Result<Self> {
        let free = (x_i.abs() - x_a) * (m / (2.0 * e)).sqrt();
        let cfg = GradualConfig {
            m,
            e,
            p_y,
            x_a,
            x_i,
            t_i: 0.0,
            t_f: 1.5 * free.abs() + 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        require(self.m > 0.0, "m", "must be positive")?;
        require(self.e > 0.0, "e", "must be positive")?;
        require(self.p_y >= 0.0, "p_y", "must be non-negative")?;
        require(self.x_a > 0.0, "x_a", "must be positive")?;
        require(
            self.x_i < 0.0,
            "x_i",
            "particle must start on the approach side",
        )?;
        require(
            self.x_i.abs() >= 10.0 * self.x_a,
            "x_i",
            "need |x_i| >= 10 x_a",
        )?;
        require(self.t_f > self.t_i, "t_f", "must exceed t_i")
    }

    pub fn potential(&self, x: f64) -> f64 {
        if x <= -self.x_a {
            -(self.x_a / x).powi(2)
        } else {
            -1.0
        }
    }

    /// Force from the inverse-square branch, continued past `-x_A` so that
    /// the integrator sees a smooth field up to the arrival event.
    fn approach_force(&self, x: f64) -> f64 {
        -self.p_y * 2.0 * self.x_a * self.x_a / x.powi(3)
    }

    fn approach_potential(&self, x: f64) -> f64 {
        -(self.x_a / x).powi(2)
    }

    pub fn energy(&self, x: f64, px: f64) -> f64 {
        px * px / (2.0 * self.m) + self.p_y * self.potential(x)
    }

    /// Free-particle travel time from `x_i` to the arrival point.
    pub fn free_arrival(&self) -> f64 {
        (self.x_i.abs() - self.x_a) * (self.m / (2.0 * self.e)).sqrt()
    }
}

/// Closed-form pieces of the clock reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    /// `t_i - t_0`: minus the travel time to the arrival point.
    pub a: f64,
    pub b: f64,
    /// Clock advance before arrival.
    pub c: f64,
}

/// `A = sqrt(m/2E) [sqrt(x_A² + p_y x_A²/E) - sqrt(x_i² + p_y x_A²/E)]`,
/// `C = x_A sqrt(m/2p_y) [ln((1+sqrt(1+E/p_y)) / (1+sqrt(1+E x_i²/(p_y x_A²)))) + ln(|x_i|/x_A)]`.
pub fn closed_form_terms(cfg: &GradualConfig) -> Result<ClosedForm> {
    cfg.validate()?;
    let (m, e, p, xa, xi) = (cfg.m, cfg.e, cfg.p_y, cfg.x_a, cfg.x_i.abs());
    let r = p * xa * xa / e;
    let (u, v) = (xa * xa + r, xi * xi + r);
    if u < 0.0 || v < 0.0 {
        return Err(ToaError::Domain("negative radicand in travel time".into()));
    }
    let a = (m / (2.0 * e)).sqrt() * (u.sqrt() - v.sqrt());
    Ok(ClosedForm {
        a,
        b: cfg.t_f - cfg.t_i,
        c: clock_advance(m, e, p, xa, xi),
    })
}

/// `sqrt(m/2) x_A² ∫_{x_A}^{X} dx / (x sqrt(E x² + p x_A²))`, written with
/// `asinh` so that `p → 0` is well conditioned.
fn clock_advance(m: f64, e: f64, p: f64, xa: f64, xi: f64) -> f64 {
    let pref = (m / 2.0).sqrt() * xa * xa;
    if p == 0.0 {
        return pref * (1.0 / xa - 1.0 / xi) / e.sqrt();
    }
    let a = p.sqrt() * xa;
    let se = e.sqrt();
    pref / a * ((a / (se * xa)).asinh() - (a / (se * xi)).asinh())
}

/// Logarithmic form of the clock advance, as usually quoted.
pub fn clock_advance_log_form(cfg: &GradualConfig) -> f64 {
    let (m, e, p, xa, xi) = (cfg.m, cfg.e, cfg.p_y, cfg.x_a, cfg.x_i.abs());
    let num = 1.0 + (1.0 + e / p).sqrt();
    let den = 1.0 + (1.0 + e * xi * xi / (p * xa * xa)).sqrt();
    xa * (m / (2.0 * p)).sqrt() * ((num / den).ln() + (xi / xa).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    /// `y(t_f) - y(t_i)` from the integrated trajectory.
    pub y_displacement: f64,
    /// Clock reading `τ = -(y(t_f) - y(t_i))`.
    pub reading: f64,
    /// Arrival instant `t_0` at `x = -x_A`.
    pub t_arrival: f64,
    /// `t_0 - t_i`.
    pub travel_time: f64,
    /// Numeric `C`, `-(y(t_0) - y(t_i))`.
    pub c_numeric: f64,
    pub closed: ClosedForm,
    /// `τ - (A + B + C)`.
    pub residual: f64,
    /// Largest change of `p_x²/2m + p_y V` along the trajectory, relative to
    /// the largest kinetic energy reached.
    pub energy_drift: f64,
    pub steps: usize,
}

/// Integrates Hamilton's equations for `(x, p_x, y)` with the arrival point
/// located by dense output, then continues through the flat region to `t_f`.
pub fn integrate_trajectory(cfg: &GradualConfig) -> Result<TrajectoryResult> {
    let closed = closed_form_terms(cfg)?;
    let m = cfg.m;
    let px0 = (2.0 * m * (cfg.e - cfg.p_y * cfg.potential(cfg.x_i))).sqrt();
    let rhs = |_t: f64, s: &[f64; 3]| {
        [
            s[1] / m,
            cfg.approach_force(s[0]),
            cfg.approach_potential(s[0]),
        ]
    };
    let ode = Dopri5 {
        rtol: 1e-12,
        atol: 1e-14,
        ..Default::default()
    };
    let h0 = 1e-3 * cfg.x_a * m / px0;
    let y0 = [cfg.x_i, px0, 0.0];
    let approach = ode.integrate(rhs, |s| s[0] + cfg.x_a, cfg.t_i, y0, cfg.t_f, h0)?;
    if !approach.event {
        return Err(ToaError::Domain(format!(
            "particle has not reached the arrival point by t_f = {}",
            cfg.t_f
        )));
    }
    // Drift is measured against the largest energy term on the path, the
    // kinetic energy at arrival, since p_y V can dwarf E.
    let e0 = cfg.energy(y0[0], y0[1]);
    let mut scale = e0.abs();
    let mut worst = 0.0f64;
    for (_, s) in &approach.trace {
        scale = scale.max(s[1] * s[1] / (2.0 * m));
        worst = worst.max((cfg.energy(s[0], s[1]) - e0).abs());
    }
    let drift = worst / scale;
    let t0 = approach.t;
    let at_arrival = approach.y;
    // Flat region: V = -1, no force.
    let flat = |_t: f64, s: &[f64; 3]| [s[1] / m, 0.0, -1.0];
    let rest = ode.integrate(flat, |_| 1.0, t0, at_arrival, cfg.t_f, (cfg.t_f - t0) * 0.1)?;
    let y_displacement = rest.y[2] - y0[2];
    let reading = -y_displacement;
    Ok(TrajectoryResult {
        y_displacement,
        reading,
        t_arrival: t0,
        travel_time: t0 - cfg.t_i,
        c_numeric: -(at_arrival[2] - y0[2]),
        closed,
        residual: reading - (closed.a + closed.b + closed.c),
        energy_drift: drift,
        steps: approach.steps + rest.steps,
    })
}

/// Fit of `C(p_y)` to `a · x_A ln(p_y) / sqrt(2m p_y)` over a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub amplitude: f64,
    /// Largest `|C / fit - 1|` over the sweep.
    pub max_rel_residual: f64,
    /// `(p_y, C)` pairs.
    pub points: Vec<(f64, f64)>,
}

/// Fits the clock-advance term over `p_sweep` with the other parameters of
/// `base` fixed. The amplitude minimises the largest relative residual.
pub fn c_scaling_fit(base: &GradualConfig, p_sweep: &[f64]) -> Result<ScalingFit> {
    require(
        p_sweep.iter().all(|&p| p > 1.0),
        "p_sweep",
        "log scaling needs p_y > 1",
    )?;
    let mut points = Vec::with_capacity(p_sweep.len());
    let mut ratios = Vec::with_capacity(p_sweep.len());
    for &p in p_sweep {
        let cfg = GradualConfig { p_y: p, ..*base };
        let c = closed_form_terms(&cfg)?.c;
        let shape = cfg.x_a * p.ln() / (2.0 * cfg.m * p).sqrt();
        points.push((p, c));
        ratios.push(c / shape);
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let amplitude = 2.0 * lo * hi / (lo + hi);
    let max_rel_residual = ratios
        .iter()
        .map(|r| (r / amplitude - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(ScalingFit {
        amplitude,
        max_rel_residual,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub e: f64,
    pub p_y: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub numeric_y: f64,
    pub residual: f64,
    /// `|t_0 - t_i - t_free| / t_free` with `t_0` from the trajectory.
    pub rel_error: f64,
}

/// Travel-time error relative to free flight on the diagonal `E_sweep[i]`,
/// `Δt_sweep[i]` with `p_y = 1/Δt` and `|x_i| = ratio · x_A`.
pub fn accuracy_tradeoff_curve(
    e_sweep: &[f64],
    dt_sweep: &[f64],
    m: f64,
    x_a: f64,
    ratio: f64,
) -> Result<Vec<TradeoffRow>> {
    require(
        e_sweep.len() == dt_sweep.len(),
        "dt_sweep",
        "must match the energy sweep length",
    )?;
    let mut rows = Vec::with_capacity(e_sweep.len());
    for (&e, &dt) in e_sweep.iter().zip(dt_sweep) {
        require(dt > 0.0, "dt", "must be positive")?;
        let cfg = GradualConfig::new(m, e, 1.0 / dt, x_a, -ratio * x_a)?;
        let tr = integrate_trajectory(&cfg)?;
        let free = cfg.free_arrival();
        rows.push(TradeoffRow {
            e,
            p_y: cfg.p_y,
            a: tr.closed.a,
            b: tr.closed.b,
            c: tr.closed.c,
            numeric_y: tr.y_displacement,
            residual: tr.residual,
            rel_error: (tr.travel_time - free).abs() / free,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_and_asinh_forms_agree() {
        for &p in &[0.02, 1.0, 300.0, 1e6] {
            let cfg = GradualConfig::new(1.3, 2.0, p, 0.7, -40.0).unwrap();
            let c = closed_form_terms(&cfg).unwrap().c;
            assert!((c / clock_advance_log_form(&cfg) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn decoupled_particle_flies_freely() {
        let cfg = GradualConfig::new(1.0, 2.0, 0.0, 1.0, -50.0).unwrap();
        let tr = integrate_trajectory(&cfg).unwrap();
        assert!((tr.travel_time / cfg.free_arrival() - 1.0).abs() < 1e-9);
        assert!((tr.closed.a + cfg.free_arrival()).abs() < 1e-12);
        // The clock still advances by ∫ x_A²/x² dt along the free path.
        assert!((tr.c_numeric / tr.closed.c - 1.0).abs() < 1e-8);
    }

    #[test]
    fn weak_clock_travel_time() {
        let cfg = GradualConfig::new(1.0, 2.0, 0.02, 1.0, -50.0).unwrap();
        let tr = integrate_trajectory(&cfg).unwrap();
        assert!((-tr.closed.a / cfg.free_arrival() - 1.0).abs() < 0.01);
        assert!((tr.travel_time / -tr.closed.a - 1.0).abs() < 1e-6);
        assert!(tr.energy_drift < 1e-9, "{}", tr.energy_drift);
        assert!((tr.residual / tr.reading).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(GradualConfig::new(1.0, 1.0, 1.0, 1.0, -5.0).is_err());
        assert!(GradualConfig::new(1.0, -1.0, 1.0, 1.0, -50.0).is_err());
        let mut cfg = GradualConfig::new(1.0, 1.0, 1.0, 1.0, -50.0).unwrap();
        cfg.t_f = 1.0;
        assert!(matches!(
            integrate_trajectory(&cfg),
            Err(ToaError::Domain(_))
        ));
    }

    #[test]
    fn clock_advance_follows_log_over_root_law() {
        let base = GradualConfig::new(1.0, 1.0, 100.0, 1.0, -1e5).unwrap();
        let ps: Vec<f64> = (0..=8).map(|i| 10f64.powf(2.0 + 0.5 * i as f64)).collect();
        let fit = c_scaling_fit(&base, &ps).unwrap();
        assert!(fit.max_rel_residual < 0.1, "{}", fit.max_rel_residual);
        // Asymptotically C = x_A sqrt(m/2p) (ln p / 2 + ln(2/sqrt(E))).
        let e4 = GradualConfig { e: 4.0, ..base };
        assert!((c_scaling_fit(&e4, &ps).unwrap().amplitude - 0.5).abs() < 0.01);
    }
}
