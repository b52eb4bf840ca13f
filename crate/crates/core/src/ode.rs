//! Adaptive Dormand–Prince 5(4) integrator with dense output and a single
//! sign-change event.

use crate::error::{Result, ToaError};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-12,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOutcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    /// Set when the event function changed sign; integration stops there.
    pub event: bool,
    pub steps: usize,
    pub rejected: usize,
    /// Accepted states, including the initial one.
    pub trace: Vec<(f64, [f64; N])>,
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

impl Dopri5 {
    /// Integrates `y' = f(t, y)` from `t0` to `t_end`, stopping early where
    /// `event(y)` changes sign. `h0` is the first trial step.
    pub fn integrate<const N: usize>(
        &self,
        f: impl Fn(f64, &[f64; N]) -> [f64; N],
        event: impl Fn(&[f64; N]) -> f64,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        h0: f64,
    ) -> Result<OdeOutcome<N>> {
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut h = h0.min(t_end - t0);
        let mut g_prev = event(&y);
        let mut out = OdeOutcome {
            t,
            y,
            event: false,
            steps: 0,
            rejected: 0,
            trace: vec![(t, y)],
        };
        while t < t_end {
            if out.steps + out.rejected > self.max_steps {
                return Err(ToaError::StepUnderflow { t, x: y[0] });
            }
            if h < self.h_min * t.abs().max(1.0) {
                return Err(ToaError::StepUnderflow { t, x: y[0] });
            }
            let last = t + h >= t_end;
            if last {
                h = t_end - t;
            }
            let k2 = f(t + C2 * h, &axpy(&y, &[(h * A21, &k1)]));
            let k3 = f(t + C3 * h, &axpy(&y, &[(h * A31, &k1), (h * A32, &k2)]));
            let k4 = f(
                t + C4 * h,
                &axpy(&y, &[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]),
            );
            let k5 = f(
                t + C5 * h,
                &axpy(
                    &y,
                    &[
                        (h * A51, &k1),
                        (h * A52, &k2),
                        (h * A53, &k3),
                        (h * A54, &k4),
                    ],
                ),
            );
            let k6 = f(
                t + h,
                &axpy(
                    &y,
                    &[
                        (h * A61, &k1),
                        (h * A62, &k2),
                        (h * A63, &k3),
                        (h * A64, &k4),
                        (h * A65, &k5),
                    ],
                ),
            );
            let y1 = axpy(
                &y,
                &[
                    (h * A71, &k1),
                    (h * A73, &k3),
                    (h * A74, &k4),
                    (h * A75, &k5),
                    (h * A76, &k6),
                ],
            );
            let k7 = f(t + h, &y1);
            let mut err = 0.0f64;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
                err = err.max((e / sc).abs());
            }
            if err > 1.0 || !err.is_finite() {
                out.rejected += 1;
                let factor = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).max(0.2)
                } else {
                    0.2
                };
                h *= factor;
                continue;
            }
            let g = event(&y1);
            if g_prev.signum() != g.signum() && g_prev != 0.0 {
                // Dense output on the accepted step.
                let mut r5 = [0.0; N];
                for i in 0..N {
                    r5[i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let dense = |theta: f64| -> [f64; N] {
                    let mut v = [0.0; N];
                    for i in 0..N {
                        let r2 = y1[i] - y[i];
                        let r3 = h * k1[i] - r2;
                        let r4 = r2 - h * k7[i] - r3;
                        v[i] = y[i]
                            + theta
                                * (r2
                                    + (1.0 - theta) * (r3 + theta * (r4 + (1.0 - theta) * r5[i])));
                    }
                    v
                };
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if event(&dense(mid)).signum() == g_prev.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-16 {
                        break;
                    }
                }
                let theta = 0.5 * (lo + hi);
                out.t = t + theta * h;
                out.y = dense(theta);
                out.event = true;
                out.steps += 1;
                out.trace.push((out.t, out.y));
                return Ok(out);
            }
            g_prev = g;
            t = if last { t_end } else { t + h };
            y = y1;
            k1 = k7;
            out.steps += 1;
            out.trace.push((t, y));
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        }
        out.t = t;
        out.y = y;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let ode = Dopri5::default();
        let r = ode
            .integrate(
                |_, y: &[f64; 2]| [y[1], -y[0]],
                |_| 1.0,
                0.0,
                [1.0, 0.0],
                2.0 * std::f64::consts::PI,
                0.01,
            )
            .unwrap();
        assert!((r.y[0] - 1.0).abs() < 1e-8 && r.y[1].abs() < 1e-8);
        assert!(!r.event);
    }

    #[test]
    fn event_located_by_dense_output() {
        // x(t) = cos t crosses zero at π/2.
        let ode = Dopri5::default();
        let r = ode
            .integrate(
                |_, y: &[f64; 2]| [y[1], -y[0]],
                |y| y[0],
                0.0,
                [1.0, 0.0],
                10.0,
                0.3,
            )
            .unwrap();
        assert!(r.event);
        assert!((r.t - std::f64::consts::FRAC_PI_2).abs() < 1e-9, "{}", r.t);
    }

    #[test]
    fn exponential_growth() {
        let ode = Dopri5::default();
        let r = ode
            .integrate(|_, y: &[f64; 1]| [y[0]], |_| 1.0, 0.0, [1.0], 5.0, 1e-3)
            .unwrap();
        assert!((r.y[0] / 5f64.exp() - 1.0).abs() < 1e-9);
    }
}
