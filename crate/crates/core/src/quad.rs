//! Gauss–Legendre rules, composite panels, and small fitting helpers.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A set of quadrature nodes with weights, already mapped to physical coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels of `order` nodes.
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + 0.5 * h * xi);
                weights.push(0.5 * h * wi);
            }
        }
        Rule { nodes, weights }
    }

    /// Composite rule with roughly `n` nodes (rounded up to whole panels of 16).
    pub fn with_nodes(a: f64, b: f64, n: usize) -> Self {
        const ORDER: usize = 16;
        let panels = n.div_ceil(ORDER).max(1);
        Self::composite(a, b, panels, ORDER)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Concatenate rules over disjoint intervals.
    pub fn concat(rules: impl IntoIterator<Item = Rule>) -> Self {
        let mut out = Rule::default();
        for r in rules {
            out.nodes.extend(r.nodes);
            out.weights.extend(r.weights);
        }
        out
    }
}

/// Merge overlapping intervals (input need not be sorted).
pub fn merge_intervals(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.retain(|(a, b)| b > a);
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Ordinary least-squares line fit; returns (slope, intercept, r_squared).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, intercept, r2)
}

/// Richardson extrapolation to h → 0 of values computed at step sizes
/// `h0, h0/2, h0/4, ...`, assuming an error expansion in powers of `h^order_step`.
pub fn richardson(values: &[f64], order_step: u32) -> f64 {
    let mut table = values.to_vec();
    let factor = 2f64.powi(order_step as i32);
    let mut f = factor;
    for level in 1..values.len() {
        for i in (level..values.len()).rev() {
            table[i] = (f * table[i] - table[i - 1]) / (f - 1.0);
        }
        f *= factor;
    }
    *table.last().expect("richardson needs at least one value")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(12);
        for deg in 0..24 {
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / (deg as f64 + 1.0)
            };
            assert!(
                (approx - exact).abs() < 1e-14,
                "degree {deg}: {approx} vs {exact}"
            );
        }
    }

    #[test]
    fn composite_rule_gaussian_integral() {
        let r = Rule::with_nodes(-10.0, 10.0, 128);
        let v = r.integrate(|x| (-x * x).exp());
        assert!((v - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn richardson_removes_quadratic_error() {
        let f = |h: f64| 3.0 + 2.0 * h * h + 0.5 * h.powi(4);
        let v = richardson(&[f(0.4), f(0.2), f(0.1)], 2);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn merge_overlapping() {
        let m = merge_intervals(vec![(3.0, 5.0), (0.0, 1.0), (0.5, 2.0)]);
        assert_eq!(m, vec![(0.0, 2.0), (3.0, 5.0)]);
    }
}
