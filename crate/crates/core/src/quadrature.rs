//! Composite Gauss–Legendre rules on equal panels, and Filon-type weights for
//! integrals of the form `∫ f(ω) e^{iωt} dω` over the same nodes.
//!
//! The Filon weights interpolate `f` on each panel by the degree `p − 1`
//! polynomial through the Gauss nodes and integrate that polynomial against
//! `e^{iωt}` exactly, using the Legendre expansion of the Lagrange basis and
//!
//! ```text
//! ∫_{-1}^{1} P_n(u) e^{iκu} du = 2 iⁿ j_n(κ)
//! ```
//!
//! so the rule stays accurate however large `t` grows. At `t = 0` the Filon
//! weights reduce to the Gauss–Legendre weights.

use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `P_0(x), …, P_{n_max}(x)`.
pub fn legendre_table(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max >= 1 {
        out.push(x);
    }
    for k in 2..=n_max {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
        out.push(next);
    }
    out
}

/// Spherical Bessel functions `j_0(x), …, j_{n_max}(x)`.
///
/// Upward recurrence when `|x|` exceeds the order range, Miller's downward
/// recurrence otherwise (normalized against whichever of `j_0`, `j_1` is larger).
pub fn spherical_bessel(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let (s, c) = ax.sin_cos();
    let j0 = s / ax;
    let j1 = s / (ax * ax) - c / ax;
    if ax > n_max as f64 + 1.0 {
        out[0] = j0;
        if n_max >= 1 {
            out[1] = j1;
        }
        for n in 1..n_max {
            out[n + 1] = (2.0 * n as f64 + 1.0) / ax * out[n] - out[n - 1];
        }
    } else {
        let start = n_max + 20 + ax as usize;
        let mut f_next = 0.0; // f_{n+1}
        let mut f = 1e-30; // f_n
        let mut tail = vec![0.0; start + 1];
        tail[start] = f;
        for n in (1..=start).rev() {
            let f_prev = (2.0 * n as f64 + 1.0) / ax * f - f_next;
            f_next = f;
            f = f_prev;
            tail[n - 1] = f;
            if f.abs() > 1e200 {
                for v in tail.iter_mut().skip(n - 1) {
                    *v *= 1e-200;
                }
                f *= 1e-200;
                f_next *= 1e-200;
            }
        }
        let scale = if j0.abs() >= j1.abs() { j0 / tail[0] } else { j1 / tail[1] };
        for n in 0..=n_max {
            out[n] = tail[n] * scale;
        }
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// Composite Gauss–Legendre rule on a partition of `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeRule {
    order: usize,
    panels: Vec<[f64; 2]>,
    ref_nodes: Vec<f64>,
    ref_weights: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // P_n(u_j) for n < order, row-major by node j
    legendre: Vec<f64>,
}

impl CompositeRule {
    /// `n_panels` equal panels.
    pub fn new(a: f64, b: f64, n_panels: usize, order: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(invalid("interval", format!("[{a}, {b}] is not a finite increasing interval")));
        }
        if n_panels == 0 {
            return Err(invalid("n_panels", "must be at least 1"));
        }
        let width = (b - a) / n_panels as f64;
        let breaks: Vec<f64> = (0..=n_panels).map(|i| if i == n_panels { b } else { a + width * i as f64 }).collect();
        Self::from_breakpoints(&breaks, order)
    }

    /// Panels between consecutive breakpoints, which must increase strictly.
    pub fn from_breakpoints(breaks: &[f64], order: usize) -> Result<Self> {
        if breaks.len() < 2 || breaks.iter().any(|x| !x.is_finite()) || breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("breakpoints", "need at least two finite, strictly increasing values"));
        }
        if order < 2 {
            return Err(invalid("panel_order", "must be at least 2"));
        }
        let (ref_nodes, ref_weights) = gauss_legendre(order);
        let n_panels = breaks.len() - 1;
        let mut panels = Vec::with_capacity(n_panels);
        let mut nodes = Vec::with_capacity(n_panels * order);
        let mut weights = Vec::with_capacity(n_panels * order);
        for pair in breaks.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            panels.push([lo, hi]);
            for (u, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + half * u);
                weights.push(half * w);
            }
        }
        let legendre = ref_nodes.iter().flat_map(|&u| legendre_table(order - 1, u)).collect();
        Ok(Self { order, panels, ref_nodes, ref_weights, nodes, weights, legendre })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn panels(&self) -> &[[f64; 2]] {
        &self.panels
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Weights `W_k(t)` with `Σ_k W_k(t) f(ω_k) ≈ ∫ f(ω) e^{iωt} dω`.
    pub fn filon_weights(&self, t: f64) -> Vec<C64> {
        let p = self.order;
        // i^n (2n+1), reused for every panel
        let unit_powers: Vec<C64> = (0..p)
            .map(|n| {
                let ipow = match n % 4 {
                    0 => C64::new(1.0, 0.0),
                    1 => C64::new(0.0, 1.0),
                    2 => C64::new(-1.0, 0.0),
                    _ => C64::new(0.0, -1.0),
                };
                ipow * (2.0 * n as f64 + 1.0)
            })
            .collect();
        let mut out = Vec::with_capacity(self.nodes.len());
        for &[lo, hi] in &self.panels {
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let kappa = half * t;
            let bessel = spherical_bessel(p - 1, kappa);
            let centre_phase = C64::from_polar(1.0, mid * t);
            for j in 0..p {
                let leg = &self.legendre[j * p..(j + 1) * p];
                let mut acc = C64::new(0.0, 0.0);
                for n in 0..p {
                    acc += unit_powers[n] * (leg[n] * bessel[n]);
                }
                out.push(centre_phase * acc * (half * self.ref_weights[j]));
            }
        }
        out
    }

    pub fn reference_nodes(&self) -> &[f64] {
        &self.ref_nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_point_rule_closed_form() {
        let (x, w) = gauss_legendre(2);
        assert_abs_diff_eq!(x[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rule_exact_for_high_degree_monomials() {
        for n in [3usize, 8, 16, 24] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert_abs_diff_eq!(got, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn spherical_bessel_matches_closed_forms() {
        for &x in &[1e-6, 0.3, 1.0, 2.5, 7.0, 40.0, -3.0] {
            let j = spherical_bessel(4, x);
            let (s, c) = x.sin_cos();
            let j0 = s / x;
            let j1 = s / (x * x) - c / x;
            let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
            if x.abs() > 1e-3 {
                assert_abs_diff_eq!(j[0], j0, epsilon = 1e-13);
                assert_abs_diff_eq!(j[1], j1, epsilon = 1e-12);
                assert_abs_diff_eq!(j[2], j2, epsilon = 1e-11);
            } else {
                assert_abs_diff_eq!(j[0], 1.0, epsilon = 1e-11);
                assert_abs_diff_eq!(j[1], x / 3.0, epsilon = 1e-14);
                assert_abs_diff_eq!(j[2], x * x / 15.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn filon_weights_reduce_to_gauss_at_zero() {
        let rule = CompositeRule::new(0.0, 3.0, 5, 7).unwrap();
        let fw = rule.filon_weights(0.0);
        for (a, b) in fw.iter().zip(rule.weights()) {
            assert_abs_diff_eq!(a.re, *b, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn filon_exact_for_panel_polynomials_at_large_t() {
        // f(ω) = ω² on [0, 2]: ∫ ω² e^{iωt} dω in closed form
        let rule = CompositeRule::new(0.0, 2.0, 2, 4).unwrap();
        for &t in &[0.5, 10.0, 250.0, 3000.0] {
            let w = rule.filon_weights(t);
            let got: C64 = w.iter().zip(rule.nodes()).map(|(w, x)| w * (x * x)).sum();
            let i = C64::new(0.0, 1.0);
            let antiderivative = |x: f64| {
                let e = (i * x * t).exp();
                e * (x * x / (i * t) + 2.0 * x / (t * t) - 2.0 / (i * t * t * t))
            };
            let exact = antiderivative(2.0) - antiderivative(0.0);
            assert_abs_diff_eq!(got.re, exact.re, epsilon = 1e-12);
            assert_abs_diff_eq!(got.im, exact.im, epsilon = 1e-12);
        }
    }
}
