//! Gauss–Legendre rules on intervals and rectangles.

use crate::geometry::{Point2, Rect2};

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev-like initial guess, then Newton on P_n.
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
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Tensor-product rule over a rectangle.
    pub fn integrate_rect<F: FnMut(Point2) -> f64>(&self, r: &Rect2, mut f: F) -> f64 {
        let hx = 0.5 * r.width();
        let hy = 0.5 * r.height();
        let mx = 0.5 * (r.x_min + r.x_max);
        let my = 0.5 * (r.y_min + r.y_max);
        let mut total = 0.0;
        for (&xi, &wi) in self.nodes.iter().zip(&self.weights) {
            let mut row = 0.0;
            for (&yj, &wj) in self.nodes.iter().zip(&self.weights) {
                row += wj * f(Point2::new(mx + hx * xi, my + hy * yj));
            }
            total += wi * row;
        }
        total * hx * hy
    }

    /// Composite rule on a `panels × panels` split of the rectangle.
    pub fn integrate_rect_composite<F: FnMut(Point2) -> f64>(
        &self,
        r: &Rect2,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let dx = r.width() / panels as f64;
        let dy = r.height() / panels as f64;
        let mut total = 0.0;
        for a in 0..panels {
            for b in 0..panels {
                let cell = Rect2::new(
                    r.x_min + dx * a as f64,
                    r.x_min + dx * (a + 1) as f64,
                    r.y_min + dy * b as f64,
                    r.y_min + dy * (b + 1) as f64,
                );
                total += self.integrate_rect(&cell, &mut f);
            }
        }
        total
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        for n in [1, 2, 5, 16] {
            let gl = GaussLegendre::new(n);
            let s: f64 = gl.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            for i in 0..n {
                assert!((gl.nodes[i] + gl.nodes[n - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_31() {
        let gl = GaussLegendre::new(16);
        for deg in [0, 3, 10, 31] {
            let v = gl.integrate(0.0, 2.0, |x| x.powi(deg));
            let exact = 2f64.powi(deg + 1) / (deg + 1) as f64;
            assert!(((v - exact) / exact).abs() < 1e-13, "deg={deg}");
        }
    }

    #[test]
    fn rectangle_rule_matches_separable_integral() {
        let gl = GaussLegendre::new(16);
        let r = Rect2::new(0.0, 2.0, 1.0, 4.0);
        let v = gl.integrate_rect(&r, |p| p.x.cos() * p.y.exp());
        let exact = 2f64.sin() * (4f64.exp() - 1f64.exp());
        assert!((v - exact).abs() < 1e-10);
    }
}
