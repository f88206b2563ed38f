//! Gauss–Legendre rules on `[0, 1]` and the point-count policy for oscillatory
//! integrands.

use std::f64::consts::PI;

/// `n`-point Gauss–Legendre rule mapped to `[0, 1]`; exact for polynomials of
/// degree `2n - 1`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for k in 0..n.div_ceil(2) {
            // Tricomi initial guess for the k-th root on [-1, 1], refined by Newton.
            let mut x = (PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
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
            // Map to [0, 1], ascending order.
            nodes[k] = 0.5 * (1.0 - x);
            nodes[n - 1 - k] = 0.5 * (1.0 + x);
            weights[k] = 0.5 * w;
            weights[n - 1 - k] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        2 * self.len() - 1
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// How many Gauss points per direction an element integral needs.
///
/// An integrand whose phase varies by `span` radians across the reference
/// element, times a low-degree polynomial, is integrated to round-off with
/// `⌈span/2⌉ + 10` points. Requests above `max_points` are refused rather than
/// silently under-integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadraturePolicy {
    pub max_points: usize,
}

impl Default for QuadraturePolicy {
    fn default() -> Self {
        Self { max_points: 512 }
    }
}

impl QuadraturePolicy {
    pub const MIN_POINTS: usize = 3;

    /// Points needed for a phase span; `None` if above `max_points`.
    pub fn points_for(&self, span: f64) -> Option<usize> {
        let n = ((0.5 * span).ceil() as usize + 10).max(Self::MIN_POINTS);
        (n <= self.max_points).then_some(n)
    }

    /// Point count the policy asks for regardless of the cap.
    pub fn required_points(&self, span: f64) -> usize {
        ((0.5 * span).ceil() as usize + 10).max(Self::MIN_POINTS)
    }
}
