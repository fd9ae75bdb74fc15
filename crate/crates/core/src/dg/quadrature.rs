//! Gauss rules on the unit interval and collapsed (Duffy) rules on the
//! reference triangle `{(x, y) : x, y >= 0, x + y <= 1}`.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
}

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; D]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Rule on [0, 1] exact for polynomials of degree `order`.
pub fn interval_rule(order: usize) -> QuadratureRule<1> {
    let n = order / 2 + 1;
    let (x, w) = gauss_legendre(n);
    QuadratureRule {
        points: x.iter().map(|&t| [0.5 * (t + 1.0)]).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
    }
}

/// Rule on the reference triangle (area 1/2) exact for total degree `order`.
pub fn triangle_rule(order: usize) -> QuadratureRule<2> {
    // the collapsed map adds one degree in the radial direction
    let n = (order + 1) / 2 + 1;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&xa, &wa) in x.iter().zip(&w) {
        let s = 0.5 * (xa + 1.0);
        for (&xb, &wb) in x.iter().zip(&w) {
            let t = 0.5 * (xb + 1.0);
            points.push([s, t * (1.0 - s)]);
            weights.push(0.25 * wa * wb * (1.0 - s));
        }
    }
    QuadratureRule { points, weights }
}
