//! Orthonormal modal basis on the reference triangle.
//!
//! Monomials `x^a y^b` with `a + b <= m` are orthonormalised against the
//! L² inner product of the reference triangle, so the reference mass matrix
//! is the identity and the physical one is `|det J|·I`.

use crate::dg::quadrature::triangle_rule;
use crate::error::{Error, Result};

/// Number of basis functions of total degree `m`.
pub fn local_size(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    pub degree: usize,
    exponents: Vec<(i32, i32)>,
    /// `coeffs[i][j]`: weight of monomial j in basis function i (lower triangular).
    coeffs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    /// Reference-coordinate gradients.
    pub gradients: Vec<[f64; 2]>,
}

fn monomials(m: usize) -> Vec<(i32, i32)> {
    let mut e = Vec::with_capacity(local_size(m));
    for total in 0..=m as i32 {
        for b in 0..=total {
            e.push((total - b, b));
        }
    }
    e
}

fn eval_monomial((a, b): (i32, i32), [x, y]: [f64; 2]) -> (f64, [f64; 2]) {
    let v = x.powi(a) * y.powi(b);
    let dx = if a > 0 { a as f64 * x.powi(a - 1) * y.powi(b) } else { 0.0 };
    let dy = if b > 0 { b as f64 * x.powi(a) * y.powi(b - 1) } else { 0.0 };
    (v, [dx, dy])
}

impl ReferenceBasis {
    pub fn new(degree: usize) -> Self {
        let exponents = monomials(degree);
        let n = exponents.len();
        let rule = triangle_rule(2 * degree);
        let mut gram = vec![vec![0.0; n]; n];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let vals: Vec<f64> = exponents.iter().map(|&e| eval_monomial(e, *p).0).collect();
            for i in 0..n {
                for j in 0..=i {
                    gram[i][j] += w * vals[i] * vals[j];
                }
            }
        }
        // Cholesky G = L Lᵀ; basis = L⁻¹ · monomials
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = gram[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if i == j {
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        let mut coeffs = vec![vec![0.0; n]; n];
        for i in 0..n {
            coeffs[i][i] = 1.0 / l[i][i];
            for j in 0..i {
                let s: f64 = (j..i).map(|k| l[i][k] * coeffs[k][j]).sum();
                coeffs[i][j] = -s / l[i][i];
            }
        }
        Self {
            degree,
            exponents,
            coeffs,
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn eval(&self, point: [f64; 2]) -> BasisEval {
        let n = self.len();
        let mono: Vec<(f64, [f64; 2])> =
            self.exponents.iter().map(|&e| eval_monomial(e, point)).collect();
        let mut values = vec![0.0; n];
        let mut gradients = vec![[0.0; 2]; n];
        for i in 0..n {
            for (j, (v, g)) in mono.iter().enumerate().take(i + 1) {
                let c = self.coeffs[i][j];
                values[i] += c * v;
                gradients[i][0] += c * g[0];
                gradients[i][1] += c * g[1];
            }
        }
        BasisEval { values, gradients }
    }

    /// Coefficients of the constant function 1 in this basis.
    pub fn constant_coefficients(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.len()];
        c[0] = 1.0 / self.coeffs[0][0];
        c
    }
}

/// Values and reference gradients of all basis functions of `degree` at a
/// point given in reference coordinates.
pub fn eval_basis(degree: i32, point: [f64; 2]) -> Result<BasisEval> {
    if degree < 0 {
        return Err(Error::NegativeDegree(degree));
    }
    Ok(ReferenceBasis::new(degree as usize).eval(point))
}
