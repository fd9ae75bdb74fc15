use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dg::basis::{BasisEval, ReferenceBasis};
use crate::dg::quadrature::{interval_rule, triangle_rule, QuadratureRule};
use crate::error::{Error, Result};
use crate::geometry::{Mesh, Point};
use crate::kinetics::{Compartment, N_SPECIES};

/// Affine map `x = origin + J ξ` of one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: Point,
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// J⁻ᵀ, mapping reference gradients to physical ones.
    pub inv_jt: [[f64; 2]; 2],
}

impl ElementMap {
    fn new([a, b, c]: [Point; 3]) -> Self {
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_jt = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        Self {
            origin: a,
            jac,
            det,
            inv_jt,
        }
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        // J⁻¹ = (J⁻ᵀ)ᵀ
        [
            self.inv_jt[0][0] * d[0] + self.inv_jt[1][0] * d[1],
            self.inv_jt[0][1] * d[0] + self.inv_jt[1][1] * d[1],
        ]
    }

    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_jt[0][0] * g[0] + self.inv_jt[0][1] * g[1],
            self.inv_jt[1][0] * g[0] + self.inv_jt[1][1] * g[1],
        ]
    }
}

/// Basis tabulated at the points of a reference volume rule.
#[derive(Debug, Clone)]
pub struct TabulatedRule {
    pub rule: QuadratureRule<2>,
    pub evals: Vec<BasisEval>,
}

/// One face quadrature point with basis traces from both sides. Gradients are
/// physical.
#[derive(Debug, Clone)]
pub struct FacePoint {
    pub x: Point,
    /// Physical weight (includes the face length).
    pub weight: f64,
    pub plus: BasisEval,
    pub minus: Option<BasisEval>,
}

/// The broken polynomial space over a mesh: per-element degree, tabulated
/// bases and the global coefficient layout.
///
/// Coefficients are stored species-major: the index of local function `j`
/// of element `e` for species `s` is `s·n_per_species + offset[e] + j`.
#[derive(Debug, Clone)]
pub struct DgSpace {
    pub mesh: Arc<Mesh>,
    pub maps: Vec<ElementMap>,
    pub offsets: Vec<usize>,
    pub n_per_species: usize,
    bases: BTreeMap<usize, ReferenceBasis>,
    volume: BTreeMap<usize, TabulatedRule>,
    /// Extra polynomial degree added to the 2m+1 default rules.
    pub extra_order: usize,
}

impl DgSpace {
    pub fn new(mesh: Mesh) -> Self {
        Self::with_extra_order(mesh, 0)
    }

    pub fn with_extra_order(mesh: Mesh, extra_order: usize) -> Self {
        let maps: Vec<ElementMap> = (0..mesh.n_elements())
            .map(|e| ElementMap::new(mesh.corners(e)))
            .collect();
        let mut offsets = Vec::with_capacity(mesh.n_elements() + 1);
        let mut bases = BTreeMap::new();
        let mut volume = BTreeMap::new();
        let mut total = 0;
        for el in &mesh.elements {
            offsets.push(total);
            let basis = bases
                .entry(el.degree)
                .or_insert_with(|| ReferenceBasis::new(el.degree));
            total += basis.len();
        }
        offsets.push(total);
        for (&m, basis) in &bases {
            let rule = triangle_rule(2 * m + 1 + extra_order);
            let evals = rule.points.iter().map(|&p| basis.eval(p)).collect();
            volume.insert(m, TabulatedRule { rule, evals });
        }
        Self {
            mesh: Arc::new(mesh),
            maps,
            offsets,
            n_per_species: total,
            bases,
            volume,
            extra_order,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    pub fn n_dofs(&self) -> usize {
        N_SPECIES * self.n_per_species
    }

    pub fn degree(&self, e: usize) -> usize {
        self.mesh.elements[e].degree
    }

    pub fn local_size(&self, e: usize) -> usize {
        self.offsets[e + 1] - self.offsets[e]
    }

    pub fn local_range(&self, e: usize) -> std::ops::Range<usize> {
        self.offsets[e]..self.offsets[e + 1]
    }

    pub fn global_index(&self, e: usize, local: usize, species: usize) -> usize {
        species * self.n_per_species + self.offsets[e] + local
    }

    pub fn compartment(&self, e: usize) -> Compartment {
        self.mesh.elements[e].compartment
    }

    pub fn basis(&self, degree: usize) -> &ReferenceBasis {
        &self.bases[&degree]
    }

    pub fn volume_rule(&self, e: usize) -> &TabulatedRule {
        &self.volume[&self.degree(e)]
    }

    /// Physical gradients of all basis functions.
    pub fn physical_gradients(&self, e: usize, eval: &BasisEval) -> Vec<[f64; 2]> {
        eval.gradients
            .iter()
            .map(|&g| self.maps[e].physical_gradient(g))
            .collect()
    }

    /// Face quadrature exact to degree `2m + 1 + extra_order` using the larger
    /// adjacent degree.
    pub fn face_points(&self, face_id: usize) -> Vec<FacePoint> {
        let face = &self.mesh.faces[face_id];
        let m = match face.right {
            Some(r) => self.degree(face.left).max(self.degree(r)),
            None => self.degree(face.left),
        };
        let rule = interval_rule(2 * m + 1 + self.extra_order);
        let a = self.mesh.vertices[face.vertices[0]];
        let b = self.mesh.vertices[face.vertices[1]];
        let side = |e: usize, x: Point| {
            let map = &self.maps[e];
            let mut ev = self.basis(self.degree(e)).eval(map.to_reference(x));
            for g in &mut ev.gradients {
                *g = map.physical_gradient(*g);
            }
            ev
        };
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(&[s], &w)| {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                FacePoint {
                    x,
                    weight: w * face.length,
                    plus: side(face.left, x),
                    minus: face.right.map(|r| side(r, x)),
                }
            })
            .collect()
    }

    /// Value of a species field at a reference point of element `e`.
    pub fn eval_at(&self, block: &[f64], e: usize, xi: [f64; 2]) -> f64 {
        let ev = self.basis(self.degree(e)).eval(xi);
        dot(&block[self.local_range(e)], &ev.values)
    }

    /// Value of a species field at a physical point inside element `e`.
    pub fn eval_physical(&self, block: &[f64], e: usize, x: Point) -> f64 {
        self.eval_at(block, e, self.maps[e].to_reference(x))
    }

    /// Elementwise L² projection of `f` into one species block. Reproduces
    /// polynomials up to the element degree exactly.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
        self.interpolate_by_compartment(|x, _| f(x))
    }

    /// Like [`DgSpace::interpolate`] for data given separately on each
    /// compartment.
    pub fn interpolate_by_compartment(&self, f: impl Fn(Point, Compartment) -> f64) -> Result<Vec<f64>> {
        let mut block = vec![0.0; self.n_per_species];
        for e in 0..self.n_elements() {
            let tab = self.volume_rule(e);
            let map = &self.maps[e];
            let comp = self.compartment(e);
            let range = self.local_range(e);
            for ((p, w), ev) in tab.rule.points.iter().zip(&tab.rule.weights).zip(&tab.evals) {
                let x = map.to_physical(*p);
                let v = f(x, comp);
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        value: v,
                        x: x[0],
                        y: x[1],
                    });
                }
                for (c, phi) in block[range.clone()].iter_mut().zip(&ev.values) {
                    *c += w * v * phi;
                }
            }
        }
        Ok(block)
    }

    /// Coefficients of a field that is constant on each element.
    pub fn piecewise_constant(&self, value: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut block = vec![0.0; self.n_per_species];
        for e in 0..self.n_elements() {
            let c = self.basis(self.degree(e)).constant_coefficients();
            let v = value(e);
            for (dst, src) in block[self.local_range(e)].iter_mut().zip(c) {
                *dst = v * src;
            }
        }
        block
    }

    /// ∫_κ φ_j for every local function of element `e`.
    pub fn basis_integrals(&self, e: usize) -> Vec<f64> {
        let tab = self.volume_rule(e);
        let det = self.maps[e].det.abs();
        let mut out = vec![0.0; self.local_size(e)];
        for (w, ev) in tab.rule.weights.iter().zip(&tab.evals) {
            for (o, phi) in out.iter_mut().zip(&ev.values) {
                *o += w * det * phi;
            }
        }
        out
    }

    /// ∫ u over the elements of one compartment.
    pub fn integrate_block(&self, block: &[f64], compartment: Option<Compartment>) -> f64 {
        (0..self.n_elements())
            .filter(|&e| compartment.is_none_or(|c| self.compartment(e) == c))
            .map(|e| dot(&block[self.local_range(e)], &self.basis_integrals(e)))
            .sum()
    }

    /// L² norm of `block - exact` using a rule `extra` degrees above default.
    pub fn l2_error(&self, block: &[f64], exact: impl Fn(Point, Compartment) -> f64, extra: usize) -> f64 {
        let mut sum = 0.0;
        for e in 0..self.n_elements() {
            let m = self.degree(e);
            let rule = triangle_rule(2 * m + 1 + extra);
            let basis = self.basis(m);
            let map = &self.maps[e];
            let comp = self.compartment(e);
            let coeffs = &block[self.local_range(e)];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let uh = dot(coeffs, &basis.eval(*p).values);
                let diff = uh - exact(map.to_physical(*p), comp);
                sum += w * map.det.abs() * diff * diff;
            }
        }
        sum.sqrt()
    }

    /// Physical quadrature points of every element, in element order.
    pub fn sample_points(&self) -> Vec<(usize, [f64; 2], Point)> {
        let mut out = Vec::new();
        for e in 0..self.n_elements() {
            let map = &self.maps[e];
            for p in &self.volume_rule(e).rule.points {
                out.push((e, *p, map.to_physical(*p)));
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// DG coefficients of all species at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub data: Vec<f64>,
    pub n_per_species: usize,
}

impl StateVector {
    pub fn zeros(space: &DgSpace) -> Self {
        Self {
            data: vec![0.0; space.n_dofs()],
            n_per_species: space.n_per_species,
        }
    }

    pub fn species(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_per_species..(s + 1) * self.n_per_species]
    }

    pub fn species_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.n_per_species..(s + 1) * self.n_per_species]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Values of all species at a reference point of element `e`.
    pub fn values_at(&self, space: &DgSpace, e: usize, values: &[f64]) -> [f64; N_SPECIES] {
        let range = space.local_range(e);
        let mut out = [0.0; N_SPECIES];
        for (s, o) in out.iter_mut().enumerate() {
            *o = dot(&self.species(s)[range.clone()], values);
        }
        out
    }
}

/// Scalar jump `u⁺n⁺ + u⁻n⁻` and mean `(u⁺ + u⁻)/2` on an interior face.
pub fn jump_and_mean(u_plus: f64, u_minus: f64, n_plus: [f64; 2]) -> ([f64; 2], f64) {
    let d = u_plus - u_minus;
    ([d * n_plus[0], d * n_plus[1]], 0.5 * (u_plus + u_minus))
}

/// Traces of one species field on one face, at the face quadrature points.
#[derive(Debug, Clone)]
pub struct FaceTrace {
    pub normal: [f64; 2],
    pub plus: Vec<f64>,
    pub minus: Option<Vec<f64>>,
    pub grad_plus: Vec<[f64; 2]>,
    pub grad_minus: Option<Vec<[f64; 2]>>,
}

impl FaceTrace {
    pub fn new(space: &DgSpace, block: &[f64], face_id: usize) -> Self {
        let face = &space.mesh.faces[face_id];
        let pts = space.face_points(face_id);
        let lp = &block[space.local_range(face.left)];
        let value = |c: &[f64], ev: &BasisEval| dot(c, &ev.values);
        let grad = |c: &[f64], ev: &BasisEval| {
            let mut g = [0.0; 2];
            for (ci, gi) in c.iter().zip(&ev.gradients) {
                g[0] += ci * gi[0];
                g[1] += ci * gi[1];
            }
            g
        };
        let plus = pts.iter().map(|p| value(lp, &p.plus)).collect();
        let grad_plus = pts.iter().map(|p| grad(lp, &p.plus)).collect();
        let (minus, grad_minus) = match face.right {
            Some(r) => {
                let rc = &block[space.local_range(r)];
                let ev = |p: &FacePoint| p.minus.clone().expect("two-sided face");
                (
                    Some(pts.iter().map(|p| value(rc, &ev(p))).collect()),
                    Some(pts.iter().map(|p| grad(rc, &ev(p))).collect()),
                )
            }
            None => (None, None),
        };
        Self {
            normal: face.normal,
            plus,
            minus,
            grad_plus,
            grad_minus,
        }
    }

    /// Vector jump per point; `u⁺n` on the boundary.
    pub fn jump(&self) -> Vec<[f64; 2]> {
        let n = self.normal;
        match &self.minus {
            Some(m) => self
                .plus
                .iter()
                .zip(m)
                .map(|(&p, &q)| jump_and_mean(p, q, n).0)
                .collect(),
            None => self.plus.iter().map(|&p| [p * n[0], p * n[1]]).collect(),
        }
    }

    /// Mean per point; `u⁺` on the boundary.
    pub fn mean(&self) -> Vec<f64> {
        match &self.minus {
            Some(m) => self.plus.iter().zip(m).map(|(p, q)| 0.5 * (p + q)).collect(),
            None => self.plus.clone(),
        }
    }
}
