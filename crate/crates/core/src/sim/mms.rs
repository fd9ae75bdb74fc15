//! Convergence study with manufactured solutions.
//!
//! Each species solves the steady problem `u − ∇·(d∇u − u b) = f` with its own
//! diffusivity and permeability (the cargo complex also with the microtubule
//! field). The exact solution is smooth inside each compartment and generally
//! discontinuous across the envelope; boundary and membrane mismatches are
//! fed back as face data on the polygonal faces, so the discrete problem is
//! consistent on the mesh itself and the observed rates are not capped by
//! the circle-versus-polygon error.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::assembly::{assemble_mass, assemble_operator, SpeciesTransport};
use crate::dg::DgSpace;
use crate::error::Result;
use crate::geometry::{build_disk_mesh, CellGeometry, FaceKind, Point};
use crate::kinetics::{Compartment, N_SPECIES};
use crate::linalg::{build_solver, CsrMatrix, SolverKind};
use crate::model::{AdvectionConfig, AdvectionField, ModelParameters};

/// Extra quadrature degrees for non-polynomial data and errors.
const EXTRA_ORDER: usize = 4;

/// `c + α sin(kx x + φ) cos(ky y + ψ)` with its gradient and Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub c: f64,
    pub alpha: f64,
    pub kx: f64,
    pub ky: f64,
    pub phase_x: f64,
    pub phase_y: f64,
}

impl Wave {
    pub fn constant(c: f64) -> Self {
        Self {
            c,
            alpha: 0.0,
            kx: 0.0,
            ky: 0.0,
            phase_x: 0.0,
            phase_y: 0.0,
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        let (sx, cy) = ((self.kx * x[0] + self.phase_x).sin(), (self.ky * x[1] + self.phase_y).cos());
        self.c + self.alpha * sx * cy
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        let ax = self.kx * x[0] + self.phase_x;
        let ay = self.ky * x[1] + self.phase_y;
        [
            self.alpha * self.kx * ax.cos() * ay.cos(),
            -self.alpha * self.ky * ax.sin() * ay.sin(),
        ]
    }

    pub fn laplacian(&self, x: Point) -> f64 {
        -(self.kx * self.kx + self.ky * self.ky) * (self.value(x) - self.c)
    }
}

/// Exact solution of one species: one wave per compartment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub cytoplasm: Wave,
    pub nucleus: Wave,
}

impl Manufactured {
    pub fn wave(&self, c: Compartment) -> &Wave {
        match c {
            Compartment::Cytoplasm => &self.cytoplasm,
            Compartment::Nucleus => &self.nucleus,
        }
    }

    /// A different smooth pair for every species index.
    pub fn for_species(s: usize) -> Self {
        let k = s as f64;
        Self {
            cytoplasm: Wave {
                c: 1.0 + 0.1 * k,
                alpha: 0.5,
                kx: 0.35 + 0.03 * k,
                ky: 0.25 + 0.02 * k,
                phase_x: 0.3 * k,
                phase_y: 0.1,
            },
            nucleus: Wave {
                c: 2.0 - 0.1 * k,
                alpha: 0.4,
                kx: 0.5,
                ky: 0.6 - 0.03 * k,
                phase_x: 0.2,
                phase_y: 0.5 + 0.1 * k,
            },
        }
    }
}

/// Load vector of the manufactured problem, including face data.
pub fn manufactured_load(space: &DgSpace, t: &SpeciesTransport, exact: &Manufactured) -> Vec<f64> {
    let mut load = vec![0.0; space.n_per_species];
    let velocity = |x: Point| t.velocity.map_or([0.0, 0.0], |b| b.velocity(x));
    let divergence = |x: Point| t.velocity.map_or(0.0, |b| b.divergence(x));

    for e in 0..space.n_elements() {
        let tab = space.volume_rule(e);
        let map = &space.maps[e];
        let det = map.det.abs();
        let w_e = exact.wave(space.compartment(e));
        let d = t.diffusivity[e];
        for ((p, w), ev) in tab.rule.points.iter().zip(&tab.rule.weights).zip(&tab.evals) {
            let x = map.to_physical(*p);
            let u = w_e.value(x);
            let g = w_e.gradient(x);
            let b = velocity(x);
            let f = u - d * w_e.laplacian(x) + b[0] * g[0] + b[1] * g[1] + u * divergence(x);
            for (l, phi) in load[space.local_range(e)].iter_mut().zip(&ev.values) {
                *l += w * det * f * phi;
            }
        }
    }

    // flux (d∇u − u b)·n out of element `e`
    let flux = |e: usize, x: Point, n: [f64; 2]| {
        let wv = exact.wave(space.compartment(e));
        let g = wv.gradient(x);
        let b = velocity(x);
        let u = wv.value(x);
        t.diffusivity[e] * (g[0] * n[0] + g[1] * n[1]) - u * (b[0] * n[0] + b[1] * n[1])
    };

    for (f, face) in space.mesh.faces.iter().enumerate() {
        let n = face.normal;
        match face.kind {
            FaceKind::Interior => {}
            FaceKind::OuterBoundary => {
                for fp in space.face_points(f) {
                    let g = flux(face.left, fp.x, n);
                    for (l, phi) in load[space.local_range(face.left)].iter_mut().zip(&fp.plus.values) {
                        *l += fp.weight * g * phi;
                    }
                }
            }
            FaceKind::Transmission => {
                let right = face.right.expect("transmission faces are two-sided");
                let (cl, cr) = (space.compartment(face.left), space.compartment(right));
                let (rl, rr) = (space.local_range(face.left), space.local_range(right));
                for fp in space.face_points(f) {
                    let minus = fp.minus.as_ref().expect("two-sided face");
                    let (ul, ur) = (exact.wave(cl).value(fp.x), exact.wave(cr).value(fp.x));
                    let gl = flux(face.left, fp.x, n) + t.permeability * (ul - ur);
                    let gr = flux(right, fp.x, [-n[0], -n[1]]) + t.permeability * (ur - ul);
                    for (l, phi) in load[rl.clone()].iter_mut().zip(&fp.plus.values) {
                        *l += fp.weight * gl * phi;
                    }
                    for (l, phi) in load[rr.clone()].iter_mut().zip(&minus.values) {
                        *l += fp.weight * gr * phi;
                    }
                }
            }
        }
    }
    load
}

/// Transport coefficients of each species in the study.
pub fn study_transports(space: &DgSpace, params: &ModelParameters, geometry: &CellGeometry) -> Result<Vec<SpeciesTransport>> {
    let field = AdvectionField::new(AdvectionConfig::default(), *geometry)?;
    let d = params.diffusivity.to_array();
    let p = params.permeability.to_array();
    Ok((0..N_SPECIES)
        .map(|s| SpeciesTransport {
            diffusivity: vec![d[s]; space.n_elements()],
            permeability: p[s],
            velocity: Some(field).filter(|_| AdvectionField::is_transported(s)),
            penalty: params.penalty,
        })
        .collect())
}

/// Solves `(M + K) u = F` for one species and returns the L² error.
pub fn solve_and_measure(space: &DgSpace, transport: &SpeciesTransport, exact: &Manufactured) -> Result<f64> {
    let k = assemble_operator(space, transport)?;
    let a = CsrMatrix::identity_scaled(&assemble_mass(space)).linear_combination(1.0, &k, 1.0);
    let load = manufactured_load(space, transport, exact);
    let blocks = (0..space.n_elements()).map(|e| space.local_range(e)).collect();
    let solver = build_solver(SolverKind::Direct, a, blocks, 1e-10)?;
    let mut u = vec![0.0; space.n_per_species];
    solver.solve(&load, &mut u)?;
    Ok(space.l2_error(&u, |x, c| exact.wave(c).value(x), EXTRA_ORDER))
}

#[derive(Debug, Clone)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub h_max: f64,
    pub n_elements: usize,
    /// L² error per species.
    pub errors: [f64; N_SPECIES],
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub degree: usize,
    pub levels: Vec<ConvergenceLevel>,
}

impl ConvergenceTable {
    /// Observed rate of each species between consecutive levels.
    pub fn rates(&self) -> Vec<[f64; N_SPECIES]> {
        self.levels
            .windows(2)
            .map(|w| {
                let ratio = (w[0].h_max / w[1].h_max).ln();
                std::array::from_fn(|s| (w[0].errors[s] / w[1].errors[s]).ln() / ratio)
            })
            .collect()
    }

    /// Smallest species rate on the finest pair.
    pub fn finest_rate(&self) -> f64 {
        self.rates()
            .last()
            .map_or(f64::NAN, |r| r.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# degree {}\nh,h_max,elements", self.degree);
        for s in crate::kinetics::Species::ALL {
            write!(out, ",err_{}", s.name()).unwrap();
        }
        out.push_str(",min_rate\n");
        let rates = self.rates();
        for (i, l) in self.levels.iter().enumerate() {
            write!(out, "{},{:.4},{}", l.h, l.h_max, l.n_elements).unwrap();
            for e in l.errors {
                write!(out, ",{e:.4e}").unwrap();
            }
            match i.checked_sub(1).map(|j| rates[j]) {
                Some(r) => writeln!(out, ",{:.3}", r.iter().copied().fold(f64::INFINITY, f64::min)).unwrap(),
                None => out.push_str(",\n"),
            }
        }
        out
    }
}

/// Errors on `levels` uniformly refined meshes starting from `coarse_h`.
pub fn run_convergence_study(
    geometry: &CellGeometry,
    params: &ModelParameters,
    degree: usize,
    coarse_h: f64,
    levels: usize,
) -> Result<ConvergenceTable> {
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        let h = coarse_h / f64::powi(2.0, l as i32);
        let mesh = build_disk_mesh(geometry, h, degree)?;
        let space = DgSpace::with_extra_order(mesh, EXTRA_ORDER);
        let transports = study_transports(&space, params, geometry)?;
        let errors: Vec<f64> = transports
            .par_iter()
            .enumerate()
            .map(|(s, t)| solve_and_measure(&space, t, &Manufactured::for_species(s)))
            .collect::<Result<_>>()?;
        out.push(ConvergenceLevel {
            h,
            h_max: space.mesh.max_diameter(),
            n_elements: space.n_elements(),
            errors: errors.try_into().expect("one error per species"),
        });
    }
    Ok(ConvergenceTable { degree, levels: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wave_derivatives_match_differences() {
        let w = Manufactured::for_species(3).cytoplasm;
        let h = 1e-5;
        let x = [1.3, -2.1];
        let g = w.gradient(x);
        let gx = (w.value([x[0] + h, x[1]]) - w.value([x[0] - h, x[1]])) / (2.0 * h);
        let gy = (w.value([x[0], x[1] + h]) - w.value([x[0], x[1] - h])) / (2.0 * h);
        assert!((g[0] - gx).abs() < 1e-8 && (g[1] - gy).abs() < 1e-8);
        let lap = (w.value([x[0] + h, x[1]]) + w.value([x[0] - h, x[1]]) + w.value([x[0], x[1] + h])
            + w.value([x[0], x[1] - h])
            - 4.0 * w.value(x))
            / (h * h);
        assert!((lap - w.laplacian(x)).abs() < 1e-4);
    }

    #[test]
    fn constant_solution_is_reproduced_exactly() {
        let g = CellGeometry::default();
        let space = DgSpace::with_extra_order(build_disk_mesh(&g, 2.0, 1).unwrap(), EXTRA_ORDER);
        let t = SpeciesTransport::uniform(&space, 14.0, 0.0, 10.0);
        let exact = Manufactured {
            cytoplasm: Wave::constant(1.5),
            nucleus: Wave::constant(0.5),
        };
        assert!(solve_and_measure(&space, &t, &exact).unwrap() < 1e-10);
    }

    #[test]
    fn linear_data_is_exact_for_degree_one() {
        // constants on both sides with a membrane jump and p > 0
        let g = CellGeometry::default();
        let space = DgSpace::with_extra_order(build_disk_mesh(&g, 2.0, 1).unwrap(), EXTRA_ORDER);
        let t = SpeciesTransport::uniform(&space, 14.0, 1.87, 10.0);
        let exact = Manufactured {
            cytoplasm: Wave::constant(1.0),
            nucleus: Wave::constant(3.0),
        };
        assert!(solve_and_measure(&space, &t, &exact).unwrap() < 1e-10);
    }

    #[test]
    fn errors_decrease_under_refinement() {
        let table = run_convergence_study(&CellGeometry::default(), &ModelParameters::default(), 1, 3.0, 2).unwrap();
        let rates = table.rates();
        assert!(rates[0].iter().all(|r| *r > 1.3), "{}", table.to_text());
    }
}
