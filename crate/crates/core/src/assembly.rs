//! Symmetric interior-penalty discretisation of diffusion, upwinded advection
//! and membrane transmission, plus the reaction load vector.
//!
//! With `n` the unit normal pointing out of the face's left (`+`) element, the
//! bilinear form of one species is
//!
//! ```text
//! B(u, v) = Σ_κ ∫_κ (d∇u − u b)·∇v
//!         − Σ_int ∫ {d∇u − u b}·⟦v⟧ + {d∇v}·⟦u⟧ − (σ + |b·n|/2) ⟦u⟧·⟦v⟧
//!         + Σ_tr ∫ p (u⁺ − u⁻)(v⁺ − v⁻)
//! ```
//!
//! and the outer membrane carries no terms (zero total flux).

use rayon::prelude::*;

use crate::dg::{dot, DgSpace, StateVector};
use crate::error::{Error, Result};
use crate::geometry::{CellGeometry, FaceKind, Mesh};
use crate::kinetics::{KineticConstants, N_SPECIES};
use crate::linalg::CsrMatrix;
use crate::model::{AdvectionField, ModelParameters};

/// Transport coefficients of one species.
#[derive(Debug, Clone)]
pub struct SpeciesTransport {
    /// Diffusivity on each element.
    pub diffusivity: Vec<f64>,
    /// Envelope permeability.
    pub permeability: f64,
    pub velocity: Option<AdvectionField>,
    /// Penalty constant C_σ.
    pub penalty: f64,
}

impl SpeciesTransport {
    pub fn uniform(space: &DgSpace, diffusivity: f64, permeability: f64, penalty: f64) -> Self {
        Self {
            diffusivity: vec![diffusivity; space.n_elements()],
            permeability,
            velocity: None,
            penalty,
        }
    }

    fn velocity_at(&self, x: [f64; 2]) -> [f64; 2] {
        self.velocity.map_or([0.0, 0.0], |b| b.velocity(x))
    }
}

/// Interior-face penalty `C_σ d m² / h` with `m` and `h` the face averages of
/// degree and element diameter. Only interior faces carry a penalty.
pub fn compute_penalty(mesh: &Mesh, face_id: usize, diffusivity: f64, constant: f64) -> Result<f64> {
    match mesh.classify_face(face_id)? {
        FaceKind::Transmission => Err(Error::PenaltyOnTransmission(face_id)),
        _ => {
            let m = mesh.face_m(face_id).max(1.0);
            Ok(constant * diffusivity * m * m / mesh.face_h(face_id))
        }
    }
}

/// Upwind stabilisation weight `|b·n| / 2`.
pub fn upwind_coefficient(b: [f64; 2], n: [f64; 2]) -> f64 {
    0.5 * (b[0] * n[0] + b[1] * n[1]).abs()
}

/// Diagonal of the mass matrix of one species block. The basis is
/// orthonormal on the reference triangle, so each element block is `|det J| I`.
pub fn assemble_mass(space: &DgSpace) -> Vec<f64> {
    let mut m = vec![0.0; space.n_per_species];
    for e in 0..space.n_elements() {
        let det = space.maps[e].det.abs();
        m[space.local_range(e)].iter_mut().for_each(|v| *v = det);
    }
    m
}

fn face_diffusivity(t: &SpeciesTransport, left: usize, right: Option<usize>) -> f64 {
    let dl = t.diffusivity[left];
    right.map_or(dl, |r| dl.max(t.diffusivity[r]))
}

/// Assembles the sparse matrix `K[i][j] = B(φ_j, φ_i)` of one species.
pub fn assemble_operator(space: &DgSpace, transport: &SpeciesTransport) -> Result<CsrMatrix> {
    let n = space.n_per_species;
    let mut trip = Vec::new();
    let mesh = &space.mesh;

    for e in 0..space.n_elements() {
        let tab = space.volume_rule(e);
        let map = &space.maps[e];
        let det = map.det.abs();
        let range = space.local_range(e);
        let d = transport.diffusivity[e];
        let nloc = range.len();
        let mut local = vec![0.0; nloc * nloc];
        for ((p, w), ev) in tab.rule.points.iter().zip(&tab.rule.weights).zip(&tab.evals) {
            let grads = space.physical_gradients(e, ev);
            let b = transport.velocity_at(map.to_physical(*p));
            let wd = w * det;
            for i in 0..nloc {
                for j in 0..nloc {
                    let flux = [
                        d * grads[j][0] - ev.values[j] * b[0],
                        d * grads[j][1] - ev.values[j] * b[1],
                    ];
                    local[i * nloc + j] += wd * (flux[0] * grads[i][0] + flux[1] * grads[i][1]);
                }
            }
        }
        for i in 0..nloc {
            for j in 0..nloc {
                trip.push((range.start + i, range.start + j, local[i * nloc + j]));
            }
        }
    }

    for (f, face) in mesh.faces.iter().enumerate() {
        let Some(right) = face.right else { continue };
        let sides = [(face.left, 1.0), (right, -1.0)];
        let nrm = face.normal;
        match face.kind {
            FaceKind::Transmission => {
                let p = transport.permeability;
                if p == 0.0 {
                    continue;
                }
                for fp in space.face_points(f) {
                    let minus = fp.minus.as_ref().expect("two-sided face");
                    let vals = [&fp.plus.values, &minus.values];
                    for (ci, &(ec, sc)) in sides.iter().enumerate() {
                        for (ai, &(ea, sa)) in sides.iter().enumerate() {
                            let rc = space.local_range(ec);
                            let ra = space.local_range(ea);
                            for (i, vc) in vals[ci].iter().enumerate() {
                                for (j, ua) in vals[ai].iter().enumerate() {
                                    trip.push((rc.start + i, ra.start + j, fp.weight * p * sa * sc * ua * vc));
                                }
                            }
                        }
                    }
                }
            }
            FaceKind::Interior => {
                let sigma = compute_penalty(mesh, f, face_diffusivity(transport, face.left, face.right), transport.penalty)?;
                let dside = [transport.diffusivity[face.left], transport.diffusivity[right]];
                for fp in space.face_points(f) {
                    let minus = fp.minus.as_ref().expect("two-sided face");
                    let evs = [&fp.plus, minus];
                    let b = transport.velocity_at(fp.x);
                    let bn = b[0] * nrm[0] + b[1] * nrm[1];
                    let stab = sigma + upwind_coefficient(b, nrm);
                    for (ci, &(ec, sc)) in sides.iter().enumerate() {
                        let rc = space.local_range(ec);
                        for (ai, &(ea, sa)) in sides.iter().enumerate() {
                            let ra = space.local_range(ea);
                            for i in 0..rc.len() {
                                let vc = evs[ci].values[i];
                                let gvc = evs[ci].gradients[i];
                                let dvc_n = dside[ci] * (gvc[0] * nrm[0] + gvc[1] * nrm[1]);
                                for j in 0..ra.len() {
                                    let ua = evs[ai].values[j];
                                    let gua = evs[ai].gradients[j];
                                    let flux_n = dside[ai] * (gua[0] * nrm[0] + gua[1] * nrm[1]) - ua * bn;
                                    let v = -0.5 * flux_n * sc * vc - 0.5 * dvc_n * sa * ua + stab * sa * sc * ua * vc;
                                    trip.push((rc.start + i, ra.start + j, fp.weight * v));
                                }
                            }
                        }
                    }
                }
            }
            FaceKind::OuterBoundary => {}
        }
    }
    Ok(CsrMatrix::from_triplets(n, n, trip))
}

/// Residual `r_i = B(u_h, φ_i)` evaluated from the traces of `u_h` without
/// forming a matrix.
pub fn apply_spatial_operator(space: &DgSpace, transport: &SpeciesTransport, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != space.n_per_species {
        return Err(Error::Dimension {
            expected: space.n_per_species,
            got: u.len(),
        });
    }
    if u.iter().any(|v| v.is_nan()) {
        return Err(Error::NaN("coefficient vector"));
    }
    let mesh = &space.mesh;
    let mut r = vec![0.0; u.len()];

    for e in 0..space.n_elements() {
        let tab = space.volume_rule(e);
        let map = &space.maps[e];
        let det = map.det.abs();
        let range = space.local_range(e);
        let coeffs = &u[range.clone()];
        let d = transport.diffusivity[e];
        for ((p, w), ev) in tab.rule.points.iter().zip(&tab.rule.weights).zip(&tab.evals) {
            let grads = space.physical_gradients(e, ev);
            let uh = dot(coeffs, &ev.values);
            let gx: f64 = coeffs.iter().zip(&grads).map(|(c, g)| c * g[0]).sum();
            let gy: f64 = coeffs.iter().zip(&grads).map(|(c, g)| c * g[1]).sum();
            let b = transport.velocity_at(map.to_physical(*p));
            let flux = [d * gx - uh * b[0], d * gy - uh * b[1]];
            for (ri, g) in r[range.clone()].iter_mut().zip(&grads) {
                *ri += w * det * (flux[0] * g[0] + flux[1] * g[1]);
            }
        }
    }

    for (f, face) in mesh.faces.iter().enumerate() {
        let Some(right) = face.right else { continue };
        let (rl, rr) = (space.local_range(face.left), space.local_range(right));
        let nrm = face.normal;
        let sigma = match face.kind {
            FaceKind::Interior => {
                compute_penalty(mesh, f, face_diffusivity(transport, face.left, face.right), transport.penalty)?
            }
            _ => 0.0,
        };
        let (dl, dr) = (transport.diffusivity[face.left], transport.diffusivity[right]);
        for fp in space.face_points(f) {
            let minus = fp.minus.as_ref().expect("two-sided face");
            let up = dot(&u[rl.clone()], &fp.plus.values);
            let um = dot(&u[rr.clone()], &minus.values);
            let jump = up - um;
            let w = fp.weight;
            match face.kind {
                FaceKind::Transmission => {
                    let q = w * transport.permeability * jump;
                    r[rl.clone()].iter_mut().zip(&fp.plus.values).for_each(|(ri, v)| *ri += q * v);
                    r[rr.clone()].iter_mut().zip(&minus.values).for_each(|(ri, v)| *ri -= q * v);
                }
                FaceKind::Interior => {
                    let gn = |coeffs: &[f64], grads: &[[f64; 2]]| -> f64 {
                        coeffs.iter().zip(grads).map(|(c, g)| c * (g[0] * nrm[0] + g[1] * nrm[1])).sum()
                    };
                    let b = transport.velocity_at(fp.x);
                    let bn = b[0] * nrm[0] + b[1] * nrm[1];
                    let mean_flux = 0.5
                        * (dl * gn(&u[rl.clone()], &fp.plus.gradients) - up * bn
                            + dr * gn(&u[rr.clone()], &minus.gradients)
                            - um * bn);
                    let stab = (sigma + upwind_coefficient(b, nrm)) * jump;
                    for (i, ri) in r[rl.clone()].iter_mut().enumerate() {
                        let v = fp.plus.values[i];
                        let g = fp.plus.gradients[i];
                        let dvn = dl * (g[0] * nrm[0] + g[1] * nrm[1]);
                        *ri += w * (-mean_flux * v - 0.5 * dvn * jump + stab * v);
                    }
                    for (i, ri) in r[rr.clone()].iter_mut().enumerate() {
                        let v = minus.values[i];
                        let g = minus.gradients[i];
                        let dvn = dr * (g[0] * nrm[0] + g[1] * nrm[1]);
                        *ri += w * (mean_flux * v - 0.5 * dvn * jump - stab * v);
                    }
                }
                FaceKind::OuterBoundary => {}
            }
        }
    }
    Ok(r)
}

/// Load vector `F_{s,j} = ∫ f_s(u_h) φ_j` of all species, laid out like the
/// state.
pub fn assemble_source(space: &DgSpace, kinetics: &KineticConstants, u: &StateVector) -> Result<Vec<f64>> {
    let per_element: Vec<Vec<[f64; N_SPECIES]>> = (0..space.n_elements())
        .into_par_iter()
        .map(|e| {
            let tab = space.volume_rule(e);
            let det = space.maps[e].det.abs();
            let comp = space.compartment(e);
            let mut local = vec![[0.0; N_SPECIES]; space.local_size(e)];
            for (w, ev) in tab.rule.weights.iter().zip(&tab.evals) {
                let vals = u.values_at(space, e, &ev.values);
                let f = kinetics.source_vector(&vals, comp)?;
                for (l, phi) in local.iter_mut().zip(&ev.values) {
                    for s in 0..N_SPECIES {
                        l[s] += w * det * f[s] * phi;
                    }
                }
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; space.n_dofs()];
    for (e, local) in per_element.iter().enumerate() {
        for (i, l) in local.iter().enumerate() {
            for (s, v) in l.iter().enumerate() {
                out[space.global_index(e, i, s)] = *v;
            }
        }
    }
    Ok(out)
}

/// Jacobian of the load vector with respect to the full state.
pub fn assemble_source_jacobian(space: &DgSpace, kinetics: &KineticConstants, u: &StateVector) -> Result<CsrMatrix> {
    let mut trip = Vec::new();
    for e in 0..space.n_elements() {
        let tab = space.volume_rule(e);
        let det = space.maps[e].det.abs();
        let comp = space.compartment(e);
        let nloc = space.local_size(e);
        let mut local = vec![[[0.0; N_SPECIES]; N_SPECIES]; nloc * nloc];
        for (w, ev) in tab.rule.weights.iter().zip(&tab.evals) {
            let vals = u.values_at(space, e, &ev.values);
            let jac = kinetics.source_jacobian(&vals, comp)?;
            for i in 0..nloc {
                for j in 0..nloc {
                    let wij = w * det * ev.values[i] * ev.values[j];
                    let blk = &mut local[i * nloc + j];
                    for s in 0..N_SPECIES {
                        for t in 0..N_SPECIES {
                            blk[s][t] += wij * jac[s][t];
                        }
                    }
                }
            }
        }
        for i in 0..nloc {
            for j in 0..nloc {
                for s in 0..N_SPECIES {
                    for t in 0..N_SPECIES {
                        let v = local[i * nloc + j][s][t];
                        if v != 0.0 {
                            trip.push((space.global_index(e, i, s), space.global_index(e, j, t), v));
                        }
                    }
                }
            }
        }
    }
    let n = space.n_dofs();
    Ok(CsrMatrix::from_triplets(n, n, trip))
}

/// Mass diagonal and the spatial operator of every species.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub mass: Vec<f64>,
    pub operators: Vec<CsrMatrix>,
    pub transports: Vec<SpeciesTransport>,
}

impl SystemOperators {
    pub fn new(space: &DgSpace, transports: Vec<SpeciesTransport>) -> Result<Self> {
        if transports.len() != N_SPECIES {
            return Err(Error::Dimension {
                expected: N_SPECIES,
                got: transports.len(),
            });
        }
        let operators = transports
            .par_iter()
            .map(|t| assemble_operator(space, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mass: assemble_mass(space),
            operators,
            transports,
        })
    }

    /// Operators of the Ran model. Microtubule transport is included when
    /// enabled in `params`.
    pub fn for_model(space: &DgSpace, params: &ModelParameters, geometry: &CellGeometry) -> Result<Self> {
        params.validate()?;
        let advection = if params.advection {
            Some(AdvectionField::new(params.advection_config(), *geometry)?)
        } else {
            None
        };
        let scale: Vec<f64> = (0..space.n_elements())
            .map(|e| params.diffusivity_scale(geometry, space.mesh.centroid(e)))
            .collect();
        let d = params.diffusivity.to_array();
        let p = params.permeability.to_array();
        let transports = (0..N_SPECIES)
            .map(|s| SpeciesTransport {
                diffusivity: scale.iter().map(|k| k * d[s]).collect(),
                permeability: p[s],
                velocity: advection.filter(|_| AdvectionField::is_transported(s)),
                penalty: params.penalty,
            })
            .collect();
        Self::new(space, transports)
    }

    /// `K u` for the whole state.
    pub fn apply(&self, u: &StateVector) -> StateVector {
        let mut out = u.clone();
        for s in 0..N_SPECIES {
            let y = self.operators[s].mul(u.species(s));
            out.species_mut(s).copy_from_slice(&y);
        }
        out
    }
}
