//! Discontinuous polynomial space on triangles: reference basis, quadrature,
//! global layout and face traces.

pub mod basis;
pub mod quadrature;
pub mod space;

pub use basis::{eval_basis, local_size, BasisEval, ReferenceBasis};
pub use quadrature::{interval_rule, triangle_rule, QuadratureRule};
pub use space::{dot, jump_and_mean, DgSpace, ElementMap, FacePoint, FaceTrace, StateVector};
