//! Time-dependent check against a separable solution: with p = 0 and no
//! reactions the nucleus is insulated and J0(k r) e^{-d k² t}, k a zero of J1
//! scaled by the nuclear radius, solves the heat equation there exactly.

use ran_import::assembly::{SpeciesTransport, SystemOperators};
use ran_import::dg::{DgSpace, StateVector};
use ran_import::geometry::{build_disk_mesh, CellGeometry};
use ran_import::kinetics::{Compartment, KineticConstants, N_SPECIES};
use ran_import::linalg::SolverKind;
use ran_import::time::{Scheme, TimeStepper, TimeStepperConfig};

/// First positive zero of J1.
const J1_ZERO: f64 = 3.831_705_970_207_512;

fn bessel_j0(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

fn no_reactions() -> KineticConstants {
    KineticConstants {
        q_cat1: 0.0,
        q_cat2: 0.0,
        k1: 0.0,
        k_minus1: 0.0,
        k2: 0.0,
        k3: 0.0,
        ..Default::default()
    }
}

fn error_at(h: f64, scheme: Scheme) -> f64 {
    let g = CellGeometry::default();
    let d = 1.0;
    let k = J1_ZERO / g.nucleus_radius;
    let t_end = 0.1;
    let space = DgSpace::with_extra_order(build_disk_mesh(&g, h, 1).unwrap(), 2);
    let transports = (0..N_SPECIES).map(|_| SpeciesTransport::uniform(&space, d, 0.0, 10.0)).collect();
    let ops = SystemOperators::new(&space, transports).unwrap();
    let exact = |x: [f64; 2], c: Compartment, t: f64| match c {
        Compartment::Nucleus => bessel_j0(k * g.radius_of(x)) * (-d * k * k * t).exp(),
        Compartment::Cytoplasm => 0.0,
    };
    let mut u = StateVector::zeros(&space);
    for s in 0..N_SPECIES {
        let block = space.interpolate_by_compartment(|x, c| exact(x, c, 0.0)).unwrap();
        u.species_mut(s).copy_from_slice(&block);
    }
    let cfg = TimeStepperConfig {
        scheme,
        dt: 0.01 * h,
        t_end,
        linear_solver: SolverKind::Direct,
        ..Default::default()
    };
    let mut st = TimeStepper::new(&space, &ops, no_reactions(), cfg).unwrap();
    st.run(&mut u, |_, _| Ok(())).unwrap();
    space.l2_error(u.species(0), |x, c| exact(x, c, st.time), 4)
}

#[test]
fn bessel_series_values() {
    assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
    assert!((bessel_j0(2.404_825_557_695_773)).abs() < 1e-12);
    assert!((bessel_j0(J1_ZERO) + 0.402_759_395_702_553).abs() < 1e-12);
}

#[test]
fn insulated_nucleus_mode_converges() {
    for scheme in [Scheme::CnImex, Scheme::BeImex] {
        let e1 = error_at(1.0, scheme);
        let e2 = error_at(0.5, scheme);
        let rate = (e1 / e2).log2();
        assert!(rate > 1.6, "{scheme:?}: errors {e1:.3e} {e2:.3e}, rate {rate:.2}");
    }
}
