//! Driver-level behaviour on coarse meshes.

use ran_import::dg::DgSpace;
use ran_import::geometry::CellGeometry;
use ran_import::kinetics::{Compartment, Species};
use ran_import::model::build_initial_state;
use ran_import::sim::{
    max_accumulation_dip, nuclear_cargo, nuclear_cargo_mass, run_nocodazole_experiment, run_oracle_comparison,
    run_simulation, Problem, SimConfig,
};

fn coarse(t_end: f64) -> SimConfig {
    let mut c = SimConfig::default();
    c.mesh.target_h = 2.0;
    c.time.t_end = t_end;
    c.time.linear_solver = ran_import::linalg::SolverKind::Direct;
    c
}

#[test]
fn zero_end_time_gives_initial_row() {
    let out = run_simulation(&coarse(0.0), None).unwrap();
    assert_eq!(out.series.samples.len(), 1);
    let s = &out.series.samples[0];
    assert_eq!(s.t, 0.0);
    let g = CellGeometry::default();
    // cargo: 8 μM on the band 8 <= r <= 10 (polygonal, so within 1%)
    let band = std::f64::consts::PI * (100.0 - 64.0);
    assert!((s.mass(Species::C, Compartment::Cytoplasm) / (8.0 * band) - 1.0).abs() < 0.01);
    assert!((s.average(Species::Rt, Compartment::Cytoplasm) - 3.0).abs() < 1e-12);
    assert!((s.average(Species::T, Compartment::Cytoplasm) - 4.0).abs() < 1e-12);
    for sp in Species::ALL {
        assert_eq!(s.mass(sp, Compartment::Nucleus), 0.0);
    }
    assert!((s.areas[0] + s.areas[1] - g.cytoplasm_area() - g.nucleus_area()).abs() < 0.05 * g.nucleus_area());
}

#[test]
fn snapshot_at_zero_reproduces_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = coarse(0.0);
    cfg.output.snapshot_times = vec![0.0];
    cfg.output.mesh_dump = true;
    let problem = Problem::new(&cfg).unwrap();
    problem.run(Some(dir.path()), "").unwrap();
    let text = std::fs::read_to_string(dir.path().join("snapshot_t0.000.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let space: &DgSpace = &problem.space;
    let u0 = build_initial_state(space, &cfg.model.initial_conditions(), &cfg.geometry).unwrap();
    let pts = space.sample_points();
    assert_eq!(rows.len(), pts.len());
    for (row, (e, xi, x)) in rows.iter().zip(pts) {
        assert_eq!(row.len(), 8);
        assert!((row[0] - x[0]).abs() < 1e-5 && (row[1] - x[1]).abs() < 1e-5);
        for s in 0..6 {
            let v = space.eval_at(u0.species(s), e, xi);
            assert!((row[2 + s] - v).abs() <= 1e-7 * (1.0 + v.abs()));
        }
    }
    assert!(dir.path().join("mesh.txt").exists());
}

#[test]
fn full_run_accumulates_cargo_in_the_nucleus() {
    let out = run_simulation(&coarse(17.0), None).unwrap();
    let at = |t: f64| out.series.samples.iter().find(|s| (s.t - t).abs() < 1e-9).unwrap();
    let (s1, s17) = (at(1.0), at(17.0));
    assert!(nuclear_cargo_mass(s17) > nuclear_cargo_mass(s1));
    assert!(max_accumulation_dip(&out.series, 1.0) <= 0.0);
    let cyto_cargo = s17.average(Species::C, Compartment::Cytoplasm) + s17.average(Species::Tc, Compartment::Cytoplasm);
    assert!(nuclear_cargo(s17) > cyto_cargo);
    assert!(s17.average(Species::Rt, Compartment::Nucleus) > 10.0 * s17.average(Species::Rt, Compartment::Cytoplasm));
    assert!(out.series.max_abs_drift().iter().all(|d| *d < 1e-8));
}

#[test]
fn zero_speed_transport_changes_nothing() {
    let mut cfg = coarse(2.0);
    cfg.model.advection_speed = 0.0;
    cfg.experiment.speed_sweep = vec![];
    let report = run_nocodazole_experiment(&cfg, None).unwrap();
    assert!((report.ratio - 1.0).abs() < 1e-9, "{}", report.ratio);
}

#[test]
fn oracle_modes() {
    let mut cfg = coarse(4.0);
    cfg.model.advection = false;
    let well_mixed = run_oracle_comparison(&cfg, 1000.0, None).unwrap();
    // h = 2 leaves a few percent of polygon-versus-circle error
    assert!(well_mixed.max_final_deviation() < 0.1);
    // informational mode
    let spatial = run_oracle_comparison(&cfg, 1.0, None).unwrap();
    assert!(spatial.max_final_deviation().is_finite());
    // transport the oracle does not know about
    cfg.model.advection = true;
    cfg.model.advection_speed = 2.0;
    let with_mt = run_oracle_comparison(&cfg, 1000.0, None).unwrap();
    assert!(with_mt.max_final_deviation() > well_mixed.max_final_deviation());
    assert!(run_oracle_comparison(&cfg, 0.5, None).is_err());
}
