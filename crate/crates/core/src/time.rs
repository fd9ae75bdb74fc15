//! Time stepping of `M u' + K u = F(u)`: IMEX schemes that treat transport
//! implicitly and reactions explicitly, an explicit SSP Runge–Kutta scheme,
//! and a fully implicit Newton variant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_source, assemble_source_jacobian, SystemOperators};
use crate::dg::{DgSpace, StateVector};
use crate::error::{Error, Result};
use crate::kinetics::{KineticConstants, N_SPECIES};
use crate::linalg::{build_solver, CsrMatrix, LinearSolver, SolverKind};

/// Largest `dt · ρ(M⁻¹K)` allowed for SSP-RK3 (its stability interval on the
/// negative real axis is about 2.51).
pub const RK3_STABILITY_LIMIT: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Backward Euler for transport, forward Euler for reactions.
    BeImex,
    /// Crank–Nicolson for transport, second-order Adams–Bashforth for reactions.
    CnImex,
    SspRk3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionTreatment {
    Explicit,
    /// Implicit reactions solved by Newton's method (BE or CN only).
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeStepperConfig {
    pub scheme: Scheme,
    /// s
    pub dt: f64,
    /// s
    pub t_end: f64,
    /// s
    pub output_interval: f64,
    /// Relative tolerance of every linear solve.
    pub tol: f64,
    pub reactions: ReactionTreatment,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_solver: SolverKind,
}

impl Default for TimeStepperConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::BeImex,
            dt: 0.01,
            t_end: 17.0,
            output_interval: 0.1,
            tol: 1e-10,
            reactions: ReactionTreatment::Explicit,
            newton_tol: 1e-9,
            newton_max_iter: 20,
            linear_solver: SolverKind::Gmres,
        }
    }
}

impl TimeStepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Parameter(format!("end time must be >= 0, got {}", self.t_end)));
        }
        if !(self.output_interval > 0.0) {
            return Err(Error::Parameter("output interval must be positive".into()));
        }
        if !(self.tol > 0.0 && self.newton_tol > 0.0) {
            return Err(Error::Parameter("solver tolerances must be positive".into()));
        }
        if self.reactions == ReactionTreatment::Newton && self.scheme == Scheme::SspRk3 {
            return Err(Error::Parameter("Newton reactions need an implicit scheme".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Steps between two outputs (at least one).
    pub fn output_stride(&self) -> usize {
        ((self.output_interval / self.dt).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub steps: usize,
    pub linear_iterations: usize,
    pub max_linear_residual: f64,
    pub newton_iterations: usize,
}

pub struct TimeStepper<'a> {
    pub space: &'a DgSpace,
    pub operators: &'a SystemOperators,
    pub kinetics: KineticConstants,
    pub config: TimeStepperConfig,
    pub time: f64,
    pub stats: StepStats,
    /// One solver per species for `M + θ dt K`.
    solvers: Vec<Box<dyn LinearSolver>>,
    previous_source: Option<Vec<f64>>,
}

fn species_blocks(space: &DgSpace, s: usize) -> Vec<std::ops::Range<usize>> {
    let base = s * space.n_per_species;
    (0..space.n_elements())
        .map(|e| {
            let r = space.local_range(e);
            base + r.start..base + r.end
        })
        .collect()
}

impl<'a> TimeStepper<'a> {
    pub fn new(
        space: &'a DgSpace,
        operators: &'a SystemOperators,
        kinetics: KineticConstants,
        config: TimeStepperConfig,
    ) -> Result<Self> {
        config.validate()?;
        kinetics.validate()?;
        let theta = match config.scheme {
            Scheme::BeImex => Some(1.0),
            Scheme::CnImex => Some(0.5),
            Scheme::SspRk3 => None,
        };
        let mut solvers = Vec::new();
        match theta {
            Some(theta) if config.reactions == ReactionTreatment::Explicit => {
                solvers = (0..N_SPECIES)
                    .into_par_iter()
                    .map(|s| {
                        let a = implicit_matrix(&operators.mass, &operators.operators[s], theta * config.dt);
                        build_solver(config.linear_solver, a, species_blocks(space, 0), config.tol)
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            Some(_) => {}
            None => {
                let rho = operators
                    .operators
                    .iter()
                    .map(|k| k.scaled_gershgorin(&operators.mass))
                    .fold(0.0, f64::max);
                let bound = RK3_STABILITY_LIMIT / rho;
                if config.dt > bound {
                    return Err(Error::Cfl { dt: config.dt, bound });
                }
            }
        }
        Ok(Self {
            space,
            operators,
            kinetics,
            config,
            time: 0.0,
            stats: StepStats::default(),
            solvers,
            previous_source: None,
        })
    }

    fn source(&self, u: &StateVector) -> Result<Vec<f64>> {
        assemble_source(self.space, &self.kinetics, u)
    }

    /// `M⁻¹ (F(u) − K u)`
    fn explicit_rate(&self, u: &StateVector) -> Result<StateVector> {
        let f = self.source(u)?;
        let ku = self.operators.apply(u);
        let n = self.space.n_per_species;
        let mut out = u.clone();
        for (i, o) in out.data.iter_mut().enumerate() {
            *o = (f[i] - ku.data[i]) / self.operators.mass[i % n];
        }
        Ok(out)
    }

    fn record(&mut self, stats: &[crate::linalg::SolveStats]) {
        for s in stats {
            self.stats.linear_iterations += s.iterations;
            self.stats.max_linear_residual = self.stats.max_linear_residual.max(s.relative_residual);
        }
    }

    fn solve_species(&mut self, rhs: &[f64], u: &mut StateVector) -> Result<()> {
        let n = self.space.n_per_species;
        let solvers = &self.solvers;
        let results: Vec<_> = u
            .data
            .par_chunks_mut(n)
            .zip(rhs.par_chunks(n))
            .enumerate()
            .map(|(s, (x, b))| solvers[s].solve(b, x))
            .collect::<Result<_>>()?;
        self.record(&results);
        Ok(())
    }

    fn step_imex(&mut self, u: &mut StateVector, theta: f64) -> Result<()> {
        let dt = self.config.dt;
        let n = self.space.n_per_species;
        let mass = &self.operators.mass;
        let f = self.source(u)?;
        let mut rhs: Vec<f64> = u.data.iter().enumerate().map(|(i, v)| mass[i % n] * v).collect();
        if theta < 1.0 {
            let ku = self.operators.apply(u);
            for (r, k) in rhs.iter_mut().zip(&ku.data) {
                *r -= (1.0 - theta) * dt * k;
            }
            // AB2 extrapolation of the source; forward Euler on the first step
            match &self.previous_source {
                Some(prev) => {
                    for ((r, fi), pi) in rhs.iter_mut().zip(&f).zip(prev) {
                        *r += dt * (1.5 * fi - 0.5 * pi);
                    }
                }
                None => {
                    for (r, fi) in rhs.iter_mut().zip(&f) {
                        *r += dt * fi;
                    }
                }
            }
            self.previous_source = Some(f);
        } else {
            for (r, fi) in rhs.iter_mut().zip(&f) {
                *r += dt * fi;
            }
        }
        self.solve_species(&rhs, u)
    }

    fn step_rk3(&mut self, u: &mut StateVector) -> Result<()> {
        let dt = self.config.dt;
        let l0 = self.explicit_rate(u)?;
        let mut u1 = u.clone();
        u1.data.iter_mut().zip(&l0.data).for_each(|(a, l)| *a += dt * l);
        let l1 = self.explicit_rate(&u1)?;
        let mut u2 = u.clone();
        for i in 0..u2.data.len() {
            u2.data[i] = 0.75 * u.data[i] + 0.25 * (u1.data[i] + dt * l1.data[i]);
        }
        let l2 = self.explicit_rate(&u2)?;
        for i in 0..u.data.len() {
            u.data[i] = u.data[i] / 3.0 + 2.0 / 3.0 * (u2.data[i] + dt * l2.data[i]);
        }
        Ok(())
    }

    /// θ-method with implicit reactions:
    /// `M(u − u⁰) + dt θ (K u − F(u)) + dt (1 − θ)(K u⁰ − F(u⁰)) = 0`.
    fn step_newton(&mut self, u: &mut StateVector, theta: f64) -> Result<()> {
        let dt = self.config.dt;
        let n = self.space.n_per_species;
        let ndof = self.space.n_dofs();
        let mass = &self.operators.mass;
        let u0 = u.clone();
        let mut explicit_part: Vec<f64> = u0.data.iter().enumerate().map(|(i, v)| -mass[i % n] * v).collect();
        if theta < 1.0 {
            let f0 = self.source(&u0)?;
            let k0 = self.operators.apply(&u0);
            for i in 0..ndof {
                explicit_part[i] += dt * (1.0 - theta) * (k0.data[i] - f0[i]);
            }
        }
        let transport = block_diagonal_operator(&self.operators.operators, n);
        let blocks: Vec<_> = (0..N_SPECIES).flat_map(|s| species_blocks(self.space, s)).collect();
        let scale = explicit_part.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let mut last = f64::INFINITY;
        for it in 0..self.config.newton_max_iter {
            let f = self.source(u)?;
            let ku = self.operators.apply(u);
            let g: Vec<f64> = (0..ndof)
                .map(|i| mass[i % n] * u.data[i] + explicit_part[i] + dt * theta * (ku.data[i] - f[i]))
                .collect();
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            last = gnorm / scale;
            if last <= self.config.newton_tol {
                self.stats.newton_iterations += it;
                return Ok(());
            }
            let jf = assemble_source_jacobian(self.space, &self.kinetics, u)?;
            let mut jac = transport.linear_combination(dt * theta, &jf, -dt * theta);
            let full_mass: Vec<f64> = (0..ndof).map(|i| mass[i % n]).collect();
            jac = jac.linear_combination(1.0, &CsrMatrix::identity_scaled(&full_mass), 1.0);
            let solver = build_solver(self.config.linear_solver, jac, blocks.clone(), self.config.tol)?;
            let mut delta = vec![0.0; ndof];
            let st = solver.solve(&g, &mut delta)?;
            self.record(&[st]);
            for (x, d) in u.data.iter_mut().zip(&delta) {
                *x -= d;
            }
        }
        Err(Error::Newton {
            iterations: self.config.newton_max_iter,
            residual: last,
        })
    }

    /// Advances `u` by one step of size `dt`.
    pub fn step(&mut self, u: &mut StateVector) -> Result<()> {
        if u.data.len() != self.space.n_dofs() {
            return Err(Error::Dimension {
                expected: self.space.n_dofs(),
                got: u.data.len(),
            });
        }
        let result = match (self.config.scheme, self.config.reactions) {
            (Scheme::BeImex, ReactionTreatment::Explicit) => self.step_imex(u, 1.0),
            (Scheme::CnImex, ReactionTreatment::Explicit) => self.step_imex(u, 0.5),
            (Scheme::BeImex, ReactionTreatment::Newton) => self.step_newton(u, 1.0),
            (Scheme::CnImex, ReactionTreatment::Newton) => self.step_newton(u, 0.5),
            (Scheme::SspRk3, _) => self.step_rk3(u),
        };
        let time = self.time + self.config.dt;
        result.map_err(|e| Error::Step {
            time,
            source: Box::new(e),
        })?;
        if !u.is_finite() {
            return Err(Error::Blowup { time });
        }
        self.time = time;
        self.stats.steps += 1;
        Ok(())
    }

    /// Integrates to `t_end`, calling `observer` at t = 0, every output
    /// interval and at the final time.
    pub fn run(
        &mut self,
        u: &mut StateVector,
        mut observer: impl FnMut(f64, &StateVector) -> Result<()>,
    ) -> Result<()> {
        let steps = self.config.n_steps();
        let stride = self.config.output_stride();
        observer(self.time, u)?;
        for k in 1..=steps {
            self.step(u)?;
            if k % stride == 0 || k == steps {
                observer(self.time, u)?;
            }
        }
        Ok(())
    }
}

/// `M + c K` for diagonal `M`.
fn implicit_matrix(mass: &[f64], k: &CsrMatrix, c: f64) -> CsrMatrix {
    CsrMatrix::identity_scaled(mass).linear_combination(1.0, k, c)
}

/// Places the per-species operators on the diagonal of a full-state matrix.
fn block_diagonal_operator(ops: &[CsrMatrix], n: usize) -> CsrMatrix {
    let mut trip = Vec::new();
    for (s, k) in ops.iter().enumerate() {
        for i in 0..k.nrows {
            for (j, v) in k.row(i) {
                trip.push((s * n + i, s * n + j, v));
            }
        }
    }
    let total = ops.len() * n;
    CsrMatrix::from_triplets(total, total, trip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_disk_mesh, CellGeometry};
    use crate::kinetics::lumped_totals;
    use crate::model::{build_initial_state, InitialConditions, ModelParameters};

    struct Fixture {
        space: DgSpace,
        ops: SystemOperators,
        u0: StateVector,
    }

    fn fixture(h: f64) -> Fixture {
        let g = CellGeometry::default();
        let space = DgSpace::new(build_disk_mesh(&g, h, 1).unwrap());
        let params = ModelParameters::default();
        let ops = SystemOperators::for_model(&space, &params, &g).unwrap();
        let u0 = build_initial_state(&space, &InitialConditions::default(), &g).unwrap();
        Fixture { space, ops, u0 }
    }

    fn totals(space: &DgSpace, u: &StateVector) -> [f64; 3] {
        let mut m = [0.0; N_SPECIES];
        for (s, v) in m.iter_mut().enumerate() {
            *v = space.integrate_block(u.species(s), None);
        }
        lumped_totals(&m)
    }

    #[test]
    fn config_validation() {
        let mut c = TimeStepperConfig::default();
        c.dt = 0.0;
        assert!(c.validate().is_err());
        c.dt = 0.01;
        c.scheme = Scheme::SspRk3;
        c.reactions = ReactionTreatment::Newton;
        assert!(c.validate().is_err());
        let d = TimeStepperConfig::default();
        assert_eq!(d.n_steps(), 1700);
        assert_eq!(d.output_stride(), 10);
    }

    #[test]
    fn rk3_rejects_large_step() {
        let f = fixture(2.0);
        let mut c = TimeStepperConfig::default();
        c.scheme = Scheme::SspRk3;
        c.dt = 1.0;
        assert!(matches!(
            TimeStepper::new(&f.space, &f.ops, KineticConstants::default(), c),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn zero_state_stays_zero() {
        let f = fixture(2.0);
        for scheme in [Scheme::BeImex, Scheme::CnImex] {
            let mut c = TimeStepperConfig::default();
            c.scheme = scheme;
            let mut st = TimeStepper::new(&f.space, &f.ops, KineticConstants::default(), c).unwrap();
            let mut u = StateVector::zeros(&f.space);
            for _ in 0..5 {
                st.step(&mut u).unwrap();
            }
            assert!(u.data.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn totals_are_conserved_by_every_scheme() {
        let f = fixture(2.0);
        let before = totals(&f.space, &f.u0);
        let cases = [
            (Scheme::BeImex, ReactionTreatment::Explicit, 0.01, SolverKind::Gmres),
            (Scheme::CnImex, ReactionTreatment::Explicit, 0.01, SolverKind::Direct),
            (Scheme::SspRk3, ReactionTreatment::Explicit, 1e-4, SolverKind::Gmres),
            (Scheme::BeImex, ReactionTreatment::Newton, 0.02, SolverKind::Direct),
        ];
        for (scheme, reactions, dt, linear_solver) in cases {
            let c = TimeStepperConfig {
                scheme,
                reactions,
                dt,
                linear_solver,
                ..Default::default()
            };
            let mut st = TimeStepper::new(&f.space, &f.ops, KineticConstants::default(), c).unwrap();
            let mut u = f.u0.clone();
            for _ in 0..20 {
                st.step(&mut u).unwrap();
            }
            let after = totals(&f.space, &u);
            for k in 0..3 {
                assert!(
                    (after[k] - before[k]).abs() <= 1e-8 * before[k],
                    "{scheme:?} {reactions:?}: {k} {} {}",
                    before[k],
                    after[k]
                );
            }
        }
    }

    #[test]
    fn newton_and_imex_agree_for_small_steps() {
        let f = fixture(2.0);
        let run = |reactions| {
            let c = TimeStepperConfig {
                reactions,
                dt: 0.001,
                t_end: 0.05,
                linear_solver: SolverKind::Direct,
                ..Default::default()
            };
            let mut st = TimeStepper::new(&f.space, &f.ops, KineticConstants::default(), c).unwrap();
            let mut u = f.u0.clone();
            st.run(&mut u, |_, _| Ok(())).unwrap();
            u
        };
        let a = run(ReactionTreatment::Explicit);
        let b = run(ReactionTreatment::Newton);
        let diff = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-3, "{diff}");
    }

    #[test]
    fn observer_sees_output_times() {
        let f = fixture(2.0);
        let c = TimeStepperConfig {
            dt: 0.01,
            t_end: 0.1,
            output_interval: 0.05,
            ..Default::default()
        };
        let mut st = TimeStepper::new(&f.space, &f.ops, KineticConstants::default(), c).unwrap();
        let mut times = Vec::new();
        let mut u = f.u0.clone();
        st.run(&mut u, |t, _| {
            times.push(t);
            Ok(())
        })
        .unwrap();
        assert_eq!(times.len(), 3);
        assert!((times[2] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn scalar_decay_matches_closed_form() {
        // only Tr -> Rt + T is active, with K = 0: Tr' = -k₋₁ Tr
        let g = CellGeometry::default();
        let space = DgSpace::new(build_disk_mesh(&g, 3.0, 1).unwrap());
        let transports = (0..N_SPECIES)
            .map(|_| crate::assembly::SpeciesTransport::uniform(&space, 0.0, 0.0, 10.0))
            .collect();
        let ops = SystemOperators::new(&space, transports).unwrap();
        let kin = KineticConstants {
            q_cat1: 0.0,
            q_cat2: 0.0,
            k1: 0.0,
            k2: 0.0,
            k3: 0.0,
            ..Default::default()
        };
        let lambda = kin.k_minus1;
        let dt = 0.1;
        let mut u0 = StateVector::zeros(&space);
        u0.species_mut(4).copy_from_slice(&space.piecewise_constant(|_| 2.0));
        for (reactions, factor) in [
            (ReactionTreatment::Newton, 1.0 / (1.0 + lambda * dt)),
            (ReactionTreatment::Explicit, 1.0 - lambda * dt),
        ] {
            let c = TimeStepperConfig {
                dt,
                reactions,
                linear_solver: SolverKind::Direct,
                newton_tol: 1e-13,
                ..Default::default()
            };
            let mut st = TimeStepper::new(&space, &ops, kin.clone(), c).unwrap();
            let mut u = u0.clone();
            st.step(&mut u).unwrap();
            for (a, b) in u.species(4).iter().zip(u0.species(4)) {
                assert!((a - factor * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_state_without_reactions_is_steady() {
        let f = fixture(2.0);
        let kin = KineticConstants {
            q_cat1: 0.0,
            q_cat2: 0.0,
            k1: 0.0,
            k_minus1: 0.0,
            k2: 0.0,
            k3: 0.0,
            ..Default::default()
        };
        let mut u = StateVector::zeros(&f.space);
        // species without advection: Rt (p = 0) and Rd (p > 0, equal on both sides)
        u.species_mut(0).copy_from_slice(&f.space.piecewise_constant(|_| 3.0));
        u.species_mut(1).copy_from_slice(&f.space.piecewise_constant(|_| 1.5));
        let before = u.clone();
        let c = TimeStepperConfig {
            linear_solver: SolverKind::Direct,
            ..Default::default()
        };
        let mut st = TimeStepper::new(&f.space, &f.ops, kin, c).unwrap();
        st.step(&mut u).unwrap();
        for (a, b) in u.data.iter().zip(&before.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn blowup_is_reported() {
        let f = fixture(2.0);
        let mut st = TimeStepper::new(&f.space, &f.ops, KineticConstants::default(), TimeStepperConfig::default()).unwrap();
        let mut u = f.u0.clone();
        u.data[0] = f64::INFINITY;
        assert!(st.step(&mut u).is_err());
    }
}
