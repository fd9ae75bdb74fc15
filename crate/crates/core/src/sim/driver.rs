//! Simulation driver and the experiment presets built on it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::assembly::SystemOperators;
use crate::dg::{DgSpace, StateVector};
use crate::error::{Error, Result};
use crate::geometry::build_disk_mesh_with_features;
use crate::kinetics::{Compartment, Species, N_SPECIES};
use crate::model::build_initial_state;
use crate::oracle::{CompartmentModel, CompartmentState};
use crate::output::{snapshot_csv, Sample, TimeSeries};
use crate::sim::config::SimConfig;
use crate::time::{StepStats, TimeStepper};

/// Result of one PDE run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub final_state: StateVector,
    pub stats: StepStats,
}

/// Mesh, space and operators of a configuration, ready to integrate.
pub struct Problem {
    pub config: SimConfig,
    pub space: DgSpace,
    pub operators: SystemOperators,
    pub initial: StateVector,
}

impl Problem {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let geometry = config.geometry;
        let params = &config.model;
        let ics = params.initial_conditions();
        let mesh = build_disk_mesh_with_features(
            &geometry,
            config.mesh.target_h,
            config.mesh.degree,
            &ics.feature_radii(&geometry),
        )?;
        let space = DgSpace::new(mesh);
        let operators = SystemOperators::for_model(&space, params, &geometry)?;
        let initial = build_initial_state(&space, &ics, &geometry)?;
        info!(
            "mesh: {} elements, {} dofs per species, h_max {:.3}",
            space.n_elements(),
            space.n_per_species,
            space.mesh.max_diameter()
        );
        Ok(Self {
            config: config.clone(),
            space,
            operators,
            initial,
        })
    }

    /// Integrates to `t_end`; writes CSV and snapshots when `out_dir` is set.
    pub fn run(&self, out_dir: Option<&Path>, tag: &str) -> Result<RunOutput> {
        let cfg = &self.config;
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
            if cfg.output.mesh_dump {
                self.space.mesh.write_text(&dir.join("mesh.txt"))?;
            }
        }
        let mut stepper = TimeStepper::new(&self.space, &self.operators, cfg.model.kinetics.clone(), cfg.time.clone())?;
        let mut u = self.initial.clone();
        let mut series = TimeSeries::default();
        let dt = cfg.time.dt;
        let steps = cfg.time.n_steps();
        let stride = cfg.time.output_stride();
        let mut pending: Vec<f64> = cfg.output.snapshot_times.clone();
        pending.sort_by(f64::total_cmp);

        let mut emit = |k: usize, t: f64, u: &StateVector, series: &mut TimeSeries| -> Result<()> {
            if k % stride == 0 || k == steps {
                series.push(Sample::from_state(&self.space, t, u));
            }
            while let Some(&ts) = pending.first() {
                if ts > t + 0.5 * dt && k < steps {
                    break;
                }
                pending.remove(0);
                if let Some(dir) = out_dir {
                    let name = format!("snapshot{tag}_t{t:.3}.csv");
                    std::fs::write(dir.join(name), snapshot_csv(&self.space, u))?;
                }
            }
            Ok(())
        };

        emit(0, 0.0, &u, &mut series)?;
        for k in 1..=steps {
            stepper.step(&mut u)?;
            emit(k, stepper.time, &u, &mut series)?;
        }
        if let Some(dir) = out_dir {
            series.write_csv(&dir.join(format!("timeseries{tag}.csv")))?;
        }
        let drift = series.max_abs_drift();
        info!(
            "run{tag}: {} steps, {} linear iterations, max drift ran {:.2e} cargo {:.2e} receptor {:.2e}",
            stepper.stats.steps, stepper.stats.linear_iterations, drift[0], drift[1], drift[2]
        );
        Ok(RunOutput {
            series,
            final_state: u,
            stats: stepper.stats.clone(),
        })
    }
}

pub fn run_simulation(config: &SimConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), config.to_toml())?;
    }
    Problem::new(config)?.run(out_dir, "")
}

/// Nuclear cargo (free and receptor-bound) average concentration, μM.
pub fn nuclear_cargo(sample: &Sample) -> f64 {
    sample.average(Species::C, Compartment::Nucleus) + sample.average(Species::Tc, Compartment::Nucleus)
}

/// Nuclear cargo mass, μM·μm².
pub fn nuclear_cargo_mass(sample: &Sample) -> f64 {
    sample.mass(Species::C, Compartment::Nucleus) + sample.mass(Species::Tc, Compartment::Nucleus)
}

/// Central-difference slope of nuclear cargo mass at time `t`.
pub fn accumulation_slope(series: &TimeSeries, t: f64) -> Option<f64> {
    let s = &series.samples;
    let i = s.iter().position(|x| x.t >= t - 1e-9)?;
    if i == 0 || i + 1 >= s.len() {
        return None;
    }
    Some((nuclear_cargo_mass(&s[i + 1]) - nuclear_cargo_mass(&s[i - 1])) / (s[i + 1].t - s[i - 1].t))
}

/// Largest decrease of nuclear cargo mass between consecutive samples after
/// `t_start` (zero when nondecreasing).
pub fn max_accumulation_dip(series: &TimeSeries, t_start: f64) -> f64 {
    series
        .samples
        .windows(2)
        .filter(|w| w[0].t > t_start)
        .map(|w| nuclear_cargo_mass(&w[0]) - nuclear_cargo_mass(&w[1]))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct NocodazoleReport {
    pub with_advection: TimeSeries,
    pub without_advection: TimeSeries,
    /// Nuclear cargo concentration at t_end, advection on / off.
    pub ratio: f64,
    pub slope_on: Option<f64>,
    pub slope_off: Option<f64>,
    /// (speed, ratio) over the configured sweep.
    pub sweep: Vec<(f64, f64)>,
}

impl NocodazoleReport {
    pub fn slope_change(&self) -> Option<f64> {
        let (on, off) = (self.slope_on?, self.slope_off?);
        Some((on - off).abs() / off.abs().max(on.abs()).max(f64::MIN_POSITIVE))
    }

    pub fn sweep_monotone(&self) -> bool {
        self.sweep.windows(2).all(|w| w[1].1 >= w[0].1)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let last_on = self.with_advection.last().expect("nonempty run");
        let last_off = self.without_advection.last().expect("nonempty run");
        writeln!(out, "# microtubule transport comparison at t = {:.3} s", last_on.t).unwrap();
        writeln!(out, "nuclear_cargo_on_uM = {:.6}", nuclear_cargo(last_on)).unwrap();
        writeln!(out, "nuclear_cargo_off_uM = {:.6}", nuclear_cargo(last_off)).unwrap();
        writeln!(out, "ratio_on_off = {:.6}", self.ratio).unwrap();
        if let (Some(a), Some(b)) = (self.slope_on, self.slope_off) {
            writeln!(out, "accumulation_slope_on = {a:.6}").unwrap();
            writeln!(out, "accumulation_slope_off = {b:.6}").unwrap();
        }
        for (v, r) in &self.sweep {
            writeln!(out, "sweep speed = {v} ratio = {r:.6}").unwrap();
        }
        writeln!(out, "sweep_monotone = {}", self.sweep_monotone()).unwrap();
        out
    }
}

fn with_advection(config: &SimConfig, on: bool, speed: Option<f64>) -> SimConfig {
    let mut c = config.clone();
    c.model.advection = on;
    if let Some(v) = speed {
        c.model.advection_speed = v;
    }
    c
}

/// Runs the model with and without microtubule transport, identical
/// otherwise, plus the configured speed sweep.
pub fn run_nocodazole_experiment(config: &SimConfig, out_dir: Option<&Path>) -> Result<NocodazoleReport> {
    let dir = |name: &str| out_dir.map(|d| d.join(name));
    let on_cfg = with_advection(config, true, None);
    let off_cfg = with_advection(config, false, None);
    let (on, off) = rayon::join(
        || Problem::new(&on_cfg)?.run(dir("advection_on").as_deref(), ""),
        || Problem::new(&off_cfg)?.run(dir("advection_off").as_deref(), ""),
    );
    let (on, off) = (on?, off?);
    let off_final = nuclear_cargo(off.series.last().expect("nonempty run"));
    let ratio_of = |series: &TimeSeries| nuclear_cargo(series.last().expect("nonempty run")) / off_final;

    let mut sweep = Vec::new();
    for &v in &config.experiment.speed_sweep {
        let ratio = if v == config.model.advection_speed {
            ratio_of(&on.series)
        } else {
            let run = Problem::new(&with_advection(config, true, Some(v)))?.run(None, "")?;
            ratio_of(&run.series)
        };
        sweep.push((v, ratio));
    }

    let t = config.experiment.slope_time;
    let report = NocodazoleReport {
        ratio: ratio_of(&on.series),
        slope_on: accumulation_slope(&on.series, t),
        slope_off: accumulation_slope(&off.series, t),
        with_advection: on.series,
        without_advection: off.series,
        sweep,
    };
    if let Some(d) = out_dir {
        std::fs::write(d.join("nocodazole_report.txt"), report.to_text())?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub pde: TimeSeries,
    pub ode: TimeSeries,
    /// Relative deviation per species and compartment at the final time.
    pub final_deviation: [[f64; N_SPECIES]; 2],
    /// Largest deviation over all species, compartments and output times.
    pub max_deviation: f64,
}

impl OracleReport {
    pub fn max_final_deviation(&self) -> f64 {
        self.final_deviation.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("species,deviation_cyto,deviation_nuc\n");
        for s in Species::ALL {
            let i = s.index();
            writeln!(out, "{},{:.6e},{:.6e}", s.name(), self.final_deviation[0][i], self.final_deviation[1][i]).unwrap();
        }
        writeln!(out, "# max deviation at final time {:.6e}", self.max_final_deviation()).unwrap();
        writeln!(out, "# max deviation over all times {:.6e}", self.max_deviation).unwrap();
        out
    }
}

fn deviations(pde: &Sample, ode: &Sample, floor: f64) -> [[f64; N_SPECIES]; 2] {
    let mut out = [[0.0; N_SPECIES]; 2];
    for (k, c) in [Compartment::Cytoplasm, Compartment::Nucleus].into_iter().enumerate() {
        for s in Species::ALL {
            let a = pde.average(s, c);
            let b = ode.average(s, c);
            out[k][s.index()] = (a - b).abs() / b.abs().max(floor);
        }
    }
    out
}

/// Compares PDE compartment averages, with every diffusivity multiplied by
/// `diffusion_scale`, against the well-mixed compartment model.
pub fn run_oracle_comparison(config: &SimConfig, diffusion_scale: f64, out_dir: Option<&Path>) -> Result<OracleReport> {
    if !(diffusion_scale >= 1.0) {
        return Err(Error::Parameter(format!("diffusion scale must be >= 1, got {diffusion_scale}")));
    }
    let mut cfg = config.clone();
    cfg.model.diffusivity = cfg.model.diffusivity.scaled(diffusion_scale);
    if cfg.model.advection {
        warn!("advection is on: the compartment model has no microtubule transport, expect larger deviations");
    }
    let pde = Problem::new(&cfg)?.run(out_dir.map(|d| d.join("pde")).as_deref(), "")?;

    let model = CompartmentModel {
        kinetics: cfg.model.kinetics.clone(),
        permeability: cfg.model.permeability,
        geometry: cfg.geometry,
    };
    let u0 = CompartmentState::from_initial(&cfg.model.initial_conditions(), &cfg.geometry);
    let ode = model.integrate(u0, cfg.experiment.oracle_dt, cfg.time.t_end, cfg.time.output_interval)?;
    if let Some(d) = out_dir {
        let path: PathBuf = d.join("oracle");
        std::fs::create_dir_all(&path)?;
        ode.write_csv(&path.join("timeseries.csv"))?;
    }

    let floor = cfg.experiment.oracle_floor;
    let mut max_deviation = 0.0f64;
    for (a, b) in pde.series.samples.iter().zip(&ode.samples) {
        if (a.t - b.t).abs() > 1e-9 {
            return Err(Error::Parameter(format!("output times differ: {} vs {}", a.t, b.t)));
        }
        max_deviation = deviations(a, b, floor).iter().flatten().fold(max_deviation, |m, &v| m.max(v));
    }
    let final_deviation = deviations(
        pde.series.last().expect("nonempty run"),
        ode.last().expect("nonempty run"),
        floor,
    );
    let report = OracleReport {
        pde: pde.series,
        ode,
        final_deviation,
        max_deviation,
    };
    if let Some(d) = out_dir {
        std::fs::write(d.join("oracle_report.csv"), report.to_text())?;
    }
    Ok(report)
}
