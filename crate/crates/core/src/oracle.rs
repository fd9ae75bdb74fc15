//! Well-mixed limit of the model: one average concentration per species and
//! compartment, coupled by membrane exchange. Used as an independent check
//! of the PDE solver at large diffusivity.

use crate::error::{Error, Result};
use crate::geometry::CellGeometry;
use crate::kinetics::{Compartment, KineticConstants, N_SPECIES};
use crate::model::{InitialConditions, Profile, SpeciesValues};
use crate::output::{Sample, TimeSeries};

/// Above this concentration (μM) the integration is considered unstable.
const BLOWUP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompartmentState {
    pub cytoplasm: [f64; N_SPECIES],
    pub nucleus: [f64; N_SPECIES],
}

impl CompartmentState {
    /// Compartment averages of the initial data on the exact disk.
    pub fn from_initial(ics: &InitialConditions, geometry: &CellGeometry) -> Self {
        let mut cytoplasm = [0.0; N_SPECIES];
        let mut nucleus = [0.0; N_SPECIES];
        let r = geometry.cell_radius;
        for (s, init) in ics.species.iter().enumerate() {
            let (target, area) = match init.compartment {
                Compartment::Cytoplasm => (&mut cytoplasm, geometry.cytoplasm_area()),
                Compartment::Nucleus => (&mut nucleus, geometry.nucleus_area()),
            };
            target[s] = match init.profile {
                Profile::Uniform => init.amplitude,
                Profile::PeripheralBand { width } => {
                    let inner = r - width;
                    init.amplitude * std::f64::consts::PI * (r * r - inner * inner) / area
                }
            };
        }
        Self { cytoplasm, nucleus }
    }

    fn axpy(&self, a: f64, other: &Self) -> Self {
        Self {
            cytoplasm: std::array::from_fn(|i| self.cytoplasm[i] + a * other.cytoplasm[i]),
            nucleus: std::array::from_fn(|i| self.nucleus[i] + a * other.nucleus[i]),
        }
    }

    fn is_sane(&self) -> bool {
        self.cytoplasm
            .iter()
            .chain(&self.nucleus)
            .all(|v| v.is_finite() && v.abs() < BLOWUP)
    }
}

#[derive(Debug, Clone)]
pub struct CompartmentModel {
    pub kinetics: KineticConstants,
    pub permeability: SpeciesValues,
    pub geometry: CellGeometry,
}

impl CompartmentModel {
    /// Time derivative of the averages.
    pub fn rhs(&self, u: &CompartmentState) -> Result<CompartmentState> {
        let fc = self.kinetics.source_vector(&u.cytoplasm, Compartment::Cytoplasm)?;
        let fn_ = self.kinetics.source_vector(&u.nucleus, Compartment::Nucleus)?;
        let gamma = self.geometry.envelope_length();
        let vc = self.geometry.cytoplasm_area();
        let vn = self.geometry.nucleus_area();
        let p = self.permeability.to_array();
        let mut out = CompartmentState {
            cytoplasm: fc,
            nucleus: fn_,
        };
        for s in 0..N_SPECIES {
            // flux into the nucleus, μM·μm/s
            let j = p[s] * (u.cytoplasm[s] - u.nucleus[s]);
            out.cytoplasm[s] -= j * gamma / vc;
            out.nucleus[s] += j * gamma / vn;
        }
        Ok(out)
    }

    pub fn rk4_step(&self, u: &CompartmentState, dt: f64) -> Result<CompartmentState> {
        let k1 = self.rhs(u)?;
        let k2 = self.rhs(&u.axpy(0.5 * dt, &k1))?;
        let k3 = self.rhs(&u.axpy(0.5 * dt, &k2))?;
        let k4 = self.rhs(&u.axpy(dt, &k3))?;
        Ok(u
            .axpy(dt / 6.0, &k1)
            .axpy(dt / 3.0, &k2)
            .axpy(dt / 3.0, &k3)
            .axpy(dt / 6.0, &k4))
    }

    pub fn sample(&self, t: f64, u: &CompartmentState) -> Sample {
        let areas = [self.geometry.cytoplasm_area(), self.geometry.nucleus_area()];
        Sample {
            t,
            cytoplasm: u.cytoplasm.map(|v| v * areas[0]),
            nucleus: u.nucleus.map(|v| v * areas[1]),
            areas,
        }
    }

    /// Classical RK4 from 0 to `t_end`, recording every `output_interval`.
    pub fn integrate(&self, u0: CompartmentState, dt: f64, t_end: f64, output_interval: f64) -> Result<TimeSeries> {
        if !(dt > 0.0) || !(t_end >= 0.0) {
            return Err(Error::Parameter(format!("invalid oracle step {dt} or end time {t_end}")));
        }
        let steps = (t_end / dt).round() as usize;
        let stride = ((output_interval / dt).round() as usize).max(1);
        let mut series = TimeSeries::default();
        let mut u = u0;
        series.push(self.sample(0.0, &u));
        for k in 1..=steps {
            let t = k as f64 * dt;
            u = self.rk4_step(&u, dt)?;
            if !u.is_sane() {
                return Err(Error::Unstable { time: t });
            }
            if k % stride == 0 || k == steps {
                series.push(self.sample(t, &u));
            }
        }
        Ok(series)
    }
}
