//! Parameters of the Ran import model, the microtubule advection field and
//! the resting-cell initial state.

use serde::{Deserialize, Serialize};

use crate::dg::{DgSpace, StateVector};
use crate::error::{Error, Result};
use crate::geometry::{CellGeometry, Point};
use crate::kinetics::{Compartment, KineticConstants, Species, N_SPECIES};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// One value per species, keyed by species name in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesValues {
    #[serde(rename = "Rt")]
    pub rt: f64,
    #[serde(rename = "Rd")]
    pub rd: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "Tr")]
    pub tr: f64,
    #[serde(rename = "Tc")]
    pub tc: f64,
}

impl SpeciesValues {
    pub const fn from_array([rt, rd, c, t, tr, tc]: [f64; N_SPECIES]) -> Self {
        Self { rt, rd, c, t, tr, tc }
    }

    pub fn to_array(self) -> [f64; N_SPECIES] {
        [self.rt, self.rd, self.c, self.t, self.tr, self.tc]
    }

    pub fn get(&self, s: Species) -> f64 {
        self.to_array()[s.index()]
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * factor))
    }
}

pub const DEFAULT_DIFFUSIVITY: SpeciesValues =
    SpeciesValues::from_array([22.0, 20.0, 18.2, 14.0, 14.0, 12.4]);
pub const DEFAULT_PERMEABILITY: SpeciesValues =
    SpeciesValues::from_array([0.0, 3.73, 0.0, 1.87, 1.87, 1.87]);
pub const DEFAULT_INITIAL: SpeciesValues = SpeciesValues::from_array([3.0, 3.0, 8.0, 4.0, 0.0, 0.0]);

/// Inward transport of the cargo·receptor complex along microtubules,
/// modelled as a radial velocity field that vanishes near both membranes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvectionConfig {
    pub enabled: bool,
    /// μm/s
    pub speed: f64,
    /// Width of the zero band next to each membrane, μm.
    pub margin: f64,
    /// Width of the smooth ramp from 0 to full speed, μm.
    pub ramp: f64,
}

impl Default for AdvectionConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            speed: 1.0,
            margin: 0.5,
            ramp: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvectionField {
    pub config: AdvectionConfig,
    pub geometry: CellGeometry,
}

/// C² ramp from 0 at t <= 0 to 1 at t >= 1, and its derivative.
fn smootherstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        let v = t * t * t * (t * (6.0 * t - 15.0) + 10.0);
        let d = 30.0 * t * t * (t - 1.0) * (t - 1.0);
        (v, d)
    }
}

impl AdvectionField {
    pub fn new(config: AdvectionConfig, geometry: CellGeometry) -> Result<Self> {
        let span = geometry.cell_radius - geometry.nucleus_radius;
        if config.margin < 0.0 || config.ramp <= 0.0 || 2.0 * (config.margin + config.ramp) > span {
            return Err(Error::Parameter(format!(
                "advection margin {} and ramp {} do not fit in a cytoplasm of width {span}",
                config.margin, config.ramp
            )));
        }
        if !(config.speed >= 0.0 && config.speed.is_finite()) {
            return Err(Error::Parameter(format!("advection speed must be >= 0, got {}", config.speed)));
        }
        Ok(Self { config, geometry })
    }

    /// Cutoff χ(r) and dχ/dr.
    pub fn cutoff(&self, r: f64) -> (f64, f64) {
        let c = &self.config;
        let inner = self.geometry.nucleus_radius + c.margin;
        let outer = self.geometry.cell_radius - c.margin;
        let (up, dup) = smootherstep((r - inner) / c.ramp);
        let (down, ddown) = smootherstep((outer - r) / c.ramp);
        (up * down, (dup * down - up * ddown) / c.ramp)
    }

    /// Velocity of the transported species (μm/s); zero when disabled.
    pub fn velocity(&self, x: Point) -> [f64; 2] {
        if !self.config.enabled {
            return [0.0, 0.0];
        }
        let c = self.geometry.center;
        let d = [x[0] - c[0], x[1] - c[1]];
        let r = d[0].hypot(d[1]);
        if r <= self.geometry.nucleus_radius {
            return [0.0, 0.0];
        }
        let (chi, _) = self.cutoff(r);
        let s = -self.config.speed * chi / r;
        [s * d[0], s * d[1]]
    }

    /// ∇·b of the transported species' velocity.
    pub fn divergence(&self, x: Point) -> f64 {
        if !self.config.enabled {
            return 0.0;
        }
        let r = self.geometry.radius_of(x);
        if r <= self.geometry.nucleus_radius {
            return 0.0;
        }
        // b = -v χ(r) e_r  =>  ∇·b = -v (χ' + χ/r)
        let (chi, dchi) = self.cutoff(r);
        -self.config.speed * (dchi + chi / r)
    }

    pub fn is_transported(species: usize) -> bool {
        species == Species::Tc.index()
    }

    pub fn for_species(&self, species: usize, x: Point) -> [f64; 2] {
        if Self::is_transported(species) {
            self.velocity(x)
        } else {
            [0.0, 0.0]
        }
    }
}

/// Dynamic viscosity of water in Pa·s (Vogel correlation).
pub fn water_viscosity(temperature: f64) -> f64 {
    2.414e-5 * 10f64.powf(247.8 / (temperature - 140.0))
}

/// Stokes–Einstein diffusivity `k_B T / (6π η R_s)` in μm²/s for a Stokes
/// radius in nm and a medium `viscosity_ratio` times more viscous than water.
pub fn stokes_einstein_diffusivity(stokes_radius_nm: f64, viscosity_ratio: f64, temperature: f64) -> Result<f64> {
    if !(stokes_radius_nm > 0.0) {
        return Err(Error::Parameter(format!("Stokes radius must be positive, got {stokes_radius_nm}")));
    }
    if !(viscosity_ratio > 0.0) || !(temperature > 140.0) {
        return Err(Error::Parameter("viscosity ratio and temperature must be positive".into()));
    }
    let eta = water_viscosity(temperature) * viscosity_ratio;
    let d = BOLTZMANN * temperature / (6.0 * std::f64::consts::PI * eta * stokes_radius_nm * 1e-9);
    Ok(d * 1e12)
}

/// Stokes radius (nm) giving diffusivity `d` (μm²/s).
pub fn stokes_radius_for(d: f64, viscosity_ratio: f64, temperature: f64) -> Result<f64> {
    Ok(stokes_einstein_diffusivity(1.0, viscosity_ratio, temperature)? / d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Uniform,
    /// Band `r ∈ [r_cell − width, r_cell]` next to the plasma membrane.
    PeripheralBand { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesInitial {
    pub compartment: Compartment,
    pub profile: Profile,
    /// μM
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub species: [SpeciesInitial; N_SPECIES],
}

impl InitialConditions {
    /// Cytoplasmic amplitudes with cargo confined to a peripheral band; the
    /// nucleus starts empty.
    pub fn resting_cell(amplitudes: SpeciesValues, cargo_band_width: f64) -> Self {
        let a = amplitudes.to_array();
        let species = std::array::from_fn(|i| SpeciesInitial {
            compartment: Compartment::Cytoplasm,
            profile: if i == Species::C.index() {
                Profile::PeripheralBand { width: cargo_band_width }
            } else {
                Profile::Uniform
            },
            amplitude: a[i],
        });
        Self { species }
    }

    /// Radii where initial data jumps; the mesh should resolve them.
    pub fn feature_radii(&self, geometry: &CellGeometry) -> Vec<f64> {
        self.species
            .iter()
            .filter_map(|s| match s.profile {
                Profile::PeripheralBand { width } => Some(geometry.cell_radius - width),
                Profile::Uniform => None,
            })
            .collect()
    }
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self::resting_cell(DEFAULT_INITIAL, 2.0)
    }
}

/// Projects the initial data. Profiles are evaluated per element (by
/// centroid radius), so band edges that coincide with mesh rings are
/// represented exactly.
pub fn build_initial_state(space: &DgSpace, ics: &InitialConditions, geometry: &CellGeometry) -> Result<StateVector> {
    let mut state = StateVector::zeros(space);
    for (s, init) in ics.species.iter().enumerate() {
        if let Profile::PeripheralBand { width } = init.profile {
            let span = geometry.cell_radius - geometry.nucleus_radius;
            let inside_compartment = match init.compartment {
                Compartment::Cytoplasm => width > 0.0 && width < span,
                Compartment::Nucleus => false,
            };
            if !inside_compartment {
                return Err(Error::Parameter(format!(
                    "peripheral band of width {width} for {} extends outside the cytoplasm",
                    Species::ALL[s].name()
                )));
            }
        }
        let block = space.piecewise_constant(|e| {
            if space.compartment(e) != init.compartment {
                return 0.0;
            }
            match init.profile {
                Profile::Uniform => init.amplitude,
                Profile::PeripheralBand { width } => {
                    let r = geometry.radius_of(space.mesh.centroid(e));
                    if r >= geometry.cell_radius - width {
                        init.amplitude
                    } else {
                        0.0
                    }
                }
            }
        });
        state.species_mut(s).copy_from_slice(&block);
    }
    Ok(state)
}

/// Everything the spatial operator and the reaction source need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParameters {
    /// μm²/s, identical in both compartments.
    pub diffusivity: SpeciesValues,
    /// μm/s across the nuclear envelope.
    pub permeability: SpeciesValues,
    pub kinetics: KineticConstants,
    /// Microtubule transport of the cargo complex on or off.
    pub advection: bool,
    /// μm/s
    pub advection_speed: f64,
    /// μm
    pub advection_margin: f64,
    /// μm
    pub advection_ramp: f64,
    /// μM, cytoplasm at rest.
    pub initial: SpeciesValues,
    /// μm
    pub cargo_band_width: f64,
    /// Interior-penalty constant C_σ.
    pub penalty: f64,
    /// Optional diffusivity multiplier in a band next to the plasma membrane.
    pub membrane_diffusivity_factor: f64,
    /// μm
    pub membrane_band_width: f64,
}

impl Default for ModelParameters {
    fn default() -> Self {
        Self {
            diffusivity: DEFAULT_DIFFUSIVITY,
            permeability: DEFAULT_PERMEABILITY,
            kinetics: KineticConstants::default(),
            advection: true,
            advection_speed: 1.0,
            advection_margin: 0.5,
            advection_ramp: 0.5,
            initial: DEFAULT_INITIAL,
            cargo_band_width: 2.0,
            penalty: 10.0,
            membrane_diffusivity_factor: 1.0,
            membrane_band_width: 1.0,
        }
    }
}

impl ModelParameters {
    pub fn validate(&self) -> Result<()> {
        self.kinetics.validate()?;
        for s in Species::ALL {
            let d = self.diffusivity.get(s);
            let p = self.permeability.get(s);
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Parameter(format!("diffusivity of {} must be positive, got {d}", s.name())));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::Parameter(format!("permeability of {} must be >= 0, got {p}", s.name())));
            }
        }
        if !(self.penalty > 0.0) {
            return Err(Error::Parameter("penalty constant must be positive".into()));
        }
        if !(self.membrane_diffusivity_factor > 0.0) {
            return Err(Error::Parameter("membrane diffusivity factor must be positive".into()));
        }
        Ok(())
    }

    pub fn advection_config(&self) -> AdvectionConfig {
        AdvectionConfig {
            enabled: self.advection,
            speed: self.advection_speed,
            margin: self.advection_margin,
            ramp: self.advection_ramp,
        }
    }

    pub fn initial_conditions(&self) -> InitialConditions {
        InitialConditions::resting_cell(self.initial, self.cargo_band_width)
    }

    /// Per-element diffusivity multiplier.
    pub fn diffusivity_scale(&self, geometry: &CellGeometry, centroid: Point) -> f64 {
        if self.membrane_diffusivity_factor != 1.0
            && geometry.radius_of(centroid) >= geometry.cell_radius - self.membrane_band_width
        {
            self.membrane_diffusivity_factor
        } else {
            1.0
        }
    }
}
