//! TOML run configuration. Every field has a default, so an empty file is a
//! complete run with the reference parameter set.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CellGeometry;
use crate::model::ModelParameters;
use crate::time::TimeStepperConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Target element size, μm.
    pub target_h: f64,
    pub degree: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            target_h: 1.0,
            degree: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Simulate,
    Nocodazole,
    Converge,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// Refinement levels of the convergence study.
    pub levels: usize,
    /// Coarsest element size of the convergence study, μm.
    pub coarse_h: f64,
    /// Degrees checked by the convergence study.
    pub degrees: Vec<usize>,
    /// Diffusivity multiplier of the oracle comparison.
    pub diffusion_scale: f64,
    /// Concentration floor (μM) in relative deviations from the oracle.
    pub oracle_floor: f64,
    /// Oracle RK4 step, s.
    pub oracle_dt: f64,
    /// Advection speeds (μm/s) swept by the microtubule experiment.
    pub speed_sweep: Vec<f64>,
    /// Time (s) at which accumulation slopes are compared.
    pub slope_time: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Simulate,
            levels: 3,
            coarse_h: 2.0,
            degrees: vec![1, 2],
            diffusion_scale: 1000.0,
            oracle_floor: 0.01,
            oracle_dt: 0.001,
            speed_sweep: vec![0.5, 1.0, 2.0],
            slope_time: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Times (s) at which field snapshots are written.
    pub snapshot_times: Vec<f64>,
    /// Also write the mesh as text.
    pub mesh_dump: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("output"),
            snapshot_times: Vec::new(),
            mesh_dump: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: CellGeometry,
    pub mesh: MeshConfig,
    pub model: ModelParameters,
    pub time: TimeStepperConfig,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The effective configuration, loadable by [`SimConfig::from_toml_str`].
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.geometry.validate().map_err(wrap)?;
        self.model.validate().map_err(wrap)?;
        self.time.validate().map_err(wrap)?;
        if !(self.mesh.target_h > 0.0) || self.mesh.degree == 0 {
            return Err(Error::Config("mesh.target_h must be positive and mesh.degree >= 1".into()));
        }
        if self.experiment.levels < 2 {
            return Err(Error::Config("experiment.levels must be at least 2".into()));
        }
        if !(self.experiment.diffusion_scale >= 1.0) {
            return Err(Error::Config("experiment.diffusion_scale must be >= 1".into()));
        }
        if self.experiment.speed_sweep.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("experiment.speed_sweep entries must be >= 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::Scheme;

    #[test]
    fn empty_file_is_reference_run() {
        let c = SimConfig::from_toml_str("").unwrap();
        assert_eq!(c, SimConfig::default());
        assert_eq!(c.model, ModelParameters::default());
        assert_eq!(c.time.t_end, 17.0);
    }

    #[test]
    fn partial_override() {
        let c = SimConfig::from_toml_str(
            "[model]\nadvection = false\n[model.diffusivity]\nRt = 22.0\nRd = 20.0\nC = 1.0\nT = 14.0\nTr = 14.0\nTc = 12.4\n[time]\nscheme = \"cn-imex\"\n",
        )
        .unwrap();
        assert!(!c.model.advection);
        assert_eq!(c.model.diffusivity.c, 1.0);
        assert_eq!(c.time.scheme, Scheme::CnImex);
    }

    #[test]
    fn unknown_field_names_the_key() {
        let err = SimConfig::from_toml_str("[model]\nadvecton = false\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("advecton"), "{err}");
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let err = SimConfig::from_toml_str("[geometry]\ncell_radius = 3.0\nnucleus_radius = 4.0\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = SimConfig::from_toml_str("[time]\ndt = -1.0\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn round_trip() {
        let mut c = SimConfig::default();
        c.mesh.target_h = 0.75;
        c.output.snapshot_times = vec![0.0, 17.0];
        c.model.kinetics.k3 = 0.25;
        let back = SimConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
