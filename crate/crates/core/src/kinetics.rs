//! Reaction source terms of the Ran import network.
//!
//! Six species share one state layout everywhere in the crate:
//!
//! | index | species | meaning                     |
//! |-------|---------|-----------------------------|
//! | 0     | `Rt`    | RanGTP                      |
//! | 1     | `Rd`    | RanGDP (NTF2-bound pool)    |
//! | 2     | `C`     | free cargo                  |
//! | 3     | `T`     | free import receptor        |
//! | 4     | `Tr`    | RanGTP·receptor complex     |
//! | 5     | `Tc`    | cargo·receptor complex      |
//!
//! Rate laws (all in μM/s):
//!
//! ```text
//! m1(Rt)     = q_cat1·RanGAP·Rt/(K_M1 + Rt)     cytoplasm
//! m2(Rd)     = q_cat2·RCC1·Rd/(K_M2 + Rd)       nucleus
//! r1(Rt, T)  = k1·Rt·T                          both
//! r-1(Tr)    = k_m1·Tr                          both
//! r2(C, T)   = k2·C·T                           cytoplasm
//! r3(Rt, Tc) = k3·Rt·Tc                         nucleus
//! ```
//!
//! Negative concentrations are clamped to zero inside the rate laws only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_SPECIES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Rt = 0,
    Rd = 1,
    C = 2,
    T = 3,
    Tr = 4,
    Tc = 5,
}

impl Species {
    pub const ALL: [Species; N_SPECIES] = [
        Species::Rt,
        Species::Rd,
        Species::C,
        Species::T,
        Species::Tr,
        Species::Tc,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::Rt => "Rt",
            Species::Rd => "Rd",
            Species::C => "C",
            Species::T => "T",
            Species::Tr => "Tr",
            Species::Tc => "Tc",
        }
    }
}

/// Subdomain of the cell. Tags 1 and 2 are used in mesh files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Compartment {
    Cytoplasm,
    Nucleus,
}

impl Compartment {
    pub fn tag(self) -> u8 {
        match self {
            Compartment::Cytoplasm => 1,
            Compartment::Nucleus => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(Compartment::Cytoplasm),
            2 => Ok(Compartment::Nucleus),
            t => Err(Error::Parameter(format!("unknown compartment tag {t}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Localization {
    CytoplasmOnly,
    NucleusOnly,
    Both,
}

impl Localization {
    pub fn active_in(self, compartment: Compartment) -> bool {
        matches!(
            (self, compartment),
            (Localization::Both, _)
                | (Localization::CytoplasmOnly, Compartment::Cytoplasm)
                | (Localization::NucleusOnly, Compartment::Nucleus)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reaction {
    /// RanGAP-catalysed hydrolysis Rt -> Rd.
    M1,
    /// RCC1-catalysed exchange Rd -> Rt.
    M2,
    /// Rt + T -> Tr.
    R1,
    /// Tr -> Rt + T.
    RMinus1,
    /// C + T -> Tc.
    R2,
    /// Rt + Tc -> Tr + C.
    R3,
}

impl Reaction {
    pub fn localization(self) -> Localization {
        match self {
            Reaction::M1 | Reaction::R2 => Localization::CytoplasmOnly,
            Reaction::M2 | Reaction::R3 => Localization::NucleusOnly,
            Reaction::R1 | Reaction::RMinus1 => Localization::Both,
        }
    }
}

/// Rate constants and the fixed enzyme concentrations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticConstants {
    /// 1/s
    pub q_cat1: f64,
    /// μM
    pub k_m1_sat: f64,
    /// 1/s
    pub q_cat2: f64,
    /// μM
    pub k_m2_sat: f64,
    /// 1/(μM·s)
    pub k1: f64,
    /// 1/s
    pub k_minus1: f64,
    /// 1/(μM·s)
    pub k2: f64,
    /// 1/(μM·s)
    pub k3: f64,
    /// μM
    pub ran_gap: f64,
    /// μM
    pub rcc1: f64,
}

impl Default for KineticConstants {
    fn default() -> Self {
        Self {
            q_cat1: 20.1,
            k_m1_sat: 0.7,
            q_cat2: 8.0,
            k_m2_sat: 1.1,
            k1: 0.1,
            k_minus1: 0.3,
            k2: 0.15,
            k3: 0.1,
            ran_gap: 0.5,
            rcc1: 0.7,
        }
    }
}

fn check(x: f64) -> Result<f64> {
    if x.is_nan() {
        Err(Error::NaN("concentration"))
    } else {
        Ok(x.max(0.0))
    }
}

fn michaelis_menten(q_cat: f64, enzyme: f64, k_m: f64, s: f64) -> f64 {
    q_cat * enzyme * s / (k_m + s)
}

fn michaelis_menten_derivative(q_cat: f64, enzyme: f64, k_m: f64, s: f64) -> f64 {
    q_cat * enzyme * k_m / ((k_m + s) * (k_m + s))
}

/// `constant` times the product of the supplied concentrations.
pub fn rate_mass_action(constant: f64, a: f64, b: Option<f64>) -> Result<f64> {
    let a = check(a)?;
    let b = match b {
        Some(b) => check(b)?,
        None => 1.0,
    };
    Ok(constant * a * b)
}

impl KineticConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k_m1_sat", self.k_m1_sat), ("k_m2_sat", self.k_m2_sat)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "saturation constant {name} must be positive, got {v}"
                )));
            }
        }
        let rates = [
            ("q_cat1", self.q_cat1),
            ("q_cat2", self.q_cat2),
            ("k1", self.k1),
            ("k_minus1", self.k_minus1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("ran_gap", self.ran_gap),
            ("rcc1", self.rcc1),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "kinetic constant {name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn rate_m1(&self, rt: f64) -> Result<f64> {
        let rt = check(rt)?;
        Ok(michaelis_menten(self.q_cat1, self.ran_gap, self.k_m1_sat, rt))
    }

    pub fn rate_m2(&self, rd: f64) -> Result<f64> {
        let rd = check(rd)?;
        Ok(michaelis_menten(self.q_cat2, self.rcc1, self.k_m2_sat, rd))
    }

    /// Reaction source f(u) in one compartment.
    pub fn source_vector(
        &self,
        u: &[f64; N_SPECIES],
        compartment: Compartment,
    ) -> Result<[f64; N_SPECIES]> {
        let [rt, rd, c, t, tr, tc] = *u;
        let r1 = rate_mass_action(self.k1, rt, Some(t))?;
        let rm1 = rate_mass_action(self.k_minus1, tr, None)?;
        let mut f = [0.0; N_SPECIES];
        match compartment {
            Compartment::Cytoplasm => {
                let m1 = self.rate_m1(rt)?;
                let r2 = rate_mass_action(self.k2, c, Some(t))?;
                check(rd)?;
                check(tc)?;
                f[0] = -m1 - r1 + rm1;
                f[1] = m1;
                f[2] = -r2;
                f[3] = -r1 + rm1 - r2;
                f[4] = r1 - rm1;
                f[5] = r2;
            }
            Compartment::Nucleus => {
                let m2 = self.rate_m2(rd)?;
                let r3 = rate_mass_action(self.k3, rt, Some(tc))?;
                check(c)?;
                f[0] = m2 - r1 + rm1 - r3;
                f[1] = -m2;
                f[2] = r3;
                f[3] = -r1 + rm1;
                f[4] = r1 - rm1 + r3;
                f[5] = -r3;
            }
        }
        Ok(f)
    }

    /// Analytic Jacobian `J[i][j] = ∂f_i/∂u_j`. Entries for clamped (negative)
    /// inputs are those of the clamped law, i.e. zero slope.
    pub fn source_jacobian(
        &self,
        u: &[f64; N_SPECIES],
        compartment: Compartment,
    ) -> Result<[[f64; N_SPECIES]; N_SPECIES]> {
        let mut clamped = [0.0; N_SPECIES];
        let mut live = [0.0; N_SPECIES];
        for i in 0..N_SPECIES {
            clamped[i] = check(u[i])?;
            live[i] = if u[i] >= 0.0 { 1.0 } else { 0.0 };
        }
        let [rt, rd, c, t, _tr, tc] = clamped;
        const RT: usize = 0;
        const RD: usize = 1;
        const C: usize = 2;
        const T: usize = 3;
        const TR: usize = 4;
        const TC: usize = 5;

        // partial derivatives of the shared reactions
        let dr1_drt = self.k1 * t * live[RT];
        let dr1_dt = self.k1 * rt * live[T];
        let drm1_dtr = self.k_minus1 * live[TR];

        let mut j = [[0.0; N_SPECIES]; N_SPECIES];
        // r1 / r-1: Rt and T consumed, Tr produced
        for (row, sign) in [(RT, -1.0), (T, -1.0), (TR, 1.0)] {
            j[row][RT] += sign * dr1_drt;
            j[row][T] += sign * dr1_dt;
            j[row][TR] -= sign * drm1_dtr;
        }
        match compartment {
            Compartment::Cytoplasm => {
                let dm1 =
                    michaelis_menten_derivative(self.q_cat1, self.ran_gap, self.k_m1_sat, rt)
                        * live[RT];
                j[RT][RT] -= dm1;
                j[RD][RT] += dm1;
                let dr2_dc = self.k2 * t * live[C];
                let dr2_dt = self.k2 * c * live[T];
                for (row, sign) in [(C, -1.0), (T, -1.0), (TC, 1.0)] {
                    j[row][C] += sign * dr2_dc;
                    j[row][T] += sign * dr2_dt;
                }
            }
            Compartment::Nucleus => {
                let dm2 =
                    michaelis_menten_derivative(self.q_cat2, self.rcc1, self.k_m2_sat, rd)
                        * live[RD];
                j[RT][RD] += dm2;
                j[RD][RD] -= dm2;
                let dr3_drt = self.k3 * tc * live[RT];
                let dr3_dtc = self.k3 * rt * live[TC];
                for (row, sign) in [(RT, -1.0), (TC, -1.0), (TR, 1.0), (C, 1.0)] {
                    j[row][RT] += sign * dr3_drt;
                    j[row][TC] += sign * dr3_dtc;
                }
            }
        }
        Ok(j)
    }
}

/// Lumped quantities conserved by the reaction network: total Ran, total
/// cargo and total receptor.
pub fn lumped_totals(u: &[f64; N_SPECIES]) -> [f64; 3] {
    let [rt, rd, c, t, tr, tc] = *u;
    [rt + rd + tr, c + tc, t + tr + tc]
}
