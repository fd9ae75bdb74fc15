//! Compartment totals over time and the CSV files written by the driver.

use std::fmt::Write as _;
use std::path::Path;

use crate::dg::{DgSpace, StateVector};
use crate::error::Result;
use crate::kinetics::{lumped_totals, Compartment, Species, N_SPECIES};

pub const TIMESERIES_HEADER: &str = "# ran-import timeseries v1";

/// Species masses (μM·μm²) per compartment at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub cytoplasm: [f64; N_SPECIES],
    pub nucleus: [f64; N_SPECIES],
    /// Areas of cytoplasm and nucleus, μm².
    pub areas: [f64; 2],
}

impl Sample {
    pub fn from_state(space: &DgSpace, t: f64, u: &StateVector) -> Self {
        let mut cytoplasm = [0.0; N_SPECIES];
        let mut nucleus = [0.0; N_SPECIES];
        for s in 0..N_SPECIES {
            cytoplasm[s] = space.integrate_block(u.species(s), Some(Compartment::Cytoplasm));
            nucleus[s] = space.integrate_block(u.species(s), Some(Compartment::Nucleus));
        }
        Self {
            t,
            cytoplasm,
            nucleus,
            areas: [
                space.mesh.compartment_area(Compartment::Cytoplasm),
                space.mesh.compartment_area(Compartment::Nucleus),
            ],
        }
    }

    pub fn mass(&self, s: Species, c: Compartment) -> f64 {
        match c {
            Compartment::Cytoplasm => self.cytoplasm[s.index()],
            Compartment::Nucleus => self.nucleus[s.index()],
        }
    }

    /// Compartment average concentration, μM.
    pub fn average(&self, s: Species, c: Compartment) -> f64 {
        match c {
            Compartment::Cytoplasm => self.cytoplasm[s.index()] / self.areas[0],
            Compartment::Nucleus => self.nucleus[s.index()] / self.areas[1],
        }
    }

    /// Total Ran, cargo and receptor over the whole cell.
    pub fn totals(&self) -> [f64; 3] {
        let mut m = [0.0; N_SPECIES];
        for (s, v) in m.iter_mut().enumerate() {
            *v = self.cytoplasm[s] + self.nucleus[s];
        }
        lumped_totals(&m)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub samples: Vec<Sample>,
}

impl TimeSeries {
    pub fn push(&mut self, s: Sample) {
        self.samples.push(s);
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Relative change of the lumped totals since the first sample.
    pub fn drift(&self, s: &Sample) -> [f64; 3] {
        let Some(first) = self.samples.first() else {
            return [0.0; 3];
        };
        let t0 = first.totals();
        let t1 = s.totals();
        std::array::from_fn(|k| if t0[k] == 0.0 { t1[k] } else { (t1[k] - t0[k]) / t0[k] })
    }

    pub fn max_abs_drift(&self) -> [f64; 3] {
        let mut out = [0.0f64; 3];
        for s in &self.samples {
            for (o, d) in out.iter_mut().zip(self.drift(s)) {
                *o = o.max(d.abs());
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(TIMESERIES_HEADER);
        out.push('\n');
        out.push('t');
        for s in Species::ALL {
            let n = s.name();
            write!(out, ",{n}_mass_cyto,{n}_mass_nuc,{n}_avg_cyto,{n}_avg_nuc").unwrap();
        }
        out.push_str(",ran_drift,cargo_drift,receptor_drift\n");
        for sample in &self.samples {
            write!(out, "{:.6}", sample.t).unwrap();
            for s in Species::ALL {
                write!(
                    out,
                    ",{:.10e},{:.10e},{:.10e},{:.10e}",
                    sample.mass(s, Compartment::Cytoplasm),
                    sample.mass(s, Compartment::Nucleus),
                    sample.average(s, Compartment::Cytoplasm),
                    sample.average(s, Compartment::Nucleus)
                )
                .unwrap();
            }
            let d = self.drift(sample);
            writeln!(out, ",{:.6e},{:.6e},{:.6e}", d[0], d[1], d[2]).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Concentrations of every species at every volume quadrature point.
pub fn snapshot_csv(space: &DgSpace, u: &StateVector) -> String {
    let mut out = String::from("x_um,y_um");
    for s in Species::ALL {
        write!(out, ",{}_uM", s.name()).unwrap();
    }
    out.push('\n');
    for e in 0..space.n_elements() {
        let tab = space.volume_rule(e);
        for (p, ev) in tab.rule.points.iter().zip(&tab.evals) {
            let x = space.maps[e].to_physical(*p);
            write!(out, "{:.6},{:.6}", x[0], x[1]).unwrap();
            for v in u.values_at(space, e, &ev.values) {
                write!(out, ",{v:.8e}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_disk_mesh, CellGeometry};

    fn sample(t: f64, rt: f64) -> Sample {
        Sample {
            t,
            cytoplasm: [rt, 1.0, 2.0, 3.0, 0.0, 0.0],
            nucleus: [0.0; N_SPECIES],
            areas: [2.0, 1.0],
        }
    }

    #[test]
    fn csv_layout() {
        let mut ts = TimeSeries::default();
        ts.push(sample(0.0, 1.0));
        ts.push(sample(0.1, 1.5));
        let csv = ts.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], TIMESERIES_HEADER);
        let cols = lines[1].split(',').count();
        assert_eq!(cols, 1 + 4 * N_SPECIES + 3);
        assert!(lines[1].starts_with("t,Rt_mass_cyto,Rt_mass_nuc,Rt_avg_cyto,Rt_avg_nuc,Rd_mass_cyto"));
        assert!(lines[1].ends_with("ran_drift,cargo_drift,receptor_drift"));
        assert!(lines[2..].iter().all(|l| l.split(',').count() == cols));
        // Ran total 2 -> 2.5
        let drift: f64 = lines[3].split(',').nth(cols - 3).unwrap().parse().unwrap();
        assert!((drift - 0.25).abs() < 1e-12);
    }

    #[test]
    fn averages_divide_by_area() {
        let s = sample(0.0, 4.0);
        assert_eq!(s.average(Species::Rt, Compartment::Cytoplasm), 2.0);
        assert_eq!(s.totals(), [5.0, 2.0, 3.0]);
    }

    #[test]
    fn snapshot_has_one_row_per_point() {
        let space = DgSpace::new(build_disk_mesh(&CellGeometry::default(), 3.0, 1).unwrap());
        let u = StateVector::zeros(&space);
        let csv = snapshot_csv(&space, &u);
        assert_eq!(csv.lines().count(), 1 + space.sample_points().len());
        assert!(csv.starts_with("x_um,y_um,Rt_uM,Rd_uM,C_uM,T_uM,Tr_uM,Tc_uM\n"));
    }
}
