use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cem::{CurrentPattern, LinearSolver};
use crate::error::{Error, Result};
use crate::mesh::{build_initial_mesh, ElectrodeLayout, Mesh, Rectangle};
use crate::objective::RegularizationParams;
use crate::optimizer::MmConfig;

use super::currents::generate_currents;
use super::data::NoiseModel;
use super::phantom::PhantomSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementMode {
    #[default]
    Adaptive,
    /// Every element is refined twice per loop (d.o.f. roughly ×4).
    Uniform,
}

/// Everything needed for one reconstruction run, including how its data are
/// synthesized. All fields have defaults; see the README for the file schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Rectangle,
    /// Cells per side of the initial structured mesh.
    pub n0: usize,
    /// Number of refinement loops `K`.
    pub refinements: usize,
    pub theta: f64,
    pub q: f64,
    pub epsilon: f64,
    pub alpha_tilde: f64,
    pub c0: f64,
    pub c1: f64,
    pub electrodes: usize,
    pub electrode_length: f64,
    /// Contact impedance of every electrode, unless `impedances` is given.
    pub impedance: f64,
    pub impedances: Option<Vec<f64>>,
    pub patterns: usize,
    pub mode: RefinementMode,
    pub optimizer: MmConfig,
    pub solver: LinearSolver,
    pub phantom: PhantomSpec,
    pub noise_level: f64,
    pub seed: u64,
    /// Uniform refinements of the initial mesh used for the exact data.
    pub data_refinements: usize,
    pub output_dir: Option<PathBuf>,
    /// Write the mesh and conductivity of every loop as JSON.
    pub write_fields: bool,
    pub write_vtk: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: Rectangle::symmetric_square(),
            n0: 16,
            refinements: 15,
            theta: 0.7,
            q: 2.0,
            epsilon: 1e-2,
            alpha_tilde: 2e-2,
            c0: 1.0,
            c1: 2.0,
            electrodes: 16,
            electrode_length: 0.25,
            impedance: 1.0,
            impedances: None,
            patterns: 10,
            mode: RefinementMode::Adaptive,
            optimizer: MmConfig::default(),
            solver: LinearSolver::Direct,
            phantom: PhantomSpec::two_disks(1.0),
            noise_level: 1e-3,
            seed: 0,
            data_refinements: 5,
            output_dir: None,
            write_fields: false,
            write_vtk: false,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(Error::Config("n0 must be positive".into()));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta {} must lie in (0, 1]", self.theta)));
        }
        positive("q", self.q)?;
        positive("electrode_length", self.electrode_length)?;
        positive("impedance", self.impedance)?;
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::Config(format!("noise_level {} must be non-negative", self.noise_level)));
        }
        if self.electrodes < 2 {
            return Err(Error::Config("at least two electrodes are needed".into()));
        }
        if self.patterns == 0 || self.patterns >= self.electrodes {
            return Err(Error::Config(format!(
                "patterns must lie in 1..{}, got {}",
                self.electrodes, self.patterns
            )));
        }
        let o = &self.optimizer;
        positive("optimizer.step_tolerance", o.step_tolerance)?;
        positive("optimizer.inner_tolerance", o.inner_tolerance)?;
        if o.inner_max_iterations == 0 {
            return Err(Error::Config("optimizer.inner_max_iterations must be positive".into()));
        }
        if let LinearSolver::Pcg {
            tolerance,
            max_iterations_factor,
        } = self.solver
        {
            positive("solver.tolerance", tolerance)?;
            if max_iterations_factor == 0 {
                return Err(Error::Config("solver.max_iterations_factor must be positive".into()));
            }
        }
        self.params()?;
        self.phantom.validate()?;
        self.layout()?;
        Ok(())
    }

    pub fn params(&self) -> Result<RegularizationParams> {
        RegularizationParams::new(self.epsilon, self.alpha_tilde, self.c0, self.c1)
    }

    pub fn layout(&self) -> Result<ElectrodeLayout> {
        let layout = ElectrodeLayout::evenly_spaced(&self.domain, self.electrodes, self.electrode_length, self.impedance)?;
        match &self.impedances {
            Some(z) => layout.with_impedances(z.clone()),
            None => Ok(layout),
        }
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            level: self.noise_level,
            seed: self.seed,
        }
    }

    pub fn currents(&self) -> Result<Vec<CurrentPattern>> {
        generate_currents(self.electrodes, self.patterns)
    }

    pub fn initial_mesh(&self) -> Result<Mesh> {
        build_initial_mesh(self.domain, self.layout()?, self.n0)
    }

    /// Initial mesh refined uniformly `data_refinements` times.
    pub fn data_mesh(&self) -> Result<Mesh> {
        let mut m = self.initial_mesh()?;
        for _ in 0..self.data_refinements {
            m = m.refine_uniform();
        }
        Ok(m)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Serde(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a `.json` or `.toml` file (chosen by extension).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            Some("toml") => Self::from_toml_str(&text),
            _ => Err(Error::Config(format!("{} must end in .json or .toml", path.display()))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trips() {
        let c = RunConfig {
            refinements: 3,
            mode: RefinementMode::Uniform,
            impedances: Some(vec![0.5; 16]),
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_json_str(&c.to_json().unwrap()).unwrap(), c);
        assert_eq!(RunConfig::from_toml_str(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = RunConfig::from_toml_str("refinements = 2\ntheta = 0.5\n").unwrap();
        assert_eq!(c.refinements, 2);
        assert_eq!(c.theta, 0.5);
        assert_eq!(c.n0, 16);
    }

    #[test]
    fn invalid_values_rejected() {
        for c in [
            RunConfig { theta: 0.0, ..Default::default() },
            RunConfig { theta: 1.5, ..Default::default() },
            RunConfig { patterns: 16, ..Default::default() },
            RunConfig { c1: 0.5, ..Default::default() },
            RunConfig { epsilon: 0.0, ..Default::default() },
            RunConfig { impedance: -1.0, ..Default::default() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_)) | Err(Error::InvalidImpedance { .. })), "{c:?}");
        }
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
    }
}
