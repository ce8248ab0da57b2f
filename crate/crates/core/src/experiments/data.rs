use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cem::{CemSystem, CurrentPattern, LinearSolver};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::objective::ConductivityField;

use super::phantom::PhantomSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Relative noise level `ϵ ≥ 0`.
    pub level: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(level: f64, seed: u64) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::Config(format!("noise level {level} must be non-negative")));
        }
        Ok(Self { level, seed })
    }
}

/// Exact and noisy electrode voltages with the normal draws used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub currents: Vec<Vec<f64>>,
    pub exact: Vec<Vec<f64>>,
    pub noisy: Vec<Vec<f64>>,
    /// `ξ` per pattern, drawn in pattern-major order.
    pub xi: Vec<Vec<f64>>,
    pub noise: NoiseModel,
    /// Degrees of freedom of the mesh the exact data were computed on.
    pub data_dofs: usize,
}

impl SyntheticData {
    pub fn current_patterns(&self) -> Result<Vec<CurrentPattern>> {
        self.currents.iter().cloned().map(CurrentPattern::new).collect()
    }
}

/// Forward voltages of the phantom (nodally evaluated) on `mesh`.
pub fn forward_voltages(
    mesh: &Mesh,
    phantom: &PhantomSpec,
    currents: &[CurrentPattern],
    solver: LinearSolver,
) -> Result<Vec<Vec<f64>>> {
    phantom.validate()?;
    let sigma = ConductivityField::from_values(phantom.nodal(mesh));
    let system = CemSystem::assemble(mesh, &sigma, solver)?;
    currents
        .iter()
        .map(|c| Ok(system.solve_forward(c)?.voltages))
        .collect()
}

/// `U^δ_l = U_l + ϵ max_l|U_l| ξ_l`, re-projected to sum zero.
pub fn add_noise(exact: &[Vec<f64>], noise: NoiseModel) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut noisy = Vec::with_capacity(exact.len());
    let mut xis = Vec::with_capacity(exact.len());
    for u in exact {
        let xi: Vec<f64> = (0..u.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let scale = noise.level * u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut d: Vec<f64> = u.iter().zip(&xi).map(|(a, x)| a + scale * x).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        d.iter_mut().for_each(|x| *x -= mean);
        noisy.push(d);
        xis.push(xi);
    }
    (noisy, xis)
}

/// Solves the phantom on `data_mesh` (which should be finer than any
/// reconstruction mesh) and adds seeded Gaussian noise.
pub fn synth_data(
    data_mesh: &Mesh,
    phantom: &PhantomSpec,
    currents: &[CurrentPattern],
    noise: NoiseModel,
    solver: LinearSolver,
) -> Result<SyntheticData> {
    NoiseModel::new(noise.level, noise.seed)?;
    let exact = forward_voltages(data_mesh, phantom, currents, solver)?;
    let (noisy, xi) = add_noise(&exact, noise);
    Ok(SyntheticData {
        currents: currents.iter().map(|c| c.values().to_vec()).collect(),
        exact,
        noisy,
        xi,
        noise,
        data_dofs: data_mesh.dofs(),
    })
}
