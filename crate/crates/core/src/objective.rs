//! Double-well potential, Modica-Mortola functional, the Tikhonov objective
//! and its Gâteaux derivative as a dual (load) vector.

use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::cem::CemSolution;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::{eval_p1, DEGREE4};

/// Nodal values of a P1 conductivity.
#[derive(Clone, Debug, PartialEq)]
pub struct ConductivityField {
    values: Vec<f64>,
}

impl ConductivityField {
    /// A field that must lie in `[c0, c1]` at every node.
    pub fn new(values: Vec<f64>, c0: f64, c1: f64) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= c0 && **v <= c1)) {
            return Err(Error::Config(format!("conductivity {v} at node {i} outside [{c0}, {c1}]")));
        }
        Ok(Self { values })
    }

    /// Any nodal field; used for phantoms and finite-difference probes.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self { values: vec![value; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Identifies the exact nodal values; solutions carry it to detect staleness.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.values.len().hash(&mut h);
        for v in &self.values {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn is_feasible(&self, c0: f64, c1: f64) -> bool {
        self.values.iter().all(|&v| v >= c0 && v <= c1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    /// Interface width ε.
    pub epsilon: f64,
    /// Weight α̃ of the phase-field penalty.
    pub alpha_tilde: f64,
    pub c0: f64,
    pub c1: f64,
}

impl RegularizationParams {
    pub fn new(epsilon: f64, alpha_tilde: f64, c0: f64, c1: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            alpha_tilde,
            c0,
            c1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.alpha_tilde >= 0.0) {
            return Err(Error::Config(format!("alpha_tilde must be nonnegative, got {}", self.alpha_tilde)));
        }
        if !(self.c0 > 0.0 && self.c1 > self.c0) {
            return Err(Error::Config(format!("need 0 < c0 < c1, got c0 = {}, c1 = {}", self.c0, self.c1)));
        }
        Ok(())
    }

    /// `c_W = ∫_{c0}^{c1} √W(s) ds = (c1 − c0)³ / 6`.
    pub fn c_w(&self) -> f64 {
        (self.c1 - self.c0).powi(3) / 6.0
    }

    /// The total-variation weight `α = α̃ c_W` the penalty approximates.
    pub fn alpha(&self) -> f64 {
        self.alpha_tilde * self.c_w()
    }

    pub fn double_well(&self, s: f64) -> f64 {
        double_well(s, self.c0, self.c1)
    }

    pub fn double_well_derivative(&self, s: f64) -> f64 {
        double_well_derivative(s, self.c0, self.c1)
    }
}

/// `W(s) = (s − c0)² (s − c1)²`
pub fn double_well(s: f64, c0: f64, c1: f64) -> f64 {
    let p = (s - c0) * (s - c1);
    p * p
}

/// `W'(s) = 2 (s − c0)(s − c1)(2s − c0 − c1)`
pub fn double_well_derivative(s: f64, c0: f64, c1: f64) -> f64 {
    2.0 * (s - c0) * (s - c1) * (2.0 * s - c0 - c1)
}

/// `∫_T W(σ)` with the degree-4 rule (exact for the quartic integrand).
pub fn element_well_integral(mesh: &Mesh, t: usize, sigma: &[f64], params: &RegularizationParams) -> f64 {
    let s = mesh.local_values(t, sigma);
    DEGREE4.integrate(mesh.area(t), |lam| params.double_well(eval_p1(s, lam)))
}

/// Gradient and well parts of the Modica-Mortola functional, unweighted:
/// `(‖∇σ‖², ∫W(σ))`.
pub fn mm_parts(mesh: &Mesh, sigma: &ConductivityField, params: &RegularizationParams) -> (f64, f64) {
    let s = sigma.values();
    let grad = mesh.grad_norm_sq(s);
    let well = (0..mesh.num_elements())
        .map(|t| element_well_integral(mesh, t, s, params))
        .sum();
    (grad, well)
}

/// `F_ε(σ) = ε ‖∇σ‖² + (1/ε) ∫ W(σ)`
pub fn mm_functional(mesh: &Mesh, sigma: &ConductivityField, params: &RegularizationParams) -> f64 {
    let (grad, well) = mm_parts(mesh, sigma, params);
    params.epsilon * grad + well / params.epsilon
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    /// `½ Σ_j ‖U_j − U^δ_j‖²`
    pub fidelity: f64,
    /// `(α̃/2) F_ε(σ)`
    pub penalty: f64,
}

/// `½ Σ_j ‖U(σ)_j − U^δ_j‖²` over current patterns.
pub fn fidelity(voltages: &[&[f64]], data: &[Vec<f64>]) -> Result<f64> {
    if voltages.len() != data.len() {
        return Err(Error::Config(format!(
            "{} forward solutions for {} data sets",
            voltages.len(),
            data.len()
        )));
    }
    let mut f = 0.0;
    for (u, d) in voltages.iter().zip(data) {
        if u.len() != d.len() {
            return Err(Error::Config("voltage vector length mismatch".into()));
        }
        f += u.iter().zip(d).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(0.5 * f)
}

/// `J_ε(σ) = ½ Σ_j ‖U_j(σ) − U^δ_j‖² + (α̃/2) F_ε(σ)`
pub fn objective(
    mesh: &Mesh,
    sigma: &ConductivityField,
    states: &[CemSolution],
    data: &[Vec<f64>],
    params: &RegularizationParams,
) -> Result<ObjectiveValue> {
    let voltages: Vec<&[f64]> = states.iter().map(|s| s.voltages.as_slice()).collect();
    let fid = fidelity(&voltages, data)?;
    let penalty = 0.5 * params.alpha_tilde * mm_functional(mesh, sigma, params);
    Ok(ObjectiveValue {
        total: fid + penalty,
        fidelity: fid,
        penalty,
    })
}

/// `(∇σ, ∇φ_i)` for all nodes.
pub fn stiffness_action(mesh: &Mesh, sigma: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_elements() {
        let g = mesh.geometry(t);
        let gs = g.gradient(mesh.local_values(t, sigma));
        for (i, &v) in mesh.element(t).vertices.iter().enumerate() {
            out[v] += g.area * (gs[0] * g.grads[i][0] + gs[1] * g.grads[i][1]);
        }
    }
    out
}

/// `(f(σ), φ_i)` with the degree-4 rule.
pub fn nodal_load(mesh: &Mesh, sigma: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_elements() {
        let s = mesh.local_values(t, sigma);
        let verts = mesh.element(t).vertices;
        for (i, &v) in verts.iter().enumerate() {
            out[v] += DEGREE4.integrate(mesh.area(t), |lam| f(eval_p1(s, lam)) * lam[i]);
        }
    }
    out
}

/// `−Σ_j (φ_i ∇u_j, ∇p_j)` for all nodes.
pub fn sensitivity_load(mesh: &Mesh, pairs: &[(&[f64], &[f64])]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_elements() {
        let g = mesh.geometry(t);
        let mut s = 0.0;
        for (u, p) in pairs {
            let gu = g.gradient(mesh.local_values(t, u));
            let gp = g.gradient(mesh.local_values(t, p));
            s += gu[0] * gp[0] + gu[1] * gp[1];
        }
        let c = -s * g.area / 3.0;
        for &v in &mesh.element(t).vertices {
            out[v] += c;
        }
    }
    out
}

/// Dual vector `g` with `g·μ = J'_ε(σ)[μ]` for every P1 direction `μ`:
/// `α̃[ε(∇σ,∇μ) + (1/2ε)(W'(σ),μ)] − Σ_j (μ∇u_j, ∇p_j)`.
pub fn gateaux_gradient(
    mesh: &Mesh,
    sigma: &ConductivityField,
    states: &[CemSolution],
    adjoints: &[CemSolution],
    params: &RegularizationParams,
) -> Result<Vec<f64>> {
    if states.len() != adjoints.len() {
        return Err(Error::Config(format!("{} states but {} adjoints", states.len(), adjoints.len())));
    }
    let fp = sigma.fingerprint();
    if states.iter().chain(adjoints).any(|s| s.fingerprint != fp) {
        return Err(Error::Stale);
    }
    let s = sigma.values();
    let stiff = stiffness_action(mesh, s);
    let well = nodal_load(mesh, s, |x| params.double_well_derivative(x));
    let pairs: Vec<(&[f64], &[f64])> = states
        .iter()
        .zip(adjoints)
        .map(|(u, p)| (u.nodal.as_slice(), p.nodal.as_slice()))
        .collect();
    let sens = sensitivity_load(mesh, &pairs);
    let a = params.alpha_tilde;
    let eps = params.epsilon;
    Ok((0..s.len())
        .map(|i| a * (eps * stiff[i] + well[i] / (2.0 * eps)) + sens[i])
        .collect())
}

/// Nodal clamp to `[c0, c1]`.
pub fn project_box(values: &[f64], c0: f64, c1: f64) -> ConductivityField {
    ConductivityField {
        values: values.iter().map(|v| v.clamp(c0, c1)).collect(),
    }
}
