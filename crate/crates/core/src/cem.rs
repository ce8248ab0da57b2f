//! Discrete complete electrode model on `V_T ⊗ R^L_⋄`.
//!
//! The sum-zero voltage space is parametrized by an orthonormal (Helmert)
//! basis with `L − 1` columns so the assembled operator stays symmetric
//! positive definite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, pcg, CgConfig, Cholesky, CsrMatrix, Jacobi};
use crate::mesh::{FaceKind, Mesh};
use crate::objective::ConductivityField;

/// Applied electrode currents, summing to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentPattern(Vec<f64>);

impl CurrentPattern {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let scale = linalg::max_abs(&values);
        let sum: f64 = values.iter().sum();
        if sum.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) && scale > 0.0 {
            return Err(Error::Config(format!("current pattern sums to {sum:e}, not zero")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How CEM systems are solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearSolver {
    /// Sparse Cholesky, factored once per assembled system.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Pcg { tolerance: f64, max_iterations_factor: usize },
}


#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Interior nodal field and electrode voltages (sum-zero).
#[derive(Clone, Debug, PartialEq)]
pub struct CemSolution {
    pub nodal: Vec<f64>,
    pub voltages: Vec<f64>,
    pub report: SolveReport,
    /// Fingerprint of the conductivity the system was assembled with.
    pub fingerprint: u64,
}

pub type StateSolution = CemSolution;
pub type AdjointSolution = CemSolution;

/// Orthonormal basis of `R^L_⋄`, as `L` rows of `L − 1` entries.
pub fn sum_zero_basis(l: usize) -> Vec<Vec<f64>> {
    let mut q = vec![vec![0.0; l.saturating_sub(1)]; l];
    for k in 1..l {
        let c = 1.0 / ((k * (k + 1)) as f64).sqrt();
        for row in q.iter_mut().take(k) {
            row[k - 1] = c;
        }
        q[k][k - 1] = -(k as f64) * c;
    }
    q
}

/// `(σ∇φ_i, ∇φ_j)` with the element mean of the P1 conductivity.
pub fn assemble_stiffness(mesh: &Mesh, sigma: &[f64]) -> CsrMatrix {
    let n = mesh.num_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.num_elements());
    stiffness_triplets(mesh, sigma, &mut trip);
    CsrMatrix::from_triplets(n, n, &trip)
}

fn stiffness_triplets(mesh: &Mesh, sigma: &[f64], trip: &mut Vec<(usize, usize, f64)>) {
    for t in 0..mesh.num_elements() {
        let g = mesh.geometry(t);
        let v = mesh.element(t).vertices;
        let s = mesh.local_values(t, sigma);
        let mean = (s[0] + s[1] + s[2]) / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                let k = mean * g.area * (g.grads[i][0] * g.grads[j][0] + g.grads[i][1] * g.grads[j][1]);
                trip.push((v[i], v[j], k));
            }
        }
    }
}

/// Electrode boundary terms of the bilinear form before the sum-zero reduction.
pub struct ElectrodeBlocks {
    /// `Σ_l z_l⁻¹ (φ_i, φ_j)_{e_l}`
    pub nodal: CsrMatrix,
    /// `−z_l⁻¹ ∫_{e_l} φ_i`, as `(node, electrode, value)`.
    pub coupling: Vec<(usize, usize, f64)>,
    /// `|e_l| / z_l`
    pub diagonal: Vec<f64>,
}

pub fn assemble_electrode_blocks(mesh: &Mesh) -> ElectrodeBlocks {
    let n = mesh.num_vertices();
    let l_count = mesh.num_electrodes();
    let z = mesh.layout().impedances();
    let mut trip = Vec::new();
    let mut coupling = Vec::new();
    let mut diagonal = vec![0.0; l_count];
    for face in mesh.faces() {
        let FaceKind::Electrode(l) = face.kind else {
            continue;
        };
        let h = face.length;
        let w = 1.0 / z[l];
        let [a, b] = face.vertices;
        trip.push((a, a, w * h / 3.0));
        trip.push((b, b, w * h / 3.0));
        trip.push((a, b, w * h / 6.0));
        trip.push((b, a, w * h / 6.0));
        coupling.push((a, l, -w * h / 2.0));
        coupling.push((b, l, -w * h / 2.0));
        diagonal[l] += w * h;
    }
    ElectrodeBlocks {
        nodal: CsrMatrix::from_triplets(n, n, &trip),
        coupling,
        diagonal,
    }
}

/// Assembled CEM operator for one conductivity.
pub struct CemSystem {
    matrix: CsrMatrix,
    n_nodes: usize,
    basis: Vec<Vec<f64>>,
    solver: LinearSolver,
    factor: Option<Cholesky>,
    jacobi: Option<Jacobi>,
    fingerprint: u64,
}

impl CemSystem {
    pub fn assemble(mesh: &Mesh, sigma: &ConductivityField, solver: LinearSolver) -> Result<Self> {
        let n = mesh.num_vertices();
        let l_count = mesh.num_electrodes();
        if sigma.len() != n {
            return Err(Error::Config(format!("conductivity has {} values for {n} nodes", sigma.len())));
        }
        if l_count < 2 {
            return Err(Error::Config("the electrode model needs at least two electrodes".into()));
        }
        if let Some((l, &z)) = mesh.layout().impedances().iter().enumerate().find(|(_, z)| !(**z > 0.0)) {
            return Err(Error::InvalidImpedance { electrode: l, value: z });
        }
        if let Some(v) = sigma.values().iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("conductivity must be positive, found {v}")));
        }
        let basis = sum_zero_basis(l_count);
        let m = l_count - 1;
        let mut trip = Vec::with_capacity(9 * mesh.num_elements());
        stiffness_triplets(mesh, sigma.values(), &mut trip);
        let blocks = assemble_electrode_blocks(mesh);
        trip.extend(blocks.nodal.iter());
        // reduced coupling B = C Q
        for &(i, l, c) in &blocks.coupling {
            for k in 0..m {
                let v = c * basis[l][k];
                if v != 0.0 {
                    trip.push((i, n + k, v));
                    trip.push((n + k, i, v));
                }
            }
        }
        // Qᵀ D Q
        for a in 0..m {
            for b in 0..m {
                let v: f64 = (0..l_count).map(|l| basis[l][a] * blocks.diagonal[l] * basis[l][b]).sum();
                if v != 0.0 {
                    trip.push((n + a, n + b, v));
                }
            }
        }
        let matrix = CsrMatrix::from_triplets(n + m, n + m, &trip);
        let (factor, jacobi) = match solver {
            LinearSolver::Direct => (Some(Cholesky::factor(&matrix)?), None),
            LinearSolver::Pcg { .. } => (None, Some(Jacobi::new(&matrix))),
        };
        Ok(Self {
            matrix,
            n_nodes: n,
            basis,
            solver,
            factor,
            jacobi,
            fingerprint: sigma.fingerprint(),
        })
    }

    /// Full reduced operator on `(nodal, L − 1 voltage coefficients)`.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn num_electrodes(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Coefficients `Qᵀ v` of a voltage vector.
    pub fn reduce_voltages(&self, v: &[f64]) -> Vec<f64> {
        let m = self.basis.len().saturating_sub(1);
        (0..m).map(|k| self.basis.iter().zip(v).map(|(row, x)| row[k] * x).sum()).collect()
    }

    /// Voltages `Q c` from coefficients.
    pub fn expand_voltages(&self, c: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|row| row.iter().zip(c).map(|(q, x)| q * x).sum()).collect()
    }

    /// Solves the raw reduced system `A x = b`.
    pub fn solve_reduced(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let dim = self.matrix.nrows();
        let bnorm = linalg::norm(b);
        if bnorm == 0.0 {
            return Ok((
                vec![0.0; dim],
                SolveReport {
                    iterations: 0,
                    relative_residual: 0.0,
                },
            ));
        }
        match self.solver {
            LinearSolver::Direct => {
                let mut x = b.to_vec();
                self.factor.as_ref().expect("direct solver is factored").solve_in_place(&mut x);
                let ax = self.matrix.mul(&x);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
                Ok((
                    x,
                    SolveReport {
                        iterations: 1,
                        relative_residual: linalg::norm(&r) / bnorm,
                    },
                ))
            }
            LinearSolver::Pcg {
                tolerance,
                max_iterations_factor,
            } => {
                let mut x = vec![0.0; dim];
                let out = pcg(
                    &self.matrix,
                    self.jacobi.as_ref().expect("pcg has a preconditioner"),
                    b,
                    &mut x,
                    CgConfig {
                        tolerance,
                        max_iterations: max_iterations_factor * dim,
                    },
                );
                if !out.converged {
                    return Err(Error::NumericFailure {
                        iterations: out.iterations,
                        residual: out.relative_residual,
                    });
                }
                Ok((
                    x,
                    SolveReport {
                        iterations: out.iterations,
                        relative_residual: out.relative_residual,
                    },
                ))
            }
        }
    }

    /// Solves `a(σ,(w,W),(v,V)) = (f, v) + ⟨d, V⟩` for a nodal load `f` and voltage data `d`.
    pub fn solve_with_loads(&self, nodal_load: Option<&[f64]>, voltage_data: Option<&[f64]>) -> Result<CemSolution> {
        let n = self.n_nodes;
        let mut b = vec![0.0; self.matrix.nrows()];
        if let Some(f) = nodal_load {
            b[..n].copy_from_slice(f);
        }
        if let Some(d) = voltage_data {
            let c = self.reduce_voltages(d);
            b[n..].copy_from_slice(&c);
        }
        let (x, report) = self.solve_reduced(&b)?;
        Ok(CemSolution {
            nodal: x[..n].to_vec(),
            voltages: self.expand_voltages(&x[n..]),
            report,
            fingerprint: self.fingerprint,
        })
    }

    /// Forward problem: `a(σ,(u,U),(v,V)) = ⟨I, V⟩`.
    pub fn solve_forward(&self, current: &CurrentPattern) -> Result<StateSolution> {
        if current.len() != self.num_electrodes() {
            return Err(Error::Config(format!(
                "current pattern has {} entries for {} electrodes",
                current.len(),
                self.num_electrodes()
            )));
        }
        self.solve_with_loads(None, Some(current.values()))
    }

    /// Adjoint problem: `a(σ,(p,P),(v,V)) = ⟨r, V⟩` with `r = U(σ) − U^δ`.
    /// A residual with a small nonzero sum is projected onto `R^L_⋄`.
    pub fn solve_adjoint(&self, residual: &[f64]) -> Result<AdjointSolution> {
        if residual.len() != self.num_electrodes() {
            return Err(Error::Config("adjoint data has the wrong length".into()));
        }
        let l = residual.len() as f64;
        let sum: f64 = residual.iter().sum();
        let scale = linalg::max_abs(residual);
        if sum.abs() > 1e-8 * scale * l {
            return Err(Error::Config(format!("adjoint data sums to {sum:e}, not zero")));
        }
        let projected: Vec<f64> = residual.iter().map(|r| r - sum / l).collect();
        self.solve_with_loads(None, Some(&projected))
    }
}

/// `‖(u, U)‖_H = (‖u‖²_{H¹} + ‖U‖²)^{1/2}`
pub fn h_norm(mesh: &Mesh, sol: &CemSolution) -> f64 {
    (mesh.l2_norm_sq(&sol.nodal) + mesh.grad_norm_sq(&sol.nodal) + linalg::dot(&sol.voltages, &sol.voltages)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityReport {
    /// `‖(u,U)‖_H + ‖(p,P)‖_H`
    pub solution_norm: f64,
    /// `‖I‖ + ‖U^δ‖`
    pub data_norm: f64,
    /// Ratio of the two; 0 when both vanish.
    pub ratio: f64,
}

/// Both sides of the a priori bound `‖(u,U)‖_H + ‖(p,P)‖_H ≤ c(‖I‖ + ‖U^δ‖)`.
pub fn stability_check(
    mesh: &Mesh,
    state: &CemSolution,
    adjoint: &CemSolution,
    current: &CurrentPattern,
    data: &[f64],
) -> StabilityReport {
    let solution_norm = h_norm(mesh, state) + h_norm(mesh, adjoint);
    let data_norm = linalg::norm(current.values()) + linalg::norm(data);
    let ratio = if data_norm > 0.0 { solution_norm / data_norm } else { 0.0 };
    StabilityReport {
        solution_norm,
        data_norm,
        ratio,
    }
}
