//! Majorization-minimization / Gauss-Newton solver for the box-constrained
//! discrete problem.
//!
//! Each outer step linearizes the forward map and replaces the double well
//! `W = p²`, `p(z) = (z − c0)(z − c1)`, by the square of its first-order
//! expansion. The resulting normal equations
//!
//! `(U'*U' δσ, φ) + α̃ε(∇δσ, ∇φ) + (α̃/ε)(p'(σ_k)² δσ, φ)
//!     = (U'*δU, φ) − (α̃/ε)(p(σ_k)p'(σ_k), φ) − α̃ε(∇σ_k, ∇φ)`
//!
//! are solved by CG preconditioned with a sparse Cholesky factor of the
//! regularization part. The update is projected onto `[c0, c1]` with a
//! backtracking line search on `J_ε`.

use serde::{Deserialize, Serialize};

use crate::cem::{assemble_stiffness, CemSolution, CemSystem, CurrentPattern, LinearSolver};
use crate::error::{Error, Result};
use crate::interp;
use crate::linalg::{self, pcg, CgConfig, CgOutcome, Cholesky, CsrMatrix, LinearOperator};
use crate::mesh::Mesh;
use crate::objective::{
    nodal_load, objective, project_box, stiffness_action, ConductivityField, ObjectiveValue, RegularizationParams,
};
use crate::quadrature::{eval_p1, DEGREE4};

/// `p(z) = (z − c0)(z − c1)`
pub fn well_factor(z: f64, c0: f64, c1: f64) -> f64 {
    (z - c0) * (z - c1)
}

/// `p'(z) = 2z − c0 − c1`
pub fn well_factor_derivative(z: f64, c0: f64, c1: f64) -> f64 {
    2.0 * z - c0 - c1
}

/// `p_L(z, z_k) = p(z_k) + p'(z_k)(z − z_k)`
pub fn linearize_well(z: f64, z_k: f64, c0: f64, c1: f64) -> f64 {
    well_factor(z_k, c0, c1) + well_factor_derivative(z_k, c0, c1) * (z - z_k)
}

/// `∫_Ω p_L(σ_k, σ_k)²`, the surrogate well term at its expansion point.
pub fn surrogate_well_integral(mesh: &Mesh, sigma: &[f64], params: &RegularizationParams) -> f64 {
    (0..mesh.num_elements())
        .map(|t| {
            let s = mesh.local_values(t, sigma);
            DEGREE4.integrate(mesh.area(t), |lam| {
                let z = eval_p1(s, lam);
                linearize_well(z, z, params.c0, params.c1).powi(2)
            })
        })
        .sum()
}

fn check_current(system: &CemSystem, state: &CemSolution) -> Result<()> {
    if state.fingerprint != system.fingerprint() {
        return Err(Error::Stale);
    }
    Ok(())
}

/// `−(δσ ∇u, ∇φ_i)` for all nodes (`δσ` P1, `∇u` elementwise constant).
fn sensitivity_rhs(mesh: &Mesh, u: &[f64], delta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_elements() {
        let g = mesh.geometry(t);
        let d = mesh.local_values(t, delta);
        let mean = (d[0] + d[1] + d[2]) / 3.0;
        let gu = g.gradient(mesh.local_values(t, u));
        for (i, &v) in mesh.element(t).vertices.iter().enumerate() {
            out[v] -= mean * g.area * (gu[0] * g.grads[i][0] + gu[1] * g.grads[i][1]);
        }
    }
    out
}

/// `−(φ_i ∇u, ∇p)` for all nodes.
fn coupling_load(mesh: &Mesh, u: &[f64], p: &[f64]) -> Vec<f64> {
    crate::objective::sensitivity_load(mesh, &[(u, p)])
}

/// Directional derivative `U'(σ)δσ`: solves `a(σ,(w,W),(v,V)) = −(δσ∇u,∇v)`.
pub fn jacobian_action(mesh: &Mesh, system: &CemSystem, state: &CemSolution, delta: &[f64]) -> Result<Vec<f64>> {
    check_current(system, state)?;
    let rhs = sensitivity_rhs(mesh, &state.nodal, delta);
    Ok(system.solve_with_loads(Some(&rhs), None)?.voltages)
}

/// `U'(σ)* d` as a nodal dual vector: `−(φ_i ∇u, ∇p_d)` with `p_d` the adjoint for data `d`.
pub fn adjoint_action(mesh: &Mesh, system: &CemSystem, state: &CemSolution, d: &[f64]) -> Result<Vec<f64>> {
    check_current(system, state)?;
    let p = system.solve_adjoint(d)?;
    Ok(coupling_load(mesh, &state.nodal, &p.nodal))
}

/// Dense sensitivity rows `⟨U'_j(σ) ·, q_k⟩` for every pattern `j` and
/// sum-zero basis vector `q_k`, built from `L − 1` adjoint (lead) fields.
pub struct Sensitivity {
    rows: Vec<Vec<f64>>,
    n: usize,
}

impl Sensitivity {
    pub fn build(mesh: &Mesh, system: &CemSystem, states: &[CemSolution]) -> Result<Self> {
        for s in states {
            check_current(system, s)?;
        }
        let l = system.num_electrodes();
        let leads: Vec<CemSolution> = (0..l - 1)
            .map(|k| {
                let qk: Vec<f64> = system.basis().iter().map(|row| row[k]).collect();
                system.solve_with_loads(None, Some(&qk))
            })
            .collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(states.len() * leads.len());
        for s in states {
            for lead in &leads {
                rows.push(coupling_load(mesh, &s.nodal, &lead.nodal));
            }
        }
        Ok(Self {
            rows,
            n: mesh.num_vertices(),
        })
    }

    /// Stacked coefficients of `U'_j δσ` in the orthonormal sum-zero basis.
    pub fn apply(&self, delta: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| linalg::dot(r, delta)).collect()
    }

    pub fn apply_transpose(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, &ci) in self.rows.iter().zip(c) {
            if ci != 0.0 {
                for (o, ri) in out.iter_mut().zip(r) {
                    *o += ci * ri;
                }
            }
        }
        out
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
}

/// `(w(σ) φ_i, φ_j)` with the degree-4 rule.
pub fn weighted_mass(mesh: &Mesh, sigma: &[f64], weight: impl Fn(f64) -> f64) -> CsrMatrix {
    let n = mesh.num_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.num_elements());
    for t in 0..mesh.num_elements() {
        let s = mesh.local_values(t, sigma);
        let v = mesh.element(t).vertices;
        for i in 0..3 {
            for j in 0..3 {
                let m = DEGREE4.integrate(mesh.area(t), |lam| weight(eval_p1(s, lam)) * lam[i] * lam[j]);
                trip.push((v[i], v[j], m));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

fn add_scaled(a: &CsrMatrix, alpha: f64, b: &CsrMatrix, beta: f64) -> CsrMatrix {
    let trip: Vec<(usize, usize, f64)> = a
        .iter()
        .map(|(r, c, v)| (r, c, alpha * v))
        .chain(b.iter().map(|(r, c, v)| (r, c, beta * v)))
        .collect();
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), &trip)
}

/// `δσ ↦ U'*U' δσ + α̃ε K δσ + (α̃/ε) M_{p'(σ_k)²} δσ`
pub struct SurrogateOperator {
    pub sensitivity: Sensitivity,
    /// `α̃ε K + (α̃/ε) M_{p'(σ_k)²}`, also the preconditioner pattern.
    pub regularization: CsrMatrix,
}

impl LinearOperator for SurrogateOperator {
    fn dim(&self) -> usize {
        self.regularization.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.regularization.matvec(x, y);
        let c = self.sensitivity.apply(x);
        let jt = self.sensitivity.apply_transpose(&c);
        for (yi, ji) in y.iter_mut().zip(jt) {
            *yi += ji;
        }
    }
}

pub struct SurrogateProblem {
    pub operator: SurrogateOperator,
    pub rhs: Vec<f64>,
    mass: CsrMatrix,
    shift: f64,
    /// Nodes held at their current value (`δσ_i = 0`).
    fixed: Vec<bool>,
}

impl SurrogateProblem {
    /// Assembles the normal equations at `σ_k` from current forward solutions.
    pub fn build(
        mesh: &Mesh,
        sigma: &ConductivityField,
        system: &CemSystem,
        states: &[CemSolution],
        data: &[Vec<f64>],
        params: &RegularizationParams,
    ) -> Result<Self> {
        if states.len() != data.len() {
            return Err(Error::Config(format!("{} states for {} data sets", states.len(), data.len())));
        }
        if system.fingerprint() != sigma.fingerprint() {
            return Err(Error::Stale);
        }
        let (c0, c1) = (params.c0, params.c1);
        let (a, eps) = (params.alpha_tilde, params.epsilon);
        let s = sigma.values();
        let sensitivity = Sensitivity::build(mesh, system, states)?;
        let ones = vec![1.0; s.len()];
        let stiffness = assemble_stiffness(mesh, &ones);
        let well_mass = weighted_mass(mesh, s, |z| well_factor_derivative(z, c0, c1).powi(2));
        let regularization = add_scaled(&stiffness, a * eps, &well_mass, a / eps);

        let mut coeffs = Vec::with_capacity(sensitivity.num_rows());
        for (st, d) in states.iter().zip(data) {
            let residual: Vec<f64> = d.iter().zip(&st.voltages).map(|(x, y)| x - y).collect();
            coeffs.extend(system.reduce_voltages(&residual));
        }
        let data_term = sensitivity.apply_transpose(&coeffs);
        let well_term = nodal_load(mesh, s, |z| well_factor(z, c0, c1) * well_factor_derivative(z, c0, c1));
        let grad_term = stiffness_action(mesh, s);
        let rhs: Vec<f64> = (0..s.len())
            .map(|i| data_term[i] - a / eps * well_term[i] - a * eps * grad_term[i])
            .collect();
        let mass = weighted_mass(mesh, s, |_| 1.0);
        let shift = 1e-8 * (a / eps * (c1 - c0).powi(2)).max(1e-8);
        Ok(Self {
            operator: SurrogateOperator {
                sensitivity,
                regularization,
            },
            fixed: vec![false; rhs.len()],
            rhs,
            mass,
            shift,
        })
    }

    /// Holds the nodes with `fixed[i]` at zero update; the system is solved
    /// on the remaining nodes.
    pub fn fix_nodes(&mut self, fixed: Vec<bool>) {
        assert_eq!(fixed.len(), self.rhs.len());
        self.fixed = fixed;
    }

    /// Marks the nodes on a bound whose gradient `−rhs` points out of the box.
    pub fn fix_active_bounds(&mut self, sigma: &[f64], c0: f64, c1: f64) {
        let tol = 1e-12 * (c1 - c0);
        let fixed = sigma
            .iter()
            .zip(&self.rhs)
            .map(|(&s, &r)| (s <= c0 + tol && r < 0.0) || (s >= c1 - tol && r > 0.0))
            .collect();
        self.fix_nodes(fixed);
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    /// Sparse preconditioner matrix: the regularization part plus a small
    /// mass shift so it stays definite where `p'(σ_k)` vanishes.
    pub fn preconditioner_matrix(&self) -> CsrMatrix {
        let m = add_scaled(&self.operator.regularization, 1.0, &self.mass, self.shift);
        if !self.fixed.iter().any(|&f| f) {
            return m;
        }
        let trip: Vec<(usize, usize, f64)> = m
            .iter()
            .filter(|&(r, c, _)| !self.fixed[r] && !self.fixed[c])
            .chain(self.fixed.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| (i, i, 1.0)))
            .collect();
        CsrMatrix::from_triplets(m.nrows(), m.ncols(), &trip)
    }
}

/// `P A P + (I − P)` with `P` the projection onto free nodes.
struct RestrictedOperator<'a> {
    inner: &'a SurrogateOperator,
    fixed: &'a [bool],
}

impl LinearOperator for RestrictedOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let xf: Vec<f64> = x.iter().zip(self.fixed).map(|(&v, &f)| if f { 0.0 } else { v }).collect();
        self.inner.apply(&xf, y);
        for ((yi, &xi), &f) in y.iter_mut().zip(x).zip(self.fixed) {
            if f {
                *yi = xi;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SurrogateSolution {
    pub delta: Vec<f64>,
    pub outcome: CgOutcome,
    /// CG stopped before reaching the tolerance; `delta` is its best iterate.
    pub stagnated: bool,
}

pub fn solve_surrogate(problem: &SurrogateProblem, config: CgConfig) -> Result<SurrogateSolution> {
    let precond = Cholesky::factor(&problem.preconditioner_matrix())?;
    let mut delta = vec![0.0; problem.rhs.len()];
    let outcome = if problem.fixed.iter().any(|&f| f) {
        let rhs: Vec<f64> = problem
            .rhs
            .iter()
            .zip(&problem.fixed)
            .map(|(&r, &f)| if f { 0.0 } else { r })
            .collect();
        let op = RestrictedOperator {
            inner: &problem.operator,
            fixed: &problem.fixed,
        };
        pcg(&op, &precond, &rhs, &mut delta, config)
    } else {
        pcg(&problem.operator, &precond, &problem.rhs, &mut delta, config)
    };
    Ok(SurrogateSolution {
        delta,
        stagnated: !outcome.converged,
        outcome,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmConfig {
    pub max_outer: usize,
    /// Stop when `‖σ_{k+1} − σ_k‖_∞ < step_tolerance · (c1 − c0)`.
    pub step_tolerance: f64,
    pub inner_tolerance: f64,
    pub inner_max_iterations: usize,
    /// Step sizes tried are `1, 1/2, …, 2^-max_backtracks`.
    pub max_backtracks: u32,
    /// Hold nodes on a bound whose gradient points outward fixed in the
    /// Gauss-Newton system (projected Newton). Without it the projected
    /// update often fails to descend once nodes sit on the bounds.
    pub freeze_active_bounds: bool,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self {
            max_outer: 50,
            step_tolerance: 1e-4,
            inner_tolerance: 1e-8,
            inner_max_iterations: 500,
            max_backtracks: 10,
            freeze_active_bounds: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmStatus {
    Running,
    Converged,
    /// No step size decreased the objective.
    Stalled,
    MaxIterations,
}

/// Data of one reconstruction problem on a fixed mesh.
pub struct Problem<'a> {
    pub mesh: &'a Mesh,
    pub currents: &'a [CurrentPattern],
    pub data: &'a [Vec<f64>],
    pub params: RegularizationParams,
    pub solver: LinearSolver,
}

/// Forward solutions and objective at one conductivity.
pub struct Evaluation {
    pub system: CemSystem,
    pub states: Vec<CemSolution>,
    pub objective: ObjectiveValue,
}

impl Problem<'_> {
    pub fn evaluate(&self, sigma: &ConductivityField) -> Result<Evaluation> {
        if self.currents.len() != self.data.len() {
            return Err(Error::Config(format!(
                "{} current patterns for {} data sets",
                self.currents.len(),
                self.data.len()
            )));
        }
        let system = CemSystem::assemble(self.mesh, sigma, self.solver)?;
        let states = self
            .currents
            .iter()
            .map(|c| system.solve_forward(c))
            .collect::<Result<Vec<_>>>()?;
        let objective = objective(self.mesh, sigma, &states, self.data, &self.params)?;
        Ok(Evaluation {
            system,
            states,
            objective,
        })
    }

    pub fn adjoints(&self, eval: &Evaluation) -> Result<Vec<CemSolution>> {
        eval.states
            .iter()
            .zip(self.data)
            .map(|(s, d)| {
                let r: Vec<f64> = s.voltages.iter().zip(d).map(|(u, x)| u - x).collect();
                eval.system.solve_adjoint(&r)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmState {
    pub sigma: ConductivityField,
    pub iteration: usize,
    pub objective: ObjectiveValue,
    pub status: MmStatus,
    /// Accepted step size (0 when no step was taken).
    pub step: f64,
    pub pcg_iterations: usize,
    pub pcg_residual: f64,
}

/// One row of the optimizer log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub outer: usize,
    pub objective: f64,
    pub fidelity: f64,
    pub penalty: f64,
    pub step: f64,
    pub pcg_iterations: usize,
    pub pcg_residual: f64,
}

impl From<&MmState> for IterationLog {
    fn from(s: &MmState) -> Self {
        Self {
            outer: s.iteration,
            objective: s.objective.total,
            fidelity: s.objective.fidelity,
            penalty: s.objective.penalty,
            step: s.step,
            pcg_iterations: s.pcg_iterations,
            pcg_residual: s.pcg_residual,
        }
    }
}

/// One projected, backtracked MM step from `state` (whose evaluation is `eval`).
pub fn mm_step(problem: &Problem, state: &MmState, eval: Evaluation, config: &MmConfig) -> Result<(MmState, Evaluation)> {
    let params = &problem.params;
    let mut surrogate =
        SurrogateProblem::build(problem.mesh, &state.sigma, &eval.system, &eval.states, problem.data, params)?;
    if config.freeze_active_bounds {
        surrogate.fix_active_bounds(state.sigma.values(), params.c0, params.c1);
    }
    let sol = solve_surrogate(
        &surrogate,
        CgConfig {
            tolerance: config.inner_tolerance,
            max_iterations: config.inner_max_iterations,
        },
    )?;
    let tol = config.step_tolerance * (params.c1 - params.c0);
    let mut next = MmState {
        sigma: state.sigma.clone(),
        iteration: state.iteration + 1,
        objective: state.objective,
        status: MmStatus::Running,
        step: 0.0,
        pcg_iterations: sol.outcome.iterations,
        pcg_residual: sol.outcome.relative_residual,
    };
    if linalg::max_abs(&sol.delta) < tol {
        next.status = MmStatus::Converged;
        return Ok((next, eval));
    }
    let current = state.sigma.values();
    let mut s = 1.0;
    for _ in 0..=config.max_backtracks {
        let trial: Vec<f64> = current.iter().zip(&sol.delta).map(|(x, d)| x + s * d).collect();
        let trial = project_box(&trial, params.c0, params.c1);
        let change = current
            .iter()
            .zip(trial.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if change == 0.0 {
            break;
        }
        let trial_eval = problem.evaluate(&trial)?;
        if trial_eval.objective.total < state.objective.total {
            next.sigma = trial;
            next.objective = trial_eval.objective;
            next.step = s;
            if change < tol {
                next.status = MmStatus::Converged;
            }
            return Ok((next, trial_eval));
        }
        s *= 0.5;
    }
    next.status = MmStatus::Stalled;
    Ok((next, eval))
}

/// Result of minimizing on one mesh.
pub struct MmOutcome {
    pub sigma: ConductivityField,
    pub states: Vec<CemSolution>,
    pub adjoints: Vec<CemSolution>,
    pub objective: ObjectiveValue,
    pub status: MmStatus,
    pub history: Vec<IterationLog>,
}

/// Runs MM steps from `sigma0` until convergence, stall or `max_outer`.
/// `history[0]` is the starting point.
pub fn minimize(problem: &Problem, sigma0: ConductivityField, config: &MmConfig) -> Result<MmOutcome> {
    let params = &problem.params;
    let sigma0 = project_box(sigma0.values(), params.c0, params.c1);
    let mut eval = problem.evaluate(&sigma0)?;
    let mut state = MmState {
        sigma: sigma0,
        iteration: 0,
        objective: eval.objective,
        status: MmStatus::Running,
        step: 0.0,
        pcg_iterations: 0,
        pcg_residual: 0.0,
    };
    let mut history = vec![IterationLog::from(&state)];
    while state.status == MmStatus::Running {
        if state.iteration >= config.max_outer {
            state.status = MmStatus::MaxIterations;
            break;
        }
        let (next, next_eval) = mm_step(problem, &state, eval, config)?;
        state = next;
        eval = next_eval;
        history.push(IterationLog::from(&state));
    }
    let adjoints = problem.adjoints(&eval)?;
    Ok(MmOutcome {
        objective: state.objective,
        sigma: state.sigma,
        states: eval.states,
        adjoints,
        status: state.status,
        history,
    })
}

/// Transfers a conductivity to a mesh nested in its own, keeping it in `[c0, c1]`.
pub fn warm_start(
    old_mesh: &Mesh,
    sigma: &ConductivityField,
    new_mesh: &Mesh,
    c0: f64,
    c1: f64,
) -> Result<ConductivityField> {
    interp::check_nested(old_mesh, new_mesh)?;
    let values = interp::lagrange_interp(old_mesh, sigma.values(), new_mesh)?;
    Ok(project_box(&values, c0, c1))
}
