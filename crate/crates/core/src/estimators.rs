//! Residual indicators for the state (`η₁²`), adjoint (`η₂²`) and the
//! variational inequality (`η₃^q`).
//!
//! Face contributions enter both neighbouring elements.

use crate::cem::CemSolution;
use crate::error::{Error, Result};
use crate::mesh::{FaceKind, Mesh};
use crate::objective::{ConductivityField, RegularizationParams};
use crate::quadrature::{eval_p1, DEGREE6, GAUSS2};

#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorTable {
    pub eta1_sq: Vec<f64>,
    pub eta2_sq: Vec<f64>,
    pub eta3_q: Vec<f64>,
    pub q: f64,
}

impl IndicatorTable {
    pub fn len(&self) -> usize {
        self.eta1_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta1_sq.is_empty()
    }

    /// `(Σ η₁², Σ η₂², Σ η₃^q)`
    pub fn totals(&self) -> (f64, f64, f64) {
        (self.eta1_sq.iter().sum(), self.eta2_sq.iter().sum(), self.eta3_q.iter().sum())
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `R_{T,1} = ∇·(σ∇w) = ∇σ·∇w`, constant on `T` for P1 data.
pub fn residual_r1(mesh: &Mesh, t: usize, sigma: &[f64], w: &[f64]) -> f64 {
    let g = mesh.geometry(t);
    dot(g.gradient(mesh.local_values(t, sigma)), g.gradient(mesh.local_values(t, w)))
}

/// `J_{F,1}` at the two face endpoints (it is linear along `F`).
///
/// Interior: `[σ∇w·n_F]`; electrode `l`: `σ∇w·n + (w − W_l)/z_l`;
/// insulated: `σ∇w·n`.
pub fn jump_j1(mesh: &Mesh, f: usize, sigma: &[f64], w: &[f64], voltages: &[f64]) -> [f64; 2] {
    let face = mesh.face(f);
    let n = face.normal;
    let grad = |t: usize| mesh.geometry(t).gradient(mesh.local_values(t, w));
    let flux = match face.right {
        Some(r) => dot(grad(face.left), n) - dot(grad(r), n),
        None => dot(grad(face.left), n),
    };
    face.vertices.map(|v| {
        let mut j = sigma[v] * flux;
        if let FaceKind::Electrode(l) = face.kind {
            j += (w[v] - voltages[l]) / mesh.layout().impedances()[l];
        }
        j
    })
}

/// `J_{F,2} = α̃ε[∇σ·n_F]` (interior) or `α̃ε∇σ·n` (boundary); constant on `F`.
pub fn jump_j2(mesh: &Mesh, f: usize, sigma: &[f64], params: &RegularizationParams) -> f64 {
    let face = mesh.face(f);
    let grad = |t: usize| mesh.geometry(t).gradient(mesh.local_values(t, sigma));
    let jump = match face.right {
        Some(r) => dot(grad(face.left), face.normal) - dot(grad(r), face.normal),
        None => dot(grad(face.left), face.normal),
    };
    params.alpha_tilde * params.epsilon * jump
}

/// `‖g‖²_{L²(F)}` of a linear face function given by endpoint values.
pub fn face_l2_sq(length: f64, ends: [f64; 2]) -> f64 {
    GAUSS2
        .iter()
        .map(|&(s, w)| {
            let v = ends[0] * (1.0 - s) + ends[1] * s;
            w * v * v
        })
        .sum::<f64>()
        * length
}

/// `∫_T |R_{T,2}|^q` with `R_{T,2} = (α̃/2ε)W'(σ) − Σ_j ∇u_j·∇p_j`, by the degree-6 rule
/// (exact for `q = 2`).
pub fn residual_r2(
    mesh: &Mesh,
    t: usize,
    sigma: &[f64],
    pairs: &[(&[f64], &[f64])],
    params: &RegularizationParams,
    q: f64,
) -> f64 {
    let g = mesh.geometry(t);
    let coupling: f64 = pairs
        .iter()
        .map(|(u, p)| dot(g.gradient(mesh.local_values(t, u)), g.gradient(mesh.local_values(t, p))))
        .sum();
    let s = mesh.local_values(t, sigma);
    let scale = params.alpha_tilde / (2.0 * params.epsilon);
    DEGREE6.integrate(g.area, |lam| {
        let r = scale * params.double_well_derivative(eval_p1(s, lam)) - coupling;
        if q == 2.0 {
            r * r
        } else {
            r.abs().powf(q)
        }
    })
}

/// The three indicators on every element. States and adjoints are paired by
/// current pattern and summed.
pub fn compute_indicators(
    mesh: &Mesh,
    sigma: &ConductivityField,
    states: &[CemSolution],
    adjoints: &[CemSolution],
    params: &RegularizationParams,
    q: f64,
) -> Result<IndicatorTable> {
    if states.len() != adjoints.len() {
        return Err(Error::Config(format!("{} states but {} adjoints", states.len(), adjoints.len())));
    }
    if !(q >= 1.0) {
        return Err(Error::Config(format!("indicator exponent must be at least 1, got {q}")));
    }
    let fp = sigma.fingerprint();
    if states.iter().chain(adjoints).any(|s| s.fingerprint != fp) {
        return Err(Error::Stale);
    }
    let s = sigma.values();
    let nf = mesh.faces().len();
    let mut face1 = vec![0.0; nf];
    let mut face2 = vec![0.0; nf];
    let mut face3 = vec![0.0; nf];
    for f in 0..nf {
        let h = mesh.face_size(f)?;
        let len = mesh.face(f).length;
        for st in states {
            face1[f] += h * face_l2_sq(len, jump_j1(mesh, f, s, &st.nodal, &st.voltages));
        }
        for ad in adjoints {
            face2[f] += h * face_l2_sq(len, jump_j1(mesh, f, s, &ad.nodal, &ad.voltages));
        }
        face3[f] = h * jump_j2(mesh, f, s, params).abs().powf(q) * len;
    }
    let pairs: Vec<(&[f64], &[f64])> = states
        .iter()
        .zip(adjoints)
        .map(|(u, p)| (u.nodal.as_slice(), p.nodal.as_slice()))
        .collect();
    let ne = mesh.num_elements();
    let mut table = IndicatorTable {
        eta1_sq: vec![0.0; ne],
        eta2_sq: vec![0.0; ne],
        eta3_q: vec![0.0; ne],
        q,
    };
    for t in 0..ne {
        let h = mesh.element_size(t)?;
        let area = mesh.area(t);
        let faces = mesh.element_faces(t);
        let r1_state: f64 = states.iter().map(|st| residual_r1(mesh, t, s, &st.nodal).powi(2)).sum();
        let r1_adj: f64 = adjoints.iter().map(|ad| residual_r1(mesh, t, s, &ad.nodal).powi(2)).sum();
        table.eta1_sq[t] = h * h * r1_state * area + faces.iter().map(|&f| face1[f]).sum::<f64>();
        table.eta2_sq[t] = h * h * r1_adj * area + faces.iter().map(|&f| face2[f]).sum::<f64>();
        table.eta3_q[t] =
            h.powf(q) * residual_r2(mesh, t, s, &pairs, params, q) + faces.iter().map(|&f| face3[f]).sum::<f64>();
    }
    Ok(table)
}
