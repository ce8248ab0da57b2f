//! Independent reference implementations used as test oracles. Nothing here
//! calls the crate's assembly, quadrature or solvers.
#![allow(dead_code)]

use std::collections::BTreeMap;

use eit_afem::mesh::{build_initial_mesh, ElectrodeLayout, Mesh, Point, Rectangle};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Gauss-Legendre nodes and weights on `[0, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

/// `∫_T f` by the collapsed (Duffy) tensor Gauss-Legendre rule with `n²` points.
pub fn duffy_integrate(p: [Point; 3], n: usize, f: impl Fn(Point) -> f64) -> f64 {
    let area2 = ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
    let gl = gauss_legendre(n);
    let mut s = 0.0;
    for &(u, wu) in &gl {
        for &(v, wv) in &gl {
            let x = [
                p[0][0] + u * (p[1][0] - p[0][0]) + u * v * (p[2][0] - p[1][0]),
                p[0][1] + u * (p[1][1] - p[0][1]) + u * v * (p[2][1] - p[1][1]),
            ];
            s += wu * wv * u * f(x);
        }
    }
    s * area2
}

/// `∫_0^1 f` on a segment `a → b` with the `n`-point rule, scaled by length.
pub fn segment_integrate(a: Point, b: Point, n: usize, f: impl Fn(Point) -> f64) -> f64 {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    gauss_legendre(n)
        .iter()
        .map(|&(t, w)| w * f([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]))
        .sum::<f64>()
        * len
}

/// Barycentric coordinate functions of a triangle as `(gradients, evaluator)`.
pub struct P1Triangle {
    pub p: [Point; 3],
    pub grads: [[f64; 2]; 3],
    pub area: f64,
}

impl P1Triangle {
    pub fn new(p: [Point; 3]) -> Self {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut grads = [[0.0; 2]; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            grads[i] = [(p[j][1] - p[k][1]) / det, (p[k][0] - p[j][0]) / det];
        }
        Self {
            p,
            grads,
            area: 0.5 * det.abs(),
        }
    }

    pub fn lambda(&self, x: Point) -> [f64; 3] {
        let mut l = [0.0; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            l[i] = self.grads[i][0] * (x[0] - self.p[j][0]) + self.grads[i][1] * (x[1] - self.p[j][1]);
        }
        l
    }

    pub fn eval(&self, vals: [f64; 3], x: Point) -> f64 {
        let l = self.lambda(x);
        l[0] * vals[0] + l[1] * vals[1] + l[2] * vals[2]
    }

    pub fn gradient(&self, vals: [f64; 3]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for i in 0..3 {
            g[0] += vals[i] * self.grads[i][0];
            g[1] += vals[i] * self.grads[i][1];
        }
        g
    }
}

pub fn tri(mesh: &Mesh, t: usize) -> P1Triangle {
    let v = mesh.element(t).vertices;
    P1Triangle::new([mesh.vertex(v[0]), mesh.vertex(v[1]), mesh.vertex(v[2])])
}

pub fn local(mesh: &Mesh, t: usize, f: &[f64]) -> [f64; 3] {
    mesh.element(t).vertices.map(|v| f[v])
}

/// Counterclockwise arclength from the lower-left corner of a rectangle.
pub fn arclength(d: &Rectangle, p: Point) -> f64 {
    let (w, h) = (d.x_max - d.x_min, d.y_max - d.y_min);
    let tol = 1e-12;
    if (p[1] - d.y_min).abs() < tol {
        p[0] - d.x_min
    } else if (p[0] - d.x_max).abs() < tol {
        w + (p[1] - d.y_min)
    } else if (p[1] - d.y_max).abs() < tol {
        w + h + (d.x_max - p[0])
    } else {
        2.0 * w + h + (d.y_max - p[1])
    }
}

/// Boundary edges `(a, b, element)` found by counting element edge uses.
pub fn brute_edges(mesh: &Mesh) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (t, e) in mesh.elements().iter().enumerate() {
        let v = e.vertices;
        for k in 0..3 {
            let (a, b) = (v[k], v[(k + 1) % 3]);
            map.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    map
}

/// Electrode containing the midpoint of boundary edge `(a, b)`, by geometry.
pub fn edge_electrode(mesh: &Mesh, a: usize, b: usize) -> Option<usize> {
    let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
    let s = arclength(mesh.domain(), mid);
    let per = 2.0 * (mesh.domain().width() + mesh.domain().height());
    mesh.layout().segments().iter().position(|seg| {
        let (lo, hi) = (seg[0], seg[1]);
        (s > lo && s < hi) || (s + per > lo && s + per < hi) || (s - per > lo && s - per < hi)
    })
}

/// Dense CEM solve with a Lagrange multiplier for `Σ U = 0`: unknowns
/// `(u, U, λ)`, load `⟨I, V⟩` on the electrode rows plus optional nodal load.
pub fn dense_cem(mesh: &Mesh, sigma: &[f64], current: &[f64], nodal_load: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let n = mesh.num_vertices();
    let l = mesh.num_electrodes();
    let z = mesh.layout().impedances();
    let dim = n + l + 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for t in 0..mesh.num_elements() {
        let tr = tri(mesh, t);
        let v = mesh.element(t).vertices;
        let s = local(mesh, t, sigma);
        for i in 0..3 {
            for j in 0..3 {
                let g = tr.grads[i][0] * tr.grads[j][0] + tr.grads[i][1] * tr.grads[j][1];
                a[(v[i], v[j])] += duffy_integrate(tr.p, 4, |x| tr.eval(s, x)) * g;
            }
        }
    }
    for ((va, vb), elems) in brute_edges(mesh) {
        if elems.len() != 1 {
            continue;
        }
        let Some(e) = edge_electrode(mesh, va, vb) else { continue };
        let (pa, pb) = (mesh.vertex(va), mesh.vertex(vb));
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let phi = |k: usize, x: Point| {
            let t = ((x[0] - pa[0]) * (pb[0] - pa[0]) + (x[1] - pa[1]) * (pb[1] - pa[1])) / (len * len);
            if k == 0 {
                1.0 - t
            } else {
                t
            }
        };
        let ids = [va, vb];
        for i in 0..2 {
            for j in 0..2 {
                a[(ids[i], ids[j])] += segment_integrate(pa, pb, 3, |x| phi(i, x) * phi(j, x)) / z[e];
            }
            let c = segment_integrate(pa, pb, 3, |x| phi(i, x)) / z[e];
            a[(ids[i], n + e)] -= c;
            a[(n + e, ids[i])] -= c;
        }
        a[(n + e, n + e)] += len / z[e];
    }
    for k in 0..l {
        a[(n + k, n + l)] = 1.0;
        a[(n + l, n + k)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(dim);
    for k in 0..l {
        b[n + k] = current[k];
    }
    if let Some(f) = nodal_load {
        for i in 0..n {
            b[i] = f[i];
        }
    }
    let x = a.lu().solve(&b).expect("dense CEM system is singular");
    (x.rows(0, n).iter().copied().collect(), x.rows(n, l).iter().copied().collect())
}

/// Smallest `k` such that some `k`-subset carries `θ` of the total, by enumeration.
pub fn min_cover_size(values: &[f64], theta: f64) -> usize {
    let total: f64 = values.iter().sum();
    let n = values.len();
    let mut best = n;
    for mask in 0u32..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| values[i]).sum();
        if s >= theta * total {
            best = best.min(mask.count_ones() as usize);
        }
    }
    best
}

pub fn random_field(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

pub fn random_sum_zero(rng: &mut impl Rng, l: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..1.0)).collect();
    let m = v.iter().sum::<f64>() / l as f64;
    v.iter_mut().for_each(|x| *x -= m);
    v
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The paper layout: 16 electrodes of length 1/4 on `(−1, 1)²`, unit impedances.
pub fn paper_layout() -> ElectrodeLayout {
    ElectrodeLayout::evenly_spaced(&Rectangle::symmetric_square(), 16, 0.25, 1.0).unwrap()
}

pub fn paper_mesh() -> Mesh {
    build_initial_mesh(Rectangle::symmetric_square(), paper_layout(), 16).unwrap()
}

/// 4 electrodes of length 1/2 centred on the sides of `(−1, 1)²`, on an `n0 × n0` mesh.
pub fn small_mesh(n0: usize) -> Mesh {
    let d = Rectangle::symmetric_square();
    let layout = ElectrodeLayout::evenly_spaced(&d, 4, 0.5, 1.0).unwrap();
    build_initial_mesh(d, layout, n0).unwrap()
}
