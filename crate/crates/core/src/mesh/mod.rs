//! Conforming triangle meshes of an axis-aligned rectangle with electrode
//! tagging of boundary faces and newest vertex bisection.

mod locate;
mod norms;
mod refine;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use locate::PointLocator;
pub use norms::p1_abs_integral;

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rectangle {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if !(x_max > x_min && y_max > y_min) || ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::Geometry(format!(
                "degenerate rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// The square `(-1, 1)²`.
    pub fn symmetric_square() -> Self {
        Self {
            x_min: -1.0,
            y_min: -1.0,
            x_max: 1.0,
            y_max: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    fn tol(&self) -> f64 {
        1e-12 * self.perimeter()
    }

    /// Counterclockwise arclength from the corner `(x_min, y_min)` of a
    /// boundary point, or `None` for points off the boundary.
    pub fn arclength(&self, p: Point) -> Option<f64> {
        let tol = self.tol();
        let (w, h) = (self.width(), self.height());
        if (p[1] - self.y_min).abs() <= tol {
            Some(p[0] - self.x_min)
        } else if (p[0] - self.x_max).abs() <= tol {
            Some(w + p[1] - self.y_min)
        } else if (p[1] - self.y_max).abs() <= tol {
            Some(w + h + self.x_max - p[0])
        } else if (p[0] - self.x_min).abs() <= tol {
            Some(2.0 * w + h + self.y_max - p[1])
        } else {
            None
        }
    }

    /// Boundary point at counterclockwise arclength `s`.
    pub fn point_at(&self, s: f64) -> Point {
        let (w, h) = (self.width(), self.height());
        let s = s.rem_euclid(self.perimeter());
        if s <= w {
            [self.x_min + s, self.y_min]
        } else if s <= w + h {
            [self.x_max, self.y_min + s - w]
        } else if s <= 2.0 * w + h {
            [self.x_max - (s - w - h), self.y_max]
        } else {
            [self.x_min, self.y_max - (s - 2.0 * w - h)]
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        let tol = self.tol();
        p[0] >= self.x_min - tol && p[0] <= self.x_max + tol && p[1] >= self.y_min - tol && p[1] <= self.y_max + tol
    }
}

/// Electrodes as boundary arcs `[start, end]` in counterclockwise arclength
/// from the corner `(x_min, y_min)`, with one contact impedance each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeLayout {
    segments: Vec<[f64; 2]>,
    impedances: Vec<f64>,
}

impl ElectrodeLayout {
    pub fn new(segments: Vec<[f64; 2]>, impedances: Vec<f64>) -> Result<Self> {
        if segments.len() != impedances.len() {
            return Err(Error::InvalidLayout(format!(
                "{} segments but {} contact impedances",
                segments.len(),
                impedances.len()
            )));
        }
        for (l, &z) in impedances.iter().enumerate() {
            if !(z > 0.0 && z.is_finite()) {
                return Err(Error::InvalidImpedance { electrode: l, value: z });
            }
        }
        for (l, s) in segments.iter().enumerate() {
            if !(s[0] >= 0.0 && s[1] > s[0]) {
                return Err(Error::InvalidLayout(format!("electrode {l} has empty or negative arc {s:?}")));
            }
        }
        let mut order: Vec<usize> = (0..segments.len()).collect();
        order.sort_by(|&a, &b| segments[a][0].total_cmp(&segments[b][0]));
        for w in order.windows(2) {
            if segments[w[0]][1] >= segments[w[1]][0] {
                return Err(Error::InvalidLayout(format!("electrodes {} and {} overlap", w[0], w[1])));
            }
        }
        Ok(Self { segments, impedances })
    }

    pub fn empty() -> Self {
        Self {
            segments: Vec::new(),
            impedances: Vec::new(),
        }
    }

    /// `count` electrodes of equal `length` centred at arclengths
    /// `(l + 1/2) P / count`, all with contact impedance `impedance`.
    pub fn evenly_spaced(domain: &Rectangle, count: usize, length: f64, impedance: f64) -> Result<Self> {
        let p = domain.perimeter();
        let period = p / count.max(1) as f64;
        let segments = (0..count)
            .map(|l| {
                let c = (l as f64 + 0.5) * period;
                [c - 0.5 * length, c + 0.5 * length]
            })
            .collect();
        let layout = Self::new(segments, vec![impedance; count])?;
        layout.check_fits(domain)?;
        Ok(layout)
    }

    fn check_fits(&self, domain: &Rectangle) -> Result<()> {
        let p = domain.perimeter();
        for (l, s) in self.segments.iter().enumerate() {
            if s[1] > p * (1.0 + 1e-14) {
                return Err(Error::InvalidLayout(format!("electrode {l} extends past the perimeter {p}")));
            }
        }
        if let (Some(first), Some(last)) = (
            self.segments.iter().map(|s| s[0]).min_by(f64::total_cmp),
            self.segments.iter().map(|s| s[1]).max_by(f64::total_cmp),
        ) {
            if self.segments.len() > 1 && last >= first + p {
                return Err(Error::InvalidLayout("first and last electrodes meet at the corner".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[[f64; 2]] {
        &self.segments
    }

    pub fn impedances(&self) -> &[f64] {
        &self.impedances
    }

    /// Replaces the contact impedances, keeping the geometry.
    pub fn with_impedances(&self, impedances: Vec<f64>) -> Result<Self> {
        Self::new(self.segments.clone(), impedances)
    }

    /// Electrode whose open arc contains arclength `s`.
    fn electrode_containing(&self, s: f64) -> Option<usize> {
        self.segments.iter().position(|seg| s > seg[0] && s < seg[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceKind {
    Interior,
    Electrode(usize),
    Insulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Element {
    /// Counterclockwise vertex ids.
    pub vertices: [usize; 3],
    /// Local index of the reference edge; local edge `e` is opposite vertex `e`.
    pub refinement_edge: u8,
    pub generation: u32,
}

impl Element {
    /// Endpoints of local edge `e` in counterclockwise order.
    pub fn edge(&self, e: usize) -> [usize; 2] {
        [self.vertices[(e + 1) % 3], self.vertices[(e + 2) % 3]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    /// Endpoints, counterclockwise with respect to `left`.
    pub vertices: [usize; 2],
    pub kind: FaceKind,
    pub left: usize,
    pub right: Option<usize>,
    /// Unit normal, outward from `left` (outward from Ω on the boundary).
    pub normal: [f64; 2],
    pub length: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// Precomputed element geometry: area and P1 basis gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    fn new(p: [Point; 3]) -> Self {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let area = 0.5 * det;
        let grads = [
            [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
            [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
            [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
        ];
        Self { area, grads }
    }

    /// Gradient of the P1 function with the given vertex values.
    pub fn gradient(&self, values: [f64; 3]) -> [f64; 2] {
        // differences against vertex 0, so constants give an exact zero
        let (d1, d2) = (values[1] - values[0], values[2] - values[0]);
        [
            d1 * self.grads[1][0] + d2 * self.grads[2][0],
            d1 * self.grads[1][1] + d2 * self.grads[2][1],
        ]
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    domain: Rectangle,
    layout: ElectrodeLayout,
    vertices: Vec<Point>,
    elements: Vec<Element>,
    /// Element of the mesh this one was refined from; identity for an initial mesh.
    parents: Vec<usize>,
    faces: Vec<Face>,
    element_faces: Vec<[usize; 3]>,
    geometry: Vec<ElementGeometry>,
    vertex_elements: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
}

/// Plain-data view of a mesh for JSON dumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshDump {
    pub domain: Rectangle,
    pub layout: ElectrodeLayout,
    pub vertices: Vec<Point>,
    pub elements: Vec<Element>,
    pub faces: Vec<Face>,
}

impl Mesh {
    /// Assembles a mesh from raw parts; builds faces, tags and geometry.
    pub fn from_parts(
        domain: Rectangle,
        layout: ElectrodeLayout,
        vertices: Vec<Point>,
        elements: Vec<Element>,
        parents: Option<Vec<usize>>,
    ) -> Result<Self> {
        layout.check_fits(&domain)?;
        if vertices.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::Geometry("non-finite vertex coordinate".into()));
        }
        let n = vertices.len();
        let mut geometry = Vec::with_capacity(elements.len());
        for (t, el) in elements.iter().enumerate() {
            if el.vertices.iter().any(|&v| v >= n) || el.refinement_edge > 2 {
                return Err(Error::Geometry(format!("element {t} references invalid data")));
            }
            let g = ElementGeometry::new(el.vertices.map(|v| vertices[v]));
            if !(g.area > 0.0) {
                return Err(Error::Geometry(format!("element {t} has non-positive signed area {}", g.area)));
            }
            geometry.push(g);
        }
        let parents = parents.unwrap_or_else(|| (0..elements.len()).collect());
        let mut vertex_elements = vec![Vec::new(); n];
        for (t, el) in elements.iter().enumerate() {
            for &v in &el.vertices {
                vertex_elements[v].push(t);
            }
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(elements.len() * 2);
        let mut element_faces = vec![[0usize; 3]; elements.len()];
        for (t, el) in elements.iter().enumerate() {
            for e in 0..3 {
                let [a, b] = el.edge(e);
                let key = (a.min(b), a.max(b));
                match index.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.right.is_some() || face.vertices != [b, a] {
                            return Err(Error::Geometry(format!(
                                "edge ({a}, {b}) is shared inconsistently (non-manifold or misoriented)"
                            )));
                        }
                        face.right = Some(t);
                        element_faces[t][e] = f;
                    }
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let d = [pb[0] - pa[0], pb[1] - pa[1]];
                        let length = d[0].hypot(d[1]);
                        index.insert(key, faces.len());
                        element_faces[t][e] = faces.len();
                        faces.push(Face {
                            vertices: [a, b],
                            kind: FaceKind::Interior,
                            left: t,
                            right: None,
                            normal: [d[1] / length, -d[0] / length],
                            length,
                        });
                    }
                }
            }
        }
        let mut boundary_vertex = vec![false; n];
        for face in faces.iter_mut().filter(|f| f.right.is_none()) {
            let (pa, pb) = (vertices[face.vertices[0]], vertices[face.vertices[1]]);
            let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            let s = domain.arclength(mid).ok_or_else(|| {
                Error::Geometry(format!("boundary face {:?} is not on the domain boundary", face.vertices))
            })?;
            face.kind = match layout.electrode_containing(s) {
                Some(l) => FaceKind::Electrode(l),
                None => FaceKind::Insulated,
            };
            boundary_vertex[face.vertices[0]] = true;
            boundary_vertex[face.vertices[1]] = true;
        }
        Ok(Self {
            domain,
            layout,
            vertices,
            elements,
            parents,
            faces,
            element_faces,
            geometry,
            vertex_elements,
            boundary_vertex,
        })
    }

    pub fn from_dump(dump: MeshDump) -> Result<Self> {
        Self::from_parts(dump.domain, dump.layout, dump.vertices, dump.elements, None)
    }

    pub fn dump(&self) -> MeshDump {
        MeshDump {
            domain: self.domain,
            layout: self.layout.clone(),
            vertices: self.vertices.clone(),
            elements: self.elements.clone(),
            faces: self.faces.clone(),
        }
    }

    pub fn domain(&self) -> &Rectangle {
        &self.domain
    }

    pub fn layout(&self) -> &ElectrodeLayout {
        &self.layout
    }

    pub fn num_electrodes(&self) -> usize {
        self.layout.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Degrees of freedom of the P1 space (one per vertex).
    pub fn dofs(&self) -> usize {
        self.vertices.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, t: usize) -> &Element {
        &self.elements[t]
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn parent(&self, t: usize) -> usize {
        self.parents[t]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn element_faces(&self, t: usize) -> [usize; 3] {
        self.element_faces[t]
    }

    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.geometry[t].area
    }

    pub fn element_points(&self, t: usize) -> [Point; 3] {
        self.elements[t].vertices.map(|v| self.vertices[v])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let p = self.element_points(t);
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    /// Vertex values of a nodal field on element `t`.
    pub fn local_values(&self, t: usize, field: &[f64]) -> [f64; 3] {
        self.elements[t].vertices.map(|v| field[v])
    }

    pub fn vertex_elements(&self, v: usize) -> &[usize] {
        &self.vertex_elements[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Physical point at barycentric coordinates `lam` in element `t`.
    pub fn map_point(&self, t: usize, lam: &[f64; 3]) -> Point {
        let p = self.element_points(t);
        [
            lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
            lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
        ]
    }

    /// Barycentric coordinates of `x` with respect to element `t`.
    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let p = self.element_points(t);
        let g = &self.geometry[t];
        let mut lam = [0.0; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            // λ_i is affine with gradient grads[i] and vanishes on the opposite edge
            lam[i] = g.grads[i][0] * (x[0] - p[j][0]) + g.grads[i][1] * (x[1] - p[j][1]);
        }
        lam
    }

    /// `h_T = |T|^{1/2}`.
    pub fn element_size(&self, t: usize) -> Result<f64> {
        let a = self.area(t);
        if a > 0.0 {
            Ok(a.sqrt())
        } else {
            Err(Error::Geometry(format!("element {t} has zero area")))
        }
    }

    /// `h_F = |F|`.
    pub fn face_size(&self, f: usize) -> Result<f64> {
        let l = self.faces[f].length;
        if l > 0.0 {
            Ok(l)
        } else {
            Err(Error::Geometry(format!("face {f} has zero length")))
        }
    }

    /// All elements sharing at least one vertex with `t`, including `t`, sorted.
    pub fn element_patch(&self, t: usize) -> Vec<usize> {
        let mut patch: Vec<usize> = self.elements[t]
            .vertices
            .iter()
            .flat_map(|&v| self.vertex_elements[v].iter().copied())
            .collect();
        patch.sort_unstable();
        patch.dedup();
        patch
    }

    /// Electrodes whose closed arc meets the closed element `t`.
    pub fn electrodes_touching(&self, t: usize) -> Vec<usize> {
        let tol = 1e-12 * self.domain.perimeter();
        let p = self.domain.perimeter();
        let mut out = Vec::new();
        for &v in &self.elements[t].vertices {
            if !self.boundary_vertex[v] {
                continue;
            }
            let Some(s) = self.domain.arclength(self.vertices[v]) else {
                continue;
            };
            for (l, seg) in self.layout.segments.iter().enumerate() {
                let hit = |s: f64| s >= seg[0] - tol && s <= seg[1] + tol;
                if hit(s) || (s.abs() <= tol && hit(p)) {
                    out.push(l);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Faces tagged with electrode `l`.
    pub fn electrode_faces(&self, l: usize) -> impl Iterator<Item = &Face> + '_ {
        self.faces.iter().filter(move |f| f.kind == FaceKind::Electrode(l))
    }

    /// Smallest interior angle over all elements, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut m = f64::INFINITY;
        for t in 0..self.elements.len() {
            let p = self.element_points(t);
            for i in 0..3 {
                let a = p[i];
                let b = p[(i + 1) % 3];
                let c = p[(i + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let w = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * w[0] + u[1] * w[1]) / (u[0].hypot(u[1]) * w[0].hypot(w[1]));
                m = m.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        m
    }

    /// Exhaustive conformity check: every edge is shared by two elements with
    /// opposite orientation or lies on ∂Ω, and the elements tile the domain.
    pub fn check_conforming(&self) -> std::result::Result<(), String> {
        let mut count: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for el in &self.elements {
            for e in 0..3 {
                let [a, b] = el.edge(e);
                count.entry((a.min(b), a.max(b))).or_default().push((a, b));
            }
        }
        for ((a, b), uses) in &count {
            match uses.len() {
                1 => {
                    let (pa, pb) = (self.vertices[*a], self.vertices[*b]);
                    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                    if self.domain.arclength(mid).is_none() {
                        return Err(format!("edge ({a}, {b}) has one neighbour but is interior (hanging node)"));
                    }
                }
                2 => {
                    if uses[0] == uses[1] {
                        return Err(format!("edge ({a}, {b}) used twice with the same orientation"));
                    }
                }
                k => return Err(format!("edge ({a}, {b}) shared by {k} elements")),
            }
        }
        let total: f64 = self.geometry.iter().map(|g| g.area).sum();
        if (total - self.domain.area()).abs() > 1e-10 * self.domain.area() {
            return Err(format!("element areas sum to {total}, domain area {}", self.domain.area()));
        }
        Ok(())
    }

    pub fn locator(&self) -> PointLocator<'_> {
        PointLocator::new(self)
    }
}

/// Structured triangulation of `domain` with `n0 × n0` cells, each split along
/// an alternating diagonal. Reference edges are the longest edges.
pub fn build_initial_mesh(domain: Rectangle, layout: ElectrodeLayout, n0: usize) -> Result<Mesh> {
    if n0 == 0 {
        return Err(Error::Config("n0 must be at least 1".into()));
    }
    let nx = n0;
    let ny = n0;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = domain.x_min + domain.width() * i as f64 / nx as f64;
            let y = domain.y_min + domain.height() * j as f64 / ny as f64;
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            let tris = if (i + j) % 2 == 0 {
                [[v00, v10, v11], [v00, v11, v01]]
            } else {
                [[v00, v10, v01], [v10, v11, v01]]
            };
            for tri in tris {
                elements.push(Element {
                    vertices: tri,
                    refinement_edge: longest_edge(tri.map(|v| vertices[v])),
                    generation: 0,
                });
            }
        }
    }
    // electrode endpoints must be mesh vertices
    let tol = 1e-9 * domain.perimeter() / n0 as f64;
    let boundary_s: Vec<f64> = vertices.iter().filter_map(|&p| domain.arclength(p)).collect();
    for (l, seg) in layout.segments().iter().enumerate() {
        for &s in seg {
            let s_mod = if s >= domain.perimeter() - tol { s - domain.perimeter() } else { s };
            if !boundary_s.iter().any(|&b| (b - s_mod).abs() <= tol) {
                return Err(Error::Resolution(format!(
                    "endpoint {s} of electrode {l} is not a vertex for n0 = {n0}"
                )));
            }
        }
    }
    let mesh = Mesh::from_parts(domain, layout, vertices, elements, None)?;
    for t in 0..mesh.num_elements() {
        let touching = mesh.electrodes_touching(t);
        if touching.len() > 1 {
            return Err(Error::Resolution(format!(
                "element {t} touches electrodes {touching:?}; increase n0 (= {n0})"
            )));
        }
    }
    Ok(mesh)
}

fn longest_edge(p: [Point; 3]) -> u8 {
    let len = |e: usize| {
        let a = p[(e + 1) % 3];
        let b = p[(e + 2) % 3];
        (b[0] - a[0]).hypot(b[1] - a[1])
    };
    let mut best = 0;
    for e in 1..3 {
        if len(e) > len(best) * (1.0 + 1e-12) {
            best = e;
        }
    }
    best as u8
}
