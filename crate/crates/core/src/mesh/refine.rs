//! Newest vertex bisection with conforming closure.

use std::collections::{HashMap, HashSet};

use super::{Element, Mesh, Point};

type EdgeKey = (usize, usize);

fn key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

fn reference_edge(el: &Element) -> EdgeKey {
    let [a, b] = el.edge(el.refinement_edge as usize);
    key(a, b)
}

struct Bisector<'a> {
    marked: &'a HashSet<EdgeKey>,
    midpoints: HashMap<EdgeKey, usize>,
    vertices: Vec<Point>,
    elements: Vec<Element>,
    parents: Vec<usize>,
}

impl Bisector<'_> {
    fn midpoint(&mut self, a: usize, b: usize) -> usize {
        let k = key(a, b);
        if let Some(&m) = self.midpoints.get(&k) {
            return m;
        }
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let m = self.vertices.len();
        self.vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        self.midpoints.insert(k, m);
        m
    }

    fn bisect(&mut self, el: Element, parent: usize) {
        if !self.marked.contains(&reference_edge(&el)) {
            self.elements.push(el);
            self.parents.push(parent);
            return;
        }
        let r = el.refinement_edge as usize;
        let a = el.vertices[r];
        let b = el.vertices[(r + 1) % 3];
        let c = el.vertices[(r + 2) % 3];
        let m = self.midpoint(b, c);
        let generation = el.generation + 1;
        // The newest vertex sits at local index 0, so both children use edge 0
        // (the edge opposite the midpoint) as their reference edge.
        self.bisect(
            Element {
                vertices: [m, a, b],
                refinement_edge: 0,
                generation,
            },
            parent,
        );
        self.bisect(
            Element {
                vertices: [m, c, a],
                refinement_edge: 0,
                generation,
            },
            parent,
        );
    }
}

impl Mesh {
    /// Bisects every marked element at least once and closes the refinement
    /// so the result is conforming. Vertex ids of `self` are preserved; new
    /// vertices are appended. `parent(t)` of the result refers to `self`.
    pub fn refine(&self, marked: &[usize]) -> Mesh {
        let mut edges: HashSet<EdgeKey> = marked.iter().map(|&t| reference_edge(&self.elements[t])).collect();
        // closure: an element with any marked edge must also bisect its reference edge
        loop {
            let mut changed = false;
            for el in &self.elements {
                let r = reference_edge(el);
                if edges.contains(&r) {
                    continue;
                }
                if (0..3).any(|e| {
                    let [a, b] = el.edge(e);
                    edges.contains(&key(a, b))
                }) {
                    edges.insert(r);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut bis = Bisector {
            marked: &edges,
            midpoints: HashMap::new(),
            vertices: self.vertices.clone(),
            elements: Vec::with_capacity(self.elements.len() + 2 * edges.len()),
            parents: Vec::with_capacity(self.elements.len() + 2 * edges.len()),
        };
        for (t, el) in self.elements.iter().enumerate() {
            bis.bisect(el.clone(), t);
        }
        Mesh::from_parts(
            self.domain,
            self.layout.clone(),
            bis.vertices,
            bis.elements,
            Some(bis.parents),
        )
        .expect("bisection of a valid mesh is valid")
    }

    /// One bisection of every element.
    pub fn bisect_all(&self) -> Mesh {
        let all: Vec<usize> = (0..self.num_elements()).collect();
        self.refine(&all)
    }

    /// Uniform refinement: every element is bisected twice, quartering it.
    pub fn refine_uniform(&self) -> Mesh {
        self.bisect_all().bisect_all()
    }
}
