//! Transfer of P1 fields between meshes.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::DEGREE6;

const NEST_TOL: f64 = 1e-9;

/// Checks that every element of `target` lies inside a single element of `source`.
pub fn check_nested(source: &Mesh, target: &Mesh) -> Result<()> {
    if source.domain() != target.domain() {
        return Err(Error::NotNested("meshes cover different domains".into()));
    }
    let locator = source.locator();
    for t in 0..target.num_elements() {
        let (s, _) = locator
            .locate(target.centroid(t))
            .ok_or_else(|| Error::NotNested(format!("centroid of element {t} is outside the source mesh")))?;
        for p in target.element_points(t) {
            let lam = source.barycentric(s, p);
            if lam.iter().any(|&l| l < -NEST_TOL) {
                return Err(Error::NotNested(format!(
                    "element {t} is not contained in source element {s}"
                )));
            }
        }
    }
    Ok(())
}

/// Nodal interpolation of the P1 field `values` on `source` at the vertices of `target`.
pub fn lagrange_interp(source: &Mesh, values: &[f64], target: &Mesh) -> Result<Vec<f64>> {
    if values.len() != source.num_vertices() {
        return Err(Error::Config(format!(
            "field has {} values for {} vertices",
            values.len(),
            source.num_vertices()
        )));
    }
    let locator = source.locator();
    target
        .vertices()
        .iter()
        .map(|&x| evaluate_with(&locator, source, values, x))
        .collect()
}

/// Value of a P1 field at a point of the domain.
pub fn evaluate(mesh: &Mesh, values: &[f64], x: Point) -> Result<f64> {
    evaluate_with(&mesh.locator(), mesh, values, x)
}

fn evaluate_with(locator: &crate::mesh::PointLocator, mesh: &Mesh, values: &[f64], x: Point) -> Result<f64> {
    let (t, lam) = locator
        .locate(x)
        .ok_or_else(|| Error::Geometry(format!("point ({}, {}) is outside the domain", x[0], x[1])))?;
    let v = mesh.local_values(t, values);
    Ok(lam[0] * v[0] + lam[1] * v[1] + lam[2] * v[2])
}

/// Function to be quasi-interpolated.
pub enum Integrand<'a> {
    /// P1 nodal values on the same mesh (integrated exactly).
    Nodal(&'a [f64]),
    /// Pointwise function (degree-6 quadrature per element).
    Function(&'a dyn Fn(Point) -> f64),
}

/// Star-average quasi-interpolation: interior nodes get `|ω_i|⁻¹ ∫_{ω_i} v`
/// over the vertex star, boundary nodes are set to zero.
pub fn quasi_interp(mesh: &Mesh, v: Integrand) -> Result<Vec<f64>> {
    if let Integrand::Nodal(values) = v {
        if values.len() != mesh.num_vertices() {
            return Err(Error::Config("nodal integrand has the wrong length".into()));
        }
    }
    let element_integral: Vec<f64> = (0..mesh.num_elements())
        .map(|t| match &v {
            Integrand::Nodal(values) => {
                let s = mesh.local_values(t, values);
                mesh.area(t) * (s[0] + s[1] + s[2]) / 3.0
            }
            Integrand::Function(f) => {
                let p = mesh.element_points(t);
                DEGREE6.integrate(mesh.area(t), |lam| {
                    f([
                        lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                        lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
                    ])
                })
            }
        })
        .collect();
    Ok((0..mesh.num_vertices())
        .map(|i| {
            if mesh.is_boundary_vertex(i) {
                return 0.0;
            }
            let star = mesh.vertex_elements(i);
            let area: f64 = star.iter().map(|&t| mesh.area(t)).sum();
            star.iter().map(|&t| element_integral[t]).sum::<f64>() / area
        })
        .collect())
}
