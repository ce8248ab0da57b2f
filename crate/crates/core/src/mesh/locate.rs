use super::{Mesh, Point};

/// Bucket grid over element bounding boxes for point location.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

const BARY_TOL: f64 = 1e-10;

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let d = mesh.domain();
        let side = ((mesh.num_elements() as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let (nx, ny) = (side, side);
        let mut buckets = vec![Vec::new(); nx * ny];
        let cell = |x: f64, lo: f64, w: f64, n: usize| -> usize {
            (((x - lo) / w * n as f64).floor().max(0.0) as usize).min(n - 1)
        };
        for t in 0..mesh.num_elements() {
            let p = mesh.element_points(t);
            let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for q in p {
                x0 = x0.min(q[0]);
                x1 = x1.max(q[0]);
                y0 = y0.min(q[1]);
                y1 = y1.max(q[1]);
            }
            let eps = 1e-12 * d.perimeter();
            let (i0, i1) = (cell(x0 - eps, d.x_min, d.width(), nx), cell(x1 + eps, d.x_min, d.width(), nx));
            let (j0, j1) = (cell(y0 - eps, d.y_min, d.height(), ny), cell(y1 + eps, d.y_min, d.height(), ny));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self { mesh, nx, ny, buckets }
    }

    /// Element containing `x` (lowest id on ties) and its barycentric coordinates.
    pub fn locate(&self, x: Point) -> Option<(usize, [f64; 3])> {
        let d = self.mesh.domain();
        if !d.contains(x) {
            return None;
        }
        let i = (((x[0] - d.x_min) / d.width() * self.nx as f64).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((x[1] - d.y_min) / d.height() * self.ny as f64).floor().max(0.0) as usize).min(self.ny - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.nx + i] {
            let lam = self.mesh.barycentric(t, x);
            let worst = lam.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -BARY_TOL && best.as_ref().is_none_or(|b| worst > b.2 + BARY_TOL) {
                best = Some((t, lam, worst));
            }
        }
        best.map(|(t, lam, _)| (t, lam))
    }
}
