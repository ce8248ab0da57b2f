//! Exact integrals of P1 nodal fields.

use super::Mesh;

/// `∫_T |f|` for a linear function with vertex values `f` on a triangle of area `area`.
pub fn p1_abs_integral(area: f64, f: [f64; 3]) -> f64 {
    let total = area * (f[0] + f[1] + f[2]) / 3.0;
    let max = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = f.iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= 0.0 || max <= 0.0 {
        return total.abs();
    }
    let positives = f.iter().filter(|&&v| v > 0.0).count();
    let i = if positives == 1 {
        f.iter().position(|&v| v > 0.0).unwrap()
    } else {
        f.iter().position(|&v| v < 0.0).unwrap()
    };
    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
    let tj = f[i] / (f[i] - f[j]);
    let tk = f[i] / (f[i] - f[k]);
    // corner piece at vertex i where f has the sign of f[i]
    let corner = area * tj * tk * f[i] / 3.0;
    corner.abs() + (total - corner).abs()
}

impl Mesh {
    /// `∫_Ω f`
    pub fn integrate(&self, f: &[f64]) -> f64 {
        (0..self.num_elements())
            .map(|t| {
                let v = self.local_values(t, f);
                self.area(t) * (v[0] + v[1] + v[2]) / 3.0
            })
            .sum()
    }

    /// `‖f‖²_{L²(T)}`
    pub fn element_l2_sq(&self, t: usize, f: &[f64]) -> f64 {
        let v = self.local_values(t, f);
        self.area(t) / 6.0 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[0] * v[1] + v[1] * v[2] + v[0] * v[2])
    }

    /// `‖f‖²_{L²(Ω)}`
    pub fn l2_norm_sq(&self, f: &[f64]) -> f64 {
        (0..self.num_elements()).map(|t| self.element_l2_sq(t, f)).sum()
    }

    /// `‖∇f‖²_{L²(Ω)}`
    pub fn grad_norm_sq(&self, f: &[f64]) -> f64 {
        (0..self.num_elements())
            .map(|t| {
                let g = self.geometry(t).gradient(self.local_values(t, f));
                self.area(t) * (g[0] * g[0] + g[1] * g[1])
            })
            .sum()
    }

    /// `‖f‖_{L¹(T)}`
    pub fn element_l1(&self, t: usize, f: &[f64]) -> f64 {
        p1_abs_integral(self.area(t), self.local_values(t, f))
    }

    /// `‖f‖_{L¹(Ω)}`
    pub fn l1_norm(&self, f: &[f64]) -> f64 {
        (0..self.num_elements()).map(|t| self.element_l1(t, f)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Monte-Carlo-free check: midpoint subdivision converges to the exact value.
    fn subdivided(area: f64, f: [f64; 3], levels: u32) -> f64 {
        let n = 2usize.pow(levels);
        let mut s = 0.0;
        let h = 1.0 / n as f64;
        let a = area / (n * n) as f64;
        for i in 0..n {
            for j in 0..(n - i) {
                let eval = |l1: f64, l2: f64| f[0] * (1.0 - l1 - l2) + f[1] * l1 + f[2] * l2;
                let (x, y) = (i as f64 * h, j as f64 * h);
                s += a * eval(x + h / 3.0, y + h / 3.0).abs();
                if i + j + 1 < n {
                    s += a * eval(x + 2.0 * h / 3.0, y + 2.0 * h / 3.0).abs();
                }
            }
        }
        s
    }

    #[test]
    fn abs_integral_matches_subdivision() {
        for f in [[1.0, 0.0, -1.0], [2.0, -1.0, -0.5], [-3.0, 1.0, 2.0], [1.0, 2.0, 3.0], [0.0, 0.0, -1.0]] {
            let exact = p1_abs_integral(0.5, f);
            let approx = subdivided(0.5, f, 9);
            assert!((exact - approx).abs() < 1e-4, "{f:?}: {exact} vs {approx}");
        }
    }
}
