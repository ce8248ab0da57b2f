//! Fixed quadrature rules on triangles (barycentric) and segments.

/// A triangle rule: barycentric coordinates and weights summing to one.
pub struct TriangleRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
}

const A4: f64 = 0.445948490915965;
const B4: f64 = 0.108103018168070;
const C4: f64 = 0.091576213509771;
const D4: f64 = 0.816847572980459;
const WA4: f64 = 0.223381589678011;
const WC4: f64 = 0.109951743655322;

/// Six-point rule exact for polynomials of degree 4.
pub const DEGREE4: TriangleRule = TriangleRule {
    points: &[
        [B4, A4, A4],
        [A4, B4, A4],
        [A4, A4, B4],
        [D4, C4, C4],
        [C4, D4, C4],
        [C4, C4, D4],
    ],
    weights: &[WA4, WA4, WA4, WC4, WC4, WC4],
};

const A6: f64 = 0.501426509658179;
const B6: f64 = 0.249286745170910;
const C6: f64 = 0.873821971016996;
const D6: f64 = 0.063089014491502;
const E6: f64 = 0.053145049844817;
const F6: f64 = 0.310352451033784;
const G6: f64 = 0.636502499121399;
const WA6: f64 = 0.116786275726379;
const WC6: f64 = 0.050844906370207;
const WE6: f64 = 0.082851075618374;

/// Twelve-point rule exact for polynomials of degree 6.
pub const DEGREE6: TriangleRule = TriangleRule {
    points: &[
        [A6, B6, B6],
        [B6, A6, B6],
        [B6, B6, A6],
        [C6, D6, D6],
        [D6, C6, D6],
        [D6, D6, C6],
        [E6, F6, G6],
        [E6, G6, F6],
        [F6, E6, G6],
        [F6, G6, E6],
        [G6, E6, F6],
        [G6, F6, E6],
    ],
    weights: &[WA6, WA6, WA6, WC6, WC6, WC6, WE6, WE6, WE6, WE6, WE6, WE6],
};

impl TriangleRule {
    /// Integrates `f(λ)` over a triangle of the given area.
    pub fn integrate(&self, area: f64, mut f: impl FnMut(&[f64; 3]) -> f64) -> f64 {
        let s: f64 = self
            .points
            .iter()
            .zip(self.weights)
            .map(|(p, w)| w * f(p))
            .sum();
        s * area
    }
}

/// Two-point Gauss rule on [0, 1]: (parameter, weight).
pub const GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];

/// Evaluates a linear function given by nodal values at barycentric point `lam`.
#[inline]
pub fn eval_p1(values: [f64; 3], lam: &[f64; 3]) -> f64 {
    values[0] + (values[1] - values[0]) * lam[1] + (values[2] - values[0]) * lam[2]
}
