//! Quadrature rules on triangles and edges.
//!
//! Triangle rules are symmetric Gauss rules exact for polynomials up to the
//! requested order; reference weights sum to one and are scaled by the
//! physical area. Order 4 is used by all bilinear-form assembly (integrands
//! are at most quartic under affine maps), order 6 by error norms.

use crate::error::{Error, Result};

/// Barycentric point plus reference weight (weights of a rule sum to 1).
pub type BaryPoint = ([f64; 3], f64);

const RULE_2: [BaryPoint; 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

const D4_A: f64 = 0.445_948_490_915_965;
const D4_B: f64 = 0.091_576_213_509_771;
const D4_WA: f64 = 0.223_381_589_678_011;
const D4_WB: f64 = 0.109_951_743_655_322;

const RULE_4: [BaryPoint; 6] = [
    ([1.0 - 2.0 * D4_A, D4_A, D4_A], D4_WA),
    ([D4_A, 1.0 - 2.0 * D4_A, D4_A], D4_WA),
    ([D4_A, D4_A, 1.0 - 2.0 * D4_A], D4_WA),
    ([1.0 - 2.0 * D4_B, D4_B, D4_B], D4_WB),
    ([D4_B, 1.0 - 2.0 * D4_B, D4_B], D4_WB),
    ([D4_B, D4_B, 1.0 - 2.0 * D4_B], D4_WB),
];

const D6_A: f64 = 0.063_089_014_491_502;
const D6_B: f64 = 0.249_286_745_170_910;
const D6_C1: f64 = 0.310_352_451_033_785;
const D6_C2: f64 = 0.636_502_499_121_399;
const D6_C3: f64 = 0.053_145_049_844_816;
const D6_WA: f64 = 0.050_844_906_370_207;
const D6_WB: f64 = 0.116_786_275_726_379;
const D6_WC: f64 = 0.082_851_075_618_374;

const RULE_6: [BaryPoint; 12] = [
    ([1.0 - 2.0 * D6_A, D6_A, D6_A], D6_WA),
    ([D6_A, 1.0 - 2.0 * D6_A, D6_A], D6_WA),
    ([D6_A, D6_A, 1.0 - 2.0 * D6_A], D6_WA),
    ([1.0 - 2.0 * D6_B, D6_B, D6_B], D6_WB),
    ([D6_B, 1.0 - 2.0 * D6_B, D6_B], D6_WB),
    ([D6_B, D6_B, 1.0 - 2.0 * D6_B], D6_WB),
    ([D6_C1, D6_C2, D6_C3], D6_WC),
    ([D6_C1, D6_C3, D6_C2], D6_WC),
    ([D6_C2, D6_C1, D6_C3], D6_WC),
    ([D6_C2, D6_C3, D6_C1], D6_WC),
    ([D6_C3, D6_C1, D6_C2], D6_WC),
    ([D6_C3, D6_C2, D6_C1], D6_WC),
];

pub fn triangle_rule(order: u32) -> Result<&'static [BaryPoint]> {
    match order {
        2 => Ok(&RULE_2),
        4 => Ok(&RULE_4),
        6 => Ok(&RULE_6),
        other => Err(Error::UnsupportedQuadratureOrder(other)),
    }
}

pub fn triangle_area(v: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[1][1] - v[0][1]) * (v[2][0] - v[0][0]))
}

/// Physical quadrature points and weights on a triangle; weights sum to the
/// triangle area.
pub fn quadrature(v: &[[f64; 2]; 3], order: u32) -> Result<Vec<([f64; 2], f64)>> {
    let rule = triangle_rule(order)?;
    let area = triangle_area(v);
    if !(area.is_finite() && area.abs() > 0.0) {
        return Err(Error::DegenerateTriangle(usize::MAX));
    }
    Ok(rule
        .iter()
        .map(|(b, w)| {
            let x = b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0];
            let y = b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1];
            ([x, y], w * area)
        })
        .collect())
}

/// 3-point Gauss-Legendre rule on [0, 1]: (t, weight), weights sum to 1,
/// exact through degree 5.
pub fn edge_gauss() -> [(f64, f64); 3] {
    let s = (0.6_f64).sqrt(); // sqrt(3/5)
    [
        (0.5 * (1.0 - s), 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 * (1.0 + s), 5.0 / 18.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn integrate(order: u32, f: impl Fn(f64, f64) -> f64) -> f64 {
        quadrature(&REF, order)
            .unwrap()
            .iter()
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }

    #[test]
    fn constant_integrates_to_area() {
        for order in [2, 4, 6] {
            assert!((integrate(order, |_, _| 1.0) - 0.5).abs() < 1e-15);
        }
        let big = [[1.0, 2.0], [5.0, 2.5], [2.0, 7.0]];
        let sum: f64 = quadrature(&big, 4).unwrap().iter().map(|(_, w)| w).sum();
        assert!((sum - triangle_area(&big)).abs() < 1e-13);
    }

    #[test]
    fn linear_moment() {
        // int_T x dx over the reference triangle = 1/6.
        for order in [2, 4, 6] {
            assert!((integrate(order, |x, _| x) - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quartic_moment() {
        // int_T x^2 y^2 = 2! 2! / 6! = 1/180 (factorial formula for monomial
        // moments over the unit simplex, evaluated independently).
        let exact = 1.0 / 180.0;
        assert!((integrate(4, |x, y| x * x * y * y) - exact).abs() < 1e-15);
        assert!((integrate(6, |x, y| x * x * y * y) - exact).abs() < 1e-15);
    }

    #[test]
    fn degree_six_moment() {
        // int_T x^3 y^3 = 3! 3! / 8! = 1/1120.
        let exact = 36.0 / 40_320.0;
        assert!((integrate(6, |x, y| x.powi(3) * y.powi(3)) - exact).abs() < 1e-14);
    }

    #[test]
    fn unsupported_order_rejected() {
        assert!(triangle_rule(3).is_err());
        assert!(triangle_rule(0).is_err());
    }

    #[test]
    fn edge_rule_degree_five() {
        for k in 0..=5u32 {
            let exact = 1.0 / (k as f64 + 1.0);
            let approx: f64 = edge_gauss()
                .iter()
                .map(|(t, w)| w * t.powi(k as i32))
                .sum();
            assert!((approx - exact).abs() < 1e-15, "degree {k}");
        }
    }
}
