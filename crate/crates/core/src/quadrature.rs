//! P1 shape functions and Gauss-type quadrature on triangles and segments.
//!
//! Triangle rules live on the reference triangle `(0,0), (1,0), (0,1)` and
//! store barycentric points; their weights sum to `1/2`. Segment rules live
//! on `[0, 1]` and their weights sum to `1`.

use crate::error::{Error, Result};
use crate::mesh::{signed_area, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

pub type TriangleRule = QuadratureRule<[f64; 3]>;
pub type SegmentRule = QuadratureRule<f64>;

impl<P> QuadratureRule<P> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&P, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Degrees available from [`triangle_rule`].
pub const TRIANGLE_DEGREES: [usize; 4] = [1, 2, 4, 8];
/// Degrees available from [`segment_rule`].
pub const SEGMENT_DEGREES: [usize; 4] = [1, 3, 5, 9];

pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    let third = 1.0 / 3.0;
    let rule = match degree {
        1 => QuadratureRule { points: vec![[third; 3]], weights: vec![0.5], degree },
        2 => {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            QuadratureRule {
                points: vec![[a, b, b], [b, a, b], [b, b, a]],
                weights: vec![1.0 / 6.0; 3],
                degree,
            }
        }
        4 => {
            // Six-point symmetric rule (Strang-Fix / Dunavant).
            let a1 = 0.445_948_490_915_964_886_318_329_253_883_3;
            let w1 = 0.223_381_589_678_011_465_944_475_578_332_2;
            let a2 = 0.091_576_213_509_770_743_459_571_463_402_2;
            let w2 = 0.109_951_743_655_321_867_388_857_754_334_4;
            let mut points = Vec::with_capacity(6);
            let mut weights = Vec::with_capacity(6);
            for (a, w) in [(a1, w1), (a2, w2)] {
                let c = 1.0 - 2.0 * a;
                for p in [[c, a, a], [a, c, a], [a, a, c]] {
                    points.push(p);
                    weights.push(0.5 * w);
                }
            }
            QuadratureRule { points, weights, degree }
        }
        8 => collapsed_rule(5, degree),
        _ => return Err(Error::UnsupportedDegree { shape: "triangle", degree }),
    };
    Ok(rule)
}

pub fn segment_rule(degree: usize) -> Result<SegmentRule> {
    let n = match degree {
        1 => 1,
        3 => 2,
        5 => 3,
        9 => 5,
        _ => return Err(Error::UnsupportedDegree { shape: "segment", degree }),
    };
    let (points, weights) = gauss_legendre_unit(n);
    Ok(QuadratureRule { points, weights, degree })
}

/// Tensor Gauss-Legendre rule on the unit square collapsed onto the triangle.
fn collapsed_rule(n: usize, degree: usize) -> TriangleRule {
    let (x, w) = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (s, ws) in x.iter().zip(&w) {
        for (t, wt) in x.iter().zip(&w) {
            let xi = s * (1.0 - t);
            let eta = *t;
            points.push([1.0 - xi - eta, xi, eta]);
            weights.push(ws * wt * (1.0 - t));
        }
    }
    QuadratureRule { points, weights, degree }
}

/// `n`-point Gauss-Legendre nodes and weights mapped to `[0, 1]`.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        nodes[k] = 0.5 * (1.0 - x);
        weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A P1 triangle: corner coordinates and constant shape-function gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P1Element {
    pub corners: [Point; 3],
    pub gradients: [[f64; 2]; 3],
    pub area: f64,
}

impl P1Element {
    pub fn new(corners: [Point; 3]) -> Result<Self> {
        Ok(Self { corners, gradients: p1_gradients(&corners)?, area: signed_area(&corners) })
    }

    /// Physical point for barycentric coordinates.
    pub fn map(&self, bary: &[f64; 3]) -> Point {
        let c = &self.corners;
        [
            bary[0] * c[0][0] + bary[1] * c[1][0] + bary[2] * c[2][0],
            bary[0] * c[0][1] + bary[1] * c[1][1] + bary[2] * c[2][1],
        ]
    }

    /// Jacobian determinant of the affine map from the reference triangle.
    pub fn jacobian(&self) -> f64 {
        2.0 * self.area
    }

    /// Integrates `f` over the element.
    pub fn integrate<T, F>(&self, rule: &TriangleRule, mut f: F) -> T
    where
        T: Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
        F: FnMut(&[f64; 3], Point) -> T,
    {
        let jac = self.jacobian();
        let mut acc = T::default();
        for (bary, w) in rule.iter() {
            acc += f(bary, self.map(bary)) * (w * jac);
        }
        acc
    }

    /// Shape function values at a physical point (its barycentric coordinates).
    pub fn shape_values(&self, p: Point) -> [f64; 3] {
        let c0 = self.corners[0];
        let mut out = [0.0; 3];
        for (a, g) in self.gradients.iter().enumerate() {
            let base = if a == 0 { 1.0 } else { 0.0 };
            out[a] = base + g[0] * (p[0] - c0[0]) + g[1] * (p[1] - c0[1]);
        }
        out
    }
}

/// Gradients of the barycentric coordinate functions of a triangle.
pub fn p1_gradients(c: &[Point; 3]) -> Result<[[f64; 2]; 3]> {
    let area = signed_area(c);
    let scale = (0..3)
        .map(|k| (c[(k + 1) % 3][0] - c[k][0]).hypot(c[(k + 1) % 3][1] - c[k][1]))
        .fold(0.0, f64::max);
    if area.abs() <= 1e-14 * scale * scale || scale == 0.0 {
        return Err(Error::DegenerateTriangle { area });
    }
    let two_a = 2.0 * area;
    let mut g = [[0.0; 2]; 3];
    for a in 0..3 {
        let (j, k) = ((a + 1) % 3, (a + 2) % 3);
        g[a] = [(c[j][1] - c[k][1]) / two_a, (c[k][0] - c[j][0]) / two_a];
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of `x^i y^j` over the reference triangle: `i! j! / (i + j + 2)!`.
    fn monomial_integral(i: u32, j: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(i) * fact(j) / fact(i + j + 2)
    }

    fn integrate_monomial(rule: &TriangleRule, i: i32, j: i32) -> f64 {
        rule.iter().map(|(b, w)| w * b[1].powi(i) * b[2].powi(j)).sum()
    }

    #[test]
    fn unit_right_triangle_gradients() {
        let g = p1_gradients(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(g, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn gradients_sum_to_zero_and_translate() {
        let c = [[0.3, -0.2], [1.7, 0.4], [0.1, 2.2]];
        let g = p1_gradients(&c).unwrap();
        for d in 0..2 {
            assert!((g[0][d] + g[1][d] + g[2][d]).abs() < 1e-15);
        }
        let shifted = c.map(|p| [p[0] + 10.0, p[1] - 3.0]);
        let gs = p1_gradients(&shifted).unwrap();
        for a in 0..3 {
            for d in 0..2 {
                assert!((g[a][d] - gs[a][d]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn shape_functions_are_nodal() {
        let el = P1Element::new([[0.3, -0.2], [1.7, 0.4], [0.1, 2.2]]).unwrap();
        for a in 0..3 {
            let v = el.shape_values(el.corners[a]);
            for b in 0..3 {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((v[b] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn degenerate_rejected() {
        assert!(p1_gradients(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
    }

    #[test]
    fn midpoint_rule() {
        let r = triangle_rule(1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.weights[0], 0.5);
        assert!(r.points[0].iter().all(|&l| (l - 1.0 / 3.0).abs() < 1e-16));
    }

    #[test]
    fn worked_values() {
        let seg = segment_rule(3).unwrap();
        let cube: f64 = seg.iter().map(|(x, w)| w * x.powi(3)).sum();
        assert!((cube - 0.25).abs() < 1e-14);
        let tri = triangle_rule(2).unwrap();
        assert!((integrate_monomial(&tri, 1, 1) - 1.0 / 24.0).abs() < 1e-14);
    }

    #[test]
    fn unsupported_degrees() {
        assert!(triangle_rule(3).is_err());
        assert!(segment_rule(2).is_err());
    }

    #[test]
    fn weights_positive_and_normalised() {
        for d in TRIANGLE_DEGREES {
            let r = triangle_rule(d).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            for b in &r.points {
                assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
        for d in SEGMENT_DEGREES {
            let r = segment_rule(d).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn monomial_exactness() {
        for d in TRIANGLE_DEGREES {
            let r = triangle_rule(d).unwrap();
            for i in 0..=d as u32 {
                for j in 0..=(d as u32 - i) {
                    let got = integrate_monomial(&r, i as i32, j as i32);
                    let exact = monomial_integral(i, j);
                    assert!((got - exact).abs() < 1e-13, "deg {d}: x^{i} y^{j}: {got} vs {exact}");
                }
            }
        }
        for d in SEGMENT_DEGREES {
            let r = segment_rule(d).unwrap();
            for k in 0..=d as i32 {
                let got: f64 = r.iter().map(|(x, w)| w * x.powi(k)).sum();
                assert!((got - 1.0 / f64::from(k + 1)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn affine_jacobian() {
        let el = P1Element::new([[1.0, 1.0], [3.0, 1.0], [1.0, 2.0]]).unwrap();
        assert!((el.jacobian() - 2.0).abs() < 1e-15);
        let r = triangle_rule(2).unwrap();
        let area: f64 = el.integrate(&r, |_, _| 1.0);
        assert!((area - 1.0).abs() < 1e-14);
    }
}
