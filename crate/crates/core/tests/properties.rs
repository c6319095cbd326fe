//! Randomised properties of the building blocks: quadrature, viscosity
//! fields, the stabilisation parameter and the triple norm.

use bvstokes::analysis::{triple_norm, FieldErrors};
use bvstokes::problem::{
    compute_delta, BenchmarkCase, DeltaFormula, Exp1Params, Exp2Params, Form, Method, StabilizationConfig,
    ViscosityField, ViscosityLaw,
};
use bvstokes::quadrature::{p1_gradients, segment_rule, triangle_rule, P1Element, SEGMENT_DEGREES, TRIANGLE_DEGREES};
use proptest::prelude::*;

/// `∫_T x^i y^j` over the triangle with corners `c`, via the exact formula
/// for monomials in barycentric coordinates.
fn exact_monomial(c: &[[f64; 2]; 3], i: u32, j: u32) -> f64 {
    // Expand x^i y^j with x = Σ λ_k x_k, y = Σ λ_k y_k and integrate each
    // barycentric monomial with ∫ λ0^a λ1^b λ2^c = 2|T| a! b! c! / (a+b+c+2)!.
    let area = 0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]));
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let mut poly = vec![(1.0, [0u32; 3])];
    let mul_linear = |poly: &mut Vec<(f64, [u32; 3])>, coef: [f64; 3]| {
        let mut out = Vec::with_capacity(poly.len() * 3);
        for (v, e) in poly.iter() {
            for k in 0..3 {
                let mut e2 = *e;
                e2[k] += 1;
                out.push((v * coef[k], e2));
            }
        }
        *poly = out;
    };
    for _ in 0..i {
        mul_linear(&mut poly, [c[0][0], c[1][0], c[2][0]]);
    }
    for _ in 0..j {
        mul_linear(&mut poly, [c[0][1], c[1][1], c[2][1]]);
    }
    poly.iter()
        .map(|(v, e)| v * 2.0 * area * fact(e[0]) * fact(e[1]) * fact(e[2]) / fact(e[0] + e[1] + e[2] + 2))
        .sum()
}

fn triangle() -> impl Strategy<Value = [[f64; 2]; 3]> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.2..2.0f64, 0.2..2.0f64, -1.0..1.0f64, 0.2..2.0f64).prop_map(
        |(x0, y0, ax, by, cx, cy)| [[x0, y0], [x0 + ax, y0 + 0.3 * by], [x0 + cx, y0 + cy + 0.3]],
    )
}

proptest! {
    #[test]
    fn triangle_rules_are_exact_on_physical_triangles(c in triangle(), coeffs in prop::collection::vec(-1.0..1.0f64, 45)) {
        for &deg in &TRIANGLE_DEGREES {
            let rule = triangle_rule(deg).unwrap();
            let el = P1Element::new(c).unwrap();
            let mut exact = 0.0;
            let mut terms = Vec::new();
            let mut k = 0;
            for i in 0..=deg as u32 {
                for j in 0..=(deg as u32 - i) {
                    terms.push((coeffs[k % coeffs.len()], i, j));
                    exact += coeffs[k % coeffs.len()] * exact_monomial(&c, i, j);
                    k += 1;
                }
            }
            let approx: f64 = el.integrate(&rule, |_, p| {
                terms.iter().map(|&(a, i, j)| a * p[0].powi(i as i32) * p[1].powi(j as i32)).sum::<f64>()
            });
            let scale = terms.iter().map(|&(a, i, j)| a.abs() * exact_monomial(&c, i, j).abs()).sum::<f64>().max(1e-300);
            prop_assert!((approx - exact).abs() <= 1e-12 * scale, "degree {deg}: {approx} vs {exact}");
        }
    }

    #[test]
    fn segment_rules_are_exact(coeffs in prop::collection::vec(-1.0..1.0f64, 10), a in -3.0..3.0f64, len in 0.1..3.0f64) {
        for &deg in &SEGMENT_DEGREES {
            let rule = segment_rule(deg).unwrap();
            let b = a + len;
            let exact: f64 = (0..=deg).map(|k| coeffs[k] * (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0)).sum();
            let approx: f64 = rule.iter().map(|(&s, w)| {
                let x = a + s * len;
                w * len * (0..=deg).map(|k| coeffs[k] * x.powi(k as i32)).sum::<f64>()
            }).sum();
            let scale: f64 = (0..=deg).map(|k| coeffs[k].abs() * (b.abs().max(a.abs())).powi(k as i32) * len).sum::<f64>();
            prop_assert!((approx - exact).abs() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn p1_gradients_sum_to_zero_and_are_translation_invariant(c in triangle(), dx in -10.0..10.0f64, dy in -10.0..10.0f64) {
        let g = p1_gradients(&c).unwrap();
        for d in 0..2 {
            prop_assert!((g[0][d] + g[1][d] + g[2][d]).abs() < 1e-12);
        }
        let shifted = c.map(|p| [p[0] + dx, p[1] + dy]);
        let gs = p1_gradients(&shifted).unwrap();
        for a in 0..3 {
            for d in 0..2 {
                prop_assert!((g[a][d] - gs[a][d]).abs() < 1e-9 * (1.0 + g[a][d].abs()));
            }
        }
        let el = P1Element::new(c).unwrap();
        for a in 0..3 {
            let phi = el.shape_values(c[a]);
            for b in 0..3 {
                let expected = if a == b { 1.0 } else { 0.0 };
                prop_assert!((phi[b] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn viscosity_gradient_matches_finite_differences(x in 0.01..4.99f64, y in 0.01..0.99f64) {
        let fields = [
            ViscosityField::new(ViscosityLaw::Linear { a: 1.0, b: 1.0 }, 1.0).unwrap(),
            ViscosityField::new(ViscosityLaw::Quadratic { b: 1.0 }, 1.0).unwrap(),
            ViscosityField::constant(0.7).unwrap(),
        ];
        let step = 1e-6;
        for nu in fields {
            let g = nu.gradient([x, y]);
            let fd = [
                (nu.value([x + step, y]) - nu.value([x - step, y])) / (2.0 * step),
                (nu.value([x, y + step]) - nu.value([x, y - step])) / (2.0 * step),
            ];
            for d in 0..2 {
                prop_assert!((g[d] - fd[d]).abs() <= 1e-5 * g[d].abs().max(1.0));
            }
            let v = nu.value([x, y]);
            prop_assert!(nu.nu_min <= v && v <= nu.nu_max);
            prop_assert!(g[0].hypot(g[1]) <= nu.grad_inf + 1e-14);
        }
    }

    #[test]
    fn delta_is_monotone(h in 1e-3..1.0f64, gamma in 1e-2..1e2f64) {
        let case = BenchmarkCase::exp2(Exp2Params::default()).unwrap();
        for formula in [DeltaFormula::Experiment, DeltaFormula::LemmaSd, DeltaFormula::LemmaGl] {
            let cfg = StabilizationConfig::new(Method::Bvs, Form::Sd).with_delta_formula(formula).with_gamma(gamma);
            let d = compute_delta(&cfg, h, &case.data).unwrap();
            prop_assert!(compute_delta(&cfg, 0.5 * h, &case.data).unwrap() < d);
            let d2 = compute_delta(&cfg.with_gamma(2.0 * gamma), h, &case.data).unwrap();
            prop_assert!((d2 - 2.0 * d).abs() <= 1e-14 * d2);
        }
    }

    #[test]
    fn constant_viscosity_delta_scaling(nu in 0.1..10.0f64, h in 1e-3..1.0f64, gamma in 0.1..10.0f64, c in 0.1..10.0f64) {
        let data = BenchmarkCase::linear(1.0, 0.0, 0.0, ViscosityField::constant(nu).unwrap(), 1.0, 1.0).unwrap().data;
        let mut cfg = StabilizationConfig::new(Method::Bvs, Form::Sd).with_gamma(gamma).with_delta_formula(DeltaFormula::LemmaSd);
        cfg.trace_constant = c;
        let d = compute_delta(&cfg, h, &data).unwrap();
        prop_assert!((d * 12.0 * c * nu / (gamma * h * h) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triple_norm_identity(s in 0.0..5.0f64, nu in 0.1..5.0f64, d in 0.0..1.0f64, a in 0.0..2.0f64, b in 0.0..2.0f64, c in 0.0..2.0f64, e in 0.0..2.0f64) {
        let errs = FieldErrors { u_l2: a, u_h1: b, p_l2: e, p_h1: c };
        let t = errs.triple(s, nu, d);
        let expected = s * a * a + nu * b * b + d * c * c;
        prop_assert!((t * t - expected).abs() <= 1e-12 * expected.max(1e-300));
        prop_assert_eq!(t, triple_norm(s, nu, d, a, b, c));
    }

    #[test]
    fn benchmark_closed_forms_satisfy_the_equations(x in 0.0..5.0f64, y in 0.0..1.0f64) {
        for case in [BenchmarkCase::exp1(Exp1Params::default()).unwrap(), BenchmarkCase::exp2(Exp2Params::default()).unwrap()] {
            let (m, div) = case.strong_residual([x, y]);
            prop_assert!(m[0].abs() < 1e-10 && m[1].abs() < 1e-10 && div == 0.0);
            let p = case.exact.pressure([x, y]);
            prop_assert!((-1.0..=1.0).contains(&p));
        }
    }
}
