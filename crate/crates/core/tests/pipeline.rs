//! End-to-end behaviour of mesh → assembly → solve → analysis.

use bvstokes::analysis::{
    compute_errors, consistency_check, convergence_rate, discrete_orthogonality, FieldErrors,
};
use bvstokes::assembly::{discretize, SolutionField};
use bvstokes::linsolve::{solve, solve_bordered_csr, Strategy, RESIDUAL_TARGET};
use bvstokes::mesh::generate_structured;
use bvstokes::problem::{
    BenchmarkCase, Exp1Params, Exp2Params, Form, Method, StabilizationConfig, ViscosityField, ViscosityLaw,
};
use bvstokes::sparse::CsrMatrix;

const METHODS: [Method; 2] = [Method::Pspg, Method::Bvs];
const FORMS: [Form; 2] = [Form::Sd, Form::Gl];

fn viscosities() -> [ViscosityField; 2] {
    [
        ViscosityField::new(ViscosityLaw::Linear { a: 1.0, b: 1.0 }, 1.0).unwrap(),
        ViscosityField::new(ViscosityLaw::Quadratic { b: 1.0 }, 1.0).unwrap(),
    ]
}

#[test]
fn constant_flow_is_reproduced_exactly() {
    let mesh = generate_structured(5.0, 1.0, 2).unwrap();
    for nu in viscosities() {
        let case = BenchmarkCase::linear(1.0, 0.0, 0.0, nu, 5.0, 1.0).unwrap();
        for method in METHODS {
            for form in FORMS {
                let cfg = StabilizationConfig::new(method, form);
                let disc = discretize(&mesh, &case.data, &cfg).unwrap();
                let (sol, report) = solve(&disc.system).unwrap();
                assert!(report.relative_residual <= RESIDUAL_TARGET);
                for (u, p) in sol.velocity.iter().zip(&sol.pressure) {
                    assert!((u[0] - 1.0).abs() < 1e-9 && u[1].abs() < 1e-9, "{method:?}/{form:?}: u = {u:?}");
                    assert!(p.abs() < 1e-9, "{method:?}/{form:?}: p = {p}");
                }
                let e = compute_errors(&sol, &case, &mesh).unwrap();
                assert!(e.u_l2 < 1e-9 && e.u_h1 < 1e-9 && e.p_l2 < 1e-9);
            }
        }
    }
}

#[test]
fn exp1_bvs_level3_meets_the_residual_target() {
    let case = BenchmarkCase::exp1(Exp1Params::default()).unwrap();
    let mesh = generate_structured(5.0, 1.0, 3).unwrap();
    let disc = discretize(&mesh, &case.data, &StabilizationConfig::new(Method::Bvs, Form::Sd)).unwrap();
    let (sol, report) = solve(&disc.system).unwrap();
    assert!(report.relative_residual <= RESIDUAL_TARGET);
    assert!(sol.pressure_integral(&mesh).abs() < 1e-10);
    // Discrete Galerkin orthogonality restates the algebraic residual.
    assert!(discrete_orthogonality(&disc.form, &mesh, &sol) <= 1e-9);
    for n in mesh.boundary_nodes() {
        let g = case.exact.velocity(mesh.nodes[n]);
        assert_eq!(sol.velocity[n], g);
    }
}

#[test]
fn solving_twice_is_bitwise_identical() {
    let case = BenchmarkCase::exp2(Exp2Params::default()).unwrap();
    let mesh = generate_structured(5.0, 1.0, 2).unwrap();
    for method in METHODS {
        let cfg = StabilizationConfig::new(method, Form::Sd);
        let a = solve(&discretize(&mesh, &case.data, &cfg).unwrap().system).unwrap().0;
        let b = solve(&discretize(&mesh, &case.data, &cfg).unwrap().system).unwrap().0;
        let bits = |s: &SolutionField| s.field_vector().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.multiplier.to_bits(), b.multiplier.to_bits());
    }
}

#[test]
fn solution_is_invariant_under_symmetric_permutation() {
    let case = BenchmarkCase::exp1(Exp1Params::default()).unwrap();
    let mesh = generate_structured(5.0, 1.0, 1).unwrap();
    let disc = discretize(&mesh, &case.data, &StabilizationConfig::new(Method::Bvs, Form::Sd)).unwrap();
    let sys = &disc.system;
    let n = sys.matrix.nrows();
    let m = n - 1;
    // i ↦ k·i mod m with gcd(k, m) = 1 scatters the field unknowns; the
    // multiplier stays last.
    let gcd = |mut a: usize, mut b: usize| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let k = (97..).find(|&k| gcd(k, m) == 1).unwrap();
    let perm: Vec<usize> = (0..n).map(|i| if i < m { (k * i) % m } else { m }).collect();
    let triplets: Vec<_> = sys.matrix.triplets().map(|(r, c, v)| (perm[r], perm[c], v)).collect();
    let permuted = CsrMatrix::from_triplets(n, n, &triplets);
    let mut rhs = vec![0.0; n];
    for (i, &b) in sys.rhs.iter().enumerate() {
        rhs[perm[i]] = b;
    }

    let (x, _) = solve_bordered_csr(&sys.matrix, &sys.rhs, Strategy::DirectOnly).unwrap();
    let (y, _) = solve_bordered_csr(&permuted, &rhs, Strategy::DirectOnly).unwrap();
    for i in 0..n {
        assert!((x[i] - y[perm[i]]).abs() <= 1e-12 * x[i].abs().max(1.0), "unknown {i}: {} vs {}", x[i], y[perm[i]]);
    }
}

#[test]
fn krylov_fallback_solves_the_same_system() {
    let case = BenchmarkCase::exp2(Exp2Params::default()).unwrap();
    let mesh = generate_structured(5.0, 1.0, 1).unwrap();
    let disc = discretize(&mesh, &case.data, &StabilizationConfig::new(Method::Bvs, Form::Sd)).unwrap();
    let (direct, _) = bvstokes::linsolve::solve_with(&disc.system, Strategy::DirectOnly).unwrap();
    let (krylov, report) = bvstokes::linsolve::solve_with(&disc.system, Strategy::KrylovOnly).unwrap();
    assert!(report.relative_residual <= RESIDUAL_TARGET);
    let scale = direct.field_vector().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in direct.field_vector().iter().zip(krylov.field_vector()) {
        assert!((a - b).abs() <= 1e-7 * scale);
    }
}

#[test]
fn discrete_errors_never_exceed_the_exact_norms() {
    for case in [BenchmarkCase::exp1(Exp1Params::default()).unwrap(), BenchmarkCase::exp2(Exp2Params::default()).unwrap()] {
        let mesh = generate_structured(5.0, 1.0, 1).unwrap();
        let zero = compute_errors(&SolutionField::zeros(mesh.num_nodes()), &case, &mesh).unwrap();
        for method in METHODS {
            let disc = discretize(&mesh, &case.data, &StabilizationConfig::new(method, Form::Sd)).unwrap();
            let (sol, _) = solve(&disc.system).unwrap();
            let e = compute_errors(&sol, &case, &mesh).unwrap();
            assert!(e.u_l2 <= zero.u_l2 && e.u_h1 <= zero.u_h1 && e.p_l2 <= zero.p_l2, "{e:?} vs {zero:?}");
        }
    }
}

#[test]
fn interpolation_error_converges_at_second_order() {
    let case = BenchmarkCase::exp1(Exp1Params::default()).unwrap();
    let errors: Vec<FieldErrors> = (3..=6)
        .map(|level| {
            let mesh = generate_structured(5.0, 1.0, level).unwrap();
            let interp = SolutionField::interpolate(&mesh, |p| case.exact.velocity(p), |p| case.exact.pressure(p));
            compute_errors(&interp, &case, &mesh).unwrap()
        })
        .collect();
    for pair in errors.windows(2) {
        let rate = convergence_rate(pair[0].u_l2, pair[1].u_l2).unwrap();
        assert!((1.8..=2.2).contains(&rate), "interpolation rate {rate}");
        // A linear pressure is interpolated exactly.
        assert!(pair[1].p_l2 < 1e-12);
    }
}

#[test]
fn bvs_is_consistent_for_every_form() {
    let case = BenchmarkCase::exp1(Exp1Params::default()).unwrap();
    let mesh = generate_structured(5.0, 1.0, 2).unwrap();
    for form in FORMS {
        for reaction in [false, true] {
            let cfg = StabilizationConfig::new(Method::Bvs, form).with_reaction_in_residual(reaction);
            let delta = bvstokes::problem::compute_delta(&cfg, mesh.h, &case.data).unwrap();
            assert!(consistency_check(&case, &mesh, &cfg, delta).unwrap() <= 1e-8);
        }
    }
    let exp2 = BenchmarkCase::exp2(Exp2Params::default()).unwrap();
    for reaction in [false, true] {
        let cfg = StabilizationConfig::new(Method::Bvs, Form::Sd).with_reaction_in_residual(reaction);
        let delta = bvstokes::problem::compute_delta(&cfg, mesh.h, &exp2.data).unwrap();
        assert!(consistency_check(&exp2, &mesh, &cfg, delta).unwrap() <= 1e-8);
    }
}
