//! Error norms, convergence rates, consistency checks and pressure
//! boundary-layer metrics.

use serde::{Deserialize, Serialize};

use crate::assembly::{integrate_edge, AssembledForm, SolutionField};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problem::{BenchmarkCase, Form, Method, ProblemData, StabilizationConfig};
use crate::quadrature::{segment_rule, triangle_rule, P1Element};

/// Volume rule used for errors and the consistency functional.
pub const ORACLE_TRIANGLE_DEGREE: usize = 8;
/// Edge rule used by the consistency functional.
pub const ORACLE_SEGMENT_DEGREE: usize = 9;

/// Squared-norm components of an error; combine with [`FieldErrors::triple`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldErrors {
    pub u_l2: f64,
    pub u_h1: f64,
    pub p_l2: f64,
    pub p_h1: f64,
}

impl FieldErrors {
    /// `(σ‖e_u‖² + ν_min‖∇e_u‖² + δ‖∇e_p‖²)^{1/2}`
    pub fn triple(&self, sigma: f64, nu_min: f64, delta: f64) -> f64 {
        triple_norm(sigma, nu_min, delta, self.u_l2, self.u_h1, self.p_h1)
    }
}

pub fn triple_norm(sigma: f64, nu_min: f64, delta: f64, v_l2: f64, v_h1: f64, q_h1: f64) -> f64 {
    (sigma * v_l2 * v_l2 + nu_min * v_h1 * v_h1 + delta * q_h1 * q_h1).sqrt()
}

/// L² and H¹-seminorm errors against the exact fields of `case`.
pub fn compute_errors(solution: &SolutionField, case: &BenchmarkCase, mesh: &Mesh) -> Result<FieldErrors> {
    let rule = triangle_rule(ORACLE_TRIANGLE_DEGREE)?;
    let exact = &case.exact;
    let mut sums = [0.0; 4];
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh.corners(t))?;
        let nodes = mesh.triangles[t];
        let uh: [[f64; 2]; 3] = nodes.map(|n| solution.velocity[n]);
        let ph: [f64; 3] = nodes.map(|n| solution.pressure[n]);
        let mut grad_uh = [[0.0; 2]; 2];
        let mut grad_ph = [0.0; 2];
        for a in 0..3 {
            for i in 0..2 {
                grad_ph[i] += ph[a] * el.gradients[a][i];
                for j in 0..2 {
                    grad_uh[i][j] += uh[a][i] * el.gradients[a][j];
                }
            }
        }
        let local: [f64; 4] = el.integrate(&rule, |bary, p| {
            let u = exact.velocity(p);
            let gu = exact.velocity_gradient(p);
            let mut e = [0.0; 4];
            for i in 0..2 {
                let uhi: f64 = (0..3).map(|a| bary[a] * uh[a][i]).sum();
                e[0] += (uhi - u[i]).powi(2);
                for j in 0..2 {
                    e[1] += (grad_uh[i][j] - gu[i][j]).powi(2);
                }
            }
            let phv: f64 = (0..3).map(|a| bary[a] * ph[a]).sum();
            e[2] = (phv - exact.pressure(p)).powi(2);
            let gp = exact.pressure_gradient(p);
            e[3] = (grad_ph[0] - gp[0]).powi(2) + (grad_ph[1] - gp[1]).powi(2);
            Quad(e)
        })
        .0;
        for k in 0..4 {
            sums[k] += local[k];
        }
    }
    Ok(FieldErrors { u_l2: sums[0].sqrt(), u_h1: sums[1].sqrt(), p_l2: sums[2].sqrt(), p_h1: sums[3].sqrt() })
}

/// Four accumulators that can go through [`P1Element::integrate`].
#[derive(Default, Clone, Copy)]
struct Quad([f64; 4]);

impl std::ops::AddAssign for Quad {
    fn add_assign(&mut self, o: Self) {
        for k in 0..4 {
            self.0[k] += o.0[k];
        }
    }
}

impl std::ops::Mul<f64> for Quad {
    type Output = Self;
    fn mul(self, w: f64) -> Self {
        Quad(self.0.map(|v| v * w))
    }
}

/// `‖v_h‖`, `‖∇v_h‖` and `‖∇q_h‖` of a discrete pair, computed exactly.
pub fn discrete_norms(solution: &SolutionField, mesh: &Mesh) -> Result<(f64, f64, f64)> {
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    let mut q1 = 0.0;
    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh.corners(t))?;
        let nodes = mesh.triangles[t];
        for i in 0..2 {
            let v = nodes.map(|n| solution.velocity[n][i]);
            let s: f64 = v.iter().sum();
            let sq: f64 = v.iter().map(|x| x * x).sum();
            // P1 mass matrix: area/12 (1 + δ_ab).
            l2 += el.area / 12.0 * (sq + s * s);
            for d in 0..2 {
                let g: f64 = (0..3).map(|a| v[a] * el.gradients[a][d]).sum();
                h1 += el.area * g * g;
            }
        }
        let q = nodes.map(|n| solution.pressure[n]);
        for d in 0..2 {
            let g: f64 = (0..3).map(|a| q[a] * el.gradients[a][d]).sum();
            q1 += el.area * g * g;
        }
    }
    Ok((l2.sqrt(), h1.sqrt(), q1.sqrt()))
}

/// Observed order `log₂(e_coarse / e_fine)` for one uniform refinement.
pub fn convergence_rate(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0 && coarse.is_finite() && fine.is_finite()).then(|| (coarse / fine).log2())
}

/// Max-norm of `A((u, p), (v_h, q_h)) − F(v_h, q_h)` over all admissible basis
/// test functions, with the exact solution of `case` inserted by quadrature.
///
/// The operator is the one the method actually assembles. For PSPG the
/// viscous residual is therefore `2∇ˢu∇ν` (second derivatives dropped), which
/// makes the functional nonzero even for the exact solution.
pub fn consistency_check(case: &BenchmarkCase, mesh: &Mesh, config: &StabilizationConfig, delta: f64) -> Result<f64> {
    Ok(consistency_residual(case, mesh, config, delta)?.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Entry-wise consistency functional; Dirichlet momentum rows are zero.
pub fn consistency_residual(
    case: &BenchmarkCase,
    mesh: &Mesh,
    config: &StabilizationConfig,
    delta: f64,
) -> Result<Vec<f64>> {
    let rule = triangle_rule(ORACLE_TRIANGLE_DEGREE)?;
    let edge_rule = segment_rule(ORACLE_SEGMENT_DEGREE)?;
    let data: &ProblemData = &case.data;
    let exact = &case.exact;
    let n = mesh.num_nodes();
    let mut r = vec![0.0; 3 * n];
    let sigma = data.sigma;
    let reaction = config.reaction_in_residual;

    for t in 0..mesh.num_triangles() {
        let el = P1Element::new(mesh.corners(t))?;
        let nodes = mesh.triangles[t];
        let g = el.gradients;
        let jac = el.jacobian();
        for (bary, w) in rule.iter() {
            let wj = w * jac;
            let p = el.map(bary);
            let u = exact.velocity(p);
            let gu = exact.velocity_gradient(p);
            let pr = exact.pressure(p);
            let gp = exact.pressure_gradient(p);
            let nu = data.viscosity.value(p);
            let gn = data.viscosity.gradient(p);
            let f = (data.force)(p);
            let div = gu[0][0] + gu[1][1];
            // (∇ᵀu ∇ν)_i = Σ_k ∂_i u_k ∂_k ν
            let gt_nu = [gu[0][0] * gn[0] + gu[1][0] * gn[1], gu[0][1] * gn[0] + gu[1][1] * gn[1]];
            let g_nu = [gu[0][0] * gn[0] + gu[0][1] * gn[1], gu[1][0] * gn[0] + gu[1][1] * gn[1]];
            let viscous = match config.method {
                Method::Bvs => [2.0 * gt_nu[0], 2.0 * gt_nu[1]],
                Method::Pspg if config.viscous_residual => [g_nu[0] + gt_nu[0], g_nu[1] + gt_nu[1]],
                Method::Pspg => [0.0, 0.0],
            };
            let react = if reaction { sigma } else { 0.0 };
            let stab = [gp[0] + react * u[0] - viscous[0] - f[0], gp[1] + react * u[1] - viscous[1] - f[1]];
            for a in 0..3 {
                let node = nodes[a];
                if !mesh.is_boundary_node(node) {
                    for i in 0..2 {
                        let visc = match config.form {
                            Form::Sd => (0..2).map(|k| nu * (gu[i][k] + gu[k][i]) * g[a][k]).sum::<f64>(),
                            Form::Gl => {
                                (0..2).map(|k| nu * gu[i][k] * g[a][k]).sum::<f64>() - bary[a] * gt_nu[i]
                            }
                        };
                        r[2 * node + i] += wj * (sigma * u[i] * bary[a] + visc - pr * g[a][i] - f[i] * bary[a]);
                    }
                }
                r[2 * n + node] += wj * (bary[a] * div + delta * (g[a][0] * stab[0] + g[a][1] * stab[1]));
            }
        }
    }

    for edge in &mesh.boundary_edges {
        let (p0, p1) = (mesh.nodes[edge.nodes[0]], mesh.nodes[edge.nodes[1]]);
        let nrm = edge.normal;
        if config.method == Method::Bvs {
            let el = P1Element::new(mesh.corners(edge.triangle))?;
            let vort = integrate_edge(&edge_rule, p0, p1, |p, _| {
                let gu = exact.velocity_gradient(p);
                data.viscosity.value(p) * (gu[1][0] - gu[0][1])
            });
            for (a, &node) in mesh.triangles[edge.triangle].iter().enumerate() {
                let cross = el.gradients[a][0] * nrm[1] - el.gradients[a][1] * nrm[0];
                r[2 * n + node] += delta * cross * vort;
            }
        }
        if !reaction && sigma != 0.0 {
            for (k, &node) in edge.nodes.iter().enumerate() {
                let flux = integrate_edge(&edge_rule, p0, p1, |p, s| {
                    let gv = (data.dirichlet)(p);
                    (if k == 0 { 1.0 - s } else { s }) * (gv[0] * nrm[0] + gv[1] * nrm[1])
                });
                r[2 * n + node] += delta * sigma * flux;
            }
        }
    }
    Ok(r)
}

/// Largest `|(A x − b)_r|` over rows not fixed by Dirichlet data, including the
/// multiplier's contribution `λ ∫ φ_r` to pressure rows.
pub fn discrete_orthogonality(form: &AssembledForm, mesh: &Mesh, solution: &SolutionField) -> f64 {
    let x = solution.field_vector();
    let ax = form.matrix.mul_vec(&x);
    let lay = form.layout;
    let weights = crate::assembly::mean_weights(mesh);
    let mut worst: f64 = 0.0;
    for node in 0..lay.num_nodes {
        if !mesh.is_boundary_node(node) {
            for i in 0..2 {
                let r = lay.velocity(node, i);
                worst = worst.max((ax[r] - form.rhs[r]).abs());
            }
        }
        let r = lay.pressure(node);
        worst = worst.max((ax[r] + solution.multiplier * weights[node] - form.rhs[r]).abs());
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentrelineRow {
    pub x: f64,
    pub p_h: f64,
    pub p_exact: f64,
}

/// Nodal pressures on `y = H/2`, sorted by `x`.
pub fn centreline_pressure(solution: &SolutionField, case: &BenchmarkCase, mesh: &Mesh) -> Result<Vec<CentrelineRow>> {
    let mid = case.height / 2.0;
    let tol = 1e-12 * case.height.max(1.0);
    let mut rows: Vec<CentrelineRow> = mesh
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, p)| (p[1] - mid).abs() <= tol)
        .map(|(n, &p)| CentrelineRow { x: p[0], p_h: solution.pressure[n], p_exact: case.exact.pressure(p) })
        .collect();
    if rows.is_empty() {
        return Err(Error::Analysis(format!("no mesh nodes on the centreline y = {mid}")));
    }
    rows.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(rows)
}

/// Max pressure error at centreline nodes within `2h` of the inflow or outflow.
pub fn boundary_layer_error(table: &[CentrelineRow], length: f64, h: f64) -> f64 {
    let window = 2.0 * h * (1.0 + 1e-12);
    table
        .iter()
        .filter(|r| r.x <= window || r.x >= length - window)
        .map(|r| (r.p_h - r.p_exact).abs())
        .fold(0.0, f64::max)
}

/// Max pressure error at centreline nodes in the middle half of the channel.
pub fn mid_channel_error(table: &[CentrelineRow], length: f64) -> f64 {
    table
        .iter()
        .filter(|r| (r.x - length / 2.0).abs() <= length / 4.0)
        .map(|r| (r.p_h - r.p_exact).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured;
    use crate::problem::{Exp1Params, ViscosityField};

    #[test]
    fn rates() {
        assert_eq!(convergence_rate(0.4, 0.1), Some(2.0));
        assert_eq!(convergence_rate(0.4, 0.2), Some(1.0));
        assert_eq!(convergence_rate(0.0, 0.2), None);
        assert_eq!(convergence_rate(0.4, 0.0), None);
    }

    #[test]
    fn linear_field_reproduced_exactly() {
        let case = BenchmarkCase::linear(0.0, 1.0, 0.0, ViscosityField::constant(1.0).unwrap(), 5.0, 1.0).unwrap();
        let mesh = generate_structured(5.0, 1.0, 1).unwrap();
        let sol = SolutionField::interpolate(&mesh, |p| case.exact.velocity(p), |p| case.exact.pressure(p));
        let e = compute_errors(&sol, &case, &mesh).unwrap();
        assert!(e.u_l2 < 1e-12 && e.u_h1 < 1e-12 && e.p_l2 < 1e-12 && e.p_h1 < 1e-12);
    }

    #[test]
    fn constant_pressure_shift() {
        let case = BenchmarkCase::exp1(Exp1Params::default()).unwrap();
        let mesh = generate_structured(5.0, 1.0, 1).unwrap();
        let sol = SolutionField::interpolate(&mesh, |p| case.exact.velocity(p), |p| case.exact.pressure(p) + 0.3);
        let e = compute_errors(&sol, &case, &mesh).unwrap();
        // Linear pressure is interpolated exactly, leaving only the shift.
        assert!((e.p_l2 - 0.3 * 5f64.sqrt()).abs() < 1e-12);
        assert!(e.p_h1 < 1e-12);
    }

    #[test]
    fn triple_norm_identity() {
        let e = FieldErrors { u_l2: 0.3, u_h1: 1.2, p_l2: 0.0, p_h1: 4.0 };
        let t = e.triple(2.0, 0.5, 0.01);
        assert!((t * t - (2.0 * 0.09 + 0.5 * 1.44 + 0.01 * 16.0)).abs() < 1e-14);
    }

    #[test]
    fn exact_centreline() {
        let case = BenchmarkCase::exp1(Exp1Params::default()).unwrap();
        let mesh = generate_structured(5.0, 1.0, 2).unwrap();
        let sol = SolutionField::interpolate(&mesh, |p| case.exact.velocity(p), |p| case.exact.pressure(p));
        let table = centreline_pressure(&sol, &case, &mesh).unwrap();
        assert_eq!(table.len(), 41);
        assert!(table.windows(2).all(|w| w[0].x < w[1].x));
        assert!((table[0].p_exact - 1.0).abs() < 1e-15);
        assert!((table.last().unwrap().p_exact + 1.0).abs() < 1e-15);
        let mid = table.iter().find(|r| (r.x - 2.5).abs() < 1e-12).unwrap();
        assert_eq!(mid.p_exact, 0.0);
        assert_eq!(boundary_layer_error(&table, 5.0, mesh.h), 0.0);
    }
}
