//! Global saddle-point assembly for PSPG/BVS × SD/GL.
//!
//! Unknowns are ordered as interleaved velocities `(u_x, u_y)` per node,
//! then nodal pressures, then (after [`apply_zero_mean_pressure`]) one
//! Lagrange multiplier. Rows are momentum equations tested with `v = φ_a e_i`
//! and continuity equations tested with `q = φ_a`.
//!
//! In 2D the scalar vorticity is `∇×u = ∂_x u_y − ∂_y u_x` and
//! `a×n = a_x n_y − a_y n_x`.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::problem::{compute_delta, Form, Method, ProblemData, StabilizationConfig};
use crate::quadrature::{segment_rule, triangle_rule, P1Element, SegmentRule, TriangleRule};
use crate::sparse::CsrMatrix;

/// Default volume rule degree for assembly.
pub const ASSEMBLY_TRIANGLE_DEGREE: usize = 4;
/// Default edge rule degree for assembly.
pub const ASSEMBLY_SEGMENT_DEGREE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub num_nodes: usize,
}

impl DofLayout {
    pub fn velocity(&self, node: usize, comp: usize) -> usize {
        2 * node + comp
    }

    pub fn pressure(&self, node: usize) -> usize {
        2 * self.num_nodes + node
    }

    pub fn multiplier(&self) -> usize {
        3 * self.num_nodes
    }

    /// Velocity and pressure unknowns, without the multiplier.
    pub fn num_fields(&self) -> usize {
        3 * self.num_nodes
    }
}

/// Matrix triplets and load vector accumulated by the term assemblers.
#[derive(Debug, Clone)]
pub struct Contributions {
    pub layout: DofLayout,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

impl Contributions {
    pub fn new(layout: DofLayout) -> Self {
        Self { layout, triplets: Vec::new(), rhs: vec![0.0; layout.num_fields()] }
    }

    fn add(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.triplets.push((row, col, value));
        }
    }

    pub fn into_form(self) -> AssembledForm {
        let n = self.layout.num_fields();
        AssembledForm { layout: self.layout, matrix: CsrMatrix::from_triplets(n, n, &self.triplets), rhs: self.rhs }
    }
}

/// Unconstrained bilinear form and load vector over velocity and pressure unknowns.
#[derive(Debug, Clone)]
pub struct AssembledForm {
    pub layout: DofLayout,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Constrained system ready for the linear solver.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub layout: DofLayout,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Prescribed value per field unknown, `None` when free.
    pub dirichlet: Vec<Option<f64>>,
    /// `∫ φ_i` per pressure node once the multiplier is attached.
    pub mean_weights: Option<Vec<f64>>,
}

/// Nodal velocity and pressure plus the mean-pressure multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub velocity: Vec<[f64; 2]>,
    pub pressure: Vec<f64>,
    pub multiplier: f64,
}

impl SolutionField {
    pub fn zeros(num_nodes: usize) -> Self {
        Self { velocity: vec![[0.0; 2]; num_nodes], pressure: vec![0.0; num_nodes], multiplier: 0.0 }
    }

    pub fn from_vector(layout: DofLayout, x: &[f64]) -> Self {
        let n = layout.num_nodes;
        Self {
            velocity: (0..n).map(|i| [x[layout.velocity(i, 0)], x[layout.velocity(i, 1)]]).collect(),
            pressure: (0..n).map(|i| x[layout.pressure(i)]).collect(),
            multiplier: x.get(layout.multiplier()).copied().unwrap_or(0.0),
        }
    }

    /// Field unknowns in assembly order, without the multiplier.
    pub fn field_vector(&self) -> Vec<f64> {
        let layout = DofLayout { num_nodes: self.pressure.len() };
        let mut x = vec![0.0; layout.num_fields()];
        for (i, (u, p)) in self.velocity.iter().zip(&self.pressure).enumerate() {
            x[layout.velocity(i, 0)] = u[0];
            x[layout.velocity(i, 1)] = u[1];
            x[layout.pressure(i)] = *p;
        }
        x
    }

    /// Nodal interpolant of analytic fields.
    pub fn interpolate(mesh: &Mesh, velocity: impl Fn(Point) -> [f64; 2], pressure: impl Fn(Point) -> f64) -> Self {
        Self {
            velocity: mesh.nodes.iter().map(|&p| velocity(p)).collect(),
            pressure: mesh.nodes.iter().map(|&p| pressure(p)).collect(),
            multiplier: 0.0,
        }
    }

    /// `∫_Ω p_h`.
    pub fn pressure_integral(&self, mesh: &Mesh) -> f64 {
        (0..mesh.num_triangles())
            .map(|t| mesh.area(t) / 3.0 * mesh.triangles[t].iter().map(|&n| self.pressure[n]).sum::<f64>())
            .sum()
    }
}

/// Per-element integrals shared by all terms.
struct ElementIntegrals {
    nodes: [usize; 3],
    el: P1Element,
    nu: f64,
    grad_nu: [f64; 2],
    /// `∫ φ_a ∇ν`
    grad_nu_moments: [[f64; 2]; 3],
    /// `∫ φ_a f`
    force_moments: [[f64; 2]; 3],
    force: [f64; 2],
}

fn element_integrals(mesh: &Mesh, t: usize, data: &ProblemData, rule: &TriangleRule) -> Result<ElementIntegrals> {
    let el = P1Element::new(mesh.corners(t))?;
    let mut nu = 0.0;
    let mut grad_nu = [0.0; 2];
    let mut grad_nu_moments = [[0.0; 2]; 3];
    let mut force_moments = [[0.0; 2]; 3];
    let mut force = [0.0; 2];
    let jac = el.jacobian();
    for (bary, w) in rule.iter() {
        let p = el.map(bary);
        let wj = w * jac;
        let n = data.viscosity.value(p);
        let gn = data.viscosity.gradient(p);
        let f = (data.force)(p);
        nu += wj * n;
        for d in 0..2 {
            grad_nu[d] += wj * gn[d];
            force[d] += wj * f[d];
            for a in 0..3 {
                grad_nu_moments[a][d] += wj * bary[a] * gn[d];
                force_moments[a][d] += wj * bary[a] * f[d];
            }
        }
    }
    Ok(ElementIntegrals { nodes: mesh.triangles[t], el, nu, grad_nu, grad_nu_moments, force_moments, force })
}

fn for_each_element(
    mesh: &Mesh,
    data: &ProblemData,
    mut body: impl FnMut(&ElementIntegrals),
) -> Result<()> {
    let rule = triangle_rule(ASSEMBLY_TRIANGLE_DEGREE)?;
    for t in 0..mesh.num_triangles() {
        body(&element_integrals(mesh, t, data, &rule)?);
    }
    Ok(())
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Reaction, pressure-divergence coupling and load shared by both momentum forms.
fn galerkin_common(e: &ElementIntegrals, sigma: f64, acc: &mut Contributions) {
    let lay = acc.layout;
    let area = e.el.area;
    let g = &e.el.gradients;
    for a in 0..3 {
        for b in 0..3 {
            let mass = sigma * area / 12.0 * if a == b { 2.0 } else { 1.0 };
            for i in 0..2 {
                acc.add(lay.velocity(e.nodes[a], i), lay.velocity(e.nodes[b], i), mass);
                // −(p, ∇·v)
                acc.add(lay.velocity(e.nodes[a], i), lay.pressure(e.nodes[b]), -g[a][i] * area / 3.0);
                // (q, ∇·u)
                acc.add(lay.pressure(e.nodes[a]), lay.velocity(e.nodes[b], i), g[b][i] * area / 3.0);
            }
        }
        for i in 0..2 {
            acc.rhs[lay.velocity(e.nodes[a], i)] += e.force_moments[a][i];
        }
    }
}

/// `σ(u,v) + (2ν∇ˢu, ∇ˢv) − (p, ∇·v) + (q, ∇·u)` and `(f, v)`.
pub fn assemble_galerkin_sd(mesh: &Mesh, data: &ProblemData, acc: &mut Contributions) -> Result<()> {
    let lay = acc.layout;
    for_each_element(mesh, data, |e| {
        let g = &e.el.gradients;
        for a in 0..3 {
            for b in 0..3 {
                let gg = dot(g[a], g[b]);
                for i in 0..2 {
                    for j in 0..2 {
                        let diag = if i == j { gg } else { 0.0 };
                        let k = e.nu * (diag + g[a][j] * g[b][i]);
                        acc.add(lay.velocity(e.nodes[a], i), lay.velocity(e.nodes[b], j), k);
                    }
                }
            }
        }
        galerkin_common(e, data.sigma, acc);
    })
}

/// `σ(u,v) + (ν∇u, ∇v) − (∇ᵀu∇ν, v) − (p, ∇·v) + (q, ∇·u)` and `(f, v)`.
pub fn assemble_galerkin_gl(mesh: &Mesh, data: &ProblemData, acc: &mut Contributions) -> Result<()> {
    let lay = acc.layout;
    for_each_element(mesh, data, |e| {
        let g = &e.el.gradients;
        for a in 0..3 {
            for b in 0..3 {
                let gg = dot(g[a], g[b]);
                for i in 0..2 {
                    acc.add(lay.velocity(e.nodes[a], i), lay.velocity(e.nodes[b], i), e.nu * gg);
                    for j in 0..2 {
                        // (∇ᵀ(φ_b e_j) ∇ν)_i = ∂_i φ_b ∂_j ν
                        let k = -g[b][i] * e.grad_nu_moments[a][j];
                        acc.add(lay.velocity(e.nodes[a], i), lay.velocity(e.nodes[b], j), k);
                    }
                }
            }
        }
        galerkin_common(e, data.sigma, acc);
    })
}

/// Pressure Laplacian, optional reaction coupling and `δ(∇q, f)`.
fn stabilization_common(e: &ElementIntegrals, delta: f64, sigma: Option<f64>, acc: &mut Contributions) {
    let lay = acc.layout;
    let area = e.el.area;
    let g = &e.el.gradients;
    for a in 0..3 {
        for b in 0..3 {
            acc.add(lay.pressure(e.nodes[a]), lay.pressure(e.nodes[b]), delta * area * dot(g[a], g[b]));
            if let Some(s) = sigma {
                for j in 0..2 {
                    acc.add(lay.pressure(e.nodes[a]), lay.velocity(e.nodes[b], j), delta * s * g[a][j] * area / 3.0);
                }
            }
        }
        acc.rhs[lay.pressure(e.nodes[a])] += delta * dot(g[a], e.force);
    }
}

/// Element-wise PSPG residual with `∇·(2ν∇ˢu_h) = 2∇ˢu_h∇ν` for P1 velocities.
pub fn assemble_pspg(
    mesh: &Mesh,
    data: &ProblemData,
    delta: f64,
    reaction_in_residual: bool,
    viscous_residual: bool,
    acc: &mut Contributions,
) -> Result<()> {
    let lay = acc.layout;
    let sigma = reaction_in_residual.then_some(data.sigma);
    for_each_element(mesh, data, |e| {
        stabilization_common(e, delta, sigma, acc);
        if viscous_residual {
            let g = &e.el.gradients;
            let gn = e.grad_nu;
            for a in 0..3 {
                for b in 0..3 {
                    let gg = dot(g[a], g[b]);
                    let gb_nu = dot(g[b], gn);
                    for j in 0..2 {
                        // ∇φ_a · 2∇ˢ(φ_b e_j)∇ν
                        let k = g[a][j] * gb_nu + gg * gn[j];
                        acc.add(lay.pressure(e.nodes[a]), lay.velocity(e.nodes[b], j), -delta * k);
                    }
                }
            }
        }
    })?;
    if !reaction_in_residual {
        reaction_boundary_forcing(mesh, data, delta, acc)?;
    }
    Ok(())
}

/// Global BVS residual: `δ(∇q,∇p) − δ(∇q, 2∇ᵀu∇ν) + δ(∇q×n, ν∇×u)_Γ`.
pub fn assemble_bvs(
    mesh: &Mesh,
    data: &ProblemData,
    delta: f64,
    reaction_in_residual: bool,
    acc: &mut Contributions,
) -> Result<()> {
    let lay = acc.layout;
    let sigma = reaction_in_residual.then_some(data.sigma);
    for_each_element(mesh, data, |e| {
        stabilization_common(e, delta, sigma, acc);
        let g = &e.el.gradients;
        for a in 0..3 {
            for b in 0..3 {
                let gg = dot(g[a], g[b]);
                for j in 0..2 {
                    // ∇φ_a · 2∇ᵀ(φ_b e_j)∇ν = 2 (∇φ_a·∇φ_b) ∂_j ν
                    acc.add(lay.pressure(e.nodes[a]), lay.velocity(e.nodes[b], j), -2.0 * delta * gg * e.grad_nu[j]);
                }
            }
        }
    })?;
    assemble_boundary_vorticity(mesh, data, delta, acc)?;
    if !reaction_in_residual {
        reaction_boundary_forcing(mesh, data, delta, acc)?;
    }
    Ok(())
}

/// `δ(∇q×n, ν∇×u)_Γ`, edge by edge with the owning element's gradients.
pub fn assemble_boundary_vorticity(mesh: &Mesh, data: &ProblemData, delta: f64, acc: &mut Contributions) -> Result<()> {
    let lay = acc.layout;
    let rule = segment_rule(ASSEMBLY_SEGMENT_DEGREE)?;
    for edge in &mesh.boundary_edges {
        let el = P1Element::new(mesh.corners(edge.triangle))?;
        let nodes = mesh.triangles[edge.triangle];
        let (p0, p1) = (mesh.nodes[edge.nodes[0]], mesh.nodes[edge.nodes[1]]);
        let nu_edge = integrate_edge(&rule, p0, p1, |p, _| data.viscosity.value(p));
        let n = edge.normal;
        let g = &el.gradients;
        for a in 0..3 {
            let cross = g[a][0] * n[1] - g[a][1] * n[0];
            for b in 0..3 {
                // ∇×(φ_b e_x) = −∂_y φ_b,  ∇×(φ_b e_y) = ∂_x φ_b
                let curl = [-g[b][1], g[b][0]];
                for j in 0..2 {
                    acc.add(lay.pressure(nodes[a]), lay.velocity(nodes[b], j), delta * cross * curl[j] * nu_edge);
                }
            }
        }
    }
    Ok(())
}

/// Right-hand side `−δσ(q, g·n)_Γ` replacing `δ(∇q, σu)` in the bilinear form.
pub fn reaction_boundary_forcing(mesh: &Mesh, data: &ProblemData, delta: f64, acc: &mut Contributions) -> Result<()> {
    if data.sigma == 0.0 {
        return Ok(());
    }
    let lay = acc.layout;
    let rule = segment_rule(ASSEMBLY_SEGMENT_DEGREE)?;
    for edge in &mesh.boundary_edges {
        let (p0, p1) = (mesh.nodes[edge.nodes[0]], mesh.nodes[edge.nodes[1]]);
        let n = edge.normal;
        for (k, &node) in edge.nodes.iter().enumerate() {
            let flux = integrate_edge(&rule, p0, p1, |p, s| {
                let phi = if k == 0 { 1.0 - s } else { s };
                phi * dot((data.dirichlet)(p), n)
            });
            acc.rhs[lay.pressure(node)] -= delta * data.sigma * flux;
        }
    }
    Ok(())
}

/// `∫_{p0}^{p1} f(x, s) ds` with `s ∈ [0, 1]` the edge parameter.
pub(crate) fn integrate_edge(rule: &SegmentRule, p0: Point, p1: Point, mut f: impl FnMut(Point, f64) -> f64) -> f64 {
    let len = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
    rule.iter()
        .map(|(&s, w)| {
            let p = [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])];
            w * f(p, s)
        })
        .sum::<f64>()
        * len
}

/// Assembles the unconstrained form for one method/form combination.
pub fn assemble(mesh: &Mesh, data: &ProblemData, config: &StabilizationConfig, delta: f64) -> Result<AssembledForm> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidStabilization(format!("delta must be positive, got {delta}")));
    }
    let mut acc = Contributions::new(DofLayout { num_nodes: mesh.num_nodes() });
    match config.form {
        Form::Sd => assemble_galerkin_sd(mesh, data, &mut acc)?,
        Form::Gl => assemble_galerkin_gl(mesh, data, &mut acc)?,
    }
    match config.method {
        Method::Pspg => {
            assemble_pspg(mesh, data, delta, config.reaction_in_residual, config.viscous_residual, &mut acc)?
        }
        Method::Bvs => assemble_bvs(mesh, data, delta, config.reaction_in_residual, &mut acc)?,
    }
    Ok(acc.into_form())
}

/// Imposes nodal Dirichlet values by row and column elimination.
pub fn apply_dirichlet(form: &AssembledForm, mesh: &Mesh, g: &(dyn Fn(Point) -> [f64; 2] + Sync)) -> Result<SparseSystem> {
    let lay = form.layout;
    let mut dirichlet = vec![None; lay.num_fields()];
    for node in mesh.boundary_nodes() {
        let value = g(mesh.nodes[node]);
        if !value.iter().all(|v| v.is_finite()) {
            return Err(Error::MissingDirichlet { node });
        }
        for (comp, &v) in value.iter().enumerate() {
            dirichlet[lay.velocity(node, comp)] = Some(v);
        }
    }

    let mut rhs = form.rhs.clone();
    let mut triplets = Vec::with_capacity(form.matrix.nnz());
    for r in 0..form.matrix.nrows() {
        if let Some(v) = dirichlet[r] {
            triplets.push((r, r, 1.0));
            rhs[r] = v;
            continue;
        }
        for (c, a) in form.matrix.row(r) {
            match dirichlet[c] {
                Some(v) => rhs[r] -= a * v,
                None => triplets.push((r, c, a)),
            }
        }
    }
    let n = lay.num_fields();
    Ok(SparseSystem {
        layout: lay,
        matrix: CsrMatrix::from_triplets(n, n, &triplets).prune_zeros(),
        rhs,
        dirichlet,
        mean_weights: None,
    })
}

/// `∫ φ_i` for every node.
pub fn mean_weights(mesh: &Mesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.num_nodes()];
    for t in 0..mesh.num_triangles() {
        let third = mesh.area(t) / 3.0;
        for &n in &mesh.triangles[t] {
            w[n] += third;
        }
    }
    w
}

/// Borders the system with one multiplier enforcing `∫_Ω p_h = 0`.
pub fn apply_zero_mean_pressure(system: &SparseSystem, mesh: &Mesh) -> SparseSystem {
    let lay = system.layout;
    let m = lay.multiplier();
    let weights = mean_weights(mesh);
    let mut triplets: Vec<_> = system.matrix.triplets().collect();
    for (i, &w) in weights.iter().enumerate() {
        triplets.push((lay.pressure(i), m, w));
        triplets.push((m, lay.pressure(i), w));
    }
    let mut rhs = system.rhs.clone();
    rhs.push(0.0);
    SparseSystem {
        layout: lay,
        matrix: CsrMatrix::from_triplets(m + 1, m + 1, &triplets),
        rhs,
        dirichlet: system.dirichlet.clone(),
        mean_weights: Some(weights),
    }
}

/// Everything produced by discretising one problem on one mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub config: StabilizationConfig,
    pub delta: f64,
    pub form: AssembledForm,
    pub system: SparseSystem,
}

/// δ, assembly, Dirichlet elimination and the mean constraint in one call.
pub fn discretize(mesh: &Mesh, data: &ProblemData, config: &StabilizationConfig) -> Result<Discretization> {
    let delta = compute_delta(config, mesh.h, data)?;
    let form = assemble(mesh, data, config, delta)?;
    let constrained = apply_dirichlet(&form, mesh, data.dirichlet.as_ref())?;
    let system = apply_zero_mean_pressure(&constrained, mesh);
    Ok(Discretization { config: *config, delta, form, system })
}
