//! Continuous problem data for the generalised Stokes system
//!
//! ```text
//! σ u − ∇·(2ν ∇ˢu) + ∇p = f,   ∇·u = 0   in Ω,   u = g on Γ,
//! ```
//!
//! the analytic channel benchmarks, and the stabilisation parameter.
//!
//! Tensor convention throughout: `grad[i][j] = ∂u_i/∂x_j`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Viscosity laws depending on the transverse coordinate only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViscosityLaw {
    Constant(f64),
    /// `ν = a y + b`
    Linear { a: f64, b: f64 },
    /// `ν = (y + b)²`
    Quadratic { b: f64 },
}

/// A viscosity law together with certified bounds over `y ∈ [0, H]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityField {
    pub law: ViscosityLaw,
    pub nu_min: f64,
    pub nu_max: f64,
    /// `‖∇ν‖∞` over the closed domain.
    pub grad_inf: f64,
}

impl ViscosityField {
    pub fn new(law: ViscosityLaw, height: f64) -> Result<Self> {
        let (nu_min, nu_max, grad_inf) = match law {
            ViscosityLaw::Constant(nu) => (nu, nu, 0.0),
            ViscosityLaw::Linear { a, b } => {
                let (v0, v1) = (b, a * height + b);
                (v0.min(v1), v0.max(v1), a.abs())
            }
            ViscosityLaw::Quadratic { b } => {
                let (v0, v1) = (b * b, (height + b).powi(2));
                let min = if b < 0.0 && b + height > 0.0 { 0.0 } else { v0.min(v1) };
                (min, v0.max(v1), 2.0 * b.abs().max((height + b).abs()))
            }
        };
        if !(nu_min > 0.0 && nu_max.is_finite()) {
            return Err(Error::InvalidStabilization(format!(
                "viscosity {law:?} is not bounded away from zero on [0, {height}]"
            )));
        }
        Ok(Self { law, nu_min, nu_max, grad_inf })
    }

    pub fn constant(nu: f64) -> Result<Self> {
        Self::new(ViscosityLaw::Constant(nu), 1.0)
    }

    pub fn value(&self, p: Point) -> f64 {
        let y = p[1];
        match self.law {
            ViscosityLaw::Constant(nu) => nu,
            ViscosityLaw::Linear { a, b } => a * y + b,
            ViscosityLaw::Quadratic { b } => (y + b) * (y + b),
        }
    }

    pub fn gradient(&self, p: Point) -> [f64; 2] {
        let y = p[1];
        match self.law {
            ViscosityLaw::Constant(_) => [0.0, 0.0],
            ViscosityLaw::Linear { a, .. } => [0.0, a],
            ViscosityLaw::Quadratic { b } => [0.0, 2.0 * (y + b)],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.grad_inf == 0.0
    }
}

pub type VectorField = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Coefficients and data of one boundary value problem.
#[derive(Clone)]
pub struct ProblemData {
    pub sigma: f64,
    pub viscosity: ViscosityField,
    pub force: VectorField,
    pub dirichlet: VectorField,
}

impl ProblemData {
    pub fn new(sigma: f64, viscosity: ViscosityField, force: VectorField, dirichlet: VectorField) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidStabilization(format!("reaction coefficient must be >= 0, got {sigma}")));
        }
        Ok(Self { sigma, viscosity, force, dirichlet })
    }
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("sigma", &self.sigma)
            .field("viscosity", &self.viscosity)
            .finish_non_exhaustive()
    }
}

/// Parameters of the first channel solution (`σ = 0`, `ν = a y + b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp1Params {
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
    pub length: f64,
    pub height: f64,
}

impl Default for Exp1Params {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, kappa: 0.4, length: 5.0, height: 1.0 }
    }
}

/// Parameters of the second channel solution (`σ = 2`, `ν = (y + b)²`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp2Params {
    pub b: f64,
    pub kappa: f64,
    pub length: f64,
    pub height: f64,
}

impl Default for Exp2Params {
    fn default() -> Self {
        Self { b: 1.0, kappa: 0.4, length: 5.0, height: 1.0 }
    }
}

impl Exp2Params {
    pub fn beta(&self) -> f64 {
        let (b, h) = (self.b, self.height);
        2.0 * (h + b) / b.powi(3) + 1.0 / (h + b).powi(2)
    }
}

/// Closed-form velocity and pressure of the reaction-free channel flow.
pub fn exact_solution_exp1(x: f64, y: f64, prm: &Exp1Params) -> Result<([f64; 2], f64)> {
    let shift = prm.b / prm.a;
    if y + shift <= 0.0 || prm.height + shift <= 0.0 {
        return Err(Error::Domain { x, y });
    }
    let ux = prm.kappa / prm.a * (prm.height - y + shift * ((y + shift) / (prm.height + shift)).ln());
    Ok(([ux, 0.0], prm.kappa * (prm.length / 2.0 - x)))
}

/// Closed-form velocity and pressure of the reactive (`σ = 2`) channel flow.
pub fn exact_solution_exp2(x: f64, y: f64, prm: &Exp2Params) -> Result<([f64; 2], f64)> {
    let s = y + prm.b;
    if s == 0.0 || prm.b == 0.0 {
        return Err(Error::Domain { x, y });
    }
    let beta = prm.beta();
    let ux = 0.5 * prm.kappa * (1.0 - 2.0 * s / (beta * prm.b.powi(3)) - 1.0 / (beta * s * s));
    Ok(([ux, 0.0], prm.kappa * (prm.length / 2.0 - x)))
}

/// Exact solutions with hand-coded first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactSolution {
    Exp1(Exp1Params),
    Exp2(Exp2Params),
    /// `u = (y², x²/L)`, `p = κ(L/2 − x) + (y − H/2)`, `ν = ν₀ + ν₁ y`.
    Polynomial { kappa: f64, length: f64, height: f64 },
    /// `u = (c₀ + c₁ y, 0)`, `p = 0`.
    Linear { c0: f64, c1: f64 },
}

impl ExactSolution {
    pub fn velocity(&self, p: Point) -> [f64; 2] {
        let [x, y] = p;
        match *self {
            Self::Exp1(prm) => exp1_profile(&prm, y).map(|(u, _, _)| [u, 0.0]).unwrap_or([f64::NAN; 2]),
            Self::Exp2(prm) => [exp2_profile(&prm, y).0, 0.0],
            Self::Polynomial { length, .. } => [y * y, x * x / length],
            Self::Linear { c0, c1 } => [c0 + c1 * y, 0.0],
        }
    }

    pub fn velocity_gradient(&self, p: Point) -> [[f64; 2]; 2] {
        let [x, y] = p;
        match *self {
            Self::Exp1(prm) => {
                let du = exp1_profile(&prm, y).map(|(_, d, _)| d).unwrap_or(f64::NAN);
                [[0.0, du], [0.0, 0.0]]
            }
            Self::Exp2(prm) => [[0.0, exp2_profile(&prm, y).1], [0.0, 0.0]],
            Self::Polynomial { length, .. } => [[0.0, 2.0 * y], [2.0 * x / length, 0.0]],
            Self::Linear { c1, .. } => [[0.0, c1], [0.0, 0.0]],
        }
    }

    pub fn pressure(&self, p: Point) -> f64 {
        let [x, y] = p;
        match *self {
            Self::Exp1(prm) => prm.kappa * (prm.length / 2.0 - x),
            Self::Exp2(prm) => prm.kappa * (prm.length / 2.0 - x),
            Self::Polynomial { kappa, length, height } => kappa * (length / 2.0 - x) + (y - height / 2.0),
            Self::Linear { .. } => 0.0,
        }
    }

    pub fn pressure_gradient(&self, _p: Point) -> [f64; 2] {
        match *self {
            Self::Exp1(prm) => [-prm.kappa, 0.0],
            Self::Exp2(prm) => [-prm.kappa, 0.0],
            Self::Polynomial { kappa, .. } => [-kappa, 1.0],
            Self::Linear { .. } => [0.0, 0.0],
        }
    }

    /// `∇·(2ν∇ˢu)` from hand-differentiated second derivatives.
    pub fn stress_divergence(&self, p: Point, nu: &ViscosityField) -> [f64; 2] {
        let [x, y] = p;
        let n = nu.value(p);
        let gn = nu.gradient(p);
        match *self {
            Self::Exp1(prm) => {
                // (ν u')' with ν = a y + b.
                let (_, du, d2u) = exp1_profile(&prm, y).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
                [gn[1] * du + n * d2u, 0.0]
            }
            Self::Exp2(prm) => {
                let (_, du, d2u) = exp2_profile(&prm, y);
                [gn[1] * du + n * d2u, 0.0]
            }
            Self::Polynomial { length, .. } => {
                // 2∇ˢu ∇ν + ν Δu for the divergence-free field.
                let shear = 2.0 * y + 2.0 * x / length;
                [shear * gn[1] + 2.0 * n, shear * gn[0] + 2.0 * n / length]
            }
            Self::Linear { c1, .. } => [c1 * gn[1], c1 * gn[0]],
        }
    }
}

fn exp1_profile(prm: &Exp1Params, y: f64) -> Option<(f64, f64, f64)> {
    let ([u, _], _) = exact_solution_exp1(0.0, y, prm).ok()?;
    let shift = prm.b / prm.a;
    let du = prm.kappa / prm.a * (-1.0 + shift / (y + shift));
    let d2u = -prm.kappa / prm.a * shift / (y + shift).powi(2);
    Some((u, du, d2u))
}

fn exp2_profile(prm: &Exp2Params, y: f64) -> (f64, f64, f64) {
    let s = y + prm.b;
    let beta = prm.beta();
    let b3 = prm.b.powi(3);
    let u = 0.5 * prm.kappa * (1.0 - 2.0 * s / (beta * b3) - 1.0 / (beta * s * s));
    let du = 0.5 * prm.kappa * (-2.0 / (beta * b3) + 2.0 / (beta * s.powi(3)));
    let d2u = 0.5 * prm.kappa * (-6.0 / (beta * s.powi(4)));
    (u, du, d2u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Exp1,
    Exp2,
    Polynomial,
    Linear,
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseKind::Exp1 => "exp1",
            CaseKind::Exp2 => "exp2",
            CaseKind::Polynomial => "poly",
            CaseKind::Linear => "linear",
        })
    }
}

/// A channel problem with a known exact solution.
#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub kind: CaseKind,
    pub length: f64,
    pub height: f64,
    pub data: ProblemData,
    pub exact: ExactSolution,
}

impl BenchmarkCase {
    /// Reaction-free flow with `ν = a y + b`.
    pub fn exp1(prm: Exp1Params) -> Result<Self> {
        if !(prm.a > 0.0 && prm.b > 0.0 && prm.kappa > 0.0) {
            return Err(Error::InvalidStabilization("exp1 requires a, b, kappa > 0".into()));
        }
        let viscosity = ViscosityField::new(ViscosityLaw::Linear { a: prm.a, b: prm.b }, prm.height)?;
        let exact = ExactSolution::Exp1(prm);
        Self::from_exact(CaseKind::Exp1, prm.length, prm.height, 0.0, viscosity, exact, |_| [0.0, 0.0])
    }

    /// Generalised Stokes flow with `σ = 2` and `ν = (y + b)²`.
    pub fn exp2(prm: Exp2Params) -> Result<Self> {
        if !(prm.b > 0.0 && prm.kappa > 0.0) {
            return Err(Error::InvalidStabilization("exp2 requires b, kappa > 0".into()));
        }
        let viscosity = ViscosityField::new(ViscosityLaw::Quadratic { b: prm.b }, prm.height)?;
        let exact = ExactSolution::Exp2(prm);
        Self::from_exact(CaseKind::Exp2, prm.length, prm.height, 2.0, viscosity, exact, |_| [0.0, 0.0])
    }

    /// Quadratic manufactured flow with `ν = ν₀ + ν₁ y` and the matching body force.
    pub fn polynomial(sigma: f64, nu0: f64, nu1: f64, kappa: f64, length: f64, height: f64) -> Result<Self> {
        let law = if nu1 == 0.0 { ViscosityLaw::Constant(nu0) } else { ViscosityLaw::Linear { a: nu1, b: nu0 } };
        let viscosity = ViscosityField::new(law, height)?;
        let exact = ExactSolution::Polynomial { kappa, length, height };
        Self::from_exact(CaseKind::Polynomial, length, height, sigma, viscosity, exact, move |p| {
            let u = exact.velocity(p);
            let div = exact.stress_divergence(p, &viscosity);
            let gp = exact.pressure_gradient(p);
            [sigma * u[0] - div[0] + gp[0], sigma * u[1] - div[1] + gp[1]]
        })
    }

    /// Shear/plug flow `u = (c₀ + c₁ y, 0)` with zero pressure in any viscosity field.
    pub fn linear(c0: f64, c1: f64, sigma: f64, viscosity: ViscosityField, length: f64, height: f64) -> Result<Self> {
        let exact = ExactSolution::Linear { c0, c1 };
        Self::from_exact(CaseKind::Linear, length, height, sigma, viscosity, exact, move |p| {
            let u = exact.velocity(p);
            let div = exact.stress_divergence(p, &viscosity);
            [sigma * u[0] - div[0], sigma * u[1] - div[1]]
        })
    }

    fn from_exact(
        kind: CaseKind,
        length: f64,
        height: f64,
        sigma: f64,
        viscosity: ViscosityField,
        exact: ExactSolution,
        force: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(length > 0.0 && height > 0.0) {
            return Err(Error::InvalidMesh(format!("channel dimensions must be positive, got {length} x {height}")));
        }
        let data = ProblemData::new(sigma, viscosity, Arc::new(force), Arc::new(move |p| exact.velocity(p)))?;
        Ok(Self { kind, length, height, data, exact })
    }

    /// Momentum residual `σu − ∇·(2ν∇ˢu) + ∇p − f` and `∇·u` of the exact fields.
    pub fn strong_residual(&self, p: Point) -> ([f64; 2], f64) {
        let u = self.exact.velocity(p);
        let div_stress = self.exact.stress_divergence(p, &self.data.viscosity);
        let gp = self.exact.pressure_gradient(p);
        let f = (self.data.force)(p);
        let s = self.data.sigma;
        let grad = self.exact.velocity_gradient(p);
        (
            [s * u[0] - div_stress[0] + gp[0] - f[0], s * u[1] - div_stress[1] + gp[1] - f[1]],
            grad[0][0] + grad[1][1],
        )
    }
}

/// Stabilisation variants of the continuity equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pspg,
    Bvs,
}

/// Momentum forms: stress divergence or generalised Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Sd,
    Gl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaFormula {
    /// `γ (ν_min h²/12) / (h²‖∇ν‖²∞ + ν_max²)`
    Experiment,
    /// Lemma bound for the stress-divergence form, including the `1/(3σ)` branch.
    LemmaSd,
    /// Lemma bound for the generalised Laplacian form.
    LemmaGl,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pspg => "pspg",
            Method::Bvs => "bvs",
        })
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Sd => "sd",
            Form::Gl => "gl",
        })
    }
}

impl fmt::Display for DeltaFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeltaFormula::Experiment => "experiment",
            DeltaFormula::LemmaSd => "lemma_sd",
            DeltaFormula::LemmaGl => "lemma_gl",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationConfig {
    pub method: Method,
    pub form: Form,
    pub gamma: f64,
    pub delta_formula: DeltaFormula,
    /// Surrogate for the trace/quasi-uniformity constant.
    pub trace_constant: f64,
    /// Keep `δ(∇q, σu)` in the bilinear form. Otherwise it is moved to the
    /// right-hand side as `−δσ(q, g·n)_Γ`.
    pub reaction_in_residual: bool,
    /// PSPG only: keep the surviving `2∇ˢu_h∇ν` part of the viscous residual.
    pub viscous_residual: bool,
}

impl StabilizationConfig {
    pub fn new(method: Method, form: Form) -> Self {
        Self {
            method,
            form,
            gamma: 1.0,
            delta_formula: DeltaFormula::Experiment,
            trace_constant: 1.0,
            reaction_in_residual: method == Method::Pspg,
            viscous_residual: true,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_delta_formula(mut self, formula: DeltaFormula) -> Self {
        self.delta_formula = formula;
        self
    }

    pub fn with_reaction_in_residual(mut self, keep: bool) -> Self {
        self.reaction_in_residual = keep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidStabilization(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.trace_constant > 0.0 && self.trace_constant.is_finite()) {
            return Err(Error::InvalidStabilization(format!(
                "trace constant must be positive, got {}",
                self.trace_constant
            )));
        }
        Ok(())
    }
}

/// Stabilisation parameter `δ` for mesh size `h`.
pub fn compute_delta(config: &StabilizationConfig, h: f64, data: &ProblemData) -> Result<f64> {
    config.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidStabilization(format!("mesh size must be positive, got {h}")));
    }
    let nu = &data.viscosity;
    let h2 = h * h;
    let c = match config.delta_formula {
        DeltaFormula::Experiment => 1.0,
        DeltaFormula::LemmaSd | DeltaFormula::LemmaGl => config.trace_constant,
    };
    let viscous = (nu.nu_min * h2 / 12.0) / (h2 * nu.grad_inf.powi(2) + c * nu.nu_max.powi(2));
    let bound = match config.delta_formula {
        DeltaFormula::LemmaSd if config.reaction_in_residual => {
            if data.sigma == 0.0 {
                return Err(Error::InvalidStabilization(
                    "the 1/(3σ) branch is undefined for σ = 0; disable reaction_in_residual".into(),
                ));
            }
            viscous.min(1.0 / (3.0 * data.sigma))
        }
        _ => viscous,
    };
    let delta = config.gamma * bound;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidStabilization(format!("stabilisation parameter is not positive: {delta}")));
    }
    Ok(delta)
}

/// Reaction coefficient needed for coercivity of the generalised Laplacian form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlRestriction {
    pub sigma: f64,
    pub required: f64,
}

impl GlRestriction {
    pub fn of(data: &ProblemData) -> Self {
        let nu = &data.viscosity;
        Self { sigma: data.sigma, required: 3.0 * nu.grad_inf.powi(2) / nu.nu_min }
    }

    pub fn satisfied(&self) -> bool {
        self.sigma >= self.required
    }
}

impl fmt::Display for GlRestriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "GL coercivity restriction violated: sigma = {} < 3 |grad nu|^2 / nu_min = {}",
            self.sigma, self.required
        )
    }
}

/// Warning text when the GL form is used without enough reaction.
pub fn gl_restriction_warning(config: &StabilizationConfig, data: &ProblemData) -> Option<String> {
    let r = GlRestriction::of(data);
    (config.form == Form::Gl && !r.satisfied()).then(|| r.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn delta_worked_values() {
        let exp1 = BenchmarkCase::exp1(Exp1Params::default()).unwrap();
        let cfg = StabilizationConfig::new(Method::Bvs, Form::Sd);
        let d = compute_delta(&cfg, 0.1, &exp1.data).unwrap();
        assert!(rel(d, (0.01 / 12.0) / (0.01 + 4.0)) < 1e-12);
        assert!((d - 2.0782e-4).abs() < 1e-8);

        let unit = BenchmarkCase::linear(0.0, 0.0, 0.0, ViscosityField::constant(1.0).unwrap(), 1.0, 1.0).unwrap();
        let d = compute_delta(&cfg, 0.5, &unit.data).unwrap();
        assert!(rel(d, 0.25 / 12.0) < 1e-12);

        let reactive = BenchmarkCase::linear(0.0, 0.0, 3.0, ViscosityField::constant(1.0).unwrap(), 1.0, 1.0).unwrap();
        let lemma = StabilizationConfig::new(Method::Bvs, Form::Sd)
            .with_delta_formula(DeltaFormula::LemmaSd)
            .with_reaction_in_residual(true);
        let d = compute_delta(&lemma, 2.0, &reactive.data).unwrap();
        assert!(rel(d, 1.0 / 9.0) < 1e-12);
    }

    #[test]
    fn zero_sigma_reaction_branch_rejected() {
        let exp1 = BenchmarkCase::exp1(Exp1Params::default()).unwrap();
        let lemma = StabilizationConfig::new(Method::Bvs, Form::Sd)
            .with_delta_formula(DeltaFormula::LemmaSd)
            .with_reaction_in_residual(true);
        assert!(compute_delta(&lemma, 0.1, &exp1.data).is_err());
        assert!(compute_delta(&lemma.with_reaction_in_residual(false), 0.1, &exp1.data).is_ok());
    }

    #[test]
    fn invalid_gamma_rejected() {
        let exp1 = BenchmarkCase::exp1(Exp1Params::default()).unwrap();
        let cfg = StabilizationConfig::new(Method::Pspg, Form::Sd).with_gamma(0.0);
        assert!(compute_delta(&cfg, 0.1, &exp1.data).is_err());
    }

    #[test]
    fn exp1_worked_values() {
        let prm = Exp1Params::default();
        let (u, p) = exact_solution_exp1(0.0, 0.0, &prm).unwrap();
        assert!((u[0] - 0.4 * (1.0 + 0.5f64.ln())).abs() < 1e-15);
        assert!((u[0] - 0.1227411).abs() < 1e-7);
        assert_eq!(p, 1.0);
        let (u, _) = exact_solution_exp1(3.3, 1.0, &prm).unwrap();
        assert_eq!(u[0], 0.0);
        let (_, p) = exact_solution_exp1(2.5, 0.3, &prm).unwrap();
        assert_eq!(p, 0.0);
        let bad = Exp1Params { a: 1.0, b: 0.5, ..prm };
        assert!(exact_solution_exp1(0.0, -0.6, &bad).is_err());
    }

    #[test]
    fn exp2_worked_values() {
        let prm = Exp2Params::default();
        assert!((prm.beta() - 4.25).abs() < 1e-15);
        let (u, _) = exact_solution_exp2(1.0, 1.0, &prm).unwrap();
        assert!(u[0].abs() < 1e-14);
        let (u, _) = exact_solution_exp2(1.0, 0.0, &prm).unwrap();
        assert!((u[0] - 0.2 * (1.0 - 3.0 / 4.25)).abs() < 1e-15);
        assert!((u[0] - 5.88235e-2).abs() < 1e-7);
    }

    #[test]
    fn bounds_of_benchmark_fields() {
        let exp1 = BenchmarkCase::exp1(Exp1Params::default()).unwrap();
        let v = exp1.data.viscosity;
        assert_eq!((v.nu_min, v.nu_max, v.grad_inf), (1.0, 2.0, 1.0));
        let exp2 = BenchmarkCase::exp2(Exp2Params::default()).unwrap();
        let v = exp2.data.viscosity;
        assert_eq!((v.nu_min, v.nu_max, v.grad_inf), (1.0, 4.0, 4.0));
        assert!(ViscosityField::new(ViscosityLaw::Linear { a: -2.0, b: 1.0 }, 1.0).is_err());
    }

    #[test]
    fn gl_restriction() {
        let exp2 = BenchmarkCase::exp2(Exp2Params::default()).unwrap();
        let r = GlRestriction::of(&exp2.data);
        assert_eq!(r.required, 48.0);
        assert!(!r.satisfied());
        let gl = StabilizationConfig::new(Method::Bvs, Form::Gl);
        let sd = StabilizationConfig::new(Method::Bvs, Form::Sd);
        assert!(gl_restriction_warning(&gl, &exp2.data).unwrap().contains("48"));
        assert!(gl_restriction_warning(&sd, &exp2.data).is_none());
        let poly = BenchmarkCase::polynomial(0.0, 1.0, 0.0, 0.4, 5.0, 1.0).unwrap();
        assert!(gl_restriction_warning(&gl, &poly.data).is_none());
    }

    #[test]
    fn divergence_free_exactly() {
        let cases = [
            BenchmarkCase::exp1(Exp1Params::default()).unwrap(),
            BenchmarkCase::exp2(Exp2Params::default()).unwrap(),
            BenchmarkCase::polynomial(1.0, 1.0, 0.5, 0.4, 5.0, 1.0).unwrap(),
        ];
        for case in &cases {
            for p in [[0.3, 0.2], [4.1, 0.9], [2.5, 0.5]] {
                assert_eq!(case.strong_residual(p).1, 0.0);
            }
        }
    }
}
