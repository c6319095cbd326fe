//! Experiment driver: single solves, refinement sweeps and PSPG/BVS
//! comparisons, with CSV, JSON and VTK reports.
//!
//! Every report is a pure function of the [`RunConfig`]: no timings or other
//! run-dependent values are written, so re-running a command reproduces its
//! files byte for byte.

use std::fs;
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    boundary_layer_error, centreline_pressure, compute_errors, convergence_rate, mid_channel_error, CentrelineRow,
    FieldErrors,
};
use crate::assembly::{discretize, SolutionField};
use crate::config::{CaseFile, RunOverrides};
use crate::error::{Error, Result};
use crate::linsolve::{solve, SolveReport};
use crate::mesh::{generate_structured, Mesh};
use crate::problem::{
    gl_restriction_warning, BenchmarkCase, DeltaFormula, Exp1Params, Exp2Params, Form, Method, StabilizationConfig,
};

/// Finest refinement level accepted by the driver (about 10⁶ unknowns).
pub const MAX_LEVEL: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentSource {
    Exp1,
    Exp2,
    CaseFile(PathBuf),
}

impl std::str::FromStr for ExperimentSource {
    type Err = std::convert::Infallible;

    /// `exp1` and `exp2` name the built-in channel flows; anything else is a path.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "exp1" => ExperimentSource::Exp1,
            "exp2" => ExperimentSource::Exp2,
            path => ExperimentSource::CaseFile(PathBuf::from(path)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentSource,
    pub method: Method,
    pub form: Form,
    pub gamma: f64,
    pub delta_formula: DeltaFormula,
    pub trace_constant: f64,
    pub levels: RangeInclusive<usize>,
    /// `None` keeps each method's default.
    pub reaction_in_residual: Option<bool>,
    pub out_dir: PathBuf,
    pub vtk: bool,
}

impl RunConfig {
    pub fn new(experiment: ExperimentSource) -> Self {
        Self {
            experiment,
            method: Method::Bvs,
            form: Form::Sd,
            gamma: 1.0,
            delta_formula: DeltaFormula::Experiment,
            trace_constant: 1.0,
            levels: 2..=5,
            reaction_in_residual: None,
            out_dir: PathBuf::from("out"),
            vtk: false,
        }
    }

    /// Copies every setting present in `overrides`.
    pub fn apply(&mut self, overrides: &RunOverrides) {
        if let Some(m) = overrides.method {
            self.method = m;
        }
        if let Some(f) = overrides.form {
            self.form = f;
        }
        if let Some(g) = overrides.gamma {
            self.gamma = g;
        }
        if let Some(d) = overrides.delta_formula {
            self.delta_formula = d;
        }
        if let Some(r) = overrides.reaction_in_residual {
            self.reaction_in_residual = Some(r);
        }
        if let Some(l) = &overrides.levels {
            self.levels = l.clone();
        }
        if let Some(c) = overrides.trace_constant {
            self.trace_constant = c;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::RunConfig(format!("empty level range {:?}", self.levels)));
        }
        if *self.levels.end() > MAX_LEVEL {
            return Err(Error::RunConfig(format!("levels must lie in [0, {MAX_LEVEL}], got {:?}", self.levels)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::RunConfig(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.trace_constant > 0.0 && self.trace_constant.is_finite()) {
            return Err(Error::RunConfig(format!("C must be positive, got {}", self.trace_constant)));
        }
        Ok(())
    }

    pub fn case(&self) -> Result<BenchmarkCase> {
        match &self.experiment {
            ExperimentSource::Exp1 => BenchmarkCase::exp1(Exp1Params::default()),
            ExperimentSource::Exp2 => BenchmarkCase::exp2(Exp2Params::default()),
            ExperimentSource::CaseFile(path) => CaseFile::read(path)?.case.build(),
        }
    }

    pub fn experiment_name(&self) -> String {
        match &self.experiment {
            ExperimentSource::Exp1 => "exp1".into(),
            ExperimentSource::Exp2 => "exp2".into(),
            ExperimentSource::CaseFile(path) => path.display().to_string(),
        }
    }

    pub fn stabilization(&self) -> StabilizationConfig {
        self.stabilization_for(self.method)
    }

    pub fn stabilization_for(&self, method: Method) -> StabilizationConfig {
        let mut config =
            StabilizationConfig::new(method, self.form).with_gamma(self.gamma).with_delta_formula(self.delta_formula);
        config.trace_constant = self.trace_constant;
        if let Some(keep) = self.reaction_in_residual {
            config = config.with_reaction_in_residual(keep);
        }
        config
    }
}

/// One solve on one mesh, with everything the reports need.
#[derive(Debug, Clone)]
pub struct LevelRun {
    pub level: usize,
    pub mesh: Mesh,
    pub config: StabilizationConfig,
    pub delta: f64,
    pub solution: SolutionField,
    pub solve: SolveReport,
    pub errors: FieldErrors,
    pub err_triple: f64,
    pub centreline: Vec<CentrelineRow>,
    pub boundary_layer_error: f64,
    pub mid_channel_error: f64,
    /// `∫_Ω p_h`; zero up to round-off.
    pub pressure_integral: f64,
}

impl LevelRun {
    pub fn h(&self) -> f64 {
        self.mesh.h
    }

    pub fn ndof(&self) -> usize {
        self.solve.unknowns
    }
}

/// Mesh, assemble, solve and analyse `case` on one refinement level.
pub fn run_level(case: &BenchmarkCase, config: &StabilizationConfig, level: usize) -> Result<LevelRun> {
    let mesh = generate_structured(case.length, case.height, level)?;
    let disc = discretize(&mesh, &case.data, config)?;
    let (solution, report) = solve(&disc.system)?;
    let errors = compute_errors(&solution, case, &mesh)?;
    let err_triple = errors.triple(case.data.sigma, case.data.viscosity.nu_min, disc.delta);
    let centreline = centreline_pressure(&solution, case, &mesh)?;
    let boundary_layer_error = boundary_layer_error(&centreline, case.length, mesh.h);
    let mid_channel_error = mid_channel_error(&centreline, case.length);
    let pressure_integral = solution.pressure_integral(&mesh);
    Ok(LevelRun {
        level,
        mesh,
        config: *config,
        delta: disc.delta,
        solution,
        solve: report,
        errors,
        err_triple,
        centreline,
        boundary_layer_error,
        mid_channel_error,
        pressure_integral,
    })
}

/// One line of the convergence CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub ndof: usize,
    pub err_u_l2: f64,
    pub err_u_h1: f64,
    pub err_p_l2: f64,
    pub err_triple: f64,
    pub rate_u_l2: Option<f64>,
    pub rate_u_h1: Option<f64>,
    pub rate_p_l2: Option<f64>,
    pub boundary_layer_error: f64,
}

/// Rows with rates against the previous run; rates between runs that are not
/// consecutive levels are left undefined.
pub fn convergence_table(runs: &[LevelRun]) -> Vec<ConvergenceRow> {
    runs.iter()
        .enumerate()
        .map(|(i, run)| {
            let prev = i.checked_sub(1).map(|j| &runs[j]).filter(|p| p.level + 1 == run.level);
            let rate = |f: fn(&FieldErrors) -> f64| prev.and_then(|p| convergence_rate(f(&p.errors), f(&run.errors)));
            ConvergenceRow {
                level: run.level,
                h: run.h(),
                ndof: run.ndof(),
                err_u_l2: run.errors.u_l2,
                err_u_h1: run.errors.u_h1,
                err_p_l2: run.errors.p_l2,
                err_triple: run.err_triple,
                rate_u_l2: rate(|e| e.u_l2),
                rate_u_h1: rate(|e| e.u_h1),
                rate_p_l2: rate(|e| e.p_l2),
                boundary_layer_error: run.boundary_layer_error,
            }
        })
        .collect()
}

/// Fixed 17-significant-digit scientific notation.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_convergence_csv<W: Write>(out: W, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "level",
        "h",
        "ndof",
        "err_u_l2",
        "err_u_h1",
        "err_p_l2",
        "err_triple",
        "rate_u_l2",
        "rate_u_h1",
        "rate_p_l2",
        "boundary_layer_error",
    ])?;
    for r in rows {
        w.write_record([
            r.level.to_string(),
            fmt_f64(r.h),
            r.ndof.to_string(),
            fmt_f64(r.err_u_l2),
            fmt_f64(r.err_u_h1),
            fmt_f64(r.err_p_l2),
            fmt_f64(r.err_triple),
            fmt_opt(r.rate_u_l2),
            fmt_opt(r.rate_u_h1),
            fmt_opt(r.rate_p_l2),
            fmt_f64(r.boundary_layer_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_convergence_csv<R: Read>(input: R) -> Result<Vec<ConvergenceRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_centreline_csv<W: Write>(out: W, rows: &[CentrelineRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "p_h", "p_exact"])?;
    for r in rows {
        w.write_record([fmt_f64(r.x), fmt_f64(r.p_h), fmt_f64(r.p_exact)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_centreline_csv<R: Read>(input: R) -> Result<Vec<CentrelineRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// JSON summary written next to the CSV tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub experiment: String,
    pub method: String,
    pub form: String,
    pub gamma: f64,
    pub delta_formula: String,
    pub reaction_in_residual: bool,
    pub levels: [usize; 2],
    pub min_rate_u_l2: Option<f64>,
    pub min_rate_u_h1: Option<f64>,
    pub min_rate_p_l2: Option<f64>,
    pub max_relative_residual: f64,
    pub max_abs_pressure_integral: f64,
    pub warnings: Vec<String>,
}

impl RunSummary {
    fn new(command: &str, cfg: &RunConfig, stab: &StabilizationConfig, runs: &[&LevelRun], rows: &[ConvergenceRow]) -> Self {
        let min = |f: fn(&ConvergenceRow) -> Option<f64>| rows.iter().filter_map(f).reduce(f64::min);
        Self {
            command: command.into(),
            experiment: cfg.experiment_name(),
            method: stab.method.to_string(),
            form: stab.form.to_string(),
            gamma: stab.gamma,
            delta_formula: stab.delta_formula.to_string(),
            reaction_in_residual: stab.reaction_in_residual,
            levels: [runs.first().map_or(0, |r| r.level), runs.last().map_or(0, |r| r.level)],
            min_rate_u_l2: min(|r| r.rate_u_l2),
            min_rate_u_h1: min(|r| r.rate_u_h1),
            min_rate_p_l2: min(|r| r.rate_p_l2),
            max_relative_residual: runs.iter().map(|r| r.solve.relative_residual).fold(0.0, f64::max),
            max_abs_pressure_integral: runs.iter().map(|r| r.pressure_integral.abs()).fold(0.0, f64::max),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SingleReport {
    pub run: LevelRun,
    pub row: ConvergenceRow,
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub runs: Vec<LevelRun>,
    pub rows: Vec<ConvergenceRow>,
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

/// Twin runs differing only in the stabilisation method.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub pspg: LevelRun,
    pub bvs: LevelRun,
    /// PSPG over BVS boundary-layer error; `None` when the BVS error is zero.
    pub ratio: Option<f64>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct CompareSummary<'a> {
    experiment: String,
    level: usize,
    gamma: f64,
    form: String,
    pspg: &'a RunSummary,
    bvs: &'a RunSummary,
    pspg_boundary_layer_error: f64,
    bvs_boundary_layer_error: f64,
    pspg_mid_channel_error: f64,
    bvs_mid_channel_error: f64,
    boundary_layer_ratio: Option<f64>,
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let path = self.dir.join(name);
        fs::write(&path, buf)?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)?;
            buf.push(b'\n');
            Ok(())
        })
    }

    fn vtk(&mut self, name: &str, run: &LevelRun, case: &BenchmarkCase) -> Result<()> {
        let exact_p: Vec<f64> = run.mesh.nodes.iter().map(|&p| case.exact.pressure(p)).collect();
        let exact_u: Vec<[f64; 2]> = run.mesh.nodes.iter().map(|&p| case.exact.velocity(p)).collect();
        let text = run.mesh.to_vtk(
            &[("pressure", &run.solution.pressure), ("pressure_exact", &exact_p)],
            &[("velocity", &run.solution.velocity), ("velocity_exact", &exact_u)],
        );
        self.write(name, |buf| {
            buf.extend_from_slice(text.as_bytes());
            Ok(())
        })
    }
}

fn warnings(stab: &StabilizationConfig, case: &BenchmarkCase) -> Vec<String> {
    gl_restriction_warning(stab, &case.data).into_iter().collect()
}

/// Solves on the finest configured level and writes `errors.csv`,
/// `centreline.csv`, `summary.json` and optionally `solution.vtk`.
pub fn run_single(cfg: &RunConfig) -> Result<SingleReport> {
    cfg.validate()?;
    let case = cfg.case()?;
    let stab = cfg.stabilization();
    let run = run_level(&case, &stab, *cfg.levels.end())?;
    let row = convergence_table(std::slice::from_ref(&run)).remove(0);
    let mut summary = RunSummary::new("single", cfg, &stab, &[&run], std::slice::from_ref(&row));
    summary.warnings = warnings(&stab, &case);

    let mut out = Output::new(&cfg.out_dir)?;
    out.write("errors.csv", |b| write_convergence_csv(b, std::slice::from_ref(&row)))?;
    out.write("centreline.csv", |b| write_centreline_csv(b, &run.centreline))?;
    out.json("summary.json", &summary)?;
    if cfg.vtk {
        out.vtk("solution.vtk", &run, &case)?;
    }
    Ok(SingleReport { run, row, summary, files: out.files })
}

/// Refinement sweep over the configured levels; writes `convergence.csv`,
/// the finest-level `centreline.csv`, `summary.json` and optional VTK files.
pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    if cfg.levels.clone().count() < 3 {
        return Err(Error::RunConfig(format!(
            "a convergence study needs at least three levels, got {:?}",
            cfg.levels
        )));
    }
    let case = cfg.case()?;
    let stab = cfg.stabilization();
    let runs = cfg.levels.clone().map(|level| run_level(&case, &stab, level)).collect::<Result<Vec<_>>>()?;
    let rows = convergence_table(&runs);
    let refs: Vec<&LevelRun> = runs.iter().collect();
    let mut summary = RunSummary::new("convergence", cfg, &stab, &refs, &rows);
    summary.warnings = warnings(&stab, &case);

    let mut out = Output::new(&cfg.out_dir)?;
    out.write("convergence.csv", |b| write_convergence_csv(b, &rows))?;
    if let Some(finest) = runs.last() {
        out.write("centreline.csv", |b| write_centreline_csv(b, &finest.centreline))?;
    }
    out.json("summary.json", &summary)?;
    if cfg.vtk {
        for run in &runs {
            out.vtk(&format!("solution_level{}.vtk", run.level), run, &case)?;
        }
    }
    Ok(ConvergenceReport { runs, rows, summary, files: out.files })
}

/// PSPG and BVS on the finest configured level with otherwise identical
/// settings; writes paired centreline CSVs and `compare.json`.
pub fn run_compare(cfg: &RunConfig) -> Result<CompareReport> {
    cfg.validate()?;
    let case = cfg.case()?;
    let level = *cfg.levels.end();
    let stab_pspg = cfg.stabilization_for(Method::Pspg);
    let stab_bvs = cfg.stabilization_for(Method::Bvs);
    let pspg = run_level(&case, &stab_pspg, level)?;
    let bvs = run_level(&case, &stab_bvs, level)?;
    let ratio = (bvs.boundary_layer_error > 0.0).then(|| pspg.boundary_layer_error / bvs.boundary_layer_error);

    let rows_p = convergence_table(std::slice::from_ref(&pspg));
    let rows_b = convergence_table(std::slice::from_ref(&bvs));
    let summary_p = RunSummary::new("compare", cfg, &stab_pspg, &[&pspg], &rows_p);
    let summary_b = RunSummary::new("compare", cfg, &stab_bvs, &[&bvs], &rows_b);
    let warnings = warnings(&stab_bvs, &case);
    let summary = CompareSummary {
        experiment: cfg.experiment_name(),
        level,
        gamma: cfg.gamma,
        form: cfg.form.to_string(),
        pspg: &summary_p,
        bvs: &summary_b,
        pspg_boundary_layer_error: pspg.boundary_layer_error,
        bvs_boundary_layer_error: bvs.boundary_layer_error,
        pspg_mid_channel_error: pspg.mid_channel_error,
        bvs_mid_channel_error: bvs.mid_channel_error,
        boundary_layer_ratio: ratio,
    };

    let mut out = Output::new(&cfg.out_dir)?;
    out.write("centreline_pspg.csv", |b| write_centreline_csv(b, &pspg.centreline))?;
    out.write("centreline_bvs.csv", |b| write_centreline_csv(b, &bvs.centreline))?;
    let both: Vec<ConvergenceRow> = rows_p.into_iter().chain(rows_b).collect();
    out.write("compare.csv", |b| write_convergence_csv(b, &both))?;
    out.json("compare.json", &summary)?;
    if cfg.vtk {
        out.vtk("solution_pspg.vtk", &pspg, &case)?;
        out.vtk("solution_bvs.vtk", &bvs, &case)?;
    }
    Ok(CompareReport { pspg, bvs, ratio, warnings, files: out.files })
}
