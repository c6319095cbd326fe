//! Command-line driver for the channel-flow experiments.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when a linear
//! solve fails, 1 for anything else (I/O and the like).

use std::path::PathBuf;
use std::process::ExitCode;

use bvstokes::config::{parse_delta_formula, parse_form, parse_levels, parse_method, CaseFile};
use bvstokes::experiment::{run_compare, run_convergence, run_single, ExperimentSource, RunConfig};
use bvstokes::problem::{DeltaFormula, Form, Method};
use bvstokes::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bvstokes", version, about = "Stabilised P1/P1 solver for variable-viscosity Stokes channel flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve once on the finest requested level.
    Single(RunArgs),
    /// Refinement sweep with observed convergence rates.
    Convergence(RunArgs),
    /// PSPG and BVS twin runs on the finest requested level.
    Compare(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// `exp1`, `exp2` or the path of a case file.
    #[arg(long, default_value = "exp1")]
    experiment: String,
    /// Stabilisation method: pspg or bvs.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Momentum form: sd or gl.
    #[arg(long, value_parser = parse_form)]
    form: Option<Form>,
    /// Scaling of the stabilisation parameter.
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Refinement levels, `A..B` or a single level.
    #[arg(long, value_parser = parse_levels)]
    levels: Option<std::ops::RangeInclusive<usize>>,
    /// experiment, lemma_sd or lemma_gl.
    #[arg(long = "delta-formula", value_parser = parse_delta_formula)]
    delta_formula: Option<DeltaFormula>,
    /// Keep the reaction term in the stabilisation residual (default: PSPG yes, BVS no).
    #[arg(long = "reaction-in-residual", num_args = 0..=1, default_missing_value = "true")]
    reaction_in_residual: Option<bool>,
    /// Output directory.
    #[arg(long, env = "BVSTOKES_OUT", default_value = "out")]
    out: PathBuf,
    /// Also write legacy VTK files of the solution.
    #[arg(long)]
    vtk: bool,
}

impl RunArgs {
    /// Defaults, then settings from a case file, then explicit flags.
    fn into_config(self) -> bvstokes::Result<RunConfig> {
        let experiment: ExperimentSource = self.experiment.parse().unwrap_or_else(|never| match never {});
        let mut cfg = RunConfig::new(experiment.clone());
        if let ExperimentSource::CaseFile(path) = &experiment {
            cfg.apply(&CaseFile::read(path)?.run);
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(f) = self.form {
            cfg.form = f;
        }
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
        if let Some(d) = self.delta_formula {
            cfg.delta_formula = d;
        }
        if let Some(r) = self.reaction_in_residual {
            cfg.reaction_in_residual = Some(r);
        }
        cfg.out_dir = self.out;
        cfg.vtk = self.vtk;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::RunConfig(_) | Error::InvalidStabilization(_) | Error::InvalidMesh(_) => 2,
        Error::Solver { .. } => 3,
        _ => 1,
    }
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

fn run(command: Command) -> bvstokes::Result<()> {
    match command {
        Command::Single(args) => {
            let cfg = args.into_config()?;
            let report = run_single(&cfg)?;
            for w in &report.summary.warnings {
                eprintln!("warning: {w}");
            }
            let r = &report.row;
            println!(
                "{} {} {} level {}: ndof {} | u L2 {:.4e} | u H1 {:.4e} | p L2 {:.4e} | triple {:.4e} | boundary layer {:.4e}",
                report.summary.experiment,
                report.summary.method,
                report.summary.form,
                r.level,
                r.ndof,
                r.err_u_l2,
                r.err_u_h1,
                r.err_p_l2,
                r.err_triple,
                r.boundary_layer_error
            );
            println!("relative residual {:.2e}", report.run.solve.relative_residual);
            print_files(&report.files);
        }
        Command::Convergence(args) => {
            let cfg = args.into_config()?;
            let report = run_convergence(&cfg)?;
            for w in &report.summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("level        h     ndof    err_u_l2  rate    err_u_h1  rate    err_p_l2  rate");
            for r in &report.rows {
                println!(
                    "{:>5} {:>8.5} {:>8} {:>11.4e} {:>5} {:>11.4e} {:>5} {:>11.4e} {:>5}",
                    r.level,
                    r.h,
                    r.ndof,
                    r.err_u_l2,
                    fmt_rate(r.rate_u_l2),
                    r.err_u_h1,
                    fmt_rate(r.rate_u_h1),
                    r.err_p_l2,
                    fmt_rate(r.rate_p_l2)
                );
            }
            print_files(&report.files);
        }
        Command::Compare(args) => {
            let cfg = args.into_config()?;
            let report = run_compare(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "boundary-layer error: pspg {:.4e}, bvs {:.4e}, ratio {}",
                report.pspg.boundary_layer_error,
                report.bvs.boundary_layer_error,
                report.ratio.map_or_else(|| "undefined".into(), |r| format!("{r:.2}"))
            );
            println!(
                "mid-channel error:    pspg {:.4e}, bvs {:.4e}",
                report.pspg.mid_channel_error, report.bvs.mid_channel_error
            );
            print_files(&report.files);
        }
    }
    Ok(())
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
