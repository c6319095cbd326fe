//! Plain-text case files.
//!
//! A case file is a list of `key = value` lines; `#` starts a comment.
//!
//! ```text
//! # quadratic manufactured flow in a short channel
//! case   = poly
//! sigma  = 1
//! nu0    = 1
//! nu1    = 0.5
//! length = 2
//! gamma  = 1
//! ```
//!
//! `case` selects the problem (`exp1`, `exp2`, `poly`, `linear`). The
//! remaining keys are either problem parameters or run settings; run settings
//! given on the command line take precedence over the file.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::Path;

use crate::error::{Error, Result};
use crate::problem::{
    BenchmarkCase, CaseKind, DeltaFormula, Exp1Params, Exp2Params, Form, Method, ViscosityField, ViscosityLaw,
};

/// Problem description read from a case file.
#[derive(Debug, Clone, PartialEq)]
pub enum CaseSpec {
    Exp1(Exp1Params),
    Exp2(Exp2Params),
    Polynomial { sigma: f64, nu0: f64, nu1: f64, kappa: f64, length: f64, height: f64 },
    Linear { c0: f64, c1: f64, sigma: f64, nu0: f64, nu1: f64, length: f64, height: f64 },
}

impl CaseSpec {
    pub fn kind(&self) -> CaseKind {
        match self {
            CaseSpec::Exp1(_) => CaseKind::Exp1,
            CaseSpec::Exp2(_) => CaseKind::Exp2,
            CaseSpec::Polynomial { .. } => CaseKind::Polynomial,
            CaseSpec::Linear { .. } => CaseKind::Linear,
        }
    }

    pub fn build(&self) -> Result<BenchmarkCase> {
        match *self {
            CaseSpec::Exp1(p) => BenchmarkCase::exp1(p),
            CaseSpec::Exp2(p) => BenchmarkCase::exp2(p),
            CaseSpec::Polynomial { sigma, nu0, nu1, kappa, length, height } => {
                BenchmarkCase::polynomial(sigma, nu0, nu1, kappa, length, height)
            }
            CaseSpec::Linear { c0, c1, sigma, nu0, nu1, length, height } => {
                let law = if nu1 == 0.0 { ViscosityLaw::Constant(nu0) } else { ViscosityLaw::Linear { a: nu1, b: nu0 } };
                let viscosity = ViscosityField::new(law, height)?;
                BenchmarkCase::linear(c0, c1, sigma, viscosity, length, height)
            }
        }
    }
}

/// Run settings a case file may carry. `None` means "not given".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOverrides {
    pub method: Option<Method>,
    pub form: Option<Form>,
    pub gamma: Option<f64>,
    pub delta_formula: Option<DeltaFormula>,
    pub reaction_in_residual: Option<bool>,
    pub levels: Option<RangeInclusive<usize>>,
    pub trace_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseFile {
    pub case: CaseSpec,
    pub run: RunOverrides,
}

impl CaseFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::RunConfig(format!("cannot read case file {}: {e}", path.display())))?;
        text.parse()
    }
}

const PROBLEM_KEYS: &[(&str, &[CaseKind])] = &[
    ("length", &[CaseKind::Exp1, CaseKind::Exp2, CaseKind::Polynomial, CaseKind::Linear]),
    ("height", &[CaseKind::Exp1, CaseKind::Exp2, CaseKind::Polynomial, CaseKind::Linear]),
    ("a", &[CaseKind::Exp1]),
    ("b", &[CaseKind::Exp1, CaseKind::Exp2]),
    ("kappa", &[CaseKind::Exp1, CaseKind::Exp2, CaseKind::Polynomial]),
    ("sigma", &[CaseKind::Polynomial, CaseKind::Linear]),
    ("nu0", &[CaseKind::Polynomial, CaseKind::Linear]),
    ("nu1", &[CaseKind::Polynomial, CaseKind::Linear]),
    ("c0", &[CaseKind::Linear]),
    ("c1", &[CaseKind::Linear]),
];

const RUN_KEYS: &[&str] = &["method", "form", "gamma", "delta_formula", "reaction_in_residual", "levels", "C"];

impl std::str::FromStr for CaseFile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_error(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(config_error(line, "key and value must both be non-empty"));
            }
            let known = key == "case" || RUN_KEYS.contains(&key) || PROBLEM_KEYS.iter().any(|(k, _)| *k == key);
            if !known {
                return Err(config_error(line, format!("unknown key `{key}`")));
            }
            if let Some((first, _)) = entries.insert(key, (line, value)) {
                return Err(config_error(line, format!("duplicate key `{key}` (first given on line {first})")));
            }
        }

        let &(case_line, case_name) = entries.get("case").ok_or_else(|| config_error(0, "missing required key `case`"))?;
        let kind = match case_name {
            "exp1" => CaseKind::Exp1,
            "exp2" => CaseKind::Exp2,
            "poly" => CaseKind::Polynomial,
            "linear" => CaseKind::Linear,
            other => {
                return Err(config_error(case_line, format!("unknown case `{other}` (expected exp1, exp2, poly or linear)")))
            }
        };
        for (key, allowed) in PROBLEM_KEYS {
            if let Some(&(line, _)) = entries.get(key) {
                if !allowed.contains(&kind) {
                    return Err(config_error(line, format!("key `{key}` does not apply to case `{kind}`")));
                }
            }
        }

        let num = |key: &str, default: f64| -> Result<f64> {
            match entries.get(key) {
                None => Ok(default),
                Some(&(line, v)) => parse_number(line, key, v),
            }
        };
        let length = num("length", 5.0)?;
        let height = num("height", 1.0)?;
        let case = match kind {
            CaseKind::Exp1 => {
                let d = Exp1Params::default();
                CaseSpec::Exp1(Exp1Params { a: num("a", d.a)?, b: num("b", d.b)?, kappa: num("kappa", d.kappa)?, length, height })
            }
            CaseKind::Exp2 => {
                let d = Exp2Params::default();
                CaseSpec::Exp2(Exp2Params { b: num("b", d.b)?, kappa: num("kappa", d.kappa)?, length, height })
            }
            CaseKind::Polynomial => CaseSpec::Polynomial {
                sigma: num("sigma", 0.0)?,
                nu0: num("nu0", 1.0)?,
                nu1: num("nu1", 0.0)?,
                kappa: num("kappa", 0.4)?,
                length,
                height,
            },
            CaseKind::Linear => CaseSpec::Linear {
                c0: num("c0", 1.0)?,
                c1: num("c1", 0.0)?,
                sigma: num("sigma", 0.0)?,
                nu0: num("nu0", 1.0)?,
                nu1: num("nu1", 0.0)?,
                length,
                height,
            },
        };
        // Surface invalid parameters (non-positive viscosity, bad geometry)
        // against the line that selected the case.
        case.build().map_err(|e| config_error(case_line, e.to_string()))?;

        let mut run = RunOverrides::default();
        for (&key, &(line, value)) in &entries {
            match key {
                "method" => run.method = Some(parse_method(value).map_err(|m| config_error(line, m))?),
                "form" => run.form = Some(parse_form(value).map_err(|m| config_error(line, m))?),
                "delta_formula" => run.delta_formula = Some(parse_delta_formula(value).map_err(|m| config_error(line, m))?),
                "gamma" => run.gamma = Some(parse_number(line, key, value)?),
                "C" => run.trace_constant = Some(parse_number(line, key, value)?),
                "reaction_in_residual" => {
                    run.reaction_in_residual = Some(match value {
                        "true" => true,
                        "false" => false,
                        other => return Err(config_error(line, format!("expected true or false, got `{other}`"))),
                    })
                }
                "levels" => run.levels = Some(parse_levels(value).map_err(|m| config_error(line, m))?),
                _ => {}
            }
        }
        Ok(Self { case, run })
    }
}

fn config_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn parse_number(line: usize, key: &str, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(config_error(line, format!("`{key}` expects a finite number, got `{value}`"))),
    }
}

pub fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s.to_ascii_lowercase().as_str() {
        "pspg" => Ok(Method::Pspg),
        "bvs" => Ok(Method::Bvs),
        _ => Err(format!("unknown method `{s}` (expected pspg or bvs)")),
    }
}

pub fn parse_form(s: &str) -> std::result::Result<Form, String> {
    match s.to_ascii_lowercase().as_str() {
        "sd" => Ok(Form::Sd),
        "gl" => Ok(Form::Gl),
        _ => Err(format!("unknown form `{s}` (expected sd or gl)")),
    }
}

pub fn parse_delta_formula(s: &str) -> std::result::Result<DeltaFormula, String> {
    match s.to_ascii_lowercase().as_str() {
        "experiment" => Ok(DeltaFormula::Experiment),
        "lemma_sd" => Ok(DeltaFormula::LemmaSd),
        "lemma_gl" => Ok(DeltaFormula::LemmaGl),
        _ => Err(format!("unknown delta formula `{s}` (expected experiment, lemma_sd or lemma_gl)")),
    }
}

/// Parses `A..B` (inclusive) or a single level `A`.
pub fn parse_levels(s: &str) -> std::result::Result<RangeInclusive<usize>, String> {
    let bad = || format!("levels must look like `2..6` or `4`, got `{s}`");
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (s.trim(), s.trim()),
    };
    let lo: usize = lo.parse().map_err(|_| bad())?;
    let hi: usize = hi.parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(format!("empty level range `{s}`"));
    }
    Ok(lo..=hi)
}
