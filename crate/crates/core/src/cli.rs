//! Command-line front end for convergence studies.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! solve fails to reach its tolerance.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::discretization::BcKind;
use crate::driver::{excmg_compare, excmg_run, ExcmgConfig, RunMode, RunReport, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::krylov::PrecondKind;
use crate::problems::{validate_forcing, ForcingVariant, ProblemId, DEFAULT_VALIDATION_SEED};
use crate::report::{emit_report, ReportFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

const VALIDATION_SAMPLES: usize = 100;
const VALIDATION_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BcArg {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecondArg {
    None,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Excmg,
    Baseline,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Markdown,
    Both,
}

/// Runs an EXCMG convergence study for the 3D biharmonic equation.
#[derive(Debug, Parser)]
#[command(name = "excmg", version)]
pub struct CliConfig {
    /// Test problem number.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=5))]
    pub problem: u32,
    #[arg(long, value_enum, default_value_t = BcArg::First)]
    pub bc: BcArg,
    /// Intervals per side on the coarsest grid.
    #[arg(long, default_value_t = 8)]
    pub coarse_n: usize,
    /// Levels above the two directly solved grids.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// Relative residual target on the finest grid.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = PrecondArg::Jacobi)]
    pub precond: PrecondArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Excmg)]
    pub mode: ModeArg,
    /// Use f = sinh(x)sinh(y)sinh(z) for problem 3 instead of the consistent 9 sinh(x)sinh(y)sinh(z).
    #[arg(long)]
    pub paper_literal_forcing: bool,
    /// Directory for report files; reports go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
    pub format: FormatArg,
    /// Bi-CG iteration cap per level.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Seed for the forcing validation points.
    #[arg(long, default_value_t = DEFAULT_VALIDATION_SEED)]
    pub seed: u64,
}

impl CliConfig {
    pub fn to_config(&self) -> Result<ExcmgConfig> {
        let config = ExcmgConfig {
            coarse_n: self.coarse_n,
            extra_levels: self.levels,
            eps: self.eps,
            precond: match self.precond {
                PrecondArg::None => PrecondKind::Identity,
                PrecondArg::Jacobi => PrecondKind::Jacobi,
            },
            problem: ProblemId::try_from(self.problem)?,
            forcing: if self.paper_literal_forcing {
                ForcingVariant::Problem3Misprint
            } else {
                ForcingVariant::Exact
            },
            bc_kind: match self.bc {
                BcArg::First => BcKind::FirstKind,
                BcArg::Second => BcKind::SecondKind,
            },
            max_iters_per_level: self.max_iters,
            mode: match self.mode {
                ModeArg::Baseline => RunMode::ZeroGuessBaseline,
                _ => RunMode::Excmg,
            },
        };
        config.validate()?;
        Ok(config)
    }

    fn formats(&self) -> Vec<ReportFormat> {
        match self.format {
            FormatArg::Csv => vec![ReportFormat::Csv],
            FormatArg::Markdown => vec![ReportFormat::Markdown],
            FormatArg::Both => vec![ReportFormat::Markdown, ReportFormat::Csv],
        }
    }
}

fn file_stem(report: &RunReport) -> String {
    let c = &report.config;
    let bc = match c.bc_kind {
        BcKind::FirstKind => "first",
        BcKind::SecondKind => "second",
    };
    format!("problem{}_{}_{}_n{}", c.problem, bc, report.mode.label(), report.levels.last().map_or(0, |l| l.n))
}

fn write_reports(reports: &[RunReport], formats: &[ReportFormat], header: &str, out: Option<&Path>) -> Result<()> {
    // Render everything first so nothing is written on failure.
    let mut rendered = Vec::new();
    for report in reports {
        for &format in formats {
            let body = emit_report(report, format)?;
            let ext = match format {
                ReportFormat::Markdown => "md",
                ReportFormat::Csv => "csv",
            };
            let text = match format {
                ReportFormat::Markdown => format!("{body}\n{header}\n"),
                ReportFormat::Csv => body,
            };
            rendered.push((format!("{}.{ext}", file_stem(report)), text));
        }
    }
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for (name, text) in rendered {
                let path = dir.join(name);
                fs::write(&path, text)?;
                println!("wrote {}", path.display());
            }
        }
        None => {
            for (_, text) in rendered {
                println!("{text}");
            }
        }
    }
    Ok(())
}

fn execute(cli: &CliConfig) -> std::result::Result<i32, Error> {
    let config = cli.to_config()?;
    let validation = validate_forcing(&config.manufactured(), VALIDATION_SAMPLES, VALIDATION_TOL, cli.seed)?;
    let header = format!(
        "forcing: {:?}; validation against the finite-difference oracle at {} points (seed {}): {} (worst {:.2e}, worst ratio {:.3})",
        config.forcing,
        validation.samples,
        cli.seed,
        if validation.passed() { "pass" } else { "FAIL" },
        validation.worst,
        validation.worst_ratio,
    );
    if !validation.passed() {
        eprintln!("warning: {header}");
    }

    let reports = match cli.mode {
        ModeArg::Both => {
            let (a, b) = excmg_compare(&config)?;
            vec![a, b]
        }
        _ => vec![excmg_run(&config)?],
    };
    write_reports(&reports, &cli.formats(), &header, cli.out.as_deref())?;

    if reports.iter().all(RunReport::converged) {
        Ok(EXIT_OK)
    } else {
        for r in reports.iter().filter(|r| !r.converged()) {
            eprintln!("{} run did not converge: {:?}", r.mode.label(), r.status);
        }
        Ok(EXIT_NOT_CONVERGED)
    }
}

/// Parses `argv` (including the program name) and runs the study.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match CliConfig::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_defaults() {
        let cli = CliConfig::try_parse_from(["excmg"]).unwrap();
        let c = cli.to_config().unwrap();
        assert_eq!(c, ExcmgConfig::default());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CliConfig::try_parse_from(["excmg", "--problem", "9"]).is_err());
        assert!(CliConfig::try_parse_from(["excmg", "--bogus"]).is_err());
        let cli = CliConfig::try_parse_from(["excmg", "--levels", "0"]).unwrap();
        assert!(cli.to_config().is_err());
        assert_eq!(run_cli(["excmg", "--levels", "0"]), EXIT_USAGE);
        assert_eq!(run_cli(["excmg", "--problem", "9"]), EXIT_USAGE);
    }

    #[test]
    fn literal_forcing_flag() {
        let cli = CliConfig::try_parse_from(["excmg", "--problem", "3", "--paper-literal-forcing"]).unwrap();
        assert_eq!(cli.to_config().unwrap().forcing, ForcingVariant::Problem3Misprint);
    }
}
