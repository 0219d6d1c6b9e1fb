//! The extrapolation cascadic multigrid driver.
//!
//! The two coarsest grids are solved directly. Every finer level starts
//! Bi-CG from the extrapolated prediction of its solution and iterates until
//! the relative residual meets a tolerance that tightens by a factor of ten
//! per level, reaching `eps` on the finest grid. The two finest solutions are
//! then extrapolated once more toward the exact solution.

use std::time::{Duration, Instant};

use crate::discretization::{residual, BcKind, DiscreteSystem};
use crate::error::{Error, Result};
use crate::extrapolation::{exp_finite, exp_true};
use crate::grid::{build_hierarchy, norm, Field, GridSpec, NormKind};
use crate::krylov::{bicg_solve, dsolve, make_preconditioner, BicgStats, PrecondKind};
use crate::problems::{ForcingVariant, ManufacturedProblem, ProblemId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunMode {
    #[default]
    Excmg,
    /// Same ladder, but the finest level starts from the zero field.
    ZeroGuessBaseline,
}

impl RunMode {
    pub fn label(self) -> &'static str {
        match self {
            RunMode::Excmg => "excmg",
            RunMode::ZeroGuessBaseline => "baseline",
        }
    }
}

pub const DEFAULT_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ExcmgConfig {
    pub coarse_n: usize,
    /// Number of levels above the two directly solved ones.
    pub extra_levels: usize,
    /// Relative residual target on the finest level.
    pub eps: f64,
    pub precond: PrecondKind,
    pub problem: ProblemId,
    pub forcing: ForcingVariant,
    pub bc_kind: BcKind,
    /// `None` picks [`default_max_iters`] per level.
    pub max_iters_per_level: Option<usize>,
    pub mode: RunMode,
}

impl Default for ExcmgConfig {
    fn default() -> Self {
        Self {
            coarse_n: 8,
            extra_levels: 2,
            eps: DEFAULT_EPS,
            precond: PrecondKind::Jacobi,
            problem: ProblemId::P1,
            forcing: ForcingVariant::Exact,
            bc_kind: BcKind::FirstKind,
            max_iters_per_level: None,
            mode: RunMode::Excmg,
        }
    }
}

impl ExcmgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        if self.coarse_n < GridSpec::MIN_INTERVALS {
            return Err(Error::InvalidConfig(format!("coarse n must be at least 4, got {}", self.coarse_n)));
        }
        if self.extra_levels < 1 {
            return Err(Error::InvalidConfig("at least one extrapolated level is required".into()));
        }
        if self.max_iters_per_level == Some(0) {
            return Err(Error::InvalidConfig("max iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn manufactured(&self) -> ManufacturedProblem {
        ManufacturedProblem::with_forcing(self.problem, self.forcing)
    }

    fn max_iters(&self, grid: &GridSpec) -> usize {
        self.max_iters_per_level.unwrap_or_else(|| default_max_iters(grid))
    }
}

/// `10 · (unknowns)^(1/3) · 100`, capped at 50 000.
pub fn default_max_iters(grid: &GridSpec) -> usize {
    let side = (grid.interior_count() as f64).cbrt().round() as usize;
    (1000 * side).min(50_000)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub n: usize,
    /// Zero on directly solved levels.
    pub iterations: usize,
    pub direct: bool,
    pub err_l2: f64,
    pub err_max: f64,
    /// `‖w_h - u_h‖₂` for extrapolated levels.
    pub guess_gap_l2: Option<f64>,
    /// Relative residual of the initial guess.
    pub initial_relres: Option<f64>,
    pub relres: f64,
    pub tolerance: Option<f64>,
    /// `‖w_h - u_h‖₂ / ‖u_h - u‖₂`.
    pub r_h: Option<f64>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Converged,
    NotConverged { n: usize, relres: f64 },
    Breakdown { n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ExcmgConfig,
    pub mode: RunMode,
    pub levels: Vec<LevelReport>,
    /// Errors of the extrapolated finest solution; absent when the run stopped early.
    pub extrap_err_l2: Option<f64>,
    pub extrap_err_max: Option<f64>,
    pub work_units: f64,
    pub direct_levels: usize,
    pub status: RunStatus,
}

impl RunReport {
    pub fn finest(&self) -> Option<&LevelReport> {
        self.levels.last()
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn iterations(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.iterations).collect()
    }
}

/// Relative residual target on extrapolated level `i` of `levels`:
/// `eps · 10^(i - levels)`.
pub fn tolerance_schedule(i: usize, levels: usize, eps: f64) -> Result<f64> {
    if i < 1 || i > levels {
        return Err(Error::LevelOutOfRange { index: i, levels });
    }
    Ok(eps * 10f64.powi(i as i32 - levels as i32))
}

/// Cost in finest-grid sweeps; `iters` runs coarse to fine and each level
/// below the finest is 8 times cheaper than the one above it.
pub fn work_units(iters: &[usize]) -> f64 {
    let depth_max = iters.len().saturating_sub(1);
    iters
        .iter()
        .enumerate()
        .map(|(l, &it)| it as f64 * 8f64.powi(-((depth_max - l) as i32)))
        .sum()
}

/// `log2(e[l-1] / e[l])` for each consecutive pair.
pub fn convergence_orders(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: errors.len(),
        });
    }
    if let Some(&bad) = errors.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::NonPositiveError(bad));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// `‖w_h - u_h‖₂ / ‖u_h - u‖₂`; infinite when `u_h` is exact.
pub fn error_ratio(w_h: &Field, u_h: &Field, u_exact: &Field) -> Result<f64> {
    let gap = norm(&w_h.sub(u_h)?, NormKind::Rms);
    let err = norm(&u_h.sub(u_exact)?, NormKind::Rms);
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(gap / err)
}

struct Solved {
    u: Field,
    report: LevelReport,
}

fn exact_field(grid: GridSpec, problem: &ManufacturedProblem) -> Field {
    Field::sample(grid, |p| problem.u(p))
}

fn level_errors(u: &Field, exact: &Field) -> Result<(f64, f64)> {
    let e = u.sub(exact)?;
    Ok((norm(&e, NormKind::Rms), norm(&e, NormKind::Max)))
}

fn direct_level(grid: GridSpec, config: &ExcmgConfig, problem: &ManufacturedProblem) -> Result<Solved> {
    let start = Instant::now();
    let system = DiscreteSystem::from_problem(grid, problem, config.bc_kind)?;
    let interior = dsolve(&system)?;
    let (_, relres) = residual(&system, &interior)?;
    let u = system.with_boundary(&interior);
    let (err_l2, err_max) = level_errors(&u, &exact_field(grid, problem))?;
    Ok(Solved {
        u,
        report: LevelReport {
            n: grid.n(),
            iterations: 0,
            direct: true,
            err_l2,
            err_max,
            guess_gap_l2: None,
            initial_relres: None,
            relres,
            tolerance: None,
            r_h: None,
            elapsed: start.elapsed(),
        },
    })
}

fn iterative_level(
    system: &DiscreteSystem,
    guess: &Field,
    prediction: Option<&Field>,
    tol: f64,
    config: &ExcmgConfig,
    exact: &Field,
) -> Result<(Solved, BicgStats)> {
    let start = Instant::now();
    let grid = *system.grid();
    let precond = make_preconditioner(config.precond, system);
    let (_, initial_relres) = residual(system, guess)?;
    let (x, stats) = bicg_solve(system, &precond, system.rhs(), guess, tol, config.max_iters(&grid))?;
    let u = system.with_boundary(&x);
    let (err_l2, err_max) = level_errors(&u, exact)?;
    let (guess_gap_l2, r_h) = match prediction {
        Some(w) => (
            Some(norm(&w.sub(&u)?, NormKind::Rms)),
            Some(error_ratio(w, &u, exact)?),
        ),
        None => (None, None),
    };
    let report = LevelReport {
        n: grid.n(),
        iterations: stats.iterations,
        direct: false,
        err_l2,
        err_max,
        guess_gap_l2,
        initial_relres: Some(initial_relres),
        relres: stats.final_relres,
        tolerance: Some(tol),
        r_h,
        elapsed: start.elapsed(),
    };
    Ok((Solved { u, report }, stats))
}

fn status_of(stats: &BicgStats, tol: f64, n: usize) -> RunStatus {
    if stats.breakdown {
        RunStatus::Breakdown { n }
    } else if stats.final_relres > tol {
        RunStatus::NotConverged {
            n,
            relres: stats.final_relres,
        }
    } else {
        RunStatus::Converged
    }
}

/// Runs the method (or its zero-guess baseline) as configured.
pub fn excmg_run(config: &ExcmgConfig) -> Result<RunReport> {
    let (main, baseline) = run(config, config.mode == RunMode::ZeroGuessBaseline, false)?;
    debug_assert!(baseline.is_none());
    Ok(main)
}

/// Runs the method and the zero-guess baseline, sharing all levels below the
/// finest. Returns `(excmg, baseline)`.
pub fn excmg_compare(config: &ExcmgConfig) -> Result<(RunReport, RunReport)> {
    let (main, baseline) = run(config, false, true)?;
    Ok((main, baseline.expect("baseline requested")))
}

fn run(config: &ExcmgConfig, zero_finest: bool, with_baseline: bool) -> Result<(RunReport, Option<RunReport>)> {
    config.validate()?;
    let problem = config.manufactured();
    let hierarchy = build_hierarchy(config.coarse_n, config.extra_levels)?;
    let grids = hierarchy.levels();
    let levels = config.extra_levels;

    let mut solutions: Vec<Field> = Vec::with_capacity(grids.len());
    let mut reports: Vec<LevelReport> = Vec::with_capacity(grids.len());
    for &grid in &grids[..2] {
        let solved = direct_level(grid, config, &problem)?;
        solutions.push(solved.u);
        reports.push(solved.report);
    }

    let mode = if zero_finest {
        RunMode::ZeroGuessBaseline
    } else {
        RunMode::Excmg
    };
    let mut status = RunStatus::Converged;
    let mut baseline = None;
    for i in 1..=levels {
        let grid = grids[i + 1];
        let tol = tolerance_schedule(i, levels, config.eps)?;
        let system = DiscreteSystem::from_problem(grid, &problem, config.bc_kind)?;
        let exact = exact_field(grid, &problem);
        let w = exp_finite(&solutions[i], &solutions[i - 1], Some(system.bc()))?;
        let finest = i == levels;

        if finest && with_baseline {
            let (solved, stats) = iterative_level(&system, &Field::zeros(grid), Some(&w), tol, config, &exact)?;
            let mut base_reports = reports.clone();
            base_reports.push(solved.report);
            let base_status = status_of(&stats, tol, grid.n());
            baseline = Some(finish(
                config,
                RunMode::ZeroGuessBaseline,
                base_reports,
                base_status,
                Some((&solved.u, &solutions[i], system.bc(), &exact)),
            )?);
        }

        let guess = if finest && zero_finest { Field::zeros(grid) } else { w.clone() };
        let (solved, stats) = iterative_level(&system, &guess, Some(&w), tol, config, &exact)?;
        status = status_of(&stats, tol, grid.n());
        reports.push(solved.report);
        solutions.push(solved.u);
        if status != RunStatus::Converged {
            break;
        }
        if finest {
            let last = solutions.len() - 1;
            let main = finish(
                config,
                mode,
                reports,
                status,
                Some((&solutions[last], &solutions[last - 1], system.bc(), &exact)),
            )?;
            return Ok((main, baseline));
        }
    }
    let main = finish(config, mode, reports, status, None)?;
    Ok((main, baseline))
}

type FinestPair<'a> = (&'a Field, &'a Field, &'a crate::discretization::BoundaryData, &'a Field);

fn finish(
    config: &ExcmgConfig,
    mode: RunMode,
    levels: Vec<LevelReport>,
    status: RunStatus,
    finest: Option<FinestPair<'_>>,
) -> Result<RunReport> {
    let (extrap_err_l2, extrap_err_max) = match finest {
        Some((u_h, u_2h, bc, exact)) if status == RunStatus::Converged => {
            let t = exp_true(u_h, u_2h, Some(bc))?;
            let (l2, max) = level_errors(&t, exact)?;
            (Some(l2), Some(max))
        }
        _ => (None, None),
    };
    let iters: Vec<usize> = levels.iter().map(|l| l.iterations).collect();
    Ok(RunReport {
        config: config.clone(),
        mode,
        work_units: work_units(&iters),
        levels,
        extrap_err_l2,
        extrap_err_max,
        direct_levels: 2,
        status,
    })
}
