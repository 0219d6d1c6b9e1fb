//! Convergence tables in markdown and CSV.

use std::fmt::Write as _;

use crate::discretization::BcKind;
use crate::driver::{convergence_orders, RunReport, RunStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
}

/// Compact scientific notation: `1.13e-2` becomes `1.13(-2)`.
pub fn compact_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00(0)".to_string();
    }
    let s = format!("{x:.2e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    format!("{mantissa}({exp})")
}

fn bc_label(kind: BcKind) -> &'static str {
    match kind {
        BcKind::FirstKind => "first-kind",
        BcKind::SecondKind => "second-kind",
    }
}

/// Orders aligned with `values`; the first entry and any entry next to a
/// missing value are `None`.
fn aligned_orders(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut out = vec![None; values.len()];
    for l in 1..values.len() {
        if let (Some(a), Some(b)) = (values[l - 1], values[l]) {
            out[l] = convergence_orders(&[a, b]).ok().map(|o| o[0]);
        }
    }
    out
}

fn order_cell(o: Option<f64>) -> String {
    o.map(|v| format!("{v:.2}")).unwrap_or_default()
}

fn status_line(status: &RunStatus) -> String {
    match status {
        RunStatus::Converged => "converged".to_string(),
        RunStatus::NotConverged { n, relres } => {
            format!("NOT converged on n = {n} (relres {relres:.3e})")
        }
        RunStatus::Breakdown { n } => format!("Bi-CG breakdown on n = {n}"),
    }
}

/// Renders a run as a table. Fails on a report with no levels.
pub fn emit_report(report: &RunReport, format: ReportFormat) -> Result<String> {
    if report.levels.is_empty() {
        return Err(Error::EmptyReport);
    }
    match format {
        ReportFormat::Markdown => Ok(markdown(report)),
        ReportFormat::Csv => Ok(csv(report)),
    }
}

fn markdown(report: &RunReport) -> String {
    let c = &report.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# Problem {} ({} BCs, {})",
        c.problem,
        bc_label(c.bc_kind),
        report.mode.label()
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "coarse n = {}, levels = {}, eps = {:e}, preconditioner = {}, direct levels: {}",
        c.coarse_n,
        c.extra_levels,
        c.eps,
        c.precond.label(),
        report.direct_levels
    );
    let _ = writeln!(s, "status: {}", status_line(&report.status));
    let _ = writeln!(s);

    let l2: Vec<Option<f64>> = report.levels.iter().map(|l| Some(l.err_l2)).collect();
    let max: Vec<Option<f64>> = report.levels.iter().map(|l| Some(l.err_max)).collect();
    let gap: Vec<Option<f64>> = report.levels.iter().map(|l| l.guess_gap_l2).collect();
    let (o2, om, og) = (aligned_orders(&l2), aligned_orders(&max), aligned_orders(&gap));

    let _ = writeln!(s, "| Mesh | Iters | L2 error | Order | Linf error | Order | Guess gap | Order | r_h |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|");
    for (idx, l) in report.levels.iter().enumerate() {
        let iters = if l.direct { "direct".to_string() } else { l.iterations.to_string() };
        let _ = writeln!(
            s,
            "| {n}^3 | {iters} | {} | {} | {} | {} | {} | {} | {} |",
            compact_sci(l.err_l2),
            order_cell(o2[idx]),
            compact_sci(l.err_max),
            order_cell(om[idx]),
            l.guess_gap_l2.map(compact_sci).unwrap_or_default(),
            order_cell(og[idx]),
            l.r_h.map(|r| format!("{r:.3}")).unwrap_or_default(),
            n = l.n,
        );
    }
    let dash = String::from("-");
    let _ = writeln!(
        s,
        "| extrapolated | | {} | | {} | | | | |",
        report.extrap_err_l2.map(compact_sci).unwrap_or_else(|| dash.clone()),
        report.extrap_err_max.map(compact_sci).unwrap_or(dash),
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "work units: {:.3}", report.work_units);
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn csv(report: &RunReport) -> String {
    let mut s = String::from(
        "mesh,direct,iterations,err_l2,err_max,guess_gap_l2,r_h,initial_relres,relres,tolerance\n",
    );
    for l in &report.levels {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{:e},{},{},{},{:e},{}",
            l.n,
            l.direct,
            l.iterations,
            l.err_l2,
            l.err_max,
            opt(l.guess_gap_l2),
            opt(l.r_h),
            opt(l.initial_relres),
            l.relres,
            opt(l.tolerance),
        );
    }
    let _ = writeln!(
        s,
        "extrapolated,,,{},{},,,,,",
        opt(report.extrap_err_l2),
        opt(report.extrap_err_max)
    );
    let _ = writeln!(s, "work_units,,{:e},,,,,,,", report.work_units);
    s
}
