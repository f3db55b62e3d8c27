//! Result tables: CSV and markdown emission.
//!
//! All floats are printed with 6 significant digits; unavailable error
//! columns (cases without an exact solution) are left empty.

use std::fmt::Write;

/// One solve/bench outcome.
#[derive(Debug, Clone)]
pub struct RunRow {
    pub case: String,
    pub path: String,
    pub solver: String,
    pub precond: String,
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub iters: usize,
    pub time_s: f64,
    pub errl2u: Option<f64>,
    pub errl2p: Option<f64>,
    pub converged: bool,
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub errl2u: f64,
    pub ratio_u: Option<f64>,
    pub errl2p: f64,
    pub ratio_p: Option<f64>,
}

/// 6 significant digits.
pub fn sig6(x: f64) -> String {
    format!("{x:.5e}")
}

fn opt6(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

pub const RUN_CSV_HEADER: &str =
    "case,path,solver,precond,level,h,dt,iters,time_s,errl2U,errl2P,converged";

pub fn run_csv(rows: &[RunRow]) -> String {
    let mut out = String::from(RUN_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.case,
            r.path,
            r.solver,
            r.precond,
            r.level,
            sig6(r.h),
            sig6(r.dt),
            r.iters,
            sig6(r.time_s),
            opt6(r.errl2u),
            opt6(r.errl2p),
            r.converged
        );
    }
    out
}

pub fn run_markdown(rows: &[RunRow]) -> String {
    let mut out = String::from(
        "| case | path | solver | precond | level | h | dt | iters | time_s | errl2U | errl2P | converged |\n\
         |---|---|---|---|---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.case,
            r.path,
            r.solver,
            r.precond,
            r.level,
            sig6(r.h),
            sig6(r.dt),
            r.iters,
            sig6(r.time_s),
            opt6(r.errl2u),
            opt6(r.errl2p),
            r.converged
        );
    }
    out
}

pub const STUDY_CSV_HEADER: &str = "level,h,dt,errl2U,ratioU,errl2P,ratioP";

pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from(STUDY_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.level,
            sig6(r.h),
            sig6(r.dt),
            sig6(r.errl2u),
            opt6(r.ratio_u),
            sig6(r.errl2p),
            opt6(r.ratio_p)
        );
    }
    out
}

pub fn study_markdown(rows: &[StudyRow]) -> String {
    let mut out = String::from(
        "| level | h | dt | errl2U | ratio | errl2P | ratio |\n|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.level,
            sig6(r.h),
            sig6(r.dt),
            sig6(r.errl2u),
            opt6(r.ratio_u),
            sig6(r.errl2p),
            opt6(r.ratio_p)
        );
    }
    out
}
