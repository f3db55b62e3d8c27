//! Command-line front end: single case runs, mesh-refinement studies, and
//! benchmark plans over (case, path, solver, preconditioner) combinations.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crstokes::driver::{
    build_case_mesh, convergence_study, run_case, CaseConfig, ProblemRun, RunConfig, SolvePath,
};
use crstokes::problems::Case;
use crstokes::report::{run_csv, run_markdown, sig6, study_csv, study_markdown, RunRow};
use crstokes::solvers::{Method, PrecondKind, SolverConfig};
use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Default final time targeted when a transient run is given no explicit
/// time-step data.
const DEFAULT_FINAL_TIME: f64 = 0.01;
const DEFAULT_DT_OVER_H2: f64 = 0.16;

#[derive(Parser)]
#[command(
    name = "crstokes",
    version,
    about = "Crouzeix-Raviart Stokes/Navier-Stokes solver with coupled and hybridized paths"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case and report iterations, timings, and errors.
    Solve(SolveArgs),
    /// Refinement study across mesh levels with a fixed Δt/h² rule.
    Study(StudyArgs),
    /// Run every configuration block of a plan file; failures become rows.
    Bench(BenchArgs),
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Case: gt2d | gt3d-stokes | gt3d-ns | cavity | constant-force.
    #[arg(long)]
    case: Option<String>,
    /// Space dimension, 2 or 3 (default: the case's natural dimension).
    #[arg(long)]
    dim: Option<usize>,
    /// Reynolds number: vortex amplitude, or 1/ν for the cavity (default 100).
    #[arg(long)]
    re: Option<f64>,
    /// Algebraic path: coupled | hybrid (default hybrid).
    #[arg(long)]
    path: Option<String>,
    /// Linear solver: lu | cg | bicgstab | gmres (default lu).
    #[arg(long)]
    solver: Option<String>,
    /// Preconditioner for iterative solvers: none | jacobi | ilu0..ilu8.
    #[arg(long)]
    precond: Option<String>,
    /// Relative residual tolerance of the iterative solvers (default 1e-11).
    #[arg(long)]
    tol: Option<f64>,
    /// Newton residual tolerance (default 5e-7).
    #[arg(long = "newton-tol")]
    newton_tol: Option<f64>,
    /// Newton iteration cap (default 25).
    #[arg(long = "newton-max")]
    newton_max: Option<usize>,
    /// Plain-text `key = value` file supplying defaults for any option.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory that receives the CSV and markdown reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Mesh refinement level n: n×n (×n) boxes split into simplices.
    #[arg(long)]
    level: Option<usize>,
    /// Time step (transient cases; default follows Δt/h² = 0.16 to t = 0.01).
    #[arg(long)]
    dt: Option<f64>,
    /// Number of time steps (default rounds to final time 0.01).
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Comma-separated mesh levels, ascending (default 8,16,32).
    #[arg(long)]
    levels: Option<String>,
    /// Time-step rule `dt-over-h2=C` (default dt-over-h2=0.16).
    #[arg(long = "cfl-rule")]
    cfl_rule: Option<String>,
    /// Final time integrated to at every level (default 0.01).
    #[arg(long = "final-time")]
    final_time: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Plan file: blank-line-separated blocks of `key = value` lines, one
    /// block per run; `#` starts a comment.
    #[arg(long)]
    plan: PathBuf,
    /// Directory that receives the CSV and markdown reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything a run can be configured with, all optional so command-line
/// flags, config files, and built-in defaults can be layered.
#[derive(Default, Clone)]
struct ParamSet {
    case: Option<String>,
    dim: Option<usize>,
    level: Option<usize>,
    re: Option<f64>,
    dt: Option<f64>,
    steps: Option<usize>,
    path: Option<String>,
    solver: Option<String>,
    precond: Option<String>,
    tol: Option<f64>,
    newton_tol: Option<f64>,
    newton_max: Option<usize>,
}

const PARAM_KEYS: &[&str] = &[
    "case", "dim", "level", "re", "dt", "steps", "path", "solver", "precond", "tol",
    "newton-tol", "newton-max",
];

macro_rules! fill_missing {
    ($dst:ident, $src:ident, $($f:ident),+ $(,)?) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )+
    };
}

impl ParamSet {
    /// Fields already set win; gaps are filled from `under`.
    fn overlay(mut self, under: &ParamSet) -> ParamSet {
        fill_missing!(
            self, under, case, dim, level, re, dt, steps, path, solver, precond, tol,
            newton_tol, newton_max
        );
        self
    }

    fn from_common(c: &CommonOpts) -> ParamSet {
        ParamSet {
            case: c.case.clone(),
            dim: c.dim,
            re: c.re,
            path: c.path.clone(),
            solver: c.solver.clone(),
            precond: c.precond.clone(),
            tol: c.tol,
            newton_tol: c.newton_tol,
            newton_max: c.newton_max,
            ..ParamSet::default()
        }
    }
}

fn parse_opt<T: std::str::FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(s) => s
            .parse::<T>()
            .map(Some)
            .map_err(|e| anyhow!("bad value for {key}: '{s}' ({e})")),
    }
}

fn params_from_map(map: &HashMap<String, String>) -> Result<ParamSet> {
    for k in map.keys() {
        if !PARAM_KEYS.contains(&k.as_str()) {
            bail!("unknown key '{k}'; allowed keys: {}", PARAM_KEYS.join(", "));
        }
    }
    Ok(ParamSet {
        case: map.get("case").cloned(),
        dim: parse_opt(map, "dim")?,
        level: parse_opt(map, "level")?,
        re: parse_opt(map, "re")?,
        dt: parse_opt(map, "dt")?,
        steps: parse_opt(map, "steps")?,
        path: map.get("path").cloned(),
        solver: map.get("solver").cloned(),
        precond: map.get("precond").cloned(),
        tol: parse_opt(map, "tol")?,
        newton_tol: parse_opt(map, "newton-tol")?,
        newton_max: parse_opt(map, "newton-max")?,
    })
}

fn split_kv(raw: &str, lineno: usize) -> Result<(String, String)> {
    let (k, v) = raw
        .split_once('=')
        .with_context(|| format!("line {lineno}: expected `key = value`, got '{raw}'"))?;
    let (k, v) = (k.trim().to_string(), v.trim().to_string());
    if k.is_empty() || v.is_empty() {
        bail!("line {lineno}: empty key or value in '{raw}'");
    }
    Ok((k, v))
}

/// One flat `key = value` map; blank lines and `#` comments are skipped.
fn parse_map(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = split_kv(line, i + 1)?;
        if map.insert(k.clone(), v).is_some() {
            bail!("line {}: duplicate key '{k}'", i + 1);
        }
    }
    Ok(map)
}

/// Blank-line-separated blocks of `key = value` lines.
fn parse_blocks(text: &str) -> Result<Vec<HashMap<String, String>>> {
    let mut blocks = Vec::new();
    let mut cur: HashMap<String, String> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if !cur.is_empty() {
                blocks.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let (k, v) = split_kv(line, i + 1)?;
        if cur.insert(k.clone(), v).is_some() {
            bail!("line {}: duplicate key '{k}' in one block", i + 1);
        }
    }
    if !cur.is_empty() {
        blocks.push(cur);
    }
    Ok(blocks)
}

fn load_config(path: &Option<PathBuf>) -> Result<ParamSet> {
    match path {
        None => Ok(ParamSet::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config file {}", p.display()))?;
            params_from_map(&parse_map(&text)?)
                .with_context(|| format!("in config file {}", p.display()))
        }
    }
}

fn parse_method(s: &str) -> Result<(Method, &'static str)> {
    Ok(match s {
        "lu" => (Method::DirectLu, "lu"),
        "cg" => (Method::Cg, "cg"),
        "bicgstab" => (Method::BiCgStab, "bicgstab"),
        "gmres" => (Method::Gmres, "gmres"),
        _ => bail!("unknown solver '{s}'; expected lu, cg, bicgstab, or gmres"),
    })
}

fn parse_precond(s: &str) -> Result<PrecondKind> {
    match s {
        "none" => return Ok(PrecondKind::None),
        "jacobi" => return Ok(PrecondKind::Jacobi),
        _ => {}
    }
    if let Some(rest) = s.strip_prefix("ilu") {
        let k: usize = rest
            .parse()
            .map_err(|_| anyhow!("bad ILU level in '{s}'; expected ilu0..ilu8"))?;
        if k > 8 {
            bail!("ILU fill level is capped at 8, got {k}");
        }
        return Ok(PrecondKind::Ilu(k));
    }
    bail!("unknown preconditioner '{s}'; expected none, jacobi, or ilu0..ilu8")
}

/// A fully resolved run: problem configuration plus solver configuration,
/// with the names echoed into report rows.
struct RunSpec {
    cfg: CaseConfig,
    run: RunConfig,
    path_name: &'static str,
    solver_name: &'static str,
    precond_name: String,
}

fn build_spec(p: &ParamSet) -> Result<RunSpec> {
    let case_s = p
        .case
        .as_deref()
        .context("missing case (pass --case or a `case = ...` line)")?;
    let case = Case::parse(case_s).with_context(|| {
        format!("unknown case '{case_s}'; expected gt2d, gt3d-stokes, gt3d-ns, cavity, or constant-force")
    })?;
    let dim = p.dim.unwrap_or_else(|| case.default_dim());
    match (case, dim) {
        (Case::Gt2d, 2) | (Case::Gt3dStokes | Case::Gt3dNs, 3) => {}
        (Case::Cavity | Case::ConstantForce, 2 | 3) => {}
        _ => bail!("case {} runs in dimension {}, got {dim}", case.name(), case.default_dim()),
    }
    let level = p.level.unwrap_or(8);
    if level == 0 {
        bail!("level must be at least 1");
    }
    let re = p.re.unwrap_or(100.0);
    if !(re > 0.0) {
        bail!("re must be positive, got {re}");
    }

    let mut cfg = CaseConfig::new(case, dim, level, re);
    if case.transient() {
        let (dt, steps) = match (p.dt, p.steps) {
            (Some(dt), Some(s)) => (dt, s),
            (Some(dt), None) => (dt, (DEFAULT_FINAL_TIME / dt).round().max(1.0) as usize),
            (None, Some(s)) => (DEFAULT_FINAL_TIME / s as f64, s),
            (None, None) => {
                let h = build_case_mesh(dim, level).h;
                let steps =
                    (DEFAULT_FINAL_TIME / (DEFAULT_DT_OVER_H2 * h * h)).round().max(1.0) as usize;
                (DEFAULT_FINAL_TIME / steps as f64, steps)
            }
        };
        if !(dt > 0.0) || steps == 0 {
            bail!("transient runs need dt > 0 and steps ≥ 1 (got dt = {dt}, steps = {steps})");
        }
        cfg.dt = dt;
        cfg.steps = steps;
    }

    let path_s = p.path.as_deref().unwrap_or("hybrid");
    let path = SolvePath::parse(path_s)
        .with_context(|| format!("unknown path '{path_s}'; expected coupled or hybrid"))?;
    let (method, solver_name) = parse_method(p.solver.as_deref().unwrap_or("lu"))?;
    let precond_name = p.precond.clone().unwrap_or_else(|| "none".to_string());
    let precond = parse_precond(&precond_name)?;
    let solver = SolverConfig::new(method)
        .with_tol(p.tol.unwrap_or(1e-11))
        .with_precond(precond);
    let run = RunConfig {
        path,
        solver,
        newton_tol: p.newton_tol.unwrap_or(5e-7),
        newton_max: p.newton_max.unwrap_or(25),
    };
    Ok(RunSpec { cfg, run, path_name: path.name(), solver_name, precond_name })
}

fn ok_row(spec: &RunSpec, out: &ProblemRun) -> RunRow {
    RunRow {
        case: spec.cfg.case.name().to_string(),
        path: spec.path_name.to_string(),
        solver: spec.solver_name.to_string(),
        precond: spec.precond_name.clone(),
        level: spec.cfg.level,
        h: out.mesh.h,
        dt: spec.cfg.dt,
        iters: out.linear_iters,
        time_s: out.linear_time,
        errl2u: out.errl2u,
        errl2p: out.errl2p,
        converged: true,
    }
}

fn failed_row(spec: &RunSpec) -> RunRow {
    RunRow {
        case: spec.cfg.case.name().to_string(),
        path: spec.path_name.to_string(),
        solver: spec.solver_name.to_string(),
        precond: spec.precond_name.clone(),
        level: spec.cfg.level,
        h: 0.0,
        dt: spec.cfg.dt,
        iters: 0,
        time_s: 0.0,
        errl2u: None,
        errl2p: None,
        converged: false,
    }
}

fn write_reports(dir: &Path, base: &str, csv: &str, md: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join(format!("{base}.csv"));
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
    let md_path = dir.join(format!("{base}.md"));
    fs::write(&md_path, md).with_context(|| format!("writing {}", md_path.display()))?;
    println!("wrote {} and {}", csv_path.display(), md_path.display());
    Ok(())
}

fn emit_runs(rows: &[RunRow], out: Option<&Path>) -> Result<()> {
    print!("{}", run_markdown(rows));
    if let Some(dir) = out {
        write_reports(dir, "results", &run_csv(rows), &run_markdown(rows))?;
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let file = load_config(&args.common.config)?;
    let mut cli = ParamSet::from_common(&args.common);
    cli.level = args.level;
    cli.dt = args.dt;
    cli.steps = args.steps;
    let spec = build_spec(&cli.overlay(&file))?;

    let pr = run_case(&spec.cfg, &spec.run)?;
    println!(
        "{} ({}D, level {}): {} cells, {} velocity + {} pressure unknowns, h = {}",
        spec.cfg.case.name(),
        spec.cfg.dim,
        spec.cfg.level,
        pr.mesh.n_cells(),
        pr.dofmap.n_vdofs,
        pr.dofmap.n_pdofs,
        sig6(pr.mesh.h),
    );
    if spec.cfg.case.transient() {
        println!("{} implicit Euler steps of dt = {}", spec.cfg.steps, sig6(spec.cfg.dt));
    }
    println!(
        "path {}, solver {}, precond {}: {} Newton iterations, {} linear iterations, {:.3} s in linear solves",
        spec.path_name,
        spec.solver_name,
        spec.precond_name,
        pr.newton_iters,
        pr.linear_iters,
        pr.linear_time,
    );
    if let Some(r) = pr.reports.last() {
        println!("last linear solve: relative residual {}", sig6(r.final_residual));
    }
    if spec.cfg.convective {
        if let Some(r) = pr.newton_history.last() {
            println!("final Newton residual {}", sig6(*r));
        }
    }
    if let (Some(eu), Some(ep)) = (pr.errl2u, pr.errl2p) {
        println!("errl2U = {}, errl2P = {}", sig6(eu), sig6(ep));
    }
    emit_runs(&[ok_row(&spec, &pr)], args.common.out.as_deref())
}

fn parse_levels(s: &str) -> Result<Vec<usize>> {
    let mut v = Vec::new();
    for part in s.split(',') {
        let t = part.trim();
        if t.is_empty() {
            continue;
        }
        v.push(t.parse::<usize>().with_context(|| format!("bad level '{t}'"))?);
    }
    if v.len() < 2 {
        bail!("a study needs at least two levels, got '{s}'");
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        bail!("levels must be strictly increasing, got '{s}'");
    }
    Ok(v)
}

fn parse_cfl(s: &str) -> Result<f64> {
    let (k, v) = s
        .split_once('=')
        .context("the cfl rule must look like dt-over-h2=0.16")?;
    if k.trim() != "dt-over-h2" {
        bail!("unsupported cfl rule '{}'; only dt-over-h2=<C> is available", k.trim());
    }
    let c: f64 = v
        .trim()
        .parse()
        .with_context(|| format!("bad dt-over-h2 constant '{}'", v.trim()))?;
    if !(c > 0.0) {
        bail!("the dt-over-h2 constant must be positive, got {c}");
    }
    Ok(c)
}

fn cmd_study(args: StudyArgs) -> Result<()> {
    let file = load_config(&args.common.config)?;
    let p = ParamSet::from_common(&args.common).overlay(&file);
    let spec = build_spec(&p)?;
    if !spec.cfg.case.has_exact() {
        bail!("case {} has no exact solution to study against", spec.cfg.case.name());
    }
    let levels = parse_levels(args.levels.as_deref().unwrap_or("8,16,32"))?;
    let c = parse_cfl(args.cfl_rule.as_deref().unwrap_or("dt-over-h2=0.16"))?;
    let final_time = args.final_time.unwrap_or(DEFAULT_FINAL_TIME);
    if !(final_time > 0.0) {
        bail!("final time must be positive, got {final_time}");
    }

    println!(
        "study: {} ({}D), levels {:?}, dt = {c}·h² to t = {final_time}, path {}, solver {}",
        spec.cfg.case.name(),
        spec.cfg.dim,
        levels,
        spec.path_name,
        spec.solver_name,
    );
    let rows = convergence_study(
        spec.cfg.case,
        spec.cfg.dim,
        &levels,
        spec.cfg.re,
        c,
        final_time,
        &spec.run,
    )?;
    print!("{}", study_markdown(&rows));
    if let Some(dir) = args.common.out.as_deref() {
        write_reports(dir, "study", &study_csv(&rows), &study_markdown(&rows))?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let text = fs::read_to_string(&args.plan)
        .with_context(|| format!("reading plan file {}", args.plan.display()))?;
    let blocks = parse_blocks(&text)?;
    if blocks.is_empty() {
        bail!("plan file {} has no configuration blocks", args.plan.display());
    }
    let mut rows = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        let spec = params_from_map(block)
            .and_then(|p| build_spec(&p))
            .with_context(|| format!("plan block {}", i + 1))?;
        println!(
            "[{}/{}] {} level {} — path {}, solver {}, precond {}",
            i + 1,
            blocks.len(),
            spec.cfg.case.name(),
            spec.cfg.level,
            spec.path_name,
            spec.solver_name,
            spec.precond_name,
        );
        match run_case(&spec.cfg, &spec.run) {
            Ok(out) => rows.push(ok_row(&spec, &out)),
            Err(e) => {
                println!("    did not converge: {e}");
                rows.push(failed_row(&spec));
            }
        }
    }
    emit_runs(&rows, args.out.as_deref())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Command::Solve(a) => cmd_solve(a),
        Command::Study(a) => cmd_study(a),
        Command::Bench(a) => cmd_bench(a),
    }
}
