//! Time stepping, Newton iteration, and end-to-end case runs.
//!
//! Both solution paths solve the same Newton linear system — the coupled
//! saddle-point form directly, or the pressure-eliminated face system with
//! local back-substitution — so a run is parameterized by (path, solver) and
//! everything downstream (Newton loop, time loop, error norms) is shared.
//!
//! Linear problems (no convection) have a constant system matrix across
//! Newton and time steps: the sparse factorization (or preconditioner) is
//! built once per run and reused, and each Newton solve is exact, so linear
//! steps always take exactly one iteration.

use crate::assembly::{
    build_locals, coupled_pattern, refill_coupled, LocalSystem, PhysParams, State,
};
use crate::dof::{BoundaryValues, DofMap};
use crate::geom::Point;
use crate::hybrid::build_hybrid;
use crate::mesh::{build_unit_cube_mesh, build_unit_square_mesh, SimplicialMesh};
use crate::problems::{
    boundary_values_at, cell_forces, compute_errors, exact_pressure, exact_velocity,
    full_pressure, green_taylor_velocity, kinetic_energy, Case,
};
use crate::report::StudyRow;
use crate::solvers::{
    build_preconditioner, lu_factor, solve_with_precond, true_relative_residual, LuFactors,
    Method, Preconditioner, SolveReport, SolverConfig, SolverError, Termination,
};
use crate::sparse::CsrMatrix;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Assembly(#[from] crate::assembly::AssemblyError),
    #[error(transparent)]
    Hybrid(#[from] crate::hybrid::HybridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("linear solver stopped ({termination:?}) after {iterations} iterations at residual {final_residual:.3e}")]
    LinearDiverged { iterations: usize, final_residual: f64, termination: Termination },
    #[error("Newton iteration stalled above {tol:.3e} after {max} steps (residual {residual:.3e})")]
    NewtonExceeded { tol: f64, max: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePath {
    Coupled,
    Hybrid,
}

impl SolvePath {
    pub fn parse(s: &str) -> Option<SolvePath> {
        match s {
            "coupled" => Some(SolvePath::Coupled),
            "hybrid" => Some(SolvePath::Hybrid),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolvePath::Coupled => "coupled",
            SolvePath::Hybrid => "hybrid",
        }
    }
}

/// How to run: which algebraic path, which linear solver, and the nonlinear
/// stopping rule.
#[derive(Clone)]
pub struct RunConfig {
    pub path: SolvePath,
    pub solver: SolverConfig,
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl RunConfig {
    pub fn direct(path: SolvePath) -> RunConfig {
        RunConfig {
            path,
            solver: SolverConfig::new(Method::DirectLu),
            newton_tol: 5e-7,
            newton_max: 25,
        }
    }
}

/// Reusable pieces of the linear solve; valid across steps only while the
/// matrix values are unchanged (linear problems with fixed Δt).
#[derive(Default)]
struct Workspace {
    coupled: Option<(CsrMatrix, Vec<f64>)>,
    factors: Option<LuFactors>,
    precond: Option<Box<dyn Preconditioner>>,
}

/// ‖[−res_mom; −res_con]‖₂ assembled from the local blocks.
fn residual_norm(dofmap: &DofMap, locals: &[LocalSystem]) -> f64 {
    let nv = dofmap.n_vdofs;
    let mut r = vec![0.0; dofmap.n_coupled()];
    for (k, ls) in locals.iter().enumerate() {
        for (i, &g) in dofmap.cells[k].loc2glob.iter().enumerate() {
            r[g] += ls.rhs[i];
        }
        if let Some(pd) = dofmap.cell_pdof[k] {
            r[nv + pd] = ls.g;
        }
    }
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves one sparse system, caching the factorization or preconditioner when
/// `reusable` and checking iterative convergence.
fn solve_sparse(
    matrix: &CsrMatrix,
    rhs: &[f64],
    run: &RunConfig,
    ws: &mut Workspace,
    reusable: bool,
) -> Result<(Vec<f64>, SolveReport), DriverError> {
    if run.solver.method == Method::DirectLu {
        let start = Instant::now();
        if !reusable || ws.factors.is_none() {
            ws.factors = Some(lu_factor(matrix)?);
        }
        let x = ws.factors.as_ref().unwrap().solve(rhs);
        let rel = true_relative_residual(matrix, rhs, &x);
        let report = SolveReport {
            converged: true,
            iterations: 0,
            final_residual: rel,
            residual_history: vec![rel],
            wall_time: start.elapsed().as_secs_f64(),
            termination: Termination::Converged,
        };
        return Ok((x, report));
    }
    if !reusable || ws.precond.is_none() {
        ws.precond = Some(build_preconditioner(matrix, run.solver.precond)?);
    }
    let (x, report) = solve_with_precond(matrix, rhs, &run.solver, ws.precond.as_deref().unwrap());
    if !report.converged {
        return Err(DriverError::LinearDiverged {
            iterations: report.iterations,
            final_residual: report.final_residual,
            termination: report.termination,
        });
    }
    Ok((x, report))
}

/// One Newton linear solve via the configured path: returns the increment
/// (δU, δP).
fn solve_linear(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    locals: &[LocalSystem],
    params: &PhysParams,
    run: &RunConfig,
    ws: &mut Workspace,
    reusable: bool,
) -> Result<(Vec<f64>, Vec<f64>, SolveReport), DriverError> {
    match run.path {
        SolvePath::Coupled => {
            if ws.coupled.is_none() {
                ws.coupled = Some((
                    coupled_pattern(mesh, dofmap, params.convective),
                    vec![0.0; dofmap.n_coupled()],
                ));
            }
            let (matrix, rhs) = ws.coupled.take().unwrap();
            let (mut matrix, mut rhs) = (matrix, rhs);
            refill_coupled(&mut matrix, &mut rhs, mesh, dofmap, locals, params.convective);
            let result = solve_sparse(&matrix, &rhs, run, ws, reusable);
            ws.coupled = Some((matrix, rhs));
            let (x, report) = result?;
            let (du, dp) = x.split_at(dofmap.n_vdofs);
            Ok((du.to_vec(), dp.to_vec(), report))
        }
        SolvePath::Hybrid => {
            let sys = build_hybrid(mesh, dofmap, locals, params.mu)?;
            let (w, report) = solve_sparse(&sys.matrix, &sys.rhs, run, ws, reusable)?;
            // Krylov interface solutions carry residual error that the
            // conditioning of the recovery amplifies; widen the duplicate
            // consistency check with the solver tolerance.
            let rel_tol = match run.solver.method {
                Method::DirectLu => 1e-9,
                _ => (1e5 * run.solver.tol).clamp(1e-6, 0.1),
            };
            let (du, dp) = sys.recover_with_tol(dofmap, &w, rel_tol)?;
            Ok((du, dp, report))
        }
    }
}

/// Newton iteration at fixed data, updating (u, p) in place. Records the
/// residual before every solve in `history` and appends linear reports.
/// Linear problems take exactly one step (the solve is exact); nonlinear
/// steps damp by halving when a full step would increase the residual.
#[allow(clippy::too_many_arguments)]
fn newton_solve(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    params: &PhysParams,
    u: &mut Vec<f64>,
    p: &mut Vec<f64>,
    bc: &BoundaryValues,
    u_prev: Option<&[f64]>,
    force: &[Point],
    run: &RunConfig,
    ws: &mut Workspace,
    reusable: bool,
    history: &mut Vec<f64>,
    reports: &mut Vec<SolveReport>,
) -> Result<usize, DriverError> {
    let mut it = 0usize;
    loop {
        let state = State { u: u.as_slice(), p: p.as_slice(), bc, u_prev, force };
        let locals = build_locals(mesh, dofmap, params, &state)?;
        let rnorm = residual_norm(dofmap, &locals);
        history.push(rnorm);
        if rnorm <= run.newton_tol {
            return Ok(it);
        }
        if it >= run.newton_max {
            return Err(DriverError::NewtonExceeded {
                tol: run.newton_tol,
                max: run.newton_max,
                residual: rnorm,
            });
        }
        let (du, dp, report) = solve_linear(mesh, dofmap, &locals, params, run, ws, reusable)?;
        reports.push(report);
        it += 1;
        if !params.convective {
            for (ui, di) in u.iter_mut().zip(&du) {
                *ui += di;
            }
            for (pi, di) in p.iter_mut().zip(&dp) {
                *pi += di;
            }
            return Ok(it);
        }
        let mut lambda = 1.0f64;
        loop {
            let u_try: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + lambda * b).collect();
            let p_try: Vec<f64> = p.iter().zip(&dp).map(|(a, b)| a + lambda * b).collect();
            let st = State { u: u_try.as_slice(), p: p_try.as_slice(), bc, u_prev, force };
            match build_locals(mesh, dofmap, params, &st) {
                Ok(ls) => {
                    let rn = residual_norm(dofmap, &ls);
                    if rn < rnorm || lambda <= 1.0 / 256.0 {
                        *u = u_try;
                        *p = p_try;
                        break;
                    }
                }
                Err(e) => {
                    if lambda <= 1.0 / 256.0 {
                        return Err(e.into());
                    }
                }
            }
            lambda *= 0.5;
        }
    }
}

/// Output of a full time integration.
pub struct TransientOutput {
    pub u: Vec<f64>,
    /// Reduced pressure vector (gauge cell omitted).
    pub p: Vec<f64>,
    /// Boundary values at the final time.
    pub bc: BoundaryValues,
    pub reports: Vec<SolveReport>,
    /// Total Newton iterations over all steps.
    pub newton_total: usize,
    /// Newton residual history of the last step.
    pub last_history: Vec<f64>,
    /// Lumped kinetic energy after each step (first entry: initial state).
    pub energy: Vec<f64>,
}

/// Implicit Euler with μ = 1/Δt; Dirichlet data evaluated at each step's end
/// time. The body force is held fixed in time (all bundled cases are
/// force-free or constant-force).
pub fn transient_loop(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    nu: f64,
    convective: bool,
    dt: f64,
    steps: usize,
    init_u: Vec<f64>,
    mut bc_at: impl FnMut(f64) -> BoundaryValues,
    force: &[Point],
    run: &RunConfig,
) -> Result<TransientOutput, DriverError> {
    assert!(dt > 0.0 && steps > 0, "transient runs need a positive step");
    let params = PhysParams { mu: 1.0 / dt, nu, convective };
    let reusable = !convective;
    let mut ws = Workspace::default();
    let mut u = init_u;
    let mut p = vec![0.0; dofmap.n_pdofs];
    let mut reports = Vec::new();
    let mut newton_total = 0;
    let mut last_history = Vec::new();
    let mut bc = bc_at(0.0);
    let mut energy = vec![kinetic_energy(mesh, dofmap, &u, &bc)];
    for n in 1..=steps {
        let t = n as f64 * dt;
        bc = bc_at(t);
        let u_prev = u.clone();
        last_history.clear();
        newton_total += newton_solve(
            mesh,
            dofmap,
            &params,
            &mut u,
            &mut p,
            &bc,
            Some(&u_prev),
            force,
            run,
            &mut ws,
            reusable,
            &mut last_history,
            &mut reports,
        )?;
        energy.push(kinetic_energy(mesh, dofmap, &u, &bc));
    }
    Ok(TransientOutput { u, p, bc, reports, newton_total, last_history, energy })
}

/// Output of a steady Newton run.
pub struct NewtonOutput {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Residual norm at each assembly: one entry per solve, and for
    /// convective runs the accepted final residual as the last entry.
    pub history: Vec<f64>,
    pub reports: Vec<SolveReport>,
    pub iters: usize,
}

/// Steady solve (μ = 0) by Newton iteration from rest.
pub fn steady_newton(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    nu: f64,
    convective: bool,
    bc: &BoundaryValues,
    force: &[Point],
    run: &RunConfig,
) -> Result<NewtonOutput, DriverError> {
    let params = PhysParams { mu: 0.0, nu, convective };
    let mut ws = Workspace::default();
    let mut u = vec![0.0; dofmap.n_vdofs];
    let mut p = vec![0.0; dofmap.n_pdofs];
    let mut history = Vec::new();
    let mut reports = Vec::new();
    let iters = newton_solve(
        mesh,
        dofmap,
        &params,
        &mut u,
        &mut p,
        bc,
        None,
        force,
        run,
        &mut ws,
        !convective,
        &mut history,
        &mut reports,
    )?;
    Ok(NewtonOutput { u, p, history, reports, iters })
}

/// Everything the CLI and the studies need from one case run.
pub struct ProblemRun {
    pub mesh: SimplicialMesh,
    pub dofmap: DofMap,
    pub u: Vec<f64>,
    /// Zero-mean pressure, one value per cell.
    pub p_cells: Vec<f64>,
    pub bc: BoundaryValues,
    pub reports: Vec<SolveReport>,
    pub newton_iters: usize,
    pub newton_history: Vec<f64>,
    pub errl2u: Option<f64>,
    pub errl2p: Option<f64>,
    /// Sum of linear-solve wall times.
    pub linear_time: f64,
    /// Sum of linear iteration counts (0 for direct solves).
    pub linear_iters: usize,
}

/// One benchmark configuration.
#[derive(Debug, Clone)]
pub struct CaseConfig {
    pub case: Case,
    pub dim: usize,
    pub level: usize,
    /// Reynolds parameter: vortex amplitude, or 1/ν for the cavity.
    pub re: f64,
    pub convective: bool,
    /// Time step; ignored by steady cases.
    pub dt: f64,
    pub steps: usize,
}

impl CaseConfig {
    pub fn new(case: Case, dim: usize, level: usize, re: f64) -> CaseConfig {
        CaseConfig { case, dim, level, re, convective: case.convective(), dt: 0.0, steps: 0 }
    }
}

pub fn build_case_mesh(dim: usize, level: usize) -> SimplicialMesh {
    if dim == 2 {
        build_unit_square_mesh(level)
    } else {
        build_unit_cube_mesh(level)
    }
}

/// Runs one case end to end: mesh, solve (transient or steady), errors.
pub fn run_case(cfg: &CaseConfig, run: &RunConfig) -> Result<ProblemRun, DriverError> {
    let mesh = build_case_mesh(cfg.dim, cfg.level);
    let dofmap = DofMap::build(&mesh, 0).expect("bundled meshes are connected");
    let nu = cfg.case.viscosity(cfg.re);
    let force = cell_forces(cfg.case, &mesh);

    let (u, p, bc, reports, newton_iters, newton_history, final_t) = if cfg.case.transient() {
        let mut init_u = vec![0.0; dofmap.n_vdofs];
        for f in 0..mesh.n_faces() {
            if let Some(b) = dofmap.face_vdof[f] {
                let v = green_taylor_velocity(mesh.face_centroid[f], 0.0, cfg.re);
                init_u[b..b + mesh.dim].copy_from_slice(&v[..mesh.dim]);
            }
        }
        let out = transient_loop(
            &mesh,
            &dofmap,
            nu,
            cfg.convective,
            cfg.dt,
            cfg.steps,
            init_u,
            |t| boundary_values_at(cfg.case, &mesh, &dofmap, t, cfg.re),
            &force,
            run,
        )?;
        let t_end = cfg.steps as f64 * cfg.dt;
        (out.u, out.p, out.bc, out.reports, out.newton_total, out.last_history, t_end)
    } else {
        let bc0 = boundary_values_at(cfg.case, &mesh, &dofmap, 0.0, cfg.re);
        let out = steady_newton(&mesh, &dofmap, nu, cfg.convective, &bc0, &force, run)?;
        (out.u, out.p, bc0, out.reports, out.iters, out.history, 0.0)
    };

    let p_cells = full_pressure(&mesh, &dofmap, &p);
    let (errl2u, errl2p) = if cfg.case.has_exact() {
        let (eu, ep) = compute_errors(
            &mesh,
            &dofmap,
            &u,
            &bc,
            &p_cells,
            |x| exact_velocity(cfg.case, x, final_t, cfg.re).unwrap(),
            |x| exact_pressure(cfg.case, x, final_t, cfg.re, mesh.dim).unwrap(),
        );
        (Some(eu), Some(ep))
    } else {
        (None, None)
    };

    let linear_time = reports.iter().map(|r| r.wall_time).sum();
    let linear_iters = reports.iter().map(|r| r.iterations).sum();
    Ok(ProblemRun {
        mesh,
        dofmap,
        u,
        p_cells,
        bc,
        reports,
        newton_iters,
        newton_history,
        errl2u,
        errl2p,
        linear_time,
        linear_iters,
    })
}

/// Refinement study at fixed final time with Δt = C·h² (rounded so the steps
/// land exactly on the final time). Ratios are log₂(E_prev/E).
pub fn convergence_study(
    case: Case,
    dim: usize,
    levels: &[usize],
    re: f64,
    dt_over_h2: f64,
    final_time: f64,
    run: &RunConfig,
) -> Result<Vec<StudyRow>, DriverError> {
    assert!(levels.len() >= 2, "a study needs at least two levels");
    let mut rows: Vec<StudyRow> = Vec::new();
    for &level in levels {
        let mesh = build_case_mesh(dim, level);
        let h = mesh.h;
        let dt_raw = dt_over_h2 * h * h;
        let steps = (final_time / dt_raw).round().max(1.0) as usize;
        let dt = final_time / steps as f64;
        let mut cfg = CaseConfig::new(case, dim, level, re);
        cfg.dt = dt;
        cfg.steps = steps;
        let out = run_case(&cfg, run)?;
        let (eu, ep) = (out.errl2u.unwrap(), out.errl2p.unwrap());
        let (ratio_u, ratio_p) = match rows.last() {
            Some(prev) => (Some((prev.errl2u / eu).log2()), Some((prev.errl2p / ep).log2())),
            None => (None, None),
        };
        rows.push(StudyRow { level, h, dt, errl2u: eu, ratio_u, errl2p: ep, ratio_p });
    }
    Ok(rows)
}

/// Steady Stokes under a constant (gradient) force: returns the largest
/// velocity magnitude and the largest pointwise deviation of the pressure
/// from the force potential (both should sit at rounding level).
pub fn well_balanced_test(
    dim: usize,
    level: usize,
    run: &RunConfig,
) -> Result<(f64, f64), DriverError> {
    let cfg = CaseConfig::new(Case::ConstantForce, dim, level, 1.0);
    let out = run_case(&cfg, run)?;
    let d = dim;
    let mut max_u = 0.0f64;
    for chunk in out.u.chunks(d) {
        max_u = max_u.max(chunk.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let psi: Vec<f64> = (0..out.mesh.n_cells())
        .map(|k| crate::problems::force_potential(out.mesh.centroid[k], dim))
        .collect();
    let vol: f64 = out.mesh.volume.iter().sum();
    let mean: f64 =
        psi.iter().zip(&out.mesh.volume).map(|(p, v)| p * v).sum::<f64>() / vol;
    let mut p_err = 0.0f64;
    for k in 0..out.mesh.n_cells() {
        p_err = p_err.max((out.p_cells[k] - (psi[k] - mean)).abs());
    }
    Ok((max_u, p_err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::PrecondKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_data_stays_at_rest() {
        let mesh = build_unit_square_mesh(2);
        let dofmap = DofMap::build(&mesh, 0).unwrap();
        let force = vec![[0.0; 3]; mesh.n_cells()];
        let run = RunConfig::direct(SolvePath::Coupled);
        let out = transient_loop(
            &mesh,
            &dofmap,
            1.0,
            false,
            0.1,
            3,
            vec![0.0; dofmap.n_vdofs],
            |_| BoundaryValues::zero(&dofmap),
            &force,
            &run,
        )
        .unwrap();
        assert!(out.u.iter().all(|&v| v == 0.0));
        assert!(out.p.iter().all(|&v| v == 0.0));
        assert!(out.reports.is_empty(), "zero residual must not trigger solves");
    }

    #[test]
    fn both_paths_integrate_to_the_same_fields() {
        let mut cfg = CaseConfig::new(Case::Gt2d, 2, 2, 10.0);
        cfg.dt = 1e-3;
        cfg.steps = 3;
        let a = run_case(&cfg, &RunConfig::direct(SolvePath::Coupled)).unwrap();
        let b = run_case(&cfg, &RunConfig::direct(SolvePath::Hybrid)).unwrap();
        let scale = a.u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..a.u.len() {
            assert!((a.u[i] - b.u[i]).abs() <= 1e-8 * scale, "u[{i}]");
        }
        for k in 0..a.p_cells.len() {
            assert!((a.p_cells[k] - b.p_cells[k]).abs() <= 1e-8 * scale.powi(2).max(scale));
        }
    }

    #[test]
    fn viscous_energy_decays_without_forcing() {
        let mesh = build_unit_square_mesh(3);
        let dofmap = DofMap::build(&mesh, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let init: Vec<f64> = (0..dofmap.n_vdofs).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let force = vec![[0.0; 3]; mesh.n_cells()];
        let run = RunConfig::direct(SolvePath::Hybrid);
        let out = transient_loop(
            &mesh,
            &dofmap,
            1.0,
            false,
            0.05,
            5,
            init,
            |_| BoundaryValues::zero(&dofmap),
            &force,
            &run,
        )
        .unwrap();
        for w in out.energy.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "energy grew: {} -> {}", w[0], w[1]);
        }
        assert!(out.energy.last().unwrap() < &(0.9 * out.energy[0]));
    }

    #[test]
    fn linear_problems_take_one_newton_step() {
        let cfg = CaseConfig::new(Case::ConstantForce, 2, 4, 1.0);
        let out = run_case(&cfg, &RunConfig::direct(SolvePath::Coupled)).unwrap();
        assert_eq!(out.newton_iters, 1);
        assert_eq!(out.newton_history.len(), 1);

        let mut cavity = CaseConfig::new(Case::Cavity, 2, 4, 100.0);
        cavity.convective = false;
        let out = run_case(&cavity, &RunConfig::direct(SolvePath::Hybrid)).unwrap();
        assert_eq!(out.newton_iters, 1);
    }

    #[test]
    fn gradient_force_is_exactly_balanced() {
        let (max_u, p_err) =
            well_balanced_test(2, 8, &RunConfig::direct(SolvePath::Coupled)).unwrap();
        assert!(max_u < 1e-10, "spurious velocity {max_u:.3e}");
        assert!(p_err < 1e-9, "pressure deviation {p_err:.3e}");
    }

    #[test]
    fn reported_pressure_is_zero_mean() {
        let mut cfg = CaseConfig::new(Case::Gt2d, 2, 2, 10.0);
        cfg.dt = 1e-3;
        cfg.steps = 1;
        let out = run_case(&cfg, &RunConfig::direct(SolvePath::Coupled)).unwrap();
        let mean: f64 = out
            .p_cells
            .iter()
            .zip(&out.mesh.volume)
            .map(|(p, v)| p * v)
            .sum();
        assert!(mean.abs() < 1e-10 * out.p_cells.iter().fold(1.0f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn study_reports_ratios_from_the_second_level() {
        let run = RunConfig::direct(SolvePath::Hybrid);
        // 0.08·h² divides the final time exactly at both levels (1 and 4
        // steps), so the recorded Δt tracks h² without rounding of the step
        // count.
        let rows = convergence_study(Case::Gt2d, 2, &[4, 8], 10.0, 0.08, 0.01, &run).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].ratio_u.is_none());
        let r = rows[1].ratio_u.unwrap();
        assert!(r.is_finite() && r > 0.5, "ratio {r}");
        assert!(rows[1].errl2u < rows[0].errl2u);
        // Δt tracks h² between consecutive dyadic levels.
        assert!((rows[0].dt / rows[1].dt - 4.0).abs() < 1e-12);
    }

    #[test]
    fn iterative_path_matches_direct_path() {
        let mut cfg = CaseConfig::new(Case::Gt2d, 2, 2, 5.0);
        cfg.dt = 1e-3;
        cfg.steps = 2;
        let direct = run_case(&cfg, &RunConfig::direct(SolvePath::Hybrid)).unwrap();
        let mut run = RunConfig::direct(SolvePath::Hybrid);
        run.solver = SolverConfig::new(Method::Gmres)
            .with_tol(1e-12)
            .with_precond(PrecondKind::Ilu(1));
        let iter = run_case(&cfg, &run).unwrap();
        let scale = direct.u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..direct.u.len() {
            assert!((direct.u[i] - iter.u[i]).abs() <= 1e-7 * scale);
        }
        assert!(iter.linear_iters > 0);
    }
}
