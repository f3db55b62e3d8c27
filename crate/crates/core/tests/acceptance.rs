//! End-to-end acceptance checks for the library's headline claims. Each test
//! guards one property and prints a single PASS/FAIL line (visible with
//! `cargo test --test acceptance -- --nocapture`).

use crstokes::assembly::{
    build_locals, gather_cell_velocities, newton_system, velocity_pattern, PhysParams, State,
};
use crstokes::convection::{convection_jacobian, convection_residual};
use crstokes::dof::{BoundaryValues, DofMap};
use crstokes::driver::{
    convergence_study, run_case, well_balanced_test, CaseConfig, RunConfig, SolvePath,
};
use crstokes::geom::Point;
use crstokes::hybrid::build_hybrid;
use crstokes::mesh::{build_unit_cube_mesh, build_unit_square_mesh, SimplicialMesh};
use crstokes::problems::Case;
use crstokes::report::sig6;
use crstokes::solvers::{direct_lu, solve, Method, PrecondKind, SolverConfig};
use crstokes::sparse::PatternBuilder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn verdict(ok: bool, what: &str, detail: String) {
    println!("[{}] {what} — {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{what} — {detail}");
}

struct Setup {
    mesh: SimplicialMesh,
    dofmap: DofMap,
}

fn setup(dim: usize, n: usize) -> Setup {
    let mesh = if dim == 2 { build_unit_square_mesh(n) } else { build_unit_cube_mesh(n) };
    let dofmap = DofMap::build(&mesh, 0).unwrap();
    Setup { mesh, dofmap }
}

fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rand_forces(rng: &mut ChaCha8Rng, n_cells: usize, dim: usize) -> Vec<Point> {
    (0..n_cells)
        .map(|_| {
            let mut f = [0.0; 3];
            for fi in f.iter_mut().take(dim) {
                *fi = rng.gen_range(-1.0..1.0);
            }
            f
        })
        .collect()
}

/// Both algebraic paths must produce the same Newton increment, for every
/// combination of dimension, time-dependence, convection, and boundary data.
#[test]
fn hybrid_solution_matches_coupled_direct_solve_across_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut count = 0;
    for &(dim, n) in &[(2usize, 4usize), (3, 2)] {
        let s = setup(dim, n);
        for &mu in &[1.0f64, 0.0] {
            for &convective in &[false, true] {
                for &inhom in &[false, true] {
                    if mu == 0.0 && !inhom {
                        // steady runs are driven by their boundary data here;
                        // with neither mass term nor inflow the config is
                        // degenerate, so it is left out of the sweep.
                        continue;
                    }
                    let u = randn(&mut rng, s.dofmap.n_vdofs);
                    let p = randn(&mut rng, s.dofmap.n_pdofs);
                    let prev_store;
                    let u_prev = if mu > 0.0 {
                        prev_store = randn(&mut rng, s.dofmap.n_vdofs);
                        Some(prev_store.as_slice())
                    } else {
                        None
                    };
                    let bc = if inhom {
                        BoundaryValues(randn(&mut rng, s.dofmap.n_bdofs))
                    } else {
                        BoundaryValues::zero(&s.dofmap)
                    };
                    let force = rand_forces(&mut rng, s.mesh.n_cells(), dim);
                    let params = PhysParams { mu, nu: 1.0, convective };
                    let state = State { u: &u, p: &p, bc: &bc, u_prev, force: &force };

                    let sys = newton_system(&s.mesh, &s.dofmap, &params, &state).unwrap();
                    let x = direct_lu(&sys.matrix, &sys.rhs).unwrap();
                    let (du_c, dp_c) = x.split_at(s.dofmap.n_vdofs);

                    let locals = build_locals(&s.mesh, &s.dofmap, &params, &state).unwrap();
                    let hy = build_hybrid(&s.mesh, &s.dofmap, &locals, mu).unwrap();
                    let w = direct_lu(&hy.matrix, &hy.rhs).unwrap();
                    let (du_h, dp_h) = hy.recover(&s.dofmap, &w).unwrap();

                    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
                    let mut diff = 0.0f64;
                    for i in 0..du_c.len() {
                        diff = diff.max((du_c[i] - du_h[i]).abs());
                    }
                    for i in 0..dp_c.len() {
                        diff = diff.max((dp_c[i] - dp_h[i]).abs());
                    }
                    worst = worst.max(diff / scale);
                    count += 1;
                }
            }
        }
    }
    verdict(
        count == 12 && worst <= 1e-9,
        "pressure-eliminated path reproduces the coupled direct solve",
        format!("{count} configurations, worst relative difference {}", sig6(worst)),
    );
}

/// For symmetric problems (no convection, E = 0) the interface matrix is
/// symmetric positive definite and Jacobi-preconditioned CG converges.
#[test]
fn interface_matrix_is_spd_and_jacobi_cg_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_defect = 0.0f64;
    let mut all_ok = true;
    let mut detail = String::new();
    for &(dim, n) in &[(2usize, 8usize), (3, 3)] {
        let s = setup(dim, n);
        let u = vec![0.0; s.dofmap.n_vdofs];
        let p = vec![0.0; s.dofmap.n_pdofs];
        let prev = vec![0.0; s.dofmap.n_vdofs];
        let bc = BoundaryValues(randn(&mut rng, s.dofmap.n_bdofs));
        let force = vec![[0.0; 3]; s.mesh.n_cells()];
        let params = PhysParams::stokes(1.0, 1.0);
        let state = State { u: &u, p: &p, bc: &bc, u_prev: Some(&prev), force: &force };
        let locals = build_locals(&s.mesh, &s.dofmap, &params, &state).unwrap();
        let hy = build_hybrid(&s.mesh, &s.dofmap, &locals, 1.0).unwrap();

        let amax = hy.matrix.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let defect = hy.matrix.symmetry_defect() / amax;
        worst_defect = worst_defect.max(defect);
        let chol_ok = hy.matrix.to_dense().cholesky().is_some();

        let config = SolverConfig::new(Method::Cg).with_tol(1e-11).with_precond(PrecondKind::Jacobi);
        let (_, report) = solve(&hy.matrix, &hy.rhs, &config).unwrap();
        let cg_ok = report.converged && report.final_residual <= 1e-9;
        all_ok &= chol_ok && cg_ok;
        detail += &format!(
            "{dim}D: symmetry defect {}, Cholesky {}, CG {} iterations to {}; ",
            sig6(defect),
            if chol_ok { "ok" } else { "FAILED" },
            report.iterations,
            sig6(report.final_residual),
        );
    }
    verdict(
        worst_defect <= 1e-13 && all_ok,
        "interface matrix is SPD and Jacobi-CG converges",
        detail,
    );
}

/// The interface system couples exactly the unknowns that a fully
/// component-coupled momentum matrix couples: same mesh stencil.
#[test]
fn interface_matrix_pattern_equals_full_coupling_velocity_pattern() {
    let s = setup(2, 8);
    let u = vec![0.0; s.dofmap.n_vdofs];
    let p = vec![0.0; s.dofmap.n_pdofs];
    let prev = vec![0.0; s.dofmap.n_vdofs];
    let bc = BoundaryValues::zero(&s.dofmap);
    let force = vec![[0.0; 3]; s.mesh.n_cells()];
    let params = PhysParams::stokes(1.0, 1.0);
    let state = State { u: &u, p: &p, bc: &bc, u_prev: Some(&prev), force: &force };
    let locals = build_locals(&s.mesh, &s.dofmap, &params, &state).unwrap();
    let hy = build_hybrid(&s.mesh, &s.dofmap, &locals, 1.0).unwrap();

    // Re-derive the expected stencil from cell adjacency alone.
    let mut builder = PatternBuilder::new(s.dofmap.n_vdofs, s.dofmap.n_vdofs);
    for k in 0..s.mesh.n_cells() {
        let dofs = &s.dofmap.cells[k].loc2glob;
        for &r in dofs {
            for &c in dofs {
                builder.insert(r, c);
            }
        }
    }
    let expected = builder.build();
    let a_full = velocity_pattern(&s.mesh, &s.dofmap, true);
    let ok = hy.matrix.same_pattern(&a_full) && hy.matrix.same_pattern(&expected);
    verdict(
        ok,
        "interface matrix pattern equals the fully coupled velocity stencil",
        format!("{} rows, {} nonzeros", hy.matrix.n_rows, hy.matrix.nnz()),
    );
}

/// A constant (gradient) body force must be absorbed entirely by the
/// pressure: zero velocity, pressure equal to the force potential.
#[test]
fn constant_gradient_force_yields_null_velocity_and_potential_pressure() {
    let (max_u, p_err) = well_balanced_test(2, 16, &RunConfig::direct(SolvePath::Coupled)).unwrap();
    let u_tol = 1e-11 * 5.0f64.sqrt() * 2.0; // |f| · diam(Ω)² / ν
    let ok = max_u <= u_tol && p_err <= 1e-10;
    verdict(
        ok,
        "constant force balances to null velocity and the exact pressure potential",
        format!(
            "max|U| = {} (tolerance {}), max pressure deviation = {}",
            sig6(max_u),
            sig6(u_tol),
            sig6(p_err),
        ),
    );
}

/// Refining the decaying-vortex runs with Δt ∝ h² must show second-order
/// velocity convergence (ratios approaching 2) and at least first-order-plus
/// pressure convergence; a cheap two-level 3D run guards the same trend.
#[test]
fn vortex_convergence_orders_approach_second_order() {
    // The interface systems of the amplitude-100 vortex are convection
    // dominated on the coarser levels (cell Reynolds ≈ 9), where restarted
    // Krylov methods stall; the factorization of the interface system is
    // cheap, so the study runs it directly.
    let run = RunConfig::direct(SolvePath::Hybrid);
    let rows = convergence_study(Case::Gt2d, 2, &[8, 16, 32, 64], 100.0, 0.16, 0.01, &run).unwrap();
    for r in &rows {
        println!(
            "  2D level {:>2}: errl2U {} (ratio {}), errl2P {} (ratio {})",
            r.level,
            sig6(r.errl2u),
            r.ratio_u.map_or("—".into(), sig6),
            sig6(r.errl2p),
            r.ratio_p.map_or("—".into(), sig6),
        );
    }
    let ru_first = rows[1].ratio_u.unwrap();
    let ru_last = rows.last().unwrap().ratio_u.unwrap();
    let rp_last = rows.last().unwrap().ratio_p.unwrap();

    let run3 = RunConfig::direct(SolvePath::Hybrid);
    let rows3 = convergence_study(Case::Gt3dStokes, 3, &[3, 6], 100.0, 0.0075, 0.01, &run3).unwrap();
    let ru3 = rows3.last().unwrap().ratio_u.unwrap();
    println!(
        "  3D levels 3→6: errl2U {} → {} (ratio {})",
        sig6(rows3[0].errl2u),
        sig6(rows3[1].errl2u),
        sig6(ru3),
    );

    let toward_two = (ru_last - 2.0).abs() <= (ru_first - 2.0).abs() + 0.1;
    let ok = ru_last >= 1.7 && toward_two && rp_last >= 1.2 && ru3 >= 1.6;
    verdict(
        ok,
        "vortex refinement shows second-order velocity convergence",
        format!(
            "2D velocity ratio {} → {}, pressure ratio {}, 3D velocity ratio {}",
            sig6(ru_first),
            sig6(ru_last),
            sig6(rp_last),
            sig6(ru3),
        ),
    );
}

/// The co-volume convection form is skew on discretely divergence-free fields
/// with homogeneous boundary values: b(u, u) = 0 to rounding.
#[test]
fn convection_form_vanishes_on_divergence_free_fields() {
    let s = setup(2, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let bc = BoundaryValues::zero(&s.dofmap);
    let zero_u = vec![0.0; s.dofmap.n_vdofs];
    let zero_p = vec![0.0; s.dofmap.n_pdofs];
    let params = PhysParams::stokes(0.0, 1.0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let force = rand_forces(&mut rng, s.mesh.n_cells(), 2);
        let state = State { u: &zero_u, p: &zero_p, bc: &bc, u_prev: None, force: &force };
        let sys = newton_system(&s.mesh, &s.dofmap, &params, &state).unwrap();
        let x = direct_lu(&sys.matrix, &sys.rhs).unwrap();
        let u = &x[..s.dofmap.n_vdofs];

        let mut b = 0.0f64;
        let mut scale = 0.0f64;
        for k in 0..s.mesh.n_cells() {
            let cd = &s.dofmap.cells[k];
            let ul = gather_cell_velocities(cd, 2, u, &bc);
            let res = convection_residual(&s.mesh, cd, k, &ul);
            for (ploc, vel) in ul.iter().enumerate() {
                for i in 0..2 {
                    b += vel[i] * res[ploc * 2 + i];
                }
                scale += (vel[0] * vel[0] + vel[1] * vel[1]).powf(1.5);
            }
        }
        worst = worst.max(b.abs() / scale.max(1e-300));
    }
    verdict(
        worst <= 1e-12,
        "convection form vanishes on divergence-free fields",
        format!("20 Stokes fields, worst |b(u,u)| / Σ|u|³ = {}", sig6(worst)),
    );
}

/// Stokes needs exactly one Newton step; the Re = 1000 cavity stays within
/// its iteration budget and both paths land on the same state.
#[test]
fn newton_counts_stokes_one_step_and_cavity_within_budget() {
    let mut stokes_cfg = CaseConfig::new(Case::Cavity, 2, 16, 1000.0);
    stokes_cfg.convective = false;
    let st = run_case(&stokes_cfg, &RunConfig::direct(SolvePath::Hybrid)).unwrap();

    let cfg = CaseConfig::new(Case::Cavity, 2, 32, 1000.0);
    let a = match run_case(&cfg, &RunConfig::direct(SolvePath::Coupled)) {
        Ok(v) => v,
        Err(e) => return verdict(false, "cavity Newton behavior", format!("coupled run failed: {e}")),
    };
    let b = match run_case(&cfg, &RunConfig::direct(SolvePath::Hybrid)) {
        Ok(v) => v,
        Err(e) => return verdict(false, "cavity Newton behavior", format!("hybrid run failed: {e}")),
    };

    let u_scale = a.u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let p_scale = a.p_cells.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut du = 0.0f64;
    for i in 0..a.u.len() {
        du = du.max((a.u[i] - b.u[i]).abs());
    }
    let mut dp = 0.0f64;
    for k in 0..a.p_cells.len() {
        dp = dp.max((a.p_cells[k] - b.p_cells[k]).abs());
    }
    let ok = st.newton_iters == 1
        && a.newton_iters <= 25
        && b.newton_iters <= 25
        && du <= 1e-5 * u_scale
        && dp <= 1e-5 * p_scale;
    verdict(
        ok,
        "Newton converges in one step for Stokes and within budget for the cavity",
        format!(
            "Stokes {} iteration(s); cavity coupled {} / hybrid {} iterations; path agreement {} (u), {} (p) relative",
            st.newton_iters,
            a.newton_iters,
            b.newton_iters,
            sig6(du / u_scale),
            sig6(dp / p_scale),
        ),
    );
}

/// The analytic convection Jacobian must agree with central finite
/// differences (exact for this quadratic form, up to rounding).
#[test]
fn convection_jacobian_matches_central_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst = 0.0f64;
    let mut cells = 0;
    for &(dim, n) in &[(2usize, 8usize), (3, 3)] {
        let s = setup(dim, n);
        for _ in 0..100 {
            let k = rng.gen_range(0..s.mesh.n_cells());
            let cd = &s.dofmap.cells[k];
            let nf = cd.faces.len();
            let mut ul: Vec<Point> = (0..nf)
                .map(|_| {
                    let mut v = [0.0; 3];
                    for vi in v.iter_mut().take(dim) {
                        *vi = rng.gen_range(-2.0..2.0);
                    }
                    v
                })
                .collect();
            let jac = convection_jacobian(&s.mesh, cd, k, &ul);
            let jmax = jac.amax().max(1e-300);
            let eps = 1e-4;
            for q in 0..nf {
                for j in 0..dim {
                    ul[q][j] += eps;
                    let rp = convection_residual(&s.mesh, cd, k, &ul);
                    ul[q][j] -= 2.0 * eps;
                    let rm = convection_residual(&s.mesh, cd, k, &ul);
                    ul[q][j] += eps;
                    for r in 0..dim * nf {
                        let fd = (rp[r] - rm[r]) / (2.0 * eps);
                        worst = worst.max((jac[(r, q * dim + j)] - fd).abs() / jmax);
                    }
                }
            }
            cells += 1;
        }
    }
    verdict(
        worst <= 1e-9,
        "convection Jacobian agrees with central finite differences",
        format!("{cells} random cells, worst relative deviation {}", sig6(worst)),
    );
}

/// CG must fail on the indefinite coupled system and converge on the
/// interface system; the direct-solve timing of both paths is reported.
#[test]
fn cg_fails_on_saddle_system_but_converges_on_interface_system() {
    let s = setup(2, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let u = vec![0.0; s.dofmap.n_vdofs];
    let p = vec![0.0; s.dofmap.n_pdofs];
    let prev = vec![0.0; s.dofmap.n_vdofs];
    let bc = BoundaryValues(randn(&mut rng, s.dofmap.n_bdofs));
    let force = vec![[0.0; 3]; s.mesh.n_cells()];
    let params = PhysParams::stokes(1.0, 1.0);
    let state = State { u: &u, p: &p, bc: &bc, u_prev: Some(&prev), force: &force };

    let coupled = newton_system(&s.mesh, &s.dofmap, &params, &state).unwrap();
    let mut cg_plain = SolverConfig::new(Method::Cg).with_tol(1e-11);
    cg_plain.max_iters = 2000;
    let (_, rep_coupled) = solve(&coupled.matrix, &coupled.rhs, &cg_plain).unwrap();

    let locals = build_locals(&s.mesh, &s.dofmap, &params, &state).unwrap();
    let hy = build_hybrid(&s.mesh, &s.dofmap, &locals, 1.0).unwrap();
    let cg_jac = SolverConfig::new(Method::Cg).with_tol(1e-11).with_precond(PrecondKind::Jacobi);
    let (_, rep_hybrid) = solve(&hy.matrix, &hy.rhs, &cg_jac).unwrap();

    // Direct-solve wall time on a 3D transient Stokes step, both paths.
    // Informational: the elimination should not be slower.
    let mut cfg3 = CaseConfig::new(Case::Gt3dStokes, 3, 5, 100.0);
    cfg3.dt = 0.01;
    cfg3.steps = 1;
    let t0 = Instant::now();
    run_case(&cfg3, &RunConfig::direct(SolvePath::Hybrid)).unwrap();
    let t_hybrid = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    run_case(&cfg3, &RunConfig::direct(SolvePath::Coupled)).unwrap();
    let t_coupled = t0.elapsed().as_secs_f64();
    println!(
        "  3D level-5 direct solve: hybrid {t_hybrid:.3} s vs coupled {t_coupled:.3} s (ratio {:.2}, informational)",
        t_hybrid / t_coupled,
    );

    let ok = !rep_coupled.converged && rep_hybrid.converged;
    verdict(
        ok,
        "CG breaks on the coupled saddle system yet converges on the interface system",
        format!(
            "coupled: {:?} after {} iterations; interface: converged in {} iterations",
            rep_coupled.termination, rep_coupled.iterations, rep_hybrid.iterations,
        ),
    );
}
