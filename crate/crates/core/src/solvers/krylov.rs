//! Krylov iterations: CG, BiCGStab, and restarted GMRES.
//!
//! All three start from x = 0 and report relative residuals. CG measures the
//! preconditioned residual sqrt(rᵗM⁻¹r); BiCGStab and GMRES measure the true
//! residual ‖b − Ax‖/‖b‖ (GMRES gets it for free from the Givens recurrence
//! because preconditioning is applied from the right). Whenever an iteration
//! declares convergence the residual is recomputed from scratch; recursion
//! drift sends the method back to work instead of returning a false positive.

use super::{
    dot_vec, norm2, true_relative_residual, Preconditioner, SolveReport, SolverConfig, Termination,
};
use crate::sparse::CsrMatrix;
use std::time::Instant;

fn finish(
    start: Instant,
    converged: bool,
    iterations: usize,
    final_residual: f64,
    residual_history: Vec<f64>,
    termination: Termination,
) -> SolveReport {
    debug_assert_eq!(residual_history.len(), iterations + 1);
    SolveReport {
        converged,
        iterations,
        final_residual,
        residual_history,
        wall_time: start.elapsed().as_secs_f64(),
        termination,
    }
}

fn trivial_zero_rhs(start: Instant, n: usize) -> (Vec<f64>, SolveReport) {
    (vec![0.0; n], finish(start, true, 0, 0.0, vec![0.0], Termination::Converged))
}

/// Preconditioned conjugate gradient. Requires a symmetric operator and an
/// SPD preconditioner; on an indefinite system the pᵗAp ≤ 0 breakdown is
/// reported distinctly — that is the expected signature of the coupled
/// saddle-point matrix.
pub fn cg(
    a: &CsrMatrix,
    b: &[f64],
    m: &dyn Preconditioner,
    cfg: &SolverConfig,
) -> (Vec<f64>, SolveReport) {
    let start = Instant::now();
    let n = b.len();
    assert_eq!(a.n_rows, n);
    assert_eq!(a.n_cols, n);
    if norm2(b) == 0.0 {
        return trivial_zero_rhs(start, n);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = m.apply(&r);
    let mut rz = dot_vec(&r, &z);
    let mut history = vec![1.0];
    if rz <= 0.0 {
        let rel = true_relative_residual(a, b, &x);
        return (x, finish(start, false, 0, rel, history, Termination::IndefiniteBreakdown));
    }
    let norm0 = rz.sqrt();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=cfg.max_iters {
        a.matvec_into(&p, &mut ap);
        let pap = dot_vec(&p, &ap);
        if pap <= 0.0 {
            let rel = true_relative_residual(a, b, &x);
            return (x, finish(start, false, it - 1, rel, history, Termination::IndefiniteBreakdown));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        m.apply_into(&r, &mut z);
        let rz_new = dot_vec(&r, &z);
        if rz_new < 0.0 {
            history.push(true_relative_residual(a, b, &x));
            let rel = *history.last().unwrap();
            return (x, finish(start, false, it, rel, history, Termination::IndefiniteBreakdown));
        }
        let rel = rz_new.sqrt() / norm0;
        history.push(rel);
        if rel <= cfg.tol {
            let true_rel = true_relative_residual(a, b, &x);
            return (x, finish(start, true, it, true_rel, history, Termination::Converged));
        }
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }
    let rel = true_relative_residual(a, b, &x);
    (x, finish(start, false, cfg.max_iters, rel, history, Termination::MaxIterations))
}

/// Right-preconditioned BiCGStab. ρ- and ω-collapses are reported as
/// [`Termination::ScalarBreakdown`].
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    m: &dyn Preconditioner,
    cfg: &SolverConfig,
) -> (Vec<f64>, SolveReport) {
    let start = Instant::now();
    let n = b.len();
    assert_eq!(a.n_rows, n);
    assert_eq!(a.n_cols, n);
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return trivial_zero_rhs(start, n);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho_prev = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut history = vec![1.0];
    for it in 1..=cfg.max_iters {
        let rho = dot_vec(&r0, &r);
        if rho == 0.0 || (it > 1 && omega == 0.0) {
            let rel = true_relative_residual(a, b, &x);
            return (x, finish(start, false, it - 1, rel, history, Termination::ScalarBreakdown));
        }
        if it == 1 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho / rho_prev) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        let p_hat = m.apply(&p);
        a.matvec_into(&p_hat, &mut v);
        let r0v = dot_vec(&r0, &v);
        if r0v == 0.0 {
            let rel = true_relative_residual(a, b, &x);
            return (x, finish(start, false, it - 1, rel, history, Termination::ScalarBreakdown));
        }
        alpha = rho / r0v;
        for i in 0..n {
            x[i] += alpha * p_hat[i];
            r[i] -= alpha * v[i]; // r now holds s
        }
        if norm2(&r) / norm_b <= cfg.tol {
            let true_rel = true_relative_residual(a, b, &x);
            if true_rel <= cfg.tol {
                history.push(true_rel);
                return (x, finish(start, true, it, true_rel, history, Termination::Converged));
            }
        }
        let s_hat = m.apply(&r);
        let t = a.matvec(&s_hat);
        let tt = dot_vec(&t, &t);
        if tt == 0.0 {
            let rel = true_relative_residual(a, b, &x);
            history.push(rel);
            return (x, finish(start, false, it, rel, history, Termination::ScalarBreakdown));
        }
        omega = dot_vec(&t, &r) / tt;
        for i in 0..n {
            x[i] += omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        let rel = norm2(&r) / norm_b;
        history.push(rel);
        if rel <= cfg.tol {
            let true_rel = true_relative_residual(a, b, &x);
            if true_rel <= cfg.tol {
                return (x, finish(start, true, it, true_rel, history, Termination::Converged));
            }
            // Recursion drifted from the true residual: resynchronize.
            let ax = a.matvec(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        rho_prev = rho;
    }
    let rel = true_relative_residual(a, b, &x);
    (x, finish(start, false, cfg.max_iters, rel, history, Termination::MaxIterations))
}

fn givens(h0: f64, h1: f64) -> (f64, f64) {
    if h1 == 0.0 {
        (1.0, 0.0)
    } else {
        let t = h0.hypot(h1);
        (h0 / t, h1 / t)
    }
}

/// Restarted GMRES(m), preconditioned from the right so the Givens-recurrence
/// residual is the true residual. A restart cycle with no progress at all is
/// reported as [`Termination::Stagnation`].
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    m: &dyn Preconditioner,
    cfg: &SolverConfig,
) -> (Vec<f64>, SolveReport) {
    let start = Instant::now();
    let n = b.len();
    assert_eq!(a.n_rows, n);
    assert_eq!(a.n_cols, n);
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return trivial_zero_rhs(start, n);
    }
    let mut x = vec![0.0; n];
    let mut history = vec![1.0];
    let mut total_iters = 0usize;
    let termination;
    'outer: loop {
        let ax = a.matvec(&x);
        let r: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
        let beta = norm2(&r);
        let rel_start = beta / norm_b;
        if rel_start <= cfg.tol {
            termination = Termination::Converged;
            break 'outer;
        }
        if total_iters >= cfg.max_iters {
            termination = Termination::MaxIterations;
            break 'outer;
        }
        // Arnoldi with modified Gram-Schmidt; the Hessenberg column is
        // rotated into upper-triangular form on the fly.
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut z_basis: Vec<Vec<f64>> = Vec::new();
        let mut r_cols: Vec<Vec<f64>> = Vec::new();
        let mut rot: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        let mut converged_in_cycle = false;
        let mut exhausted = false;
        for j in 0..cfg.restart {
            if total_iters >= cfg.max_iters {
                break;
            }
            let z = m.apply(&basis[j]);
            let mut w = a.matvec(&z);
            z_basis.push(z);
            let mut hcol = vec![0.0; j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot_vec(vi, &w);
                hcol[i] = hij;
                for l in 0..n {
                    w[l] -= hij * vi[l];
                }
            }
            let hnorm = norm2(&w);
            hcol[j + 1] = hnorm;
            for (i, &(c, s)) in rot.iter().enumerate() {
                let tmp = c * hcol[i] + s * hcol[i + 1];
                hcol[i + 1] = -s * hcol[i] + c * hcol[i + 1];
                hcol[i] = tmp;
            }
            let (c, s) = givens(hcol[j], hcol[j + 1]);
            rot.push((c, s));
            hcol[j] = c * hcol[j] + s * hcol[j + 1];
            hcol.truncate(j + 1);
            r_cols.push(hcol);
            g.push(-s * g[j]);
            g[j] *= c;
            total_iters += 1;
            let rel = g[j + 1].abs() / norm_b;
            history.push(rel);
            if rel <= cfg.tol {
                converged_in_cycle = true;
                break;
            }
            if hnorm == 0.0 {
                // Invariant subspace reached; nothing further to gain.
                exhausted = true;
                break;
            }
            basis.push(w.iter().map(|v| v / hnorm).collect());
        }
        // y from back substitution on the rotated Hessenberg columns.
        let k = z_basis.len();
        let mut y = vec![0.0; k];
        for j in (0..k).rev() {
            let mut acc = g[j];
            for l in j + 1..k {
                acc -= r_cols[l][j] * y[l];
            }
            y[j] = if r_cols[j][j] == 0.0 { 0.0 } else { acc / r_cols[j][j] };
        }
        for (yj, zj) in y.iter().zip(&z_basis) {
            if *yj != 0.0 {
                for l in 0..n {
                    x[l] += yj * zj[l];
                }
            }
        }
        let rel_end = true_relative_residual(a, b, &x);
        if !converged_in_cycle && rel_end >= rel_start * (1.0 - 1e-12) {
            termination = Termination::Stagnation;
            break 'outer;
        }
        if exhausted && rel_end > cfg.tol {
            termination = Termination::Stagnation;
            break 'outer;
        }
    }
    let final_rel = true_relative_residual(a, b, &x);
    let converged = termination == Termination::Converged;
    (x, finish(start, converged, total_iters, final_rel, history, termination))
}
