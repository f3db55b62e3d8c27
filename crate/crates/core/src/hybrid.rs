//! Pressure-eliminated solution path.
//!
//! The coupled saddle-point system is solved without ever forming it: each
//! cell's momentum rows are duplicated, giving every cell a private copy
//! Û_K of its face velocities, and the copies are stitched back together by
//! a face unknown Ŵ with per-cell sign matrices C_K (±1, opposite across each
//! interior face) plus an optional diagonal shift E_K (also opposite across
//! faces, so both cancel when the two copies of a momentum row are added —
//! the enlarged system is equivalent to the coupled one by construction).
//!
//! With Â_K = A_K + E_K invertible, Û_K and P_K are eliminated cell-locally:
//!
//! ```text
//!   Û_K = Â_K⁻¹(R_K − C_K Ŵ|_K − D_K P_K)
//!   P_K = (D_Kᵗ Â_K⁻¹(R_K − C_K Ŵ|_K) − g_K) / B_K,   B_K = D_Kᵗ Â_K⁻¹ D_K
//! ```
//!
//! and the face-continuity condition Σ_K C_K Û_K = 0 becomes G·Ŵ = S with
//! G = Σ_K H_K C_K Q_K C_K H_Kᵗ, where Q_K is Â_K⁻¹ projected against the
//! D_K direction (no projection on the gauge cell, which carries no
//! constraint). G has exactly the full-component-coupling stencil of A and is
//! symmetric positive definite when μ > 0, b_h = 0, and E = 0.
//!
//! For μ = 0 the steady diffusion block of a cell with all faces interior is
//! singular (the face gradients sum to zero), so a shift is required: a greedy
//! maximal independent set M₁ of cells takes E_K = −λ_K·Id (making Â_K
//! negative definite), each remaining cell gets +λ_L on faces shared with an
//! M₁ neighbor L, and zero on faces between two M₂ cells. λ_K starts at 1.1×
//! the Gershgorin bound of A_K and doubles on factorization trouble.

use crate::assembly::{velocity_pattern, LocalSystem};
use crate::dof::DofMap;
use crate::mesh::SimplicialMesh;
use crate::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HybridError {
    #[error("cell {cell}: local block stayed singular after {doublings} shift doublings")]
    ShiftExhausted { cell: usize, doublings: u32 },
    #[error("cell {cell}: local block is singular and no shift cell is adjacent")]
    Singular { cell: usize },
    #[error("velocity copies disagree by {diff:.3e} (field max {norm:.3e}); local solves are inconsistent")]
    RecoveryMismatch { diff: f64, norm: f64 },
}

/// The per-cell sign and shift diagonals, one value per interior face of the
/// cell (applied identically to all components).
#[derive(Debug, Clone)]
pub struct SignData {
    /// C_K diagonal: +1 on the lower-indexed cell of each interior face, −1
    /// on the higher-indexed one.
    pub c: Vec<Vec<f64>>,
    /// E_K diagonal; sums to zero across each interior face.
    pub e: Vec<Vec<f64>>,
}

/// ±1 per (cell, interior face): +1 where the cell is the face's
/// lower-indexed cell.
pub fn choose_signs(mesh: &SimplicialMesh, dofmap: &DofMap) -> Vec<Vec<f64>> {
    (0..mesh.n_cells())
        .map(|k| {
            let cd = &dofmap.cells[k];
            cd.int_slots
                .iter()
                .map(|&p| if mesh.face_cells[cd.faces[p]].0 == k { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

fn other_cell(mesh: &SimplicialMesh, face: usize, k: usize) -> Option<usize> {
    match mesh.face_cells[face] {
        (a, Some(b)) => Some(if a == k { b } else { a }),
        _ => None,
    }
}

fn neighbors(mesh: &SimplicialMesh, dofmap: &DofMap, k: usize) -> Vec<usize> {
    let cd = &dofmap.cells[k];
    cd.int_slots
        .iter()
        .filter_map(|&p| other_cell(mesh, cd.faces[p], k))
        .collect()
}

/// Gershgorin upper bound on the eigenvalues of a local block, with a
/// positive floor so doubling always makes progress.
fn gershgorin_lambda(a: &DMatrix<f64>) -> f64 {
    let mut bound = f64::NEG_INFINITY;
    for i in 0..a.nrows() {
        let mut row = a[(i, i)];
        for j in 0..a.ncols() {
            if j != i {
                row += a[(i, j)].abs();
            }
        }
        bound = bound.max(row);
    }
    let base = if bound > 0.0 { bound } else { a.amax().max(1.0) };
    1.1 * base
}

/// Greedy maximal independent set in ascending cell order: λ_K for members,
/// `None` elsewhere. Every non-member has a member neighbor.
fn initial_shift(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    locals: &[LocalSystem],
) -> Vec<Option<f64>> {
    let mut lambda: Vec<Option<f64>> = vec![None; mesh.n_cells()];
    for k in 0..mesh.n_cells() {
        if neighbors(mesh, dofmap, k).iter().all(|&l| lambda[l].is_none()) {
            lambda[k] = Some(gershgorin_lambda(&locals[k].a_int));
        }
    }
    lambda
}

/// E diagonal of cell `k` per interior face, from the λ map.
fn shift_values(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    lambda: &[Option<f64>],
    k: usize,
) -> Vec<f64> {
    let cd = &dofmap.cells[k];
    if let Some(l) = lambda[k] {
        return vec![-l; cd.s_k()];
    }
    cd.int_slots
        .iter()
        .map(|&p| {
            other_cell(mesh, cd.faces[p], k)
                .and_then(|o| lambda[o])
                .unwrap_or(0.0)
        })
        .collect()
}

struct CellHybrid {
    /// Â_K⁻¹ (dense, d·s_K square).
    ainv: DMatrix<f64>,
    /// Â_K⁻¹ D_K.
    ainv_d: DVector<f64>,
    /// Â_K⁻¹ R_K.
    ainv_r: DVector<f64>,
    /// D_K copy for recovery.
    d_vec: DVector<f64>,
    /// Constraint RHS of the cell.
    g_con: f64,
    /// D_Kᵗ Â_K⁻¹ D_K (unused on the gauge cell).
    b_k: f64,
}

/// Everything needed to solve G·Ŵ = S and recover (U, P).
pub struct HybridSystem {
    /// Assembled G, full-component-coupling velocity stencil.
    pub matrix: CsrMatrix,
    /// Assembled S.
    pub rhs: Vec<f64>,
    pub signs: SignData,
    cells: Vec<CellHybrid>,
    gauge_cell: usize,
    dim: usize,
}

fn build_cell(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    locals: &[LocalSystem],
    lambda: &[Option<f64>],
    k: usize,
    gauge_cell: usize,
) -> Result<CellHybrid, ()> {
    let d = mesh.dim;
    let ls = &locals[k];
    let mut a_hat = ls.a_int.clone();
    for (r, ev) in shift_values(mesh, dofmap, lambda, k).into_iter().enumerate() {
        for i in 0..d {
            a_hat[(d * r + i, d * r + i)] += ev;
        }
    }
    let max_abs = a_hat.amax();
    let lu = a_hat.lu();
    let min_piv = lu
        .u()
        .diagonal()
        .iter()
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min);
    if !(min_piv >= 1e-12 * max_abs) {
        return Err(());
    }
    let ainv = lu.try_inverse().ok_or(())?;
    let ainv_d = &ainv * &ls.d_vec;
    let ainv_r = &ainv * &ls.rhs;
    let b_k = if k == gauge_cell { 0.0 } else { ls.d_vec.dot(&ainv_d) };
    if k != gauge_cell {
        let inv_norm_est = 1.0 / min_piv;
        if b_k.abs() <= 1e-14 * ls.d_vec.norm_squared() * inv_norm_est {
            return Err(());
        }
    }
    Ok(CellHybrid { ainv, ainv_d, ainv_r, d_vec: ls.d_vec.clone(), g_con: ls.g, b_k })
}

/// Builds and factors all local blocks, escalating shifts as needed, then
/// assembles G and S.
pub fn build_hybrid(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    locals: &[LocalSystem],
    mu: f64,
) -> Result<HybridSystem, HybridError> {
    assert_eq!(locals.len(), mesh.n_cells());
    let nc = mesh.n_cells();
    let gauge_cell = dofmap.gauge_cell;

    let mut lambda: Vec<Option<f64>> = if mu > 0.0 {
        vec![None; nc]
    } else {
        initial_shift(mesh, dofmap, locals)
    };
    let mut shifted = mu <= 0.0;
    let mut doublings = vec![0u32; nc];
    let mut cells: Vec<Option<CellHybrid>> = (0..nc).map(|_| None).collect();
    let mut dirty: BTreeSet<usize> = (0..nc).collect();

    while let Some(k) = dirty.pop_first() {
        match build_cell(mesh, dofmap, locals, &lambda, k, gauge_cell) {
            Ok(ch) => {
                cells[k] = Some(ch);
            }
            Err(()) => {
                if !shifted {
                    // μ > 0 promised invertible blocks but one failed; fall
                    // back to the shifted construction wholesale.
                    lambda = initial_shift(mesh, dofmap, locals);
                    shifted = true;
                    cells.iter_mut().for_each(|c| *c = None);
                    dirty = (0..nc).collect();
                    continue;
                }
                let targets: Vec<usize> = if lambda[k].is_some() {
                    vec![k]
                } else {
                    neighbors(mesh, dofmap, k)
                        .into_iter()
                        .filter(|&l| lambda[l].is_some())
                        .collect()
                };
                if targets.is_empty() {
                    return Err(HybridError::Singular { cell: k });
                }
                for t in targets {
                    doublings[t] += 1;
                    if doublings[t] > 60 {
                        return Err(HybridError::ShiftExhausted { cell: k, doublings: doublings[t] - 1 });
                    }
                    lambda[t] = lambda[t].map(|l| 2.0 * l);
                    dirty.insert(t);
                    for n in neighbors(mesh, dofmap, t) {
                        dirty.insert(n);
                    }
                }
                dirty.insert(k);
            }
        }
    }

    let cells: Vec<CellHybrid> = cells.into_iter().map(Option::unwrap).collect();
    let c_signs = choose_signs(mesh, dofmap);
    let e_vals: Vec<Vec<f64>> =
        (0..nc).map(|k| shift_values(mesh, dofmap, &lambda, k)).collect();
    let signs = SignData { c: c_signs, e: e_vals };

    let mut sys = HybridSystem {
        matrix: velocity_pattern(mesh, dofmap, true),
        rhs: vec![0.0; dofmap.n_vdofs],
        signs,
        cells,
        gauge_cell,
        dim: mesh.dim,
    };
    for k in 0..nc {
        let g_loc = sys.local_g(k);
        let s_loc = sys.local_s(k);
        let cd = &dofmap.cells[k];
        for (r, &row) in cd.loc2glob.iter().enumerate() {
            for (c, &col) in cd.loc2glob.iter().enumerate() {
                sys.matrix.add_entry(row, col, g_loc[(r, c)]);
            }
            sys.rhs[row] += s_loc[r];
        }
    }
    Ok(sys)
}

impl HybridSystem {
    /// Â_K⁻¹ projected against D_K: Q_K = Â⁻¹ − (Â⁻¹D)(DᵗÂ⁻¹)/B_K; plain
    /// Â⁻¹ on the gauge cell.
    fn q_matrix(&self, k: usize) -> DMatrix<f64> {
        let ch = &self.cells[k];
        if k == self.gauge_cell {
            return ch.ainv.clone();
        }
        let row_d = ch.ainv.tr_mul(&ch.d_vec);
        &ch.ainv - &ch.ainv_d * row_d.transpose() / ch.b_k
    }

    /// G_K = C_K Q_K C_K.
    pub fn local_g(&self, k: usize) -> DMatrix<f64> {
        let mut q = self.q_matrix(k);
        let c = &self.signs.c[k];
        let d = self.dim;
        for r in 0..q.nrows() {
            for col in 0..q.ncols() {
                q[(r, col)] *= c[r / d] * c[col / d];
            }
        }
        q
    }

    /// S_K = C_K(Q_K R_K + Â⁻¹D_K·g_K/B_K).
    fn local_s(&self, k: usize) -> DVector<f64> {
        let ch = &self.cells[k];
        let d = self.dim;
        let mut s = if k == self.gauge_cell {
            ch.ainv_r.clone()
        } else {
            let scale = (ch.d_vec.dot(&ch.ainv_r) - ch.g_con) / ch.b_k;
            &ch.ainv_r - &ch.ainv_d * scale
        };
        for (r, v) in s.iter_mut().enumerate() {
            *v *= self.signs.c[k][r / d];
        }
        s
    }

    /// B_K of a cell (0 on the gauge cell).
    pub fn cell_b(&self, k: usize) -> f64 {
        self.cells[k].b_k
    }

    /// Back-substitutes Ŵ into the per-cell eliminations: pressures first,
    /// then the velocity copies, which must agree across every interior face.
    /// The duplicate comparison assumes Ŵ came from a direct factorization;
    /// for iterative interface solutions use [`recover_with_tol`](Self::recover_with_tol).
    pub fn recover(
        &self,
        dofmap: &DofMap,
        w: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), HybridError> {
        self.recover_with_tol(dofmap, w, 1e-9)
    }

    /// [`recover`](Self::recover) with an explicit relative tolerance for the
    /// duplicate-value consistency check, applied to the larger of the
    /// solution norm and the eliminated-data magnitude. A Krylov solution
    /// satisfies the interface equations only up to the solver tolerance, and
    /// the two copies of a face value disagree by that residual error
    /// amplified by the conditioning of the local eliminations, so the check
    /// must widen with the solver tolerance. Sign or indexing bugs still
    /// surface: they produce mismatches at the full solution scale.
    pub fn recover_with_tol(
        &self,
        dofmap: &DofMap,
        w: &[f64],
        rel_tol: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), HybridError> {
        let (u, p, max_diff, data_scale) = self.recover_parts(dofmap, w);
        let norm = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // The two copies of an interface value come from independent local
        // eliminations, so they agree only up to rounding at the scale of the
        // eliminated data; that absolute floor matters when the solution
        // itself is tiny (late Newton increments). Genuine sign or indexing
        // errors produce mismatches at the solution scale, many orders above.
        let tol = rel_tol * norm.max(data_scale) + 256.0 * f64::EPSILON * (1.0 + data_scale);
        if max_diff > tol {
            return Err(HybridError::RecoveryMismatch { diff: max_diff, norm });
        }
        Ok((u, p))
    }

    /// Back-substitution itself: returns the fields, the worst disagreement
    /// between the two copies of any interface value, and the magnitude of
    /// the eliminated data those copies were formed from.
    pub(crate) fn recover_parts(
        &self,
        dofmap: &DofMap,
        w: &[f64],
    ) -> (Vec<f64>, Vec<f64>, f64, f64) {
        assert_eq!(w.len(), dofmap.n_vdofs);
        let d = self.dim;
        let mut u = vec![0.0; dofmap.n_vdofs];
        let mut written = vec![false; dofmap.n_vdofs];
        let mut p = vec![0.0; dofmap.n_pdofs];
        let mut max_diff = 0.0f64;
        let mut data_scale = 0.0f64;
        for (k, ch) in self.cells.iter().enumerate() {
            let cd = &dofmap.cells[k];
            let n = cd.loc2glob.len();
            let mut cw = DVector::zeros(n);
            for (idx, &g) in cd.loc2glob.iter().enumerate() {
                cw[idx] = self.signs.c[k][idx / d] * w[g];
            }
            // t = Â⁻¹(R − CŴ)
            let acw = &ch.ainv * &cw;
            for v in ch.ainv_r.iter().chain(acw.iter()) {
                data_scale = data_scale.max(v.abs());
            }
            let t = &ch.ainv_r - acw;
            let u_hat = if k == self.gauge_cell {
                t
            } else {
                let p_k = (ch.d_vec.dot(&t) - ch.g_con) / ch.b_k;
                p[dofmap.cell_pdof[k].unwrap()] = p_k;
                &t - &ch.ainv_d * p_k
            };
            for (idx, &g) in cd.loc2glob.iter().enumerate() {
                if written[g] {
                    max_diff = max_diff.max((u[g] - u_hat[idx]).abs());
                } else {
                    u[g] = u_hat[idx];
                    written[g] = true;
                }
            }
        }
        (u, p, max_diff, data_scale)
    }
}
