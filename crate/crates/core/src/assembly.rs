//! Global assembly of the velocity-pressure systems.
//!
//! Everything is phrased as one Newton step at a given state: each cell
//! produces a [`LocalSystem`] holding the Jacobian block over its interior
//! velocity DOFs, minus the momentum residual, the divergence vector D_K, and
//! minus the constraint residual. Boundary data enters the residual only —
//! Dirichlet columns never reach the matrix — so the same code path covers
//! the linear Stokes solve (one exact Newton step from any state), the
//! transient step (μ = 1/Δt with the previous velocities in the residual),
//! and the Navier-Stokes Newton iteration.
//!
//! The coupled system is the saddle-point block form
//!
//! ```text
//!   [ A  Dᵗ ] [δU]   [ −res_mom ]
//!   [ D  0  ] [δP] = [ −res_con ]
//! ```
//!
//! with one constraint row per cell except the gauge cell K₀, whose pressure
//! is pinned to zero. Unknown ordering is all velocity DOFs (faces ascending,
//! components innermost) followed by pressures by cell index — the natural
//! ordering the direct solver eliminates in.

use crate::convection::{convection_jacobian, convection_residual};
use crate::dof::{BoundaryValues, CellDofs, DofMap, SlotDof};
use crate::elements::{local_divergence, local_rhs, lumped_mass, scalar_stiffness_full};
use crate::geom::{dot, Point};
use crate::mesh::SimplicialMesh;
use crate::sparse::{CsrMatrix, PatternBuilder};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("non-finite residual in cell {cell} (diverged iterate)")]
    NonFinite { cell: usize },
}

/// Physical parameters of one solve: μ = 1/Δt (0 for steady), ν = 1/Re, and
/// whether the convective term is active.
#[derive(Debug, Clone, Copy)]
pub struct PhysParams {
    pub mu: f64,
    pub nu: f64,
    pub convective: bool,
}

impl PhysParams {
    pub fn stokes(mu: f64, nu: f64) -> Self {
        PhysParams { mu, nu, convective: false }
    }

    pub fn navier_stokes(mu: f64, nu: f64) -> Self {
        PhysParams { mu, nu, convective: true }
    }
}

/// The state a Newton step linearizes around.
pub struct State<'a> {
    /// Current velocity DOFs (length n_vdofs).
    pub u: &'a [f64],
    /// Current pressures (length n_pdofs; the gauge cell carries none).
    pub p: &'a [f64],
    /// Dirichlet values at boundary-face centroids.
    pub bc: &'a BoundaryValues,
    /// Previous-step velocities for the μ·(U − U_prev) time term.
    pub u_prev: Option<&'a [f64]>,
    /// Cell-averaged force f̄_K per cell.
    pub force: &'a [Point],
}

/// One cell's contribution to the Newton system.
pub struct LocalSystem {
    /// Jacobian block over interior DOFs: diag_d(S_K) plus the convection
    /// Jacobian when active; d·s_K square.
    pub a_int: DMatrix<f64>,
    /// Minus the momentum residual at the interior DOFs.
    pub rhs: DVector<f64>,
    /// D_K over interior DOFs ((D_K)_{i,σ} = −a_{K,σ}^{(i)}).
    pub d_vec: DVector<f64>,
    /// Minus the constraint residual: Σ over all faces of u·a_{K,σ}, where u
    /// takes boundary values on Dirichlet faces.
    pub g: f64,
}

/// Face velocities of cell `k` over all d+1 faces in `CellDofs` order,
/// Dirichlet faces taking their boundary values.
pub fn gather_cell_velocities(
    cd: &CellDofs,
    dim: usize,
    u: &[f64],
    bc: &BoundaryValues,
) -> Vec<Point> {
    cd.slot_dof
        .iter()
        .map(|sd| {
            let mut v = [0.0; 3];
            match *sd {
                SlotDof::Velocity(base) => v[..dim].copy_from_slice(&u[base..base + dim]),
                SlotDof::Dirichlet(base) => v[..dim].copy_from_slice(&bc.0[base..base + dim]),
            }
            v
        })
        .collect()
}

/// Builds cell `k`'s Newton block at the given state.
pub fn local_system(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    k: usize,
    params: &PhysParams,
    state: &State,
) -> LocalSystem {
    let d = mesh.dim;
    let cd = &dofmap.cells[k];
    let s_k = cd.s_k();
    let u_loc = gather_cell_velocities(cd, d, state.u, state.bc);
    let s_full = scalar_stiffness_full(mesh, cd, k, params.mu, params.nu);
    let r_k = local_rhs(mesh, cd, k, state.force[k]);
    let d_vec = local_divergence(mesh, cd, k);
    let m_k = lumped_mass(mesh, k);
    let p_k = dofmap.cell_pdof[k].map_or(0.0, |pd| state.p[pd]);

    let mut a_int = DMatrix::zeros(d * s_k, d * s_k);
    let mut res = DVector::zeros(d * s_k);
    for (r, &pr) in cd.int_slots.iter().enumerate() {
        for (c, &pc) in cd.int_slots.iter().enumerate() {
            let s = s_full[(pr, pc)];
            for i in 0..d {
                a_int[(d * r + i, d * c + i)] = s;
            }
        }
        for i in 0..d {
            let mut acc = d_vec[d * r + i] * p_k - r_k[d * r + i];
            for (q, uq) in u_loc.iter().enumerate() {
                acc += s_full[(pr, q)] * uq[i];
            }
            if let Some(up) = state.u_prev {
                acc -= params.mu * m_k * up[cd.loc2glob[d * r + i]];
            }
            res[d * r + i] = acc;
        }
    }
    if params.convective {
        let conv_res = convection_residual(mesh, cd, k, &u_loc);
        let conv_jac = convection_jacobian(mesh, cd, k, &u_loc);
        for (r, &pr) in cd.int_slots.iter().enumerate() {
            for i in 0..d {
                res[d * r + i] += conv_res[d * pr + i];
                for (c, &pc) in cd.int_slots.iter().enumerate() {
                    for j in 0..d {
                        a_int[(d * r + i, d * c + j)] += conv_jac[(d * pr + i, d * pc + j)];
                    }
                }
            }
        }
    }
    let mut g = 0.0;
    for (q, uq) in u_loc.iter().enumerate() {
        g += dot(*uq, mesh.area_vec[k][cd.mesh_slot[q]]);
    }
    LocalSystem { a_int, rhs: -res, d_vec, g }
}

/// Local blocks for every cell; fails on a non-finite residual.
pub fn build_locals(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    params: &PhysParams,
    state: &State,
) -> Result<Vec<LocalSystem>, AssemblyError> {
    (0..mesh.n_cells())
        .map(|k| {
            let ls = local_system(mesh, dofmap, k, params, state);
            if ls.rhs.iter().all(|v| v.is_finite())
                && ls.a_int.iter().all(|v| v.is_finite())
                && ls.g.is_finite()
            {
                Ok(ls)
            } else {
                Err(AssemblyError::NonFinite { cell: k })
            }
        })
        .collect()
}

/// Zero matrix with the velocity-velocity pattern: DOFs (i,σ), (j,σ')
/// connected iff some cell contains both faces — all d² component pairs with
/// `full_coupling` (Navier-Stokes stencil), only i = j without.
pub fn velocity_pattern(mesh: &SimplicialMesh, dofmap: &DofMap, full_coupling: bool) -> CsrMatrix {
    let d = mesh.dim;
    let mut b = PatternBuilder::new(dofmap.n_vdofs, dofmap.n_vdofs);
    for k in 0..mesh.n_cells() {
        let cd = &dofmap.cells[k];
        for r in 0..cd.s_k() {
            for c in 0..cd.s_k() {
                for i in 0..d {
                    for j in 0..d {
                        if full_coupling || i == j {
                            b.insert(cd.loc2glob[d * r + i], cd.loc2glob[d * c + j]);
                        }
                    }
                }
            }
        }
    }
    b.build()
}

/// A = Σ_K (scatter of the local Jacobian block).
pub fn assemble_a(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    locals: &[LocalSystem],
    full_coupling: bool,
) -> CsrMatrix {
    assert_eq!(locals.len(), mesh.n_cells());
    let d = mesh.dim;
    let mut a = velocity_pattern(mesh, dofmap, full_coupling);
    for (k, ls) in locals.iter().enumerate() {
        let cd = &dofmap.cells[k];
        let nloc = d * cd.s_k();
        for r in 0..nloc {
            for c in 0..nloc {
                if full_coupling || r % d == c % d {
                    a.add_entry(cd.loc2glob[r], cd.loc2glob[c], ls.a_int[(r, c)]);
                } else {
                    debug_assert_eq!(ls.a_int[(r, c)], 0.0, "cross-component entry without full coupling");
                }
            }
        }
    }
    a
}

/// D: one row per cell except the gauge cell, entries −a_{K,σ}^{(i)}.
pub fn assemble_d(mesh: &SimplicialMesh, dofmap: &DofMap, locals: &[LocalSystem]) -> CsrMatrix {
    assert_eq!(locals.len(), mesh.n_cells());
    let mut b = PatternBuilder::new(dofmap.n_pdofs, dofmap.n_vdofs);
    for k in 0..mesh.n_cells() {
        if let Some(row) = dofmap.cell_pdof[k] {
            for &col in &dofmap.cells[k].loc2glob {
                b.insert(row, col);
            }
        }
    }
    let mut m = b.build();
    for (k, ls) in locals.iter().enumerate() {
        let Some(row) = dofmap.cell_pdof[k] else { continue };
        for (p, &col) in dofmap.cells[k].loc2glob.iter().enumerate() {
            m.add_entry(row, col, ls.d_vec[p]);
        }
    }
    m
}

/// One Newton linear system in coupled saddle-point form.
pub struct CoupledSystem {
    /// [A Dᵗ; D 0], size (n_vdofs + n_pdofs) square; the pressure-pressure
    /// block stores nothing.
    pub matrix: CsrMatrix,
    /// [−res_mom; −res_con].
    pub rhs: Vec<f64>,
}

/// Zero matrix with the coupled pattern (for value refills across Newton or
/// time steps).
pub fn coupled_pattern(mesh: &SimplicialMesh, dofmap: &DofMap, full_coupling: bool) -> CsrMatrix {
    let d = mesh.dim;
    let nv = dofmap.n_vdofs;
    let n = nv + dofmap.n_pdofs;
    let mut b = PatternBuilder::new(n, n);
    for k in 0..mesh.n_cells() {
        let cd = &dofmap.cells[k];
        for r in 0..cd.s_k() {
            for c in 0..cd.s_k() {
                for i in 0..d {
                    for j in 0..d {
                        if full_coupling || i == j {
                            b.insert(cd.loc2glob[d * r + i], cd.loc2glob[d * c + j]);
                        }
                    }
                }
            }
        }
        if let Some(pd) = dofmap.cell_pdof[k] {
            for &v in &cd.loc2glob {
                b.insert(v, nv + pd);
                b.insert(nv + pd, v);
            }
        }
    }
    b.build()
}

/// Scatters local blocks into a pre-built coupled pattern.
pub fn refill_coupled(
    matrix: &mut CsrMatrix,
    rhs: &mut [f64],
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    locals: &[LocalSystem],
    full_coupling: bool,
) {
    assert_eq!(locals.len(), mesh.n_cells());
    let d = mesh.dim;
    let nv = dofmap.n_vdofs;
    assert_eq!(matrix.n_rows, nv + dofmap.n_pdofs);
    assert_eq!(rhs.len(), nv + dofmap.n_pdofs);
    matrix.reset_values();
    rhs.iter_mut().for_each(|v| *v = 0.0);
    for (k, ls) in locals.iter().enumerate() {
        let cd = &dofmap.cells[k];
        let nloc = d * cd.s_k();
        for r in 0..nloc {
            let row = cd.loc2glob[r];
            for c in 0..nloc {
                if full_coupling || r % d == c % d {
                    matrix.add_entry(row, cd.loc2glob[c], ls.a_int[(r, c)]);
                }
            }
            rhs[row] += ls.rhs[r];
        }
        if let Some(pd) = dofmap.cell_pdof[k] {
            for (p, &col) in cd.loc2glob.iter().enumerate() {
                matrix.add_entry(col, nv + pd, ls.d_vec[p]);
                matrix.add_entry(nv + pd, col, ls.d_vec[p]);
            }
            rhs[nv + pd] = ls.g;
        }
    }
}

/// Builds pattern and values in one go.
pub fn assemble_coupled(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    locals: &[LocalSystem],
    full_coupling: bool,
) -> CoupledSystem {
    let mut matrix = coupled_pattern(mesh, dofmap, full_coupling);
    let mut rhs = vec![0.0; dofmap.n_coupled()];
    refill_coupled(&mut matrix, &mut rhs, mesh, dofmap, locals, full_coupling);
    CoupledSystem { matrix, rhs }
}

/// The Newton linear system at a state: matrix [A(U) Dᵗ; D 0] and RHS
/// −residual, so the solve yields the Newton increment.
pub fn newton_system(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    params: &PhysParams,
    state: &State,
) -> Result<CoupledSystem, AssemblyError> {
    let locals = build_locals(mesh, dofmap, params, state)?;
    Ok(assemble_coupled(mesh, dofmap, &locals, params.convective))
}
