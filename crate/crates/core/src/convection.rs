//! Reduced-stencil convection term.
//!
//! Each cell is split into co-volumes, one per face (base σ, apex at the cell
//! centroid). The advective transfer between the co-volumes of faces σ and σ'
//! happens through their shared interface τ_{σ,σ'}, whose area-normal has the
//! closed form |τ|·n_{σ,σ'} = (a_{K,σ'} − a_{K,σ})/(d+1). Evaluating the mass
//! flux of the Raviart-Thomas reconstruction through τ at its barycenter gives
//!
//!   F_{σ,σ'} = (U_σ + U_{σ'} − (1/(d+1))·Σ_{σ''} U_{σ''}) · (a_{σ'} − a_σ)/(d+1).
//!
//! The residual contribution at test face σ uses the single-sum rewriting
//! r_σ = ½·Σ_{σ'≠σ} F_{σ,σ'}·(U_{σ'} − U_σ), which pairs fluxes and centered
//! differences so that the global form vanishes on discretely divergence-free
//! fields. The residual is quadratic in U, so its Jacobian is assembled
//! exactly from the product rule; it couples all velocity components of the
//! cell but never reaches outside it.
//!
//! All local blocks are in `CellDofs` order (faces ascending, components
//! innermost) over all d+1 faces; assembly restricts rows to interior DOFs.

use crate::dof::CellDofs;
use crate::geom::{dot, scale, sub, Point};
use crate::mesh::SimplicialMesh;
use nalgebra::{DMatrix, DVector};

/// Flux block for one cell: fluxes over unordered face pairs, the residual
/// over all faces, and the exact dense Jacobian.
pub struct LocalConvection {
    /// F_{σ,σ'} for p < q in `CellDofs` order, indexed by [`pair_index`].
    pub fluxes: Vec<f64>,
    /// Residual contributions, length d·(d+1), face-major component-minor.
    pub residual: DVector<f64>,
    /// d·(d+1) square derivative of `residual` with respect to the cell's
    /// face velocities.
    pub jacobian: DMatrix<f64>,
}

/// Index of the unordered pair {p, q}, p ≠ q, among the pairs of d+1 slots.
pub fn pair_index(p: usize, q: usize) -> usize {
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    hi * (hi - 1) / 2 + lo
}

/// Area-normal |τ_{σ,σ'}|·n_{σ,σ'} = (a_{K,σ'} − a_{K,σ})/(d+1) of the
/// interface between the co-volumes of faces `sigma` and `sigma_p`, oriented
/// from the first to the second.
///
/// # Panics
/// Panics if the faces coincide or either is not a face of cell `k`.
pub fn covolume_area_normal(mesh: &SimplicialMesh, k: usize, sigma: usize, sigma_p: usize) -> Point {
    assert_ne!(sigma, sigma_p, "co-volume interface needs two distinct faces");
    scale(
        1.0 / (mesh.dim + 1) as f64,
        sub(mesh.area_vec_of(k, sigma_p), mesh.area_vec_of(k, sigma)),
    )
}

/// Mass flux F_{σ,σ'} through the co-volume interface between local slots `p`
/// and `q` of cell `k`, for face velocities `u` in `CellDofs` order (boundary
/// faces carry their Dirichlet values).
///
/// # Panics
/// Panics if `p == q`.
pub fn flux(mesh: &SimplicialMesh, cd: &CellDofs, k: usize, u: &[Point], p: usize, q: usize) -> f64 {
    assert_ne!(p, q, "co-volume flux needs two distinct faces");
    let nf = cd.faces.len();
    assert_eq!(u.len(), nf);
    let mut mean = [0.0; 3];
    for v in u {
        mean = crate::geom::add(mean, *v);
    }
    mean = scale(1.0 / nf as f64, mean);
    let adv = sub(crate::geom::add(u[p], u[q]), mean);
    let ap = mesh.area_vec[k][cd.mesh_slot[p]];
    let aq = mesh.area_vec[k][cd.mesh_slot[q]];
    dot(adv, scale(1.0 / nf as f64, sub(aq, ap)))
}

/// Convection residual of cell `k` at every (face, component), single-sum
/// form: r_σ = ½·Σ_{σ'≠σ} F_{σ,σ'}·(U_{σ'} − U_σ).
pub fn convection_residual(
    mesh: &SimplicialMesh,
    cd: &CellDofs,
    k: usize,
    u: &[Point],
) -> DVector<f64> {
    let d = mesh.dim;
    let nf = cd.faces.len();
    let mut res = DVector::zeros(d * nf);
    for p in 0..nf {
        for q in 0..nf {
            if q == p {
                continue;
            }
            let f = flux(mesh, cd, k, u, p, q);
            let diff = sub(u[q], u[p]);
            for i in 0..d {
                res[d * p + i] += 0.5 * f * diff[i];
            }
        }
    }
    res
}

/// Exact Jacobian of [`convection_residual`] with respect to the cell's face
/// velocities: d·(d+1) square, rows and columns face-major component-minor.
pub fn convection_jacobian(
    mesh: &SimplicialMesh,
    cd: &CellDofs,
    k: usize,
    u: &[Point],
) -> DMatrix<f64> {
    let d = mesh.dim;
    let nf = cd.faces.len();
    let nfi = 1.0 / nf as f64;
    let mut jac = DMatrix::zeros(d * nf, d * nf);
    for p in 0..nf {
        let ap = mesh.area_vec[k][cd.mesh_slot[p]];
        for q in 0..nf {
            if q == p {
                continue;
            }
            let aq = mesh.area_vec[k][cd.mesh_slot[q]];
            let an = scale(nfi, sub(aq, ap));
            let f = flux(mesh, cd, k, u, p, q);
            let diff = sub(u[q], u[p]);
            for r in 0..nf {
                // ∂F_{p,q}/∂U_r = (δ_rp + δ_rq − 1/(d+1))·an.
                let coef = (r == p) as usize as f64 + (r == q) as usize as f64 - nfi;
                for i in 0..d {
                    for j in 0..d {
                        jac[(d * p + i, d * r + j)] += 0.5 * coef * an[j] * diff[i];
                    }
                }
            }
            // ∂(U_q − U_p)^{(i)}/∂U_r^{(j)} = (δ_rq − δ_rp)·δ_ij.
            for i in 0..d {
                jac[(d * p + i, d * q + i)] += 0.5 * f;
                jac[(d * p + i, d * p + i)] -= 0.5 * f;
            }
        }
    }
    jac
}

/// Computes fluxes, residual, and Jacobian of cell `k` in one pass.
pub fn local_convection(
    mesh: &SimplicialMesh,
    cd: &CellDofs,
    k: usize,
    u: &[Point],
) -> LocalConvection {
    let nf = cd.faces.len();
    let mut fluxes = vec![0.0; nf * (nf - 1) / 2];
    for q in 1..nf {
        for p in 0..q {
            fluxes[pair_index(p, q)] = flux(mesh, cd, k, u, p, q);
        }
    }
    LocalConvection {
        fluxes,
        residual: convection_residual(mesh, cd, k, u),
        jacobian: convection_jacobian(mesh, cd, k, u),
    }
}
