//! Per-cell Crouzeix-Raviart kernels.
//!
//! The CR basis function of face σ on cell K is φ_{σ,K}(x) = 1 − a_{K,σ}·(x_σ − x)/|K|:
//! mean value 1 on σ, mean value 0 on the other faces, constant gradient
//! ∇φ_{σ,K} = a_{K,σ}/|K|. The mass term is lumped over the face cones, giving
//! the diagonal weight m_{K,σ} = |K|/(d+1) per (cell, face).
//!
//! Local blocks follow the `CellDofs` layout: faces ascending by global index,
//! components innermost.

use crate::dof::{CellDofs, SlotDof};
use crate::geom::{dot, scale, sub, Point};
use crate::mesh::SimplicialMesh;
use nalgebra::{DMatrix, DVector};

/// Constant gradient of the CR basis function of `face` on cell `k`:
/// ∇φ_{σ,K} = a_{K,σ}/|K|.
///
/// # Panics
/// Panics if `face` is not a face of cell `k`.
pub fn cr_gradient(mesh: &SimplicialMesh, k: usize, face: usize) -> Point {
    scale(1.0 / mesh.volume[k], mesh.area_vec_of(k, face))
}

/// Lumped mass weight m_{K,σ} = |K|/(d+1), the volume of the cone over any
/// face of K with apex at the centroid.
pub fn lumped_mass(mesh: &SimplicialMesh, k: usize) -> f64 {
    mesh.volume[k] / (mesh.dim + 1) as f64
}

/// Scalar velocity matrix over all d+1 faces of cell `k` (CellDofs order):
/// s(p,q) = μ·m_{K}·δ_pq + ν·a_p·a_q/|K|.
pub fn scalar_stiffness_full(
    mesh: &SimplicialMesh,
    cd: &CellDofs,
    k: usize,
    mu: f64,
    nu: f64,
) -> DMatrix<f64> {
    let nf = cd.faces.len();
    let m = lumped_mass(mesh, k);
    let vol = mesh.volume[k];
    let mut s = DMatrix::zeros(nf, nf);
    for p in 0..nf {
        let ap = mesh.area_vec[k][cd.mesh_slot[p]];
        for q in 0..nf {
            let aq = mesh.area_vec[k][cd.mesh_slot[q]];
            s[(p, q)] = nu * dot(ap, aq) / vol;
        }
        s[(p, p)] += mu * m;
    }
    s
}

/// S_K: the scalar velocity matrix restricted to the interior faces of `k`.
pub fn local_velocity_matrix(
    mesh: &SimplicialMesh,
    cd: &CellDofs,
    k: usize,
    mu: f64,
    nu: f64,
) -> DMatrix<f64> {
    let full = scalar_stiffness_full(mesh, cd, k, mu, nu);
    let s_k = cd.s_k();
    DMatrix::from_fn(s_k, s_k, |r, c| full[(cd.int_slots[r], cd.int_slots[c])])
}

/// D_K: (D_K)_{i,σ} = −a_{K,σ}^{(i)} over interior faces, face-major
/// component-minor; length d·s_K.
pub fn local_divergence(mesh: &SimplicialMesh, cd: &CellDofs, k: usize) -> DVector<f64> {
    let d = mesh.dim;
    let mut out = DVector::zeros(d * cd.s_k());
    for (rank, &p) in cd.int_slots.iter().enumerate() {
        let a = mesh.area_vec[k][cd.mesh_slot[p]];
        for i in 0..d {
            out[d * rank + i] = -a[i];
        }
    }
    out
}

/// R_K: the force tested against the divergence-conforming reconstruction,
/// (R_K)_{i,σ} = a_{K,σ}^{(i)} · (f̄_K · (x_σ − x_K)), over interior faces.
pub fn local_rhs(mesh: &SimplicialMesh, cd: &CellDofs, k: usize, f_bar: Point) -> DVector<f64> {
    let d = mesh.dim;
    let mut out = DVector::zeros(d * cd.s_k());
    for (rank, &p) in cd.int_slots.iter().enumerate() {
        let f = cd.faces[p];
        let a = mesh.area_vec[k][cd.mesh_slot[p]];
        let w = dot(f_bar, sub(mesh.face_centroid[f], mesh.centroid[k]));
        for i in 0..d {
            out[d * rank + i] = a[i] * w;
        }
    }
    out
}

/// The affine Raviart-Thomas reconstruction of face velocities on one cell:
/// Π̂_h v(x) = Σ_σ (V_σ·a_{K,σ})/(d·|K|) · (x − s_σ), where s_σ is the vertex
/// opposite σ. Its divergence is constant.
pub struct RtField {
    /// (flux coefficient V_σ·a_{K,σ}/(d·|K|), opposite vertex) per face.
    terms: Vec<(f64, Point)>,
    /// (1/|K|)·Σ_σ V_σ·a_{K,σ}.
    divergence: f64,
}

impl RtField {
    pub fn eval(&self, x: Point) -> Point {
        let mut out = [0.0; 3];
        for &(c, s) in &self.terms {
            out = crate::geom::add(out, scale(c, sub(x, s)));
        }
        out
    }

    pub fn divergence(&self) -> f64 {
        self.divergence
    }
}

/// Builds the RT reconstruction from velocities at all d+1 faces of cell `k`
/// (CellDofs order).
pub fn rt_reconstruct(
    mesh: &SimplicialMesh,
    cd: &CellDofs,
    k: usize,
    face_velocities: &[Point],
) -> RtField {
    assert_eq!(face_velocities.len(), cd.faces.len());
    let d = mesh.dim as f64;
    let vol = mesh.volume[k];
    let mut terms = Vec::with_capacity(cd.faces.len());
    let mut div = 0.0;
    for (p, &v) in face_velocities.iter().enumerate() {
        let a = mesh.area_vec[k][cd.mesh_slot[p]];
        let flux = dot(v, a);
        let s = mesh.vertices[mesh.opposite_vertex(k, cd.mesh_slot[p])];
        terms.push((flux / (d * vol), s));
        div += flux;
    }
    RtField { terms, divergence: div / vol }
}

/// CR interpolation Σ_σ U_σ φ_{σ,K}(x) from velocities at all d+1 faces
/// (CellDofs order). At a face centroid this returns that face's value.
///
/// # Panics
/// Panics (debug) if `x` lies outside the closure of cell `k` — callers are
/// expected to locate the cell first.
pub fn eval_velocity(
    mesh: &SimplicialMesh,
    cd: &CellDofs,
    k: usize,
    face_velocities: &[Point],
    x: Point,
) -> Point {
    assert_eq!(face_velocities.len(), cd.faces.len());
    let vol = mesh.volume[k];
    let mut out = [0.0; 3];
    for (p, &v) in face_velocities.iter().enumerate() {
        let f = cd.faces[p];
        let a = mesh.area_vec[k][cd.mesh_slot[p]];
        let phi = 1.0 - dot(a, sub(mesh.face_centroid[f], x)) / vol;
        debug_assert!(
            (1.0 - phi) / mesh.dim as f64 >= -1e-12,
            "point {x:?} lies outside cell {k}"
        );
        out = crate::geom::add(out, scale(phi, v));
    }
    out
}

/// Exact cell average of a quadratic force: vertices-plus-centroid rule with
/// weights (1/12, 3/4) on triangles and (1/20, 4/5) on tetrahedra.
pub fn cell_average_force(
    mesh: &SimplicialMesh,
    k: usize,
    mut f: impl FnMut(Point) -> Point,
) -> Point {
    let (wv, wc) = match mesh.dim {
        2 => (1.0 / 12.0, 3.0 / 4.0),
        3 => (1.0 / 20.0, 4.0 / 5.0),
        _ => unreachable!(),
    };
    let mut avg = scale(wc, f(mesh.centroid[k]));
    for &v in &mesh.cells[k] {
        avg = crate::geom::add(avg, scale(wv, f(mesh.vertices[v])));
    }
    avg
}

/// Dirichlet fold-in for a linear (Stokes) cell block: the momentum RHS
/// correction −s_full[int, ext]·U^D per component, and the constraint RHS
/// g_K = Σ_{σ∈F_K∩F_ext} U^D_σ·a_{K,σ} (the value that keeps interpolants of
/// divergence-free fields satisfying D·U = g).
pub fn dirichlet_fold(
    mesh: &SimplicialMesh,
    cd: &CellDofs,
    k: usize,
    s_full: &DMatrix<f64>,
    boundary: &[f64],
) -> (DVector<f64>, f64) {
    let d = mesh.dim;
    let mut rhs = DVector::zeros(d * cd.s_k());
    let mut g = 0.0;
    for (q, &sd) in cd.slot_dof.iter().enumerate() {
        let SlotDof::Dirichlet(base) = sd else { continue };
        let a = mesh.area_vec[k][cd.mesh_slot[q]];
        for i in 0..d {
            g += boundary[base + i] * a[i];
            for (rank, &p) in cd.int_slots.iter().enumerate() {
                rhs[d * rank + i] -= s_full[(p, q)] * boundary[base + i];
            }
        }
    }
    (rhs, g)
}
