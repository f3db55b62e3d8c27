//! Benchmark problem definitions and discrete error norms.
//!
//! The decaying-vortex cases have closed-form velocity/pressure fields on the
//! unit square (extruded unchanged along z in 3D, third component zero) and
//! zero body force; the amplitude is the Reynolds number and the viscosity is
//! fixed at 1, which is the only scaling under which the fields solve the
//! equations. The lid-driven cavity drives the flow purely through its top
//! boundary (non-regularized lid value (1,0) applied at face centroids, which
//! never sit on the corners). The constant-force case probes the well-balanced
//! property: a gradient force must produce zero velocity and an affine
//! pressure.

use crate::dof::{BoundaryValues, DofMap};
use crate::elements::cell_average_force;
use crate::geom::{dot, Point};
use crate::mesh::SimplicialMesh;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// 2D decaying vortex, Navier-Stokes.
    Gt2d,
    /// 3D extruded vortex, Stokes (exact pressure is identically zero).
    Gt3dStokes,
    /// 3D extruded vortex, Navier-Stokes.
    Gt3dNs,
    /// Steady lid-driven cavity, Navier-Stokes.
    Cavity,
    /// Steady Stokes with a constant (gradient) body force.
    ConstantForce,
}

impl Case {
    pub fn parse(s: &str) -> Option<Case> {
        match s {
            "gt2d" => Some(Case::Gt2d),
            "gt3d-stokes" => Some(Case::Gt3dStokes),
            "gt3d-ns" => Some(Case::Gt3dNs),
            "cavity" => Some(Case::Cavity),
            "constant-force" => Some(Case::ConstantForce),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::Gt2d => "gt2d",
            Case::Gt3dStokes => "gt3d-stokes",
            Case::Gt3dNs => "gt3d-ns",
            Case::Cavity => "cavity",
            Case::ConstantForce => "constant-force",
        }
    }

    pub fn default_dim(self) -> usize {
        match self {
            Case::Gt3dStokes | Case::Gt3dNs => 3,
            _ => 2,
        }
    }

    pub fn convective(self) -> bool {
        matches!(self, Case::Gt2d | Case::Gt3dNs | Case::Cavity)
    }

    pub fn transient(self) -> bool {
        matches!(self, Case::Gt2d | Case::Gt3dStokes | Case::Gt3dNs)
    }

    /// Viscosity for a given Reynolds parameter: the vortex cases fix ν = 1
    /// (Re scales the amplitude instead); the cavity uses ν = 1/Re.
    pub fn viscosity(self, re: f64) -> f64 {
        match self {
            Case::Cavity => 1.0 / re,
            _ => 1.0,
        }
    }

    pub fn has_exact(self) -> bool {
        !matches!(self, Case::Cavity)
    }
}

/// Decaying-vortex velocity at time t with amplitude `re` (ν = 1).
pub fn green_taylor_velocity(x: Point, t: f64, re: f64) -> Point {
    let decay = (-8.0 * PI * PI * t).exp();
    let (sx, cx) = (2.0 * PI * (x[0] + 0.25)).sin_cos();
    let (sy, cy) = (2.0 * PI * (x[1] + 0.5)).sin_cos();
    [-re * cx * sy * decay, re * sx * cy * decay, 0.0]
}

/// Matching pressure (zero mean over the unit square at every t).
pub fn green_taylor_pressure(x: Point, t: f64, re: f64) -> f64 {
    let decay = (-16.0 * PI * PI * t).exp();
    -(re * re / 4.0)
        * ((4.0 * PI * (x[0] + 0.25)).cos() + (4.0 * PI * (x[1] + 0.5)).cos())
        * decay
}

/// Lid velocity field: (1,0,…) on the top boundary (last coordinate = 1),
/// zero on the other walls.
pub fn cavity_velocity(x: Point, dim: usize) -> Point {
    if x[dim - 1] > 1.0 - 1e-12 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0; 3]
    }
}

/// The constant body force of the well-balanced case; its potential is
/// x + 2y (+ 3z).
pub fn constant_force(dim: usize) -> Point {
    if dim == 2 {
        [1.0, 2.0, 0.0]
    } else {
        [1.0, 2.0, 3.0]
    }
}

/// Potential ψ with ∇ψ = constant_force.
pub fn force_potential(x: Point, dim: usize) -> f64 {
    dot(constant_force(dim), x)
}

/// Exact velocity of a case, if it has one.
pub fn exact_velocity(case: Case, x: Point, t: f64, re: f64) -> Option<Point> {
    match case {
        Case::Gt2d | Case::Gt3dStokes | Case::Gt3dNs => {
            Some(green_taylor_velocity(x, t, re))
        }
        Case::ConstantForce => Some([0.0; 3]),
        Case::Cavity => None,
    }
}

/// Exact pressure of a case, if it has one (not gauge-normalized).
pub fn exact_pressure(case: Case, x: Point, t: f64, re: f64, dim: usize) -> Option<f64> {
    match case {
        Case::Gt2d | Case::Gt3dNs => Some(green_taylor_pressure(x, t, re)),
        Case::Gt3dStokes => Some(0.0),
        Case::ConstantForce => Some(force_potential(x, dim)),
        Case::Cavity => None,
    }
}

/// Dirichlet data of a case at time t.
pub fn boundary_values_at(
    case: Case,
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    t: f64,
    re: f64,
) -> BoundaryValues {
    match case {
        Case::Cavity => BoundaryValues::from_fn(mesh, dofmap, |x| cavity_velocity(x, mesh.dim)),
        Case::ConstantForce => BoundaryValues::zero(dofmap),
        _ => BoundaryValues::from_fn(mesh, dofmap, |x| green_taylor_velocity(x, t, re)),
    }
}

/// Cell-averaged body force of a case (the vortex and cavity cases are
/// force-free).
pub fn cell_forces(case: Case, mesh: &SimplicialMesh) -> Vec<Point> {
    match case {
        Case::ConstantForce => {
            let f = constant_force(mesh.dim);
            vec![f; mesh.n_cells()]
        }
        _ => vec![[0.0; 3]; mesh.n_cells()],
    }
}

/// Cell averages of an arbitrary force field (degree-2 exact quadrature).
pub fn cell_forces_of(
    mesh: &SimplicialMesh,
    mut f: impl FnMut(Point) -> Point,
) -> Vec<Point> {
    (0..mesh.n_cells()).map(|k| cell_average_force(mesh, k, &mut f)).collect()
}

/// Discrete L² errors: velocity summed over every (cell, face) incidence with
/// co-volume weights |K|/(d+1), pressure over cells with weights |K| after
/// removing the mean offset (the discrete pressure is defined up to its
/// gauge).
pub fn compute_errors(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    u: &[f64],
    bc: &BoundaryValues,
    p_cells: &[f64],
    mut exact_u: impl FnMut(Point) -> Point,
    mut exact_p: impl FnMut(Point) -> f64,
) -> (f64, f64) {
    let d = mesh.dim;
    let mut err_u = 0.0;
    for k in 0..mesh.n_cells() {
        let w = mesh.volume[k] / (d + 1) as f64;
        for &f in &mesh.cell_faces[k] {
            let ex = exact_u(mesh.face_centroid[f]);
            let base_val = |i: usize| -> f64 {
                if let Some(b) = dofmap.face_vdof[f] {
                    u[b + i]
                } else {
                    bc.0[dofmap.face_bdof[f].unwrap() + i]
                }
            };
            for i in 0..d {
                let dv = base_val(i) - ex[i];
                err_u += w * dv * dv;
            }
        }
    }

    assert_eq!(p_cells.len(), mesh.n_cells());
    let mut vol = 0.0;
    let mut offset = 0.0;
    let dev: Vec<f64> = (0..mesh.n_cells())
        .map(|k| {
            let dv = p_cells[k] - exact_p(mesh.centroid[k]);
            vol += mesh.volume[k];
            offset += mesh.volume[k] * dv;
            dv
        })
        .collect();
    let c = offset / vol;
    let err_p: f64 = dev
        .iter()
        .zip(&mesh.volume)
        .map(|(dv, &v)| v * (dv - c) * (dv - c))
        .sum();
    (err_u.sqrt(), err_p.sqrt())
}

/// Expands the reduced pressure vector (gauge cell omitted) to one value per
/// cell and shifts to zero volume-weighted mean.
pub fn full_pressure(mesh: &SimplicialMesh, dofmap: &DofMap, p: &[f64]) -> Vec<f64> {
    let mut full: Vec<f64> = (0..mesh.n_cells())
        .map(|k| dofmap.cell_pdof[k].map_or(0.0, |j| p[j]))
        .collect();
    let vol: f64 = mesh.volume.iter().sum();
    let mean: f64 =
        full.iter().zip(&mesh.volume).map(|(p, v)| p * v).sum::<f64>() / vol;
    full.iter_mut().for_each(|p| *p -= mean);
    full
}

/// Lumped kinetic energy Σ_{K,σ} (|K|/(d+1))·|U_σ|².
pub fn kinetic_energy(
    mesh: &SimplicialMesh,
    dofmap: &DofMap,
    u: &[f64],
    bc: &BoundaryValues,
) -> f64 {
    let d = mesh.dim;
    let mut e = 0.0;
    for k in 0..mesh.n_cells() {
        let w = mesh.volume[k] / (d + 1) as f64;
        for &f in &mesh.cell_faces[k] {
            for i in 0..d {
                let v = if let Some(b) = dofmap.face_vdof[f] {
                    u[b + i]
                } else {
                    bc.0[dofmap.face_bdof[f].unwrap() + i]
                };
                e += w * v * v;
            }
        }
    }
    e
}
