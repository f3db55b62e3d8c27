//! Degree-of-freedom numbering.
//!
//! Velocity unknowns live at interior face centroids, one per component:
//! global index = d·(rank of the face among interior faces) + component, so
//! the ordering is face-major, component-minor. Boundary faces get Dirichlet
//! slots with the same component layout. Pressures are one per cell except
//! the gauge cell K₀, whose pressure is pinned to zero.
//!
//! Per cell, local blocks order the d+1 faces by ascending global face index
//! with components innermost; this fixes every local matrix layout.

use crate::mesh::SimplicialMesh;

#[derive(Debug, thiserror::Error)]
pub enum DofError {
    #[error("cell {cell} has no interior face; its divergence constraint has no unknowns")]
    IsolatedCell { cell: usize },
    #[error("gauge cell {gauge} out of range ({n_cells} cells)")]
    BadGaugeCell { gauge: usize, n_cells: usize },
}

/// Where a local (face, component) slot lands globally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotDof {
    /// Base velocity DOF of an interior face; component i lives at base + i.
    Velocity(usize),
    /// Base Dirichlet slot of a boundary face; component i at base + i.
    Dirichlet(usize),
}

/// Local DOF layout of one cell: faces sorted by global face index.
#[derive(Debug, Clone)]
pub struct CellDofs {
    /// The d+1 face indices, ascending.
    pub faces: Vec<usize>,
    /// For each local face, its slot in `mesh.cell_faces[k]` (to look up
    /// area vectors and opposite vertices).
    pub mesh_slot: Vec<usize>,
    /// Global destination of each local face.
    pub slot_dof: Vec<SlotDof>,
    /// Positions (into `faces`) of the interior faces, ascending.
    pub int_slots: Vec<usize>,
    /// Global velocity DOF of each interior-restricted local unknown, in
    /// (face-major, component-minor) order; length d·s_K.
    pub loc2glob: Vec<usize>,
}

impl CellDofs {
    pub fn s_k(&self) -> usize {
        self.int_slots.len()
    }
}

/// Global numbering for one mesh and gauge cell.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub dim: usize,
    /// d · #interior faces.
    pub n_vdofs: usize,
    /// #cells − 1.
    pub n_pdofs: usize,
    /// d · #boundary faces.
    pub n_bdofs: usize,
    pub gauge_cell: usize,
    /// Base velocity DOF per face (interior faces only).
    pub face_vdof: Vec<Option<usize>>,
    /// Base Dirichlet slot per face (boundary faces only).
    pub face_bdof: Vec<Option<usize>>,
    /// Pressure DOF per cell; `None` exactly for the gauge cell.
    pub cell_pdof: Vec<Option<usize>>,
    pub cells: Vec<CellDofs>,
}

impl DofMap {
    pub fn build(mesh: &SimplicialMesh, gauge_cell: usize) -> Result<DofMap, DofError> {
        let d = mesh.dim;
        let nc = mesh.n_cells();
        if gauge_cell >= nc {
            return Err(DofError::BadGaugeCell { gauge: gauge_cell, n_cells: nc });
        }

        let mut face_vdof = vec![None; mesh.n_faces()];
        let mut face_bdof = vec![None; mesh.n_faces()];
        let mut n_vdofs = 0;
        let mut n_bdofs = 0;
        // Faces are already globally ordered; ranks follow face index.
        for f in 0..mesh.n_faces() {
            if mesh.is_boundary_face(f) {
                face_bdof[f] = Some(n_bdofs);
                n_bdofs += d;
            } else {
                face_vdof[f] = Some(n_vdofs);
                n_vdofs += d;
            }
        }

        let mut cell_pdof = vec![None; nc];
        let mut next_p = 0;
        for k in 0..nc {
            if k != gauge_cell {
                cell_pdof[k] = Some(next_p);
                next_p += 1;
            }
        }

        let mut cells = Vec::with_capacity(nc);
        for k in 0..nc {
            let mut faces = mesh.cell_faces[k].clone();
            faces.sort_unstable();
            let mesh_slot: Vec<usize> =
                faces.iter().map(|&f| mesh.local_slot(k, f)).collect();
            let mut slot_dof = Vec::with_capacity(d + 1);
            let mut int_slots = Vec::new();
            let mut loc2glob = Vec::new();
            for (p, &f) in faces.iter().enumerate() {
                if let Some(base) = face_vdof[f] {
                    slot_dof.push(SlotDof::Velocity(base));
                    int_slots.push(p);
                    loc2glob.extend((0..d).map(|i| base + i));
                } else {
                    slot_dof.push(SlotDof::Dirichlet(face_bdof[f].unwrap()));
                }
            }
            if int_slots.is_empty() && nc > 1 {
                return Err(DofError::IsolatedCell { cell: k });
            }
            cells.push(CellDofs { faces, mesh_slot, slot_dof, int_slots, loc2glob });
        }

        Ok(DofMap {
            dim: d,
            n_vdofs,
            n_pdofs: nc - 1,
            n_bdofs,
            gauge_cell,
            face_vdof,
            face_bdof,
            cell_pdof,
            cells,
        })
    }

    /// Total unknown count of the coupled system.
    pub fn n_coupled(&self) -> usize {
        self.n_vdofs + self.n_pdofs
    }
}

/// Dirichlet values at boundary-face centroids, component-interleaved like
/// the velocity DOFs (base slot + component).
#[derive(Debug, Clone)]
pub struct BoundaryValues(pub Vec<f64>);

impl BoundaryValues {
    pub fn zero(dofmap: &DofMap) -> Self {
        BoundaryValues(vec![0.0; dofmap.n_bdofs])
    }

    /// Fills from a velocity field evaluated at boundary-face centroids.
    pub fn from_fn(
        mesh: &SimplicialMesh,
        dofmap: &DofMap,
        mut velocity: impl FnMut([f64; 3]) -> [f64; 3],
    ) -> Self {
        let mut vals = vec![0.0; dofmap.n_bdofs];
        for f in 0..mesh.n_faces() {
            if let Some(base) = dofmap.face_bdof[f] {
                let u = velocity(mesh.face_centroid[f]);
                for i in 0..dofmap.dim {
                    vals[base + i] = u[i];
                }
            }
        }
        BoundaryValues(vals)
    }
}
