//! Crouzeix-Raviart discretization of the transient and steady Stokes and
//! Navier-Stokes equations on simplicial meshes (triangles, tetrahedra), with
//! two exactly equivalent algebraic solution paths:
//!
//! * the coupled velocity-pressure saddle-point system `[A Dᵗ; D 0]`, and
//! * its hybridized counterpart, where per-cell velocity/pressure unknowns are
//!   eliminated exactly and only an interface system `G·Ŵ = S` is solved.
//!
//! The library also carries the sparse direct (LU) and Krylov (CG, BiCGStab,
//! GMRES) solvers with Jacobi and level-of-fill ILU(k) preconditioning used to
//! compare the two paths, plus drivers for manufactured-solution convergence
//! studies, the lid-driven cavity, and solver benchmarks.

pub mod assembly;
pub mod convection;
pub mod dof;
pub mod driver;
pub mod elements;
pub mod geom;
pub mod hybrid;
pub mod mesh;
pub mod problems;
pub mod report;
pub mod solvers;
pub mod sparse;
