//! Finite-element plumbing: meshes, assembly, sparse SPD solves and the
//! mass-weighted inner-product algebra.

pub mod assembly;
pub mod mesh;
pub mod mspace;
pub mod solve;
pub mod sparse;
pub mod theta;

pub use assembly::{assemble_mass, assemble_prior_stiffness, assemble_stiffness};
pub use mesh::{BasisEval, Mesh};
pub use mspace::{adjoint_apply, MSpace, MatrixOperator, OperatorShape, SqrtPower};
pub use solve::{solve_spd, FactoredMatrix, SpdSolver, DEFAULT_SOLVE_TOL};
pub use sparse::SparseSymMatrix;
pub use theta::{theta_radial_eval, ThetaSpec};
