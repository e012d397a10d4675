//! P1 finite elements: assembly, direct solves, eigenpairs and flux recovery.

pub mod assemble;
pub mod eigen;
pub mod flux;
pub mod ldl;
pub mod sparse;
pub mod trace;

pub use assemble::{apply_dirichlet, assemble, Assembled, ReducedSystem};
pub use eigen::{eigs_smallest_near, EigOptions, EigenPair};
pub use flux::boundary_flux_gamma0;
pub use ldl::{solve_sparse, LdlFactor};
pub use sparse::SparseSymMatrix;
pub use trace::{BoundaryTrace, CosineSeries};
