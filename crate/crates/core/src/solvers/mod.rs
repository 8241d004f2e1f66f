pub mod dense;
pub mod eigen;
pub mod poisson;
pub mod spd;

pub use dense::{dense_eigen_oracle, dense_pencil_eigenvalues};
pub use eigen::{solve_eigen, solve_eigen_system, EigenOptions, EigenPairSet};
pub use poisson::{solve_poisson, solve_poisson_system};
pub use spd::{solve_spd, SparseCholesky, StiffnessFactor};
