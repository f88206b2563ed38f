//! Spectral-projection finite element solver for semilinear elliptic SPDEs
//!
//! ```text
//!     -Δu = f(u) + Ẇ^Q   in O = (0,1)^d,   u = 0 on ∂O,   d ∈ {1, 2}
//! ```
//!
//! The Gaussian noise is truncated to its first `N` Karhunen–Loève modes in the
//! Dirichlet eigenbasis and the resulting regularised problem is discretised with
//! continuous P1 elements. The [`harness`] module estimates strong errors by
//! coupled Monte Carlo and compares fitted rates with the theoretical ones.
//!
//! Module map:
//!
//! - [`eigenbasis`]: analytic eigenpairs of the Dirichlet Laplacian, Weyl ratios.
//! - [`covariance`]: covariance operators, projected noise sampling, regularity sums.
//! - [`fem`]: meshes, P1 assembly, noise loads, Ritz projection, L² errors.
//! - [`linalg`]: CSR matrices and conjugate gradients.
//! - [`solver`]: spectral Galerkin oracle and the FEM Picard solver.
//! - [`harness`]: Monte Carlo studies, rate prediction, config and report files.

pub mod covariance;
pub mod eigenbasis;
mod error;
pub mod fem;
pub mod harness;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod solver;

pub use covariance::{CovarianceSpec, NoiseSample, RegularityIndex};
pub use eigenbasis::{Domain, EigenBasis, EigenPair};
pub use error::{Error, Result};
pub use fem::{FemFunction, FemSystem, Mesh};
pub use solver::{FemSolution, Nonlinearity, SolverOptions, SpectralSolution};
