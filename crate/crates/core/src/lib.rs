//! Stress-first mixed finite elements for plane linear elasticity.
//!
//! The library discretizes the dual formulation of linear elasticity — stress
//! as the primary unknown, displacement and a scalar rotation acting as
//! Lagrange multipliers — with first-order Raviart-Thomas elements per stress
//! row, discontinuous linears for the displacement and continuous linears for
//! the rotation. The formulation stays bounded in the incompressible limit,
//! where the stress block of the saddle system is only semidefinite.
//!
//! On top of the discretization sit a monolithic patch smoother with
//! selectable local boundary treatment (Neumann with rigid-mode removal,
//! Neumann with zero-average constraints, Dirichlet, and Robin with a
//! diagonal penalty G(alpha)), and a geometric multigrid solver with Galerkin
//! coarse operators, V-cycle and two-grid drivers, and an exact coarsest
//! solve. Benchmark problems (Cook membrane, a multiply-connected "face"
//! domain, a dual Poisson model and manufactured solutions) plus an
//! experiment CLI live in [`problems`] and [`runner`].

pub mod assembly;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod multigrid;
pub mod problems;
pub mod quadrature;
pub mod rng;
pub mod runner;
pub mod smoother;
pub mod spaces;

pub use error::{Error, Result};
