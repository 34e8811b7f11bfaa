//! Solver library for the nonlinear time-fractional Cable equation
//!
//! ```text
//! u_t = -D_t^α u + D_t^β Δu - F(u) + g   on (0,1)² × (0,T],   u = 0 on the boundary
//! ```
//!
//! where `D_t^γ` is the Riemann-Liouville derivative of order `γ ∈ (0,1)`.
//! Time is discretised with the two-step backward difference for `u_t` and the
//! second-order weighted-shifted Grünwald (WSGD) formula for both fractional
//! terms; space uses continuous bilinear (Q1) elements on uniform square meshes.
//!
//! Two fully discrete schemes are provided:
//!
//! - the standard nonlinear scheme, one Newton solve on the fine mesh per step;
//! - the two-grid scheme, which solves the nonlinear problem on a coarse mesh
//!   and then a single linearised problem on the fine mesh.
//!
//! Module map:
//!
//! - [`fracops`]: Grünwald and WSGD weights, history convolution, a quadrature
//!   reference for the Riemann-Liouville derivative.
//! - [`mesh`]: uniform meshes, nested coarse/fine pairs, Q1 functions.
//! - [`sparse`] and [`assembly`]: CSR storage and Q1 finite element assembly.
//! - [`linsolve`]: preconditioned CG, banded direct factorisation, Newton.
//! - [`stepper`]: the two time-marching schemes.
//! - [`problems`]: the manufactured benchmark and convergence studies.
//! - [`cli`]: the command-line front end used by the `cable` binary.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod fracops;
pub mod linsolve;
pub mod mesh;
pub mod problems;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
pub use fracops::{FractionalOrder, WsgdWeights};
pub use mesh::{FeFunction, Mesh2D, Nesting};
pub use sparse::CsrMatrix;
