//! Robust H-infinity static output feedback synthesis for discrete-time
//! Lipschitz nonlinear systems with norm-bounded time-varying uncertainty.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense matrices and the Kronecker / Hadamard / `vec` operators
//! - [`sdp`]: canonical semidefinite programs and a barrier-method solver
//! - [`system`]: the uncertain plant, its nonlinearity and signal generators
//! - [`synthesis`]: LMI construction, solution and gain recovery
//! - [`robustness`]: norm-wise and element-wise uncertainty bounds
//! - [`simulator`]: closed-loop rollouts, empirical gains, Monte Carlo checks

// `!(x > 0.0)` is used on purpose so that NaN fails the test
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod linalg;
pub mod robustness;
pub mod sdp;
pub mod simulator;
pub mod synthesis;
pub mod system;

pub use linalg::{Matrix, SymmetricMatrix};
