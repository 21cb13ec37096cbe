//! Effective Hamiltonians and projected Mather measures on the torus.
//!
//! The entropy-penalized stationary system is discretized with a monotone
//! upwind scheme and solved either by integrating a Hessian Riemannian flow
//! ([`hrf`]) or by a regularized Newton iteration ([`newton`]). Analytic
//! references for the pendulum family live in [`analytic`]; error metrics
//! and the Lyapunov functional in [`diagnostics`]; experiment drivers
//! behind the `effham` binary in [`cli`].

pub mod analytic;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod hrf;
pub mod linalg;
pub mod newton;
pub mod ode;
pub mod operators;
pub mod par;

pub use error::{Error, Result};
pub use grid::TorusGrid;
pub use hamiltonian::{DiscreteState, HamiltonianSpec, Potential};
pub use hrf::{default_initial, integrate_hrf, integrate_hrf_until, FlowConfig, Trajectory};
pub use newton::{newton_solve, newton_step, NewtonConfig, SolveResult};
pub use operators::{LogState, PenalizedParams, Problem};
pub use par::Execution;
