//! Multiobjective proximal gradient method for composite problems
//! `min F(x) = (f_1(x) + g_1(x), ..., f_m(x) + g_m(x))`, where each `f_i` is smooth with a
//! Lipschitz gradient and each `g_i` is closed, proper and convex.
//!
//! The crate is organized around a handful of runtime-selectable strategy families:
//!
//! - [`problem`]: the problem model, smooth kernels and nonsmooth terms, each registered by
//!   name so problems can be built from declarative descriptions.
//! - [`subproblem`]: the direction subproblem `min_d psi_x(d) + (l/2)|d|^2`; every solver
//!   path implements [`subproblem::DirectionSolver`] and is picked from a registry.
//! - [`merit`]: the merit functions `w_l` and `u_0` and the inequalities that relate them.
//! - [`algorithm`]: the iteration `x^{k+1} = x^k + d^k` with fixed or adaptive `l`.
//! - [`problems`]: benchmark families with analytic ground truth.
//! - [`rates`]: global convergence-rate bound checks against run traces.

pub mod algorithm;
pub mod error;
pub mod extreal;
pub mod linalg;
pub mod merit;
pub mod problem;
pub mod problems;
pub mod rates;
pub mod subproblem;

pub use error::{Error, Result};
pub use problem::{evaluate_objectives, validate_problem, ProblemSpec};
