//! Bayesian Nash equilibria in threshold strategies for global games with
//! Poisson private observations.
//!
//! `N` agents observe `Y_i ~ Poisson(λΘ)` of a common fundamental `Θ` and
//! choose whether to activate; activating pays `Σ_{j≠i} a_j - Θ`. The fundamental
//! has either a binary prior or the improper uniform prior on `θ > 0`.
//!
//! - [`model`]: game parameters, thresholds and profiles.
//! - [`beliefs`]: `φ(k)`, `π_ij(k)` and `π_i(k)` in numerically stable form.
//! - [`best_response`]: single-crossing search for best-response thresholds.
//! - [`equilibrium`]: existence conditions, best-response dynamics, multiplicity runs.
//! - [`payoff`]: exact and Monte-Carlo payoffs and deviation checks.
//! - [`cli`]: the `pgg` command-line front end.

pub mod beliefs;
pub mod best_response;
pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod payoff;

pub use error::{Error, Result};
pub use model::{Action, GameParams, PriorSpec, Threshold, ThresholdProfile};
