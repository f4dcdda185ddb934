//! Stochastic gradient descent under heavy-tailed gradient noise.
//!
//! The crate is organized around one experiment pipeline:
//!
//! * [`stable`] — univariate α-stable and Pareto samplers, tail-index
//!   estimation, and distributional test statistics,
//! * [`ppd`] — the p-positive-definite matrix cone: signed powers, membership
//!   margins on ℓ_p spheres, and cone classification,
//! * [`sgd`] — the stochastic approximation recursion with Polyak–Ruppert
//!   averaging, checkpointed traces, and replicated Monte-Carlo runs,
//! * [`models`] — streaming gradient oracles (online least squares and
//!   ridge-regularized GLMs) with their exact noise decompositions,
//! * [`analysis`] — moment curves, log-log rate fits, stable-limit
//!   diagnostics, and standalone numerical oracles for the inequalities and
//!   limits the convergence theory rests on,
//! * [`experiment`] — config-driven orchestration: resolve a config, run
//!   replications, analyze, and persist reproducible run directories.

pub mod analysis;
pub mod experiment;
pub mod models;
pub mod ppd;
pub mod rng;
pub mod sgd;
pub mod stable;
mod stats;

pub use rng::RngStream;
