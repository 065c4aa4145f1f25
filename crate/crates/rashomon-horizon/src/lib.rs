//! Horizon-constrained Rashomon sets for chaotic time-series forecasting.
//!
//! The crate builds pools of echo-state-network forecasters over a
//! hyperparameter grid, measures their losses as a function of prediction
//! horizon, and constructs per-horizon Rashomon sets (the models within an
//! adaptive tolerance of the best achievable loss). Chaos makes these sets
//! contract with lead time at a rate tied to the maximum Lyapunov exponent,
//! which the crate estimates with the Rosenstein procedure and validates
//! against a twin-trajectory oracle. A decision layer selects among the
//! near-optimal models by downstream utility instead of forecast error.
//!
//! Modules:
//! - [`dynamics`]: Lorenz-96 and Kuramoto-Sivashinsky generators, CSV
//!   loading, splitting and standardization.
//! - [`reservoir`]: ESN construction, ridge readout training, closed-loop
//!   forecasting, and deterministic pool training over grids.
//! - [`lyapunov`]: delay embedding, Rosenstein divergence curves, and the
//!   twin-trajectory reference estimator.
//! - [`rashomon`]: horizon loss tables, adaptive tolerance schedules, set
//!   construction, and multiplicity diagnostics.
//! - [`decision`]: utility functions, action optimizers, and horizon-aware
//!   decision-aligned model selection with baselines.
//! - [`harness`]: experiment configs, the end-to-end pipeline, and
//!   figure-data reports behind the CLI.
//!
//! Start with the runnable examples (`cargo run --release --example ...`)
//! for one walkthrough per capability.

pub mod decision;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod lyapunov;
pub mod rashomon;
pub mod reservoir;
pub mod seeding;

pub use error::{Error, Result};
