//! Merton-style optimal investment when price jumps may be announced by a
//! signal.
//!
//! * [`model`]: parameters, jump/signal models and the disintegrated kernel.
//! * [`quad`]: Gauss–Hermite, Gauss–Legendre panel and finite-law
//!   expectations.
//! * [`policy`]: admissible intervals, optimal fractions, growth constant and
//!   value function.
//! * [`simulate`]: exact event-driven Monte Carlo of stock, signals and wealth.
//! * [`verify`]: HJB residuals, drift checks and brute-force oracles.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod par;
pub mod policy;
pub mod quad;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    AdmissibleInterval, Atom, Config, DisintegratedKernel, JumpSignalModel, MarketParams, PolicyField,
    Preferences, Signal,
};
pub use policy::{GrowthReport, Numerics, Solver};
