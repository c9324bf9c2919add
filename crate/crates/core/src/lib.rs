//! Pricing adjustments computed as expected discounted P&L bleeds.
//!
//! An adjustment `U = V̂ - V` between a base price `V` and a target price `V̂`
//! sharing one state domain is the expectation, under the target dynamics, of
//! the discounted bleed
//!
//! ```text
//! Z = (L̂ - L)V - (R̂ - R)V + (F̂ - F)
//! ```
//!
//! where `L` is the Itô generator, `R` the discount rate and `F` the running
//! payoff. The crate is `no_std` (with `alloc`): everything here is pure
//! numerics. Thread pools, config files and output formats live in the `bleed`
//! companion crate, which plugs into [`exec::Executor`].
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;

pub mod bleed;
pub mod closed_form;
pub mod exec;
pub mod experiments;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod rng;

pub use bleed::{AdjustmentProblem, BleedDecomposition, CashflowSpec, PricingProblem};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use mc::{Estimate, Measure, MonteCarloConfig, PnlPath};
pub use model::{Correlation, CovariationMatrix, GreekBundle, ModelDynamics, StateVector};
