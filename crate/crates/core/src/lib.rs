//! Simulation laboratory for the modified Mike-Farmer order-driven market.
//!
//! The crate generates artificial mid-quote return series from an order book
//! fed by long-memory order flow, estimates their Hurst index with detrended
//! fluctuation analysis, and reduces parameter sweeps to correlations and
//! regressions of the return Hurst index on the order-flow parameters.
//!
//! Module map:
//!
//! * [`stochastic`]: fGn, sign series, Student-t draws, IAAFT surrogates.
//! * [`lob`]: unit-size price-time priority order book on a log-price tick grid.
//! * [`mmf`]: the placement/cancellation loop and mid-quote returns.
//! * [`hurst`]: DFA-1 fluctuation function and Hurst fit.
//! * [`analytics`]: per-cell statistics, Pearson correlations, OLS models.
//! * [`harness`]: sweep configuration, seed derivation, parallel execution,
//!   record files and reports.

pub mod analytics;
pub mod error;
pub mod harness;
pub mod hurst;
pub mod lob;
pub mod mmf;
pub mod rng;
pub mod stochastic;

pub use error::{Error, Result};
