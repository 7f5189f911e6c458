//! Max-min-fair allocation of a shared resource pool over time.
//!
//! Users arrive with per-epoch Leontief demands (a ratio vector over resources
//! plus a demand cap on the dominant resource). Each epoch, the allocator runs
//! progressive filling on *cumulative* weighted allocations, so users who got
//! less in the past are favored now. Everything is computed in exact rational
//! arithmetic; results are bit-reproducible across runs and thread counts.
//!
//! Modules:
//! - [`model`]: scenario data, validation, capacity normalization, report profiles
//! - [`allocator`]: the single-epoch water-filling solver and its optimality certificate
//! - [`engine`]: multi-epoch simulation, utilities under misreports, CSV export
//! - [`strategy`]: deviation search, incentive ratios, overtake-interval analysis
//! - [`instances`]: hand-crafted adversarial instance generators and random scenarios
//! - [`properties`]: envy-freeness, sharing incentives, Pareto and bound checks

pub mod allocator;
pub mod engine;
pub mod instances;
pub mod model;
pub mod properties;
pub mod rational;
pub mod strategy;

pub use rational::Rational;
