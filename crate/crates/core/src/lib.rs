//! Two-price equilibria in combinatorial markets: verification, slope
//! geometry for valuations over identical items, constructive allocation
//! algorithms with discrepancy guarantees, and transformations to and from
//! other equilibrium notions. All arithmetic is exact rational.

pub mod allocation;
pub mod auction;
pub mod endowment;
pub mod equilibrium;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linprog;
pub mod rational;
pub mod valuation;

pub use error::{Error, Result};
pub use rational::Rat;
