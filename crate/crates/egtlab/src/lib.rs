//! Evolutionary game theory laboratory.
//!
//! The crate builds two-player matrix games and solves their static
//! equilibria ([`games`]), evolves populations under replicator and Moran
//! dynamics with assortative matching ([`dynamics`]), runs the noisy
//! iterated prisoner's dilemma with costly apology and partially reliable
//! guilt signals ([`repeated`]), estimates basins of attraction by Monte
//! Carlo over the simplex ([`basins`]), and simulates local interaction on
//! rings and grids ([`spatial`]).
//!
//! Every stochastic entry point takes an explicit 64-bit seed and draws
//! from a portable generator (see [`rng`]), so identical inputs give
//! identical results on any platform and any thread count.

pub mod basins;
pub mod dynamics;
pub mod error;
pub mod games;
pub mod repeated;
pub mod rng;
pub mod spatial;

pub use error::{Error, Result};
