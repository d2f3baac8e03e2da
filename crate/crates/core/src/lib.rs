//! Equilibrium computation for a zero-sum single-controller stochastic game
//! between a border patroller and a smuggler.

pub mod alloc;
pub mod bench;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod evaluation;
pub mod export;
pub mod game;
pub mod presets;
pub mod response;
pub mod shapley;

pub use error::{PatrolError, Result};
