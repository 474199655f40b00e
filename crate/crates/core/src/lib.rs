//! Entropy dissipation, time reversal and the non-intrinsic Bakry–Emery
//! criterion for diffusions, on grids and by Monte Carlo.

pub mod bakry_emery;
pub mod catalog;
pub mod entropy;
pub mod error;
pub mod experiment;
pub mod fokker_planck;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod monte_carlo;

pub use error::{Error, Result};
