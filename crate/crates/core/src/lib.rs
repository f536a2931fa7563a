//! Thermodynamic formalism for countable Markov shifts: Gurevich pressure,
//! entropy gaps, orbit counting with equidistribution, Manhattan curves and
//! roof functions of cusped Anosov representations.

pub mod cli;
pub mod config;
pub mod counting;
pub mod error;
pub mod fuchsian;
pub mod manhattan;
pub mod potential;
pub mod shift;
pub mod thermo;

pub use error::{Error, Result};
