//! Complex-demand knapsack: exact oracle, polygon PTAS, bi-criteria FPTAS and
//! truthful maximal-in-range mechanisms with VCG payments.

pub mod cli;
pub mod error;
pub mod fptas;
pub mod gen;
pub mod geometry;
pub mod io;
pub mod mdkp;
pub mod mechanism;
pub mod model;
pub mod num;
pub mod oracle;
pub mod ptas;

pub use error::{Error, Result};
pub use num::{Epsilon, Rational};
