//! Simulation and spectral analysis of quantum walks on a diagonal band
//! with absorbing (Dirichlet) cuts.

// Index loops mirror the matrix formulas; negated comparisons reject NaN on purpose.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod coin;
pub mod eigen;
pub mod error;
pub mod limits;
pub mod linalg;
pub mod poly;
pub mod spectral;
pub mod walker;

pub use coin::{Coin, CoinBlocks};
pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use walker::{BandField, BandState, ComplexMeasure, Kernel, Oqrw, Qw1d, Stripe, Walk};
