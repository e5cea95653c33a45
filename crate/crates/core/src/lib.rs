//! Numerical laboratory for interpolating sequences in Hardy spaces of the
//! unit disc, the unit ball of `ℂ²` and the bidisc.

pub mod bergman;
pub mod error;
pub mod exponent;
pub mod extension;
pub mod geometry;
pub mod holo;
pub mod kernels;
pub mod random_signs;
pub mod sequences;
mod sum;

pub use error::{Error, Result};
pub use exponent::Exponent;
pub use extension::{ExtensionOperator, ExtensionReport, SplitData};
pub use geometry::{BoundarySamples, Domain, InteriorPoint, QuadratureRule};
pub use holo::HoloExpr;
pub use kernels::{NormTable, ShConstants, ShScan};
pub use num_complex::Complex64;
pub use random_signs::{ExpectationEstimate, ExpectationMethod, SignPattern};
pub use sequences::{CarlesonReport, DualSystem, PointSequence};
