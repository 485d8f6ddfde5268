//! Exact periodic-point lattices, recurrence-set geometry and Hausdorff
//! dimension formulas for integer toral endomorphisms `x -> Ax mod 1`.

pub mod cantor_mass;
pub mod conjugacy;
pub mod error;
pub mod exact_linalg;
pub mod fgeom;
pub mod interval;
pub mod par;
pub mod periodic_lattice;
pub mod recurrence_geometry;
pub mod serde_util;
pub mod spectrum_dim;
pub mod torus;

pub use error::{Error, Result};
pub use exact_linalg::{eigen_moduli, IntegerMatrix, RationalMatrix};
pub use par::Exec;
pub use spectrum_dim::{Alpha, DimLabel, DimensionResult, RateFunction, Spectrum};
