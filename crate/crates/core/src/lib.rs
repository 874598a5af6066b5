//! Distances between finite geometric data sets.
//!
//! A geometric data set is a finite probability space together with a finite
//! family of real features; the family induces a pseudometric
//! `d_F(x, y) = max_f |f(x) - f(y)|`. This crate computes
//! concentration-type distances between such data sets (the
//! observable distance `dconc` and the box distance) together with the
//! Ky Fan and Prohorov metrics, partial and observable diameters, and the
//! order relations of domination and isomorphism.
//!
//! All solvers are generic over [`Scalar`], with an exact [`Rational`]
//! backend and an `f64` backend.

pub mod boxdist;
pub mod cells;
pub mod constructions;
pub mod coupling;
pub mod error;
pub mod exec;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod observable;
pub mod order;
pub mod scalar;
pub mod verify;

pub use cells::CellSet;
pub use coupling::Coupling;
pub use error::{Error, Result};
pub use exec::{Budget, Exec};
pub use matrix::Matrix;
pub use model::{DiscreteMeasure, FeatureFamily, GeometricDataSet, MmSpace};
pub use scalar::{NumericMode, Rational, Scalar};
