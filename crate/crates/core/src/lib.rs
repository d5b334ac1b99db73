//! Numerical verification of codimension-2 CR-structures on the slit
//! tangent bundle of a Finsler manifold.

pub mod adapted;
pub mod connection;
pub mod deformed;
pub mod error;
pub mod framed;
pub mod geometry;
pub mod jets;
pub mod nijenhuis;
pub mod point;
pub mod report;
pub mod suite;
pub mod tensor;

pub use error::{Error, JetError, Result};
pub use geometry::{FinslerSpec, Family};
pub use point::PhasePoint;
pub use report::{CheckRecord, CheckReport, Outcome};
