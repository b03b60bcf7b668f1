//! Optimal matching distance between probability measures, explicit
//! transport homeomorphisms, and unitary orbit distances of normal matrices.

pub mod circle;
pub mod convex;
pub mod error;
pub mod interval;
pub mod io;
pub mod matching;
pub mod measure;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
pub use matching::{DistanceMatrix, Matching};
pub use measure::{CdfMeasure, EmpiricalMeasure, Space};
pub use report::{Certificate, Relation};
pub use spectral::{MatrixClass, NormalMatrix};
