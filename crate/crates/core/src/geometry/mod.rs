//! Set descriptions and the error norm: ellitopes, spectratopes, their base
//! sets, support functions, gauges, and structural validation.

pub mod base;
pub mod ellitope;
pub mod linalg;
pub mod norm;
pub mod spectratope;

pub use base::{BaseSet, BaseSetKind};
pub use ellitope::Ellitope;
pub use norm::ErrorNorm;
pub use spectratope::{arrow, arrow_unit, SpectraBlock, Spectratope};
