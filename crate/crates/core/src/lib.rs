//! Self-expanders of mean curvature flow in rotational symmetry: shooting
//! solvers, weighted stability analysis, graphical and level-set expander
//! flows, and the unstable-to-stable flow line pipeline built from them.

pub mod error;
pub mod expanders;
pub mod geometry;
pub mod graphical;
pub mod levelset;
pub mod linalg;
pub mod morse;
pub mod ode;
pub mod report;
pub mod spectral;
pub mod stencil;

pub use error::{Error, Result};
