//! Axisymmetric level-set engine for the expander flow of closed sets.
//!
//! The set is {phi <= 0} on a uniform (r, z) grid with the axis handled by
//! even reflection and the outer frame held fixed. The speed is
//! phi_t = |grad phi| kappa + (x . grad phi)/2, where kappa includes the
//! rotational term (n-1) phi_r / (r |grad phi|) (its limit n phi_rr at the
//! axis). A ball of radius rho then obeys rho' = -n/rho - rho/2.

mod checks;
mod contour;
mod evolve;
mod field;
mod io;
mod reinit;

pub use checks::*;
pub use contour::*;
pub use evolve::{components, evolve, normal_speed, stable_dt, Event, EventKind, EvolveOptions, LevelSetEvolution};
pub use field::{init_from_domain, Grid, LevelSetField, Shape, Side, CLAMP_CELLS};
pub use io::{read_field, write_contours, write_events, write_field, FieldHeader};
pub use reinit::{redistance, reinitialize, relax};

#[cfg(test)]
mod tests;
