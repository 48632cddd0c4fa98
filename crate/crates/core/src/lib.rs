//! Numerical laboratory for the Painleve I, II and IV equations: local series,
//! pole-hopping integration, special solutions, Backlund maps, re-scaling
//! limits and pole-field statistics.

pub mod backlund;
pub mod checks;
pub mod eqcore;
pub mod frac;
pub mod integrate;
pub mod localseries;
pub mod polefield;
pub mod rescale;
mod lseries;
pub mod special;

pub use eqcore::{EquationKind, EquationSpec, GammaBranch, Jet, C};
pub use frac::Frac;
