//! Driving spin ensembles toward many-body singlets with collective raising
//! and lowering operators.
//!
//! * [`algebra`]: Clebsch-Gordan coefficients, coupled bases over two
//!   bipartitions, collective ladder operators and recoupling overlaps.
//! * [`theory`]: checks of the transfer-ratio identity and selection rules,
//!   the steady-state recursion and the closed-form singlet bounds.
//! * [`dynamics`]: Lindblad integration, population rate equations, sector
//!   steady states and the alternating squeezing protocol.
//! * [`lattice`]: hyperfine couplings of a confined electron, coordination
//!   shells, ac-coupling decompositions and polarization-rate budgets.

pub mod algebra;
pub mod dynamics;
mod error;
mod halfint;
pub mod lattice;
pub mod presets;
pub mod theory;

pub use error::{Error, Result};
pub use halfint::HalfInt;
