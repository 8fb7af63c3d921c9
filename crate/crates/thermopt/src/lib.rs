//! Work-maximizing thermodynamic processes on gas state manifolds.
//!
//! The library covers the full pipeline: maximum-entropy measurement of
//! discrete random vectors (`maxent`), Legendrian/Lagrangian geometry of
//! gas states (`gas`), the Pontryagin control problem and its reduced
//! Hamiltonian (`control`), the canonical flow, work functional and
//! shooting solver (`dynamics`), the action-angle solution on invariant
//! manifolds (`angles`), first-order virial perturbation of the integrable
//! structure (`virial`), and a declarative scenario runner (`scenario`).

pub mod angles;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod gas;
pub mod maxent;
pub mod numeric;
pub mod scenario;
pub mod virial;

pub use control::{ControlBudget, ControlVector, PhasePoint};
pub use error::{Error, Result};
pub use gas::{GasKind, GasSpec, StatePoint};
