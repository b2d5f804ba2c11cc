//! Unambiguous comparison of sharp non-degenerate quantum measurements.
//!
//! The crate is layered bottom-up:
//!
//! - [`tensor`]: dense operators on `(C^d)^{⊗n}`, Kronecker products, rank
//!   and support projectors.
//! - [`symmetry`]: swaps, symmetrizers and explicit four-qubit bases.
//! - [`haar`]: analytic Haar moment operators and seeded Haar sampling.
//! - [`comparison`]: outcome-class operators under both hypotheses,
//!   no-error subspaces, optimal test states and analytic success rates.
//! - [`protocol`]: shot-level simulation and reproducible campaigns.
//! - [`verify`]: the table of closed-form identities checked by `qmeter verify`.

pub mod comparison;
pub mod error;
pub mod haar;
pub mod protocol;
pub mod symmetry;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::{kron, rank, support_projector, Operator, StateVector, C64, TOL_ABS, TOL_RANK};
