//! Multi-period AC optimal power flow with storage and electric vehicles.
//!
//! The crate is organised bottom-up:
//!
//! * [`sparse`]: CSC matrices, AMD ordering, sparse LU and symmetric
//!   indefinite LDLᵀ.
//! * [`case`]: case data, the JSON case format, built-in and synthetic
//!   networks, load profiles, storage placement and the EV generator.
//! * [`network`]: π-model admittances, injections, branch flows and their
//!   first and second derivatives in polar coordinates.
//! * [`formulation`]: variable and constraint layout of the stacked
//!   multi-period problem, objective and constraint evaluation.
//! * [`derivatives`]: Jacobians, the Lagrangian Hessian and finite
//!   difference oracles.
//! * [`kkt`]: the arrowhead reordering of the Newton system, the Schur
//!   complement backend and the direct sparse LU backend.
//! * [`ipm`]: the primal-dual interior point loop.
//! * [`bench`]: benchmark records, sweeps, CSV and SVG output.

pub mod bench;
pub mod case;
pub mod derivatives;
pub mod error;
pub mod formulation;
pub mod ipm;
pub mod kkt;
pub mod network;
pub mod par;
pub mod sparse;

pub use error::{CaseError, EvError, KktError, SolveError, SparseError};
