//! Concurrence of multipartite pure states, end to end: reference oracles,
//! automatic decomposition of the squared concurrence into a real quadratic
//! form over local-observable expectation values, single-copy few-setting
//! shot simulation with preparation noise, and an audit ledger that
//! adjudicates every closed-form shortcut against the oracles.
//!
//! Conventions, fixed once for the whole crate:
//! - amplitude vectors are basis-ordered with the last site varying fastest;
//! - the canonical squared concurrence is the purity form
//!   ([`concurrence::c2_purity`]); every other engine or printed formula is
//!   related to it by a measured calibration constant;
//! - minor sums count each unordered bipartition and each unordered
//!   row/column pair once.

pub mod audit;
pub mod concurrence;
pub mod decomposer;
pub mod error;
pub mod genbasis;
pub mod quadform;
pub mod shotsim;
pub mod statevec;
mod tensor;

pub use error::{Error, Result};
pub use genbasis::ObservableLabel;
pub use quadform::{MeasurementSetting, QuadraticForm};
pub use statevec::{DensityMatrix, PureState, SiteSubset};
