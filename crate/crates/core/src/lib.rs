//! Stable arrangements for many-to-one matching markets with transfers and
//! hiring quotas.
//!
//! Workers each join at most one firm; firms hire sets of workers subject to
//! lower and upper quotas on subsets, and pay salaries. The crate computes
//! stable arrangements through the dual of the assignment linear program,
//! checks stability and efficiency of arbitrary arrangements, builds the
//! direct single-firm solution, and classifies quota families. All arithmetic
//! is exact.

pub mod assignment_lp;
pub mod certificate;
pub mod constraints;
pub mod error;
pub mod fixtures;
pub mod lp;
pub mod model;
pub mod one_firm;
pub mod par;
pub mod rational;
pub mod stability;
pub mod workerset;

pub use error::{Error, Result};
pub use model::{
    parse_instance, serialize_instance, Arrangement, Assignment, ConstraintFamily, FirmId, MarketInstance, PayoffVector,
    PreferenceMode, QuotaEntry, WorkerId,
};
pub use par::Execution;
pub use rational::Rational;
pub use workerset::WorkerSet;
