//! Quadratic Bell inequalities from information causality.
//!
//! Boxes are described by their biases `e^k_{j,i}`; a protocol `(f, h, r)` encodes Alice's
//! box inputs into one message and turns Bob's output into a guess. Each protocol yields a
//! quadratic inequality on the biases, checked against an exact entropic oracle.

pub mod error;
pub mod experiments;
pub mod inequality;
pub mod infotheory;
pub mod nsbox;
pub mod oracle;
pub mod protocol;

pub use error::{Error, Result};
pub use experiments::{Check, ExperimentResult, Provenance, RegionPoint, RegionScan};
pub use inequality::{Evaluation, PhaseConvention, QuadraticInequality};
pub use infotheory::{Channel, InputDistribution};
pub use nsbox::{BiasTable, BoxFile, CollinsGisinTable, NsBox, DEFAULT_TOL};
pub use oracle::{AgreementReport, ICEvaluation, ValidationReport};
pub use protocol::{CoefficientTable, ErrorDistribution, Protocol, SignedCoefficientTable};
