//! Voltage-actuated piezoelectric beam with magnetic effects: derived wave
//! speeds, eigenstructure, stabilizability classification, finite-difference
//! simulation, the boundary transfer function and observability tests.
//!
//! ```
//! use piezo_core::beam::{classify_stability, derive_constants, BeamParameters};
//!
//! let p = BeamParameters::unit_with_ratio(0.5).unwrap();
//! let dc = derive_constants(&p).unwrap();
//! let report = classify_stability(&dc, p.length, 10_000, 1e-9).unwrap();
//! assert_eq!(report.to_string(), "EXPONENTIALLY_STABLE p=1 q=2 gap=1.1107 Tmin=5.657");
//! ```

pub mod beam;
pub mod error;
pub mod linalg;
pub mod rational;
pub mod spectral;
pub mod timedomain;
pub mod frequency;
pub mod parallel;
pub mod observability;
