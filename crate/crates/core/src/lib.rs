//! Fair learning with uncertain sensitive attributes.
//!
//! * [`gaussian`], [`linalg`]: covariance algebra, canonical correlations, D̄ divergence.
//! * [`qcqp`]: the Gaussian fairness QCQP, closed form and scan oracle.
//! * [`robust`]: robust QCQPs over annular-sector uncertainty sets.
//! * [`metrics`]: χ² fairness penalties, parity gaps.
//! * [`nn`], [`trainer`]: a small MLP and Bootstrap-S Lagrangian training.
//! * [`datasets`]: presets, sampling, uncertainty injection, CSV ingestion.
//! * [`experiment`]: seeded, config-driven experiment runs and table output.

pub mod datasets;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod qcqp;
pub mod robust;
pub mod trainer;

pub use error::{Error, Result};
