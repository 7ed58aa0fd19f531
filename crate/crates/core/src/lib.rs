//! Molecule-mixture shift keying over cross-reactive receptor arrays.
//!
//! The crate is organised along the signal path:
//!
//! * [`affinity`]: receptor-molecule affinity matrices (random construction,
//!   validation, the published example matrix).
//! * [`channel`]: release, parametric propagation, Poisson arrivals and
//!   thresholded reception.
//! * [`design`]: Monte Carlo dissimilarity metric, molecule allocation and
//!   greedy alphabet construction.
//! * [`recovery`]: convex sparse recovery of mixtures, adaptive refinement,
//!   matched filtering and release-event detection.
//! * [`harness`]: error-probability experiments, traces, PCA and file output.

pub mod affinity;
pub mod channel;
pub mod design;
pub mod error;
pub mod harness;
pub mod poisson;
pub mod recovery;
pub mod rng;

pub use error::{Error, Result};
pub use mmsk_conic::Matrix;
