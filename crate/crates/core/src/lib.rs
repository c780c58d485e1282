//! Time-resolved two-photon interference of long single photons at a beam
//! splitter, with a late-bin phase that can be set by the first detection.
//!
//! The crate covers the analytic coincidence densities ([`interference`]),
//! the feedback rule and its controller ([`feedback`]), a Monte Carlo
//! generator of raw click records ([`sim`]) and the pipeline that turns
//! those records back into histograms, matrices and visibilities
//! ([`analysis`]).

pub mod analysis;
pub mod error;
pub mod feedback;
pub mod interference;
pub mod photon;
pub mod quadrature;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use interference::{CoherenceModel, DetectionOutcome, Detector};
pub use photon::{PhaseProfile, PhotonMode, TemporalEnvelope, TimeBin};
pub use scenario::{Scenario, ScenarioKind};
