use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::feedback_outcome_distribution;
use crate::interference::{
    timebin_output_distribution, CoherenceModel, JointDensity, OutcomeDistribution, PhaseControl,
};
use crate::photon::{PhaseProfile, PhotonMode, TemporalEnvelope, DEFAULT_PHOTON_LENGTH};

/// The four measured configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// (a) perpendicular polarizations, the non-interfering reference.
    Perpendicular,
    /// (b) parallel, identical photons.
    ParallelPhi0,
    /// (c) parallel with a π step between the halves of photon B.
    ParallelPhiPi,
    /// (d) parallel with the late phase chosen by the first click.
    Feedback,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Perpendicular,
        ScenarioKind::ParallelPhi0,
        ScenarioKind::ParallelPhiPi,
        ScenarioKind::Feedback,
    ];

    pub fn label(self) -> char {
        match self {
            ScenarioKind::Perpendicular => 'a',
            ScenarioKind::ParallelPhi0 => 'b',
            ScenarioKind::ParallelPhiPi => 'c',
            ScenarioKind::Feedback => 'd',
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "perpendicular" => Ok(ScenarioKind::Perpendicular),
            "b" | "phi0" | "parallel-phi0" => Ok(ScenarioKind::ParallelPhi0),
            "c" | "phipi" | "parallel-phipi" => Ok(ScenarioKind::ParallelPhiPi),
            "d" | "feedback" => Ok(ScenarioKind::Feedback),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected a|b|c|d)"
            ))),
        }
    }
}

/// One experiment configuration with its coherence and photon length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Late-bin phase of photon B for the static kinds.
    pub phi: f64,
    pub coherence: CoherenceModel,
    pub photon_length: f64,
}

impl Scenario {
    pub fn new(kind: ScenarioKind, coherence: CoherenceModel, photon_length: f64) -> Result<Self> {
        if !(photon_length.is_finite() && photon_length > 0.0) {
            return Err(Error::Config(format!(
                "photon length must be positive, got {photon_length}"
            )));
        }
        let phi = match kind {
            ScenarioKind::ParallelPhiPi => PI,
            _ => 0.0,
        };
        Ok(Self {
            kind,
            phi,
            coherence,
            photon_length,
        })
    }

    pub fn ideal(kind: ScenarioKind) -> Self {
        Self::new(kind, CoherenceModel::IDEAL, DEFAULT_PHOTON_LENGTH).unwrap()
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    /// Relative polarization angle.
    pub fn theta(&self) -> f64 {
        match self.kind {
            ScenarioKind::Perpendicular => FRAC_PI_2,
            _ => 0.0,
        }
    }

    pub fn envelope(&self) -> TemporalEnvelope {
        TemporalEnvelope::sin_squared(self.photon_length).expect("validated photon length")
    }

    /// Photon A (flat phase) and photon B (step to `phi`, or flat under feedback).
    pub fn modes(&self) -> (PhotonMode, PhotonMode) {
        let env = self.envelope();
        let phase_b = match self.kind {
            ScenarioKind::Feedback => PhaseProfile::flat(),
            _ => PhaseProfile::step(self.phi),
        };
        (
            PhotonMode::new(env.clone(), PhaseProfile::flat(), 0.0),
            PhotonMode::new(env, phase_b, self.theta()),
        )
    }

    pub fn phase_control(&self, latency: f64) -> PhaseControl {
        match self.kind {
            ScenarioKind::Feedback => PhaseControl::Feedback { latency },
            _ => PhaseControl::Static,
        }
    }

    /// Continuous densities; `latency` only matters under feedback.
    pub fn joint_density(&self, latency: f64) -> Result<JointDensity> {
        let (a, b) = self.modes();
        JointDensity::new(
            a,
            b,
            self.theta(),
            self.coherence,
            self.phase_control(latency),
        )
    }

    /// Time-bin outcome probabilities (ideal zero-latency rule under feedback).
    pub fn outcome_distribution(&self) -> OutcomeDistribution {
        match self.kind {
            ScenarioKind::Feedback => feedback_outcome_distribution(self.coherence),
            _ => timebin_output_distribution(self.phi, self.theta(), self.coherence),
        }
    }
}
