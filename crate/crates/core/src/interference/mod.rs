//! Two-photon interference at a 50:50 beam splitter.
//!
//! [`density`] evaluates the continuous joint-detection densities for two
//! wavepackets with stepwise phases; [`timebin`] treats each half of the
//! photon as a discrete mode and expands the input state through the beam
//! splitter to get outcome probabilities over detector × time-bin pairs.

pub mod density;
pub mod timebin;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photon::TimeBin;

pub use density::{pjoint_t0_tau, psame_t0_tau, JointDensity, JointDensityCurve, PhaseControl};
pub use timebin::{
    conditional_second_bin, timebin_output_distribution, OutcomeDistribution, OutcomePair,
    SecondBinDistribution,
};

/// Beam-splitter output port / detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    C,
    D,
}

impl Detector {
    pub const ALL: [Detector; 2] = [Detector::C, Detector::D];

    pub fn other(self) -> Detector {
        match self {
            Detector::C => Detector::D,
            Detector::D => Detector::C,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Detector::C => 0,
            Detector::D => 1,
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detector::C => "C",
            Detector::D => "D",
        })
    }
}

/// A click at one detector in one time bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub detector: Detector,
    pub bin: TimeBin,
}

impl DetectionOutcome {
    pub const C1: Self = Self::new(Detector::C, TimeBin::I1);
    pub const C2: Self = Self::new(Detector::C, TimeBin::I2);
    pub const D1: Self = Self::new(Detector::D, TimeBin::I1);
    pub const D2: Self = Self::new(Detector::D, TimeBin::I2);
    pub const ALL: [Self; 4] = [Self::C1, Self::C2, Self::D1, Self::D2];

    pub const fn new(detector: Detector, bin: TimeBin) -> Self {
        Self { detector, bin }
    }

    /// Index in the order C1, C2, D1, D2.
    pub fn index(self) -> usize {
        2 * self.detector.index() + self.bin.index()
    }
}

impl fmt::Display for DetectionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bin = match self.bin {
            TimeBin::I1 => 1,
            TimeBin::I2 => 2,
        };
        write!(f, "{}{}", self.detector, bin)
    }
}

/// Mutual coherence `μ ∈ [0, 1]` scaling the two-photon interference term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceModel(f64);

impl CoherenceModel {
    pub const IDEAL: CoherenceModel = CoherenceModel(1.0);

    pub fn new(mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::Domain(format!(
                "mutual coherence must lie in [0, 1], got {mu}"
            )));
        }
        Ok(Self(mu))
    }

    pub fn mu(self) -> f64 {
        self.0
    }
}

impl Default for CoherenceModel {
    fn default() -> Self {
        Self::IDEAL
    }
}
