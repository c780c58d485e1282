//! Sampling of one two-photon event at the beam splitter.
//!
//! Static scenarios draw a bin-pair outcome from the time-bin distribution
//! and then independent times inside each bin. With identical envelopes and
//! stepwise phases the joint density factorizes this way exactly. Under
//! feedback the first click is drawn first, the controller reacts, and the
//! second detector follows from the conditional distribution at the phase
//! that is in effect when the second photon arrives.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::feedback::FeedbackController;
use crate::interference::{
    timebin_output_distribution, CoherenceModel, DetectionOutcome, Detector, OutcomeDistribution,
    OutcomePair, SecondBinDistribution,
};
use crate::photon::{TemporalEnvelope, TimeBin};
use crate::scenario::{Scenario, ScenarioKind};

/// Precomputed distributions for one scenario.
#[derive(Debug, Clone)]
pub struct PairSampler {
    kind: ScenarioKind,
    envelope: TemporalEnvelope,
    /// Probability of drawing from the coherent component.
    coherent_weight: f64,
    coherent: Categorical,
    distinguishable: Categorical,
    unswitched: OutcomeDistribution,
    switched: OutcomeDistribution,
}

#[derive(Debug, Clone)]
struct Categorical {
    pairs: Vec<OutcomePair>,
    cumulative: Vec<f64>,
}

impl Categorical {
    fn new(dist: &OutcomeDistribution) -> Self {
        let mut acc = 0.0;
        let (pairs, cumulative) = dist
            .iter()
            .map(|(p, w)| {
                acc += w;
                (p, acc)
            })
            .unzip();
        Self { pairs, cumulative }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> OutcomePair {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.pairs[i.min(self.pairs.len() - 1)]
    }
}

/// One registered-or-not photon click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonClick {
    pub outcome: DetectionOutcome,
    /// Seconds after the start of the photon window.
    pub time: f64,
}

/// Two clicks in time order plus what the controller did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEvent {
    pub first: PhotonClick,
    pub second: PhotonClick,
    /// Drawn from the interfering component (false: distinguishable).
    pub coherent: bool,
    /// Late-minus-early phase of photon B seen across the two clicks.
    pub phase_difference: f64,
    pub switched: bool,
}

/// Controller context for a feedback event.
pub struct FeedbackState<'a> {
    pub controller: &'a mut FeedbackController,
    /// Dark clicks of the monitored detector in this cycle, sorted.
    pub monitored_darks: &'a [f64],
    /// Whether the earlier of the two photons is registered by its detector.
    pub first_registered: bool,
}

impl PairSampler {
    pub fn new(scenario: &Scenario) -> Self {
        let mu = scenario.coherence.mu();
        let cos_t = scenario.theta().cos();
        let ideal = CoherenceModel::IDEAL;
        let coherent = timebin_output_distribution(scenario.phi, scenario.theta(), ideal);
        let distinguishable = timebin_output_distribution(scenario.phi, FRAC_PI_2, ideal);
        Self {
            kind: scenario.kind,
            envelope: scenario.envelope(),
            coherent_weight: mu * cos_t * cos_t,
            coherent: Categorical::new(&coherent),
            distinguishable: Categorical::new(&distinguishable),
            unswitched: timebin_output_distribution(0.0, 0.0, ideal),
            switched: timebin_output_distribution(PI, 0.0, ideal),
        }
    }

    pub fn envelope(&self) -> &TemporalEnvelope {
        &self.envelope
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    fn time_in<R: Rng + ?Sized>(&self, bin: TimeBin, rng: &mut R) -> f64 {
        self.envelope.sample_time_in_bin(bin, rng)
    }

    /// Detector distribution of the second click given the first click and
    /// the phase difference of photon B between the two click times.
    pub fn second_detector(
        &self,
        first: DetectionOutcome,
        second_bin: TimeBin,
        phase_difference: f64,
        coherent: bool,
    ) -> Result<SecondBinDistribution> {
        if !coherent {
            return Ok(SecondBinDistribution { c: 0.5, d: 0.5 });
        }
        if first.bin == TimeBin::I1 && second_bin == TimeBin::I2 {
            let dist = if phase_difference.cos() < 0.0 {
                &self.switched
            } else {
                &self.unswitched
            };
            return dist.conditional_second(first, second_bin);
        }
        // both clicks in one bin: same detector with probability (1 + cos Δ)/2
        let same = 0.5 * (1.0 + phase_difference.cos());
        Ok(match first.detector {
            Detector::C => SecondBinDistribution {
                c: same,
                d: 1.0 - same,
            },
            Detector::D => SecondBinDistribution {
                c: 1.0 - same,
                d: same,
            },
        })
    }

    fn sample_static<R: Rng + ?Sized>(&self, rng: &mut R) -> PairEvent {
        let coherent = rng.random::<f64>() < self.coherent_weight;
        let pair = if coherent {
            self.coherent.sample(rng)
        } else {
            self.distinguishable.sample(rng)
        };
        let (x, y) = (pair.first(), pair.second());
        let tx = self.time_in(x.bin, rng);
        let ty = self.time_in(y.bin, rng);
        let (first, second) = if tx <= ty {
            (
                PhotonClick {
                    outcome: x,
                    time: tx,
                },
                PhotonClick {
                    outcome: y,
                    time: ty,
                },
            )
        } else {
            (
                PhotonClick {
                    outcome: y,
                    time: ty,
                },
                PhotonClick {
                    outcome: x,
                    time: tx,
                },
            )
        };
        PairEvent {
            first,
            second,
            coherent,
            phase_difference: 0.0,
            switched: false,
        }
    }

    fn sample_feedback<R: Rng + ?Sized>(
        &self,
        state: FeedbackState<'_>,
        rng: &mut R,
    ) -> Result<PairEvent> {
        let coherent = rng.random::<f64>() < self.coherent_weight;
        let bin = |rng: &mut R| {
            if rng.random::<bool>() {
                TimeBin::I1
            } else {
                TimeBin::I2
            }
        };
        let (ba, bb) = (bin(rng), bin(rng));
        let (ta, tb) = (self.time_in(ba, rng), self.time_in(bb, rng));
        let ((b1, t1), (b2, t2)) = if ta <= tb {
            ((ba, ta), (bb, tb))
        } else {
            ((bb, tb), (ba, ta))
        };
        let first_det = if rng.random::<bool>() {
            Detector::C
        } else {
            Detector::D
        };
        let first = DetectionOutcome::new(first_det, b1);

        let ctl = state.controller;
        let mut darks = state.monitored_darks.iter().copied().peekable();
        while let Some(t) = darks.next_if(|&t| t < t1) {
            ctl.click(t)?;
        }
        if first_det == Detector::D && state.first_registered {
            ctl.click(t1)?;
        }
        while let Some(t) = darks.next_if(|&t| t < t2) {
            ctl.click(t)?;
        }
        let delta = ctl.phase_at(t2) - ctl.phase_at(t1);

        let dist = self.second_detector(first, b2, delta, coherent)?;
        let second_det = if rng.random::<f64>() < dist.c {
            Detector::C
        } else {
            Detector::D
        };
        Ok(PairEvent {
            first: PhotonClick {
                outcome: first,
                time: t1,
            },
            second: PhotonClick {
                outcome: DetectionOutcome::new(second_det, b2),
                time: t2,
            },
            coherent,
            phase_difference: delta,
            switched: ctl.switched(),
        })
    }
}

/// Draws one pair event. `feedback` must be given for the feedback scenario
/// and is ignored otherwise.
pub fn sample_pair_event<R: Rng + ?Sized>(
    sampler: &PairSampler,
    feedback: Option<FeedbackState<'_>>,
    rng: &mut R,
) -> Result<PairEvent> {
    match (sampler.kind, feedback) {
        (ScenarioKind::Feedback, Some(state)) => sampler.sample_feedback(state, rng),
        (ScenarioKind::Feedback, None) => Err(crate::error::Error::Config(
            "feedback scenario needs a controller".into(),
        )),
        _ => Ok(sampler.sample_static(rng)),
    }
}
