//! Slow reference sampler: draws click pairs straight from the continuous
//! densities on the `(t_C, t_D)` and `(t_1, t_2)` planes by rejection.

use rand::Rng;

use super::sampler::{PairEvent, PhotonClick};
use crate::error::{Error, Result};
use crate::interference::{DetectionOutcome, Detector, JointDensity};
use crate::photon::{TemporalEnvelope, TimeBin};
use crate::quadrature::PHOTON_GRID;
use crate::scenario::{Scenario, ScenarioKind};

#[derive(Debug, Clone)]
pub struct RejectionSampler {
    density: JointDensity,
    envelope: TemporalEnvelope,
    bound: f64,
}

impl RejectionSampler {
    /// Static scenarios only: under feedback the same-detector density does
    /// not say which detector fired.
    pub fn new(scenario: &Scenario, latency: f64) -> Result<Self> {
        if scenario.kind == ScenarioKind::Feedback {
            return Err(Error::Config(
                "the rejection sampler covers static-phase scenarios only".into(),
            ));
        }
        let envelope = scenario.envelope();
        let d = envelope.duration();
        let peak = (0..=PHOTON_GRID)
            .map(|i| {
                envelope
                    .amplitude(d * i as f64 / PHOTON_GRID as f64)
                    .powi(2)
            })
            .fold(0.0, f64::max);
        Ok(Self {
            density: scenario.joint_density(latency)?,
            envelope,
            // ¼(x² + y²) + ½xy ≤ peak², with headroom for the sampled peak
            bound: 1.01 * peak * peak,
        })
    }

    pub fn envelope(&self) -> &TemporalEnvelope {
        &self.envelope
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PairEvent {
        let d = self.envelope.duration();
        loop {
            let (t1, t2) = (rng.random_range(0.0..d), rng.random_range(0.0..d));
            let cross = rng.random::<bool>();
            let p = if cross {
                self.density.cross(t1, t2 - t1)
            } else {
                self.density.same(t1, t2 - t1)
            };
            if rng.random::<f64>() * self.bound > p {
                continue;
            }
            let (d1, d2) = if cross {
                (Detector::C, Detector::D)
            } else {
                let det = if rng.random::<bool>() {
                    Detector::C
                } else {
                    Detector::D
                };
                (det, det)
            };
            let click = |det, t| PhotonClick {
                outcome: DetectionOutcome::new(det, TimeBin::of(t, d).unwrap_or(TimeBin::I2)),
                time: t,
            };
            let (a, b) = (click(d1, t1), click(d2, t2));
            let (first, second) = if t1 <= t2 { (a, b) } else { (b, a) };
            return PairEvent {
                first,
                second,
                coherent: true,
                phase_difference: 0.0,
                switched: false,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn phi0_never_splits() {
        let s = RejectionSampler::new(&Scenario::ideal(ScenarioKind::ParallelPhi0), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let e = s.sample(&mut rng);
            assert_eq!(e.first.outcome.detector, e.second.outcome.detector);
        }
        assert!(RejectionSampler::new(&Scenario::ideal(ScenarioKind::Feedback), 0.0).is_err());
    }
}
