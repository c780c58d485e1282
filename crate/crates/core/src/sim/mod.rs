//! Monte Carlo generation of raw click records.
//!
//! Photon `j` is emitted in cycle `j`, routed into the short or the long arm
//! and, if long, arrives one cycle later after surviving the fiber. Cycle
//! `k` therefore sees photon `k−1` from the long arm and photon `k` from the
//! short arm; only when both are present do the two photons meet at the
//! beam splitter.
//!
//! Every photon and every cycle draws from its own ChaCha stream, so the
//! output does not depend on how cycles are split across threads.

mod config;
mod rejection;
mod sampler;
mod stream;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub use config::ExperimentConfig;
pub use rejection::RejectionSampler;
pub use sampler::{sample_pair_event, FeedbackState, PairEvent, PairSampler, PhotonClick};
pub use stream::{
    ClickSource, CycleTruth, GroundTruthLog, Recording, TimestampStream, TruthClick, BINARY_MAGIC,
};

use crate::error::{Error, Result};
use crate::feedback::FeedbackController;
use crate::interference::{DetectionOutcome, Detector};
use crate::photon::TimeBin;
use crate::scenario::ScenarioKind;

const CHUNK: u64 = 1 << 14;

// stream lanes: one per photon, one per cycle
const LANES: u64 = 2;
const PHOTON_LANE: u64 = 0;
const CYCLE_LANE: u64 = 1;

/// Click records plus the per-cycle truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub recording: Recording,
    pub truth: GroundTruthLog,
}

#[derive(Debug, Clone, Copy)]
struct PhotonFate {
    emitted: bool,
    long_arm: bool,
    survives: bool,
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    seed: [u8; 32],
    pairs: Pairs,
    p_first_bin: f64,
    dark: Option<Poisson<f64>>,
    repump: Option<Poisson<f64>>,
}

enum Pairs {
    Factorized(PairSampler),
    Rejection(RejectionSampler),
}

#[derive(Default)]
struct CycleOutput {
    clicks: Vec<(Detector, u64)>,
    truth: Option<CycleTruth>,
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean <= 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::Config(format!("Poisson mean {mean}: {e}")))
}

impl<'a> Context<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let scenario = &config.scenario;
        let pairs = if config.rejection_sampling {
            Pairs::Rejection(RejectionSampler::new(scenario, config.latency())?)
        } else {
            Pairs::Factorized(PairSampler::new(scenario))
        };
        let env = scenario.envelope();
        let repump_span =
            config.repetition_period - config.photon_window - config.repump_light_delay;
        Ok(Self {
            config,
            seed: ChaCha8Rng::seed_from_u64(config.rng_seed).get_seed(),
            pairs,
            p_first_bin: env.energy_between(0.0, 0.5 * env.duration()),
            dark: poisson(config.dark_rate * config.repetition_period)?,
            repump: poisson(config.repump_light_rate * repump_span)?,
        })
    }

    fn rng(&self, index: u64, lane: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(index * LANES + lane);
        rng
    }

    fn photon(&self, j: u64) -> PhotonFate {
        let mut rng = self.rng(j, PHOTON_LANE);
        let c = self.config;
        PhotonFate {
            emitted: rng.random::<f64>() < c.photon_emission_probability,
            long_arm: rng.random::<bool>(),
            survives: rng.random::<f64>() < c.delay_transmission,
        }
    }

    fn quantize(&self, cycle: u64, t: f64) -> u64 {
        let res = self.config.tdc_resolution_ps();
        let abs = cycle * self.config.period_ps() + (t * 1e12).floor() as u64;
        abs / res * res
    }

    fn background(&self, rng: &mut ChaCha8Rng) -> [Vec<f64>; 2] {
        let c = self.config;
        let lo = c.photon_window + c.repump_light_delay;
        let mut out = [Vec::new(), Vec::new()];
        for times in &mut out {
            if let Some(p) = &self.dark {
                let n = p.sample(rng) as usize;
                times.extend((0..n).map(|_| rng.random_range(0.0..c.repetition_period)));
            }
            if let Some(p) = &self.repump {
                let n = p.sample(rng) as usize;
                times.extend((0..n).map(|_| rng.random_range(lo..c.repetition_period)));
            }
            times.sort_by(f64::total_cmp);
        }
        out
    }

    fn cycle(&self, k: u64) -> Result<CycleOutput> {
        let c = self.config;
        let from_long = k
            .checked_sub(1)
            .map(|j| self.photon(j))
            .is_some_and(|p| p.emitted && p.long_arm && p.survives);
        let now = self.photon(k);
        let from_short = now.emitted && !now.long_arm;

        let mut rng = self.rng(k, CYCLE_LANE);
        let darks = self.background(&mut rng);
        let mut out = CycleOutput::default();
        for det in Detector::ALL {
            out.clicks.extend(
                darks[det.index()]
                    .iter()
                    .map(|&t| (det, self.quantize(k, t))),
            );
        }
        let dark_clicks = (darks[0].len() + darks[1].len()) as u32;

        let mut truth = CycleTruth {
            cycle: k,
            clicks: Vec::new(),
            coherent: None,
            switched: None,
            phase_difference: None,
            dark_clicks,
        };
        let eff = c.detector_efficiency;
        match (from_long, from_short) {
            (false, false) => return Ok(out),
            (true, true) => {
                let r1 = rng.random::<f64>() < eff;
                let r2 = rng.random::<f64>() < eff;
                let event = match &self.pairs {
                    Pairs::Factorized(s) if s.kind() == ScenarioKind::Feedback => {
                        let mut ctl = FeedbackController::new(c.windows(), c.latency());
                        let monitored: Vec<f64> = darks[Detector::D.index()]
                            .iter()
                            .copied()
                            .filter(|&t| t < c.photon_window)
                            .collect();
                        let state = FeedbackState {
                            controller: &mut ctl,
                            monitored_darks: &monitored,
                            first_registered: r1,
                        };
                        sample_pair_event(s, Some(state), &mut rng)?
                    }
                    Pairs::Factorized(s) => sample_pair_event(s, None, &mut rng)?,
                    Pairs::Rejection(s) => s.sample(&mut rng),
                };
                truth.coherent = Some(event.coherent);
                truth.switched = Some(event.switched);
                truth.phase_difference = Some(event.phase_difference);
                for (click, registered) in [(event.first, r1), (event.second, r2)] {
                    truth.clicks.push(TruthClick {
                        outcome: click.outcome,
                        time_ps: click.time * 1e12,
                        registered,
                        source: ClickSource::Pair,
                    });
                }
            }
            _ => {
                let bin = if rng.random::<f64>() < self.p_first_bin {
                    TimeBin::I1
                } else {
                    TimeBin::I2
                };
                let det = if rng.random::<bool>() {
                    Detector::C
                } else {
                    Detector::D
                };
                let env = match &self.pairs {
                    Pairs::Factorized(s) => s.envelope(),
                    Pairs::Rejection(s) => s.envelope(),
                };
                let t = env.sample_time_in_bin(bin, &mut rng);
                let registered = rng.random::<f64>() < eff;
                truth.clicks.push(TruthClick {
                    outcome: DetectionOutcome::new(det, bin),
                    time_ps: t * 1e12,
                    registered,
                    source: ClickSource::Single,
                });
            }
        }
        for tc in truth.clicks.iter().filter(|tc| tc.registered) {
            out.clicks
                .push((tc.outcome.detector, self.quantize(k, tc.time_ps * 1e-12)));
        }
        out.truth = Some(truth);
        Ok(out)
    }

    fn chunk(&self, lo: u64, hi: u64) -> Result<Vec<CycleOutput>> {
        (lo..hi).map(|k| self.cycle(k)).collect()
    }
}

/// Simulates `n_cycles` repetitions of the experiment.
pub fn run_experiment(config: &ExperimentConfig, n_cycles: u64) -> Result<ExperimentOutput> {
    if n_cycles == 0 {
        return Err(Error::Config("n_cycles must be at least 1".into()));
    }
    let ctx = Context::new(config)?;
    let starts: Vec<u64> = (0..n_cycles).step_by(CHUNK as usize).collect();
    let run = |&lo: &u64| ctx.chunk(lo, (lo + CHUNK).min(n_cycles));
    #[cfg(feature = "parallel")]
    let chunks: Vec<Result<Vec<CycleOutput>>> = {
        use rayon::prelude::*;
        starts.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Result<Vec<CycleOutput>>> = starts.iter().map(run).collect();

    let mut recording = Recording {
        resolution_ps: config.tdc_resolution_ps(),
        ..Default::default()
    };
    let mut truth = GroundTruthLog::default();
    for (lo, chunk) in starts.iter().zip(chunks) {
        for (k, mut cycle) in (*lo..).zip(chunk?) {
            cycle.clicks.sort_by_key(|&(det, ps)| (ps, det));
            for (det, ps) in cycle.clicks {
                recording.stream_mut(det).push(k, ps);
            }
            truth.cycles.extend(cycle.truth);
        }
    }
    Ok(ExperimentOutput { recording, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn zero_cycles_rejected() {
        assert!(run_experiment(&ExperimentConfig::default(), 0).is_err());
    }

    #[test]
    fn deterministic_and_quantized() {
        let cfg = ExperimentConfig {
            scenario: Scenario::ideal(ScenarioKind::Feedback),
            ..Default::default()
        };
        let a = run_experiment(&cfg, 40_000).unwrap();
        let b = run_experiment(&cfg, 40_000).unwrap();
        assert_eq!(a, b);
        for det in Detector::ALL {
            let s = a.recording.stream(det);
            assert!(s.is_sorted());
            assert!(s.timestamp_ps.iter().all(|ps| ps % 81 == 0));
            // flooring to the TDC grid can move a click at most one tick back
            assert!(s
                .iter()
                .all(|(cyc, ps)| ps + 81 > cyc * 1_000_000 && ps < (cyc + 1) * 1_000_000));
        }
    }
}
