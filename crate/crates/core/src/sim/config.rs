use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{LatencyBudget, WindowTiming};
use crate::scenario::Scenario;

/// Parameters of one simulated measurement run.
///
/// The photon window starts at the beginning of each cycle and the repump
/// window fills the rest of it. Repump light leaks onto both detectors after
/// `repump_light_delay`, which is what gives the arrival histogram its third
/// plateau.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub repetition_period: f64,
    pub photon_window: f64,
    pub repump_window: f64,
    /// Survival probability of the fiber delay arm, `η_L`.
    pub delay_transmission: f64,
    pub photon_emission_probability: f64,
    pub detector_efficiency: f64,
    /// Dark plus stray-light clicks per second per detector, uniform over the cycle.
    pub dark_rate: f64,
    /// Extra clicks per second per detector while the repump light is on.
    pub repump_light_rate: f64,
    pub repump_light_delay: f64,
    pub tdc_resolution: f64,
    pub feedback_latency: LatencyBudget,
    /// `None` uses windows that cover the two photon halves.
    pub feedback_windows: Option<WindowTiming>,
    pub rng_seed: u64,
    pub scenario: Scenario,
    /// Draws pairs with the slow 2-D rejection sampler instead of the
    /// factorized bin-then-time sampler.
    pub rejection_sampling: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            repetition_period: 1e-6,
            photon_window: 450e-9,
            repump_window: 550e-9,
            delay_transmission: 0.8,
            photon_emission_probability: 0.5,
            detector_efficiency: 0.62,
            dark_rate: 40_000.0,
            repump_light_rate: 20_000.0,
            repump_light_delay: 50e-9,
            tdc_resolution: 81e-12,
            feedback_latency: LatencyBudget::default(),
            feedback_windows: None,
            rng_seed: 0x484f_4d00,
            scenario: Scenario::ideal(crate::scenario::ScenarioKind::ParallelPhi0),
            rejection_sampling: false,
        }
    }
}

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

fn non_negative(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must be finite and non-negative, got {x}"
        )))
    }
}

impl ExperimentConfig {
    /// A noiseless setup: every photon reaches a detector and no darks.
    pub fn noiseless(scenario: Scenario) -> Self {
        Self {
            delay_transmission: 1.0,
            photon_emission_probability: 1.0,
            detector_efficiency: 1.0,
            dark_rate: 0.0,
            repump_light_rate: 0.0,
            scenario,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("repetition_period", self.repetition_period),
            ("photon_window", self.photon_window),
            ("repump_window", self.repump_window),
        ] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {w}")));
            }
        }
        let sum = self.photon_window + self.repump_window;
        if (sum - self.repetition_period).abs() > 1e-9 * self.repetition_period {
            return Err(Error::Config(format!(
                "photon_window + repump_window = {sum} s differs from repetition_period {} s",
                self.repetition_period
            )));
        }
        if (self.photon_window - self.scenario.photon_length).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "photon_window {} s differs from the photon length {} s",
                self.photon_window, self.scenario.photon_length
            )));
        }
        if !(self.delay_transmission > 0.0 && self.delay_transmission <= 1.0) {
            return Err(Error::Config(format!(
                "delay_transmission must lie in (0, 1], got {}",
                self.delay_transmission
            )));
        }
        probability(
            "photon_emission_probability",
            self.photon_emission_probability,
        )?;
        probability("detector_efficiency", self.detector_efficiency)?;
        non_negative("dark_rate", self.dark_rate)?;
        non_negative("repump_light_rate", self.repump_light_rate)?;
        non_negative("repump_light_delay", self.repump_light_delay)?;
        if self.repump_light_delay > self.repump_window {
            return Err(Error::Config(
                "repump_light_delay exceeds the repump window".into(),
            ));
        }
        let res = self.tdc_resolution_ps();
        if res == 0 || (res as f64 * 1e-12 - self.tdc_resolution).abs() > 1e-15 {
            return Err(Error::Config(format!(
                "tdc_resolution must be a positive whole number of picoseconds, got {} s",
                self.tdc_resolution
            )));
        }
        if (self.period_ps() as f64 * 1e-12 - self.repetition_period).abs() > 1e-15 {
            return Err(Error::Config(
                "repetition_period must be a whole number of picoseconds".into(),
            ));
        }
        Ok(())
    }

    pub fn tdc_resolution_ps(&self) -> u64 {
        (self.tdc_resolution * 1e12).round() as u64
    }

    pub fn period_ps(&self) -> u64 {
        (self.repetition_period * 1e12).round() as u64
    }

    pub fn latency(&self) -> f64 {
        self.feedback_latency.total()
    }

    pub fn windows(&self) -> WindowTiming {
        self.feedback_windows
            .unwrap_or_else(|| WindowTiming::from_bins(self.photon_window))
    }
}
