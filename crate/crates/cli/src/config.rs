use std::path::{Path, PathBuf};

use hom_core::analysis::AnalysisConfig;
use hom_core::feedback::LatencyBudget;
use hom_core::sim::ExperimentConfig;
use hom_core::{CoherenceModel, Scenario, ScenarioKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Flat run configuration. Every physical key names its unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub mu: f64,
    /// Overrides the late-bin phase of the static scenarios.
    pub phi_rad: Option<f64>,
    pub photon_length_ns: f64,
    pub repetition_period_ns: f64,
    pub photon_window_ns: f64,
    pub repump_window_ns: f64,
    pub delay_transmission: f64,
    pub emission_probability: f64,
    pub detector_efficiency: f64,
    pub dark_rate_hz: f64,
    pub repump_light_rate_hz: f64,
    pub repump_light_delay_ns: f64,
    pub tdc_resolution_ps: f64,
    /// Lumped loop delay; the itemized default budget when absent.
    pub feedback_latency_ns: Option<f64>,
    /// Unit efficiencies, no darks, no repump light.
    pub noiseless: bool,
    pub rejection_sampling: bool,
    pub seed: u64,
    pub n_cycles: u64,
    pub output_dir: PathBuf,
    pub output_format: OutputFormat,
    pub theory_points: usize,
    pub gate_bins: usize,
    pub histogram_width_ns: f64,
    pub histogram_step_ns: f64,
    pub subtract_background: bool,
    pub max_chi2_per_dof: f64,
    pub visibility_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        let a = AnalysisConfig::default();
        Self {
            scenario: "a".into(),
            mu: 1.0,
            phi_rad: None,
            photon_length_ns: e.scenario.photon_length * 1e9,
            repetition_period_ns: e.repetition_period * 1e9,
            photon_window_ns: e.photon_window * 1e9,
            repump_window_ns: e.repump_window * 1e9,
            delay_transmission: e.delay_transmission,
            emission_probability: e.photon_emission_probability,
            detector_efficiency: e.detector_efficiency,
            dark_rate_hz: e.dark_rate,
            repump_light_rate_hz: e.repump_light_rate,
            repump_light_delay_ns: e.repump_light_delay * 1e9,
            tdc_resolution_ps: e.tdc_resolution * 1e12,
            feedback_latency_ns: None,
            noiseless: false,
            rejection_sampling: false,
            seed: e.rng_seed,
            n_cycles: 1_000_000,
            output_dir: PathBuf::from("hom-output"),
            output_format: OutputFormat::Csv,
            theory_points: 901,
            gate_bins: a.gate_bins,
            histogram_width_ns: a.histogram_width * 1e9,
            histogram_step_ns: a.histogram_step * 1e9,
            subtract_background: true,
            max_chi2_per_dof: 2.0,
            visibility_tolerance: 0.03,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn scenario_kind(&self) -> Result<ScenarioKind, CliError> {
        Ok(self.scenario.parse()?)
    }

    pub fn scenario_for(&self, kind: ScenarioKind) -> Result<Scenario, CliError> {
        let s = Scenario::new(
            kind,
            CoherenceModel::new(self.mu)?,
            self.photon_length_ns * 1e-9,
        )?;
        Ok(match self.phi_rad {
            Some(phi) if kind != ScenarioKind::Feedback => s.with_phi(phi),
            _ => s,
        })
    }

    pub fn latency(&self) -> LatencyBudget {
        self.feedback_latency_ns
            .map_or_else(LatencyBudget::default, |ns| {
                LatencyBudget::lumped(ns * 1e-9)
            })
    }

    pub fn experiment(&self, kind: ScenarioKind) -> Result<ExperimentConfig, CliError> {
        let scenario = self.scenario_for(kind)?;
        let mut cfg = ExperimentConfig {
            repetition_period: self.repetition_period_ns * 1e-9,
            photon_window: self.photon_window_ns * 1e-9,
            repump_window: self.repump_window_ns * 1e-9,
            delay_transmission: self.delay_transmission,
            photon_emission_probability: self.emission_probability,
            detector_efficiency: self.detector_efficiency,
            dark_rate: self.dark_rate_hz,
            repump_light_rate: self.repump_light_rate_hz,
            repump_light_delay: self.repump_light_delay_ns * 1e-9,
            tdc_resolution: self.tdc_resolution_ps * 1e-12,
            feedback_latency: self.latency(),
            feedback_windows: None,
            // one seed, a distinct stream family per scenario
            rng_seed: self.seed.wrapping_add(kind.label() as u64 - 'a' as u64),
            scenario,
            rejection_sampling: self.rejection_sampling,
        };
        if self.noiseless {
            let quiet = ExperimentConfig::noiseless(scenario);
            cfg.delay_transmission = quiet.delay_transmission;
            cfg.photon_emission_probability = quiet.photon_emission_probability;
            cfg.detector_efficiency = quiet.detector_efficiency;
            cfg.dark_rate = quiet.dark_rate;
            cfg.repump_light_rate = quiet.repump_light_rate;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn analysis(&self, n_cycles: Option<u64>) -> AnalysisConfig {
        AnalysisConfig {
            repetition_period: self.repetition_period_ns * 1e-9,
            delay_transmission: if self.noiseless {
                1.0
            } else {
                self.delay_transmission
            },
            gate_bins: self.gate_bins,
            histogram_width: self.histogram_width_ns * 1e-9,
            histogram_step: self.histogram_step_ns * 1e-9,
            n_cycles,
            subtract_background: self.subtract_background,
            ..AnalysisConfig::default()
        }
    }

    pub fn tdc_ps(&self) -> u64 {
        self.tdc_resolution_ps.round().max(1.0) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_core() {
        let c = RunConfig::default();
        assert_eq!(c.photon_length_ns, 450.0);
        assert_eq!(c.repetition_period_ns, 1000.0);
        assert!((c.latency().total() - 97e-9).abs() < 1e-15);
        let e = c.experiment(ScenarioKind::Perpendicular).unwrap();
        assert!((e.photon_window - 450e-9).abs() < 1e-18);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("photon_window = 450e-9").is_err());
        let c = RunConfig::parse("scenario = \"c\"\nphoton_window_ns = 400.0").unwrap();
        assert_eq!(c.photon_window_ns, 400.0);
    }

    #[test]
    fn noiseless_keeps_timing() {
        let c = RunConfig {
            noiseless: true,
            feedback_latency_ns: Some(0.0),
            ..RunConfig::default()
        };
        let e = c.experiment(ScenarioKind::Feedback).unwrap();
        assert_eq!(e.dark_rate, 0.0);
        assert_eq!(e.detector_efficiency, 1.0);
        assert_eq!(e.latency(), 0.0);
    }
}
