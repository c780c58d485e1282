//! Browser bindings. Each export returns a flat `Float64Array` that the page
//! splits into columns; errors surface as JS exceptions.

use hom_core::analysis::{analyze, AnalysisConfig};
use hom_core::feedback::{error_rate, LatencyBudget};
use hom_core::sim::{run_experiment, ExperimentConfig};
use hom_core::{CoherenceModel, Scenario, ScenarioKind};
use wasm_bindgen::prelude::*;

const PHOTON_LENGTH: f64 = 450e-9;

fn scenario(kind: &str, mu: f64) -> hom_core::Result<Scenario> {
    let kind: ScenarioKind = kind.parse()?;
    Scenario::new(kind, CoherenceModel::new(mu)?, PHOTON_LENGTH)
}

/// Rows of `(τ ns, P_joint per ns, P_same per ns)`.
pub fn density_rows(
    kind: &str,
    mu: f64,
    latency_ns: f64,
    points: usize,
) -> hom_core::Result<Vec<f64>> {
    let curve = scenario(kind, mu)?
        .joint_density(latency_ns * 1e-9)?
        .curve(points)?;
    Ok(curve
        .tau
        .iter()
        .zip(&curve.cross)
        .zip(&curve.same)
        .flat_map(|((t, c), s)| [t * 1e9, c * 1e-9, s * 1e-9])
        .collect())
}

/// Rows of `(dead time ns, error rate)` from 0 to `max_ns`.
pub fn error_rows(max_ns: f64, steps: usize) -> hom_core::Result<Vec<f64>> {
    let steps = steps.max(2);
    let mut out = Vec::with_capacity(2 * steps);
    for i in 0..steps {
        let ns = max_ns * i as f64 / (steps - 1) as f64;
        out.extend([ns, error_rate(ns * 1e-9 / PHOTON_LENGTH)?]);
    }
    Ok(out)
}

/// Rows of `(window centre ns, measured density per ns, theory per ns)`,
/// simulated with the default noise model.
pub fn histogram_rows(
    kind: &str,
    mu: f64,
    latency_ns: f64,
    cycles: u32,
    seed: u32,
) -> hom_core::Result<Vec<f64>> {
    let s = scenario(kind, mu)?;
    let cfg = ExperimentConfig {
        scenario: s,
        feedback_latency: LatencyBudget::lumped(latency_ns * 1e-9),
        rng_seed: seed as u64,
        ..ExperimentConfig::default()
    };
    let run = run_experiment(&cfg, cycles as u64)?;
    let res = analyze(
        &run.recording,
        &AnalysisConfig {
            delay_transmission: cfg.delay_transmission,
            n_cycles: Some(cycles as u64),
            ..AnalysisConfig::default()
        },
    )?;
    let curve = s.joint_density(latency_ns * 1e-9)?.curve(257)?;
    let h = &res.histogram;
    Ok(h.centers
        .iter()
        .zip(&h.density)
        .flat_map(|(&c, &d)| {
            let theory = curve.cross_mean(c - 0.5 * h.width, c + 0.5 * h.width);
            [c * 1e9, d * 1e-9, theory * 1e-9]
        })
        .collect())
}

fn js<T>(r: hom_core::Result<T>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn density_curve(
    kind: &str,
    mu: f64,
    latency_ns: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    js(density_rows(kind, mu, latency_ns, points))
}

#[wasm_bindgen]
pub fn error_rate_curve(max_ns: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    js(error_rows(max_ns, steps))
}

#[wasm_bindgen]
pub fn error_rate_at(latency_ns: f64) -> Result<f64, JsError> {
    js(error_rate(latency_ns * 1e-9 / PHOTON_LENGTH))
}

#[wasm_bindgen]
pub fn simulated_histogram(
    kind: &str,
    mu: f64,
    latency_ns: f64,
    cycles: u32,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    js(histogram_rows(kind, mu, latency_ns, cycles, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_rows_are_triples() {
        let v = density_rows("b", 1.0, 0.0, 257).unwrap();
        assert_eq!(v.len() % 3, 0);
        assert!(v.chunks(3).all(|r| r[1].abs() < 1e-12));
        assert!(density_rows("z", 1.0, 0.0, 257).is_err());
    }

    #[test]
    fn error_rows_start_at_zero() {
        let v = error_rows(225.0, 10).unwrap();
        assert_eq!((v[0], v[1]), (0.0, 0.0));
        assert!((v[18] - 225.0).abs() < 1e-12 && (v[19] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn histogram_tracks_theory() {
        let v = histogram_rows("c", 1.0, 97.0, 200_000, 3).unwrap();
        let peak = v.chunks(3).map(|r| r[2]).fold(0.0, f64::max);
        assert!(peak > 0.0);
        // measured and predicted densities agree at the satellite peaks
        let sat = v
            .chunks(3)
            .min_by(|a, b| (a[0] - 225.0).abs().total_cmp(&(b[0] - 225.0).abs()))
            .unwrap();
        assert!((sat[1] - sat[2]).abs() < 0.25 * sat[2], "{sat:?}");
    }
}
