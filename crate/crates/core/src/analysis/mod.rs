//! From raw click records to coincidence histograms, cross-bin matrices,
//! visibilities and signal-to-noise ratios.
//!
//! The stages run in order: fit the arrival histogram to find the photon
//! gate, build the accidental-pair model from the single-detector rates,
//! collect same-cycle C×D pairs inside the gate, estimate how many pair
//! experiments the run contained from clicks two cycles apart, and finally
//! subtract the expected accidentals window by window.

pub mod background;
pub mod correlations;
pub mod gate;
pub mod histogram;
pub mod stats;

use serde::Serialize;
use serde_json::{json, Value};

pub use background::{background_correlations, BackgroundCorrelations, BackgroundModel};
pub use correlations::{extract_correlations, two_cycle_products, CorrelationPair, CorrelationSet};
pub use gate::{
    fit_amplitudes, fit_gate, fit_gate_with, ArrivalHistogram, GateFit, GateShape, MIN_GATE_BINS,
};
pub use histogram::{histogram, sliding_histogram, HistogramScale, SlidingHistogram};
pub use stats::{
    contrast_visibility, mle_signal, normalization_factor, ratio_visibility, snr, visibilities,
    Estimate, Visibilities, VisibilityInputs,
};

use crate::error::{Error, Result};
use crate::interference::Detector;
use crate::photon::TimeBin;
use crate::sim::Recording;
use correlations::cycle_times;

/// Grid step of the accidental-pair model.
const BACKGROUND_GRID: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub repetition_period: f64,
    /// `η_L` used to turn two-cycle pairs into a pair-experiment count.
    pub delay_transmission: f64,
    pub gate_bins: usize,
    pub histogram_width: f64,
    pub histogram_step: f64,
    /// Number of recorded cycles; inferred from the last click when `None`.
    pub n_cycles: Option<u64>,
    pub subtract_background: bool,
    /// Photon term of the gate fit.
    pub gate_shape: GateShape,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            repetition_period: 1e-6,
            delay_transmission: 0.8,
            gate_bins: 1000,
            histogram_width: histogram::DEFAULT_WIDTH,
            histogram_step: histogram::DEFAULT_STEP,
            n_cycles: None,
            subtract_background: true,
            gate_shape: GateShape::SinFourth,
        }
    }
}

/// Background-corrected cross-detector probabilities by time bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossBinMatrix {
    pub c1d1: Estimate,
    pub c1d2: Estimate,
    pub c2d1: Estimate,
    pub c2d2: Estimate,
    /// Raw counts and expected accidentals in the same order.
    pub counts: [f64; 4],
    pub background: [f64; 4],
}

impl CrossBinMatrix {
    pub const LABELS: [&'static str; 4] = ["C1D1", "C1D2", "C2D1", "C2D2"];

    pub fn entries(&self) -> [Estimate; 4] {
        [self.c1d1, self.c1d2, self.c2d1, self.c2d2]
    }

    pub fn get(&self, c: TimeBin, d: TimeBin) -> Estimate {
        self.entries()[2 * c.index() + d.index()]
    }

    pub fn total(&self) -> f64 {
        self.entries().iter().map(|e| e.value).sum()
    }

    /// Entries with one click per time bin.
    pub fn cross_interval(&self) -> Estimate {
        sum(self.c1d2, self.c2d1)
    }

    pub fn all(&self) -> Estimate {
        sum(sum(self.c1d1, self.c2d2), self.cross_interval())
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "entry,probability,sigma,counts,background")?;
        for (i, (label, e)) in Self::LABELS.iter().zip(self.entries()).enumerate() {
            writeln!(
                w,
                "{label},{},{},{},{}",
                e.value, e.sigma, self.counts[i], self.background[i]
            )?;
        }
        Ok(())
    }
}

fn sum(a: Estimate, b: Estimate) -> Estimate {
    Estimate::new(a.value + b.value, a.sigma.hypot(b.sigma))
}

/// Inputs to [`cross_bin_matrix`] besides the pairs.
#[derive(Debug, Clone, Copy)]
pub struct MatrixScale<'a> {
    pub pair_experiments: f64,
    pub n_cycles: f64,
    pub background: Option<&'a BackgroundModel>,
}

/// Four cross-detector entries, each `max{0, n − λ_B}` over the number of
/// pair experiments.
pub fn cross_bin_matrix(set: &CorrelationSet, scale: &MatrixScale) -> Result<CrossBinMatrix> {
    let (p1, p2) = set.gate;
    let mid = set.boundary - p1;
    let range = |b: TimeBin| match b {
        TimeBin::I1 => (0.0, mid),
        TimeBin::I2 => (mid, p2 - p1),
    };
    let mut counts = [0.0; 4];
    let mut background = [0.0; 4];
    let mut est = [Estimate::new(0.0, 0.0); 4];
    for bc in TimeBin::ALL {
        for bd in TimeBin::ALL {
            let i = 2 * bc.index() + bd.index();
            let n = set.count(bc, bd) as f64;
            let bg = scale
                .background
                .map_or(0.0, |m| scale.n_cycles * m.quadrant(range(bc), range(bd)));
            let s = mle_signal(n, bg)?;
            counts[i] = n;
            background[i] = bg;
            est[i] = if scale.pair_experiments > 0.0 {
                Estimate::new(
                    s / scale.pair_experiments,
                    n.sqrt() / scale.pair_experiments,
                )
            } else {
                Estimate::new(0.0, 0.0)
            };
        }
    }
    Ok(CrossBinMatrix {
        c1d1: est[0],
        c1d2: est[1],
        c2d1: est[2],
        c2d2: est[3],
        counts,
        background,
    })
}

/// Arrival histogram of one detector over the cycle.
pub fn arrival_histogram(
    rec: &Recording,
    det: Detector,
    period: f64,
    bins: usize,
) -> ArrivalHistogram {
    let period_ps = (period * 1e12).round() as u64;
    let mut counts = vec![0.0; bins];
    for (_, t) in cycle_times(rec, det, period_ps) {
        let i = ((t / period) * bins as f64) as usize;
        counts[i.min(bins - 1)] += 1.0;
    }
    ArrivalHistogram::new(period, counts)
}

/// Mean counts per bin over the bins that lie wholly inside `(p2, p3)`,
/// where neither photons nor repump light arrive.
fn dark_level(hist: &ArrivalHistogram, gate: &GateFit) -> Option<f64> {
    let w = hist.bin_width();
    let lo = (gate.p2 / w).ceil() as usize;
    let hi = ((gate.p3 / w).floor() as usize).min(hist.counts.len());
    if hi < lo + 2 {
        return None;
    }
    Some(hist.counts[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
}

/// Everything the pipeline recovers from one record.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisResult {
    pub n_cycles: u64,
    pub gate: GateFit,
    pub gate_c: GateFit,
    pub gate_d: GateFit,
    /// Background clicks per cycle per second, by detector.
    pub dark_density: [f64; 2],
    pub two_cycle_pairs: f64,
    pub two_cycle_background: f64,
    pub pair_experiments: f64,
    pub correlations: CorrelationSet,
    pub background: BackgroundModel,
    pub background_correlations: BackgroundCorrelations,
    pub histogram: SlidingHistogram,
    pub matrix: CrossBinMatrix,
    pub coincidences: f64,
    pub accidentals: f64,
    pub snr: Option<f64>,
}

impl AnalysisResult {
    pub fn summary_json(&self) -> Value {
        let fit = |g: &GateFit| {
            json!({
                "a": g.a, "b": g.b, "c": g.c,
                "p1_ns": g.p1 * 1e9, "p2_ns": g.p2 * 1e9, "p3_ns": g.p3 * 1e9, "p4_ns": g.p4 * 1e9,
                "residual": g.residual,
            })
        };
        let matrix: serde_json::Map<String, Value> = CrossBinMatrix::LABELS
            .iter()
            .zip(self.matrix.entries())
            .map(|(l, e)| {
                (
                    l.to_string(),
                    json!({"probability": e.value, "sigma": e.sigma}),
                )
            })
            .collect();
        json!({
            "n_cycles": self.n_cycles,
            "gate": fit(&self.gate),
            "gate_c": fit(&self.gate_c),
            "gate_d": fit(&self.gate_d),
            "dark_rate_per_s": {"C": self.dark_density[0], "D": self.dark_density[1]},
            "two_cycle_pairs": self.two_cycle_pairs,
            "two_cycle_background": self.two_cycle_background,
            "pair_experiments": self.pair_experiments,
            "coincidences": self.coincidences,
            "accidentals": self.accidentals,
            "snr": self.snr,
            "cross_bin_matrix": matrix,
            "cross_interval": self.matrix.cross_interval(),
            "cross_all": self.matrix.all(),
        })
    }
}

/// Runs the whole pipeline on one record.
pub fn analyze(rec: &Recording, cfg: &AnalysisConfig) -> Result<AnalysisResult> {
    let period = cfg.repetition_period;
    let period_ps = (period * 1e12).round() as u64;
    let last = Detector::ALL
        .iter()
        .filter_map(|&d| rec.stream(d).cycle_index.last())
        .max()
        .copied();
    let n_cycles = match (cfg.n_cycles, last) {
        (Some(n), _) => n,
        (None, Some(l)) => l + 1,
        (None, None) => return Err(Error::FitFailure("record contains no clicks".into())),
    };
    let n = n_cycles as f64;

    // gate from both detectors together, amplitudes per detector
    let hist = Detector::ALL.map(|d| arrival_histogram(rec, d, period, cfg.gate_bins));
    let gate = fit_gate_with(&hist[0].add(&hist[1])?, cfg.gate_shape)?;
    let p = [gate.p1, gate.p2, gate.p3, gate.p4];
    let gate_c = fit_amplitudes(&hist[0], p, cfg.gate_shape)?;
    let gate_d = fit_amplitudes(&hist[1], p, cfg.gate_shape)?;
    let bin_width = hist[0].bin_width();
    let dark_density = [(&hist[0], gate_c.a), (&hist[1], gate_d.a)]
        .map(|(h, a)| dark_level(h, &gate).unwrap_or(a) / (bin_width * n));

    // single-detector densities on the gated window
    let window = gate.photon_window();
    let cells = (window / BACKGROUND_GRID).round().max(1.0) as usize;
    let dt = window / cells as f64;
    let mut m_p = [vec![0.0; cells], vec![0.0; cells]];
    for det in Detector::ALL {
        for (_, t) in cycle_times(rec, det, period_ps) {
            if t >= gate.p1 && t < gate.p2 {
                let i = (((t - gate.p1) / dt) as usize).min(cells - 1);
                m_p[det.index()][i] += 1.0 / (n * dt);
            }
        }
        for v in &mut m_p[det.index()] {
            *v = (*v - dark_density[det.index()]).max(0.0);
        }
    }
    let m_b = dark_density.map(|r| vec![if cfg.subtract_background { r } else { 0.0 }; cells]);
    let model = BackgroundModel::new(dt, m_b, m_p)?;
    let bg_corr = background_correlations(&model, cells as f64 * dt)?;

    let set = extract_correlations(rec, period_ps, (gate.p1, gate.p2), gate.midpoint());

    // two-cycle pairs, less the part involving background clicks
    let gated_clicks: f64 = Detector::ALL
        .iter()
        .flat_map(|&d| cycle_times(rec, d, period_ps))
        .filter(|&(_, t)| t >= gate.p1 && t < gate.p2)
        .count() as f64;
    let s = gated_clicks / n;
    let d = if cfg.subtract_background {
        (dark_density[0] + dark_density[1]) * window
    } else {
        0.0
    };
    let two_cycle_pairs = two_cycle_products(rec, period_ps, (gate.p1, gate.p2));
    let two_cycle_background = (n - 2.0).max(0.0) * (2.0 * s * d - d * d);
    let signal_pairs = two_cycle_pairs - two_cycle_background;
    if !(signal_pairs > 0.0) {
        return Err(Error::UndefinedRatio(
            "no photon pairs two cycles apart to normalize against".into(),
        ));
    }
    let pair_experiments = signal_pairs * normalization_factor(cfg.delay_transmission)?;

    let background = cfg.subtract_background.then_some(&bg_corr);
    let histogram = sliding_histogram(
        &set,
        cfg.histogram_width,
        cfg.histogram_step,
        &HistogramScale {
            pair_experiments,
            n_cycles: n,
            background,
        },
    )?;
    let matrix = cross_bin_matrix(
        &set,
        &MatrixScale {
            pair_experiments,
            n_cycles: n,
            background: cfg.subtract_background.then_some(&model),
        },
    )?;
    let coincidences = set.len() as f64;
    let accidentals = matrix.background.iter().sum::<f64>();
    let snr = snr(mle_signal(coincidences, accidentals)?, accidentals).ok();

    Ok(AnalysisResult {
        n_cycles,
        gate,
        gate_c,
        gate_d,
        dark_density,
        two_cycle_pairs,
        two_cycle_background,
        pair_experiments,
        correlations: set,
        background: model,
        background_correlations: bg_corr,
        histogram,
        matrix,
        coincidences,
        accidentals,
        snr,
    })
}
