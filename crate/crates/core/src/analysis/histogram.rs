use std::io::Write;

use serde::Serialize;

use super::background::BackgroundCorrelations;
use super::correlations::CorrelationSet;
use super::stats::mle_signal;
use crate::error::{Error, Result};

pub const DEFAULT_WIDTH: f64 = 50e-9;
pub const DEFAULT_STEP: f64 = 10e-9;

/// How raw window counts become a probability density.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistogramScale<'a> {
    /// Estimated number of pair experiments with both photons registered.
    pub pair_experiments: f64,
    pub n_cycles: f64,
    /// Accidental-pair model; `None` skips the subtraction.
    pub background: Option<&'a BackgroundCorrelations>,
}

/// Window counts on `τ` with centres at multiples of `step`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlidingHistogram {
    pub width: f64,
    pub step: f64,
    pub centers: Vec<f64>,
    pub counts: Vec<f64>,
    pub background: Vec<f64>,
    pub signal: Vec<f64>,
    /// Signal per pair experiment per second of `τ`.
    pub density: Vec<f64>,
}

impl SlidingHistogram {
    /// Raw count of the window centred nearest to `center`.
    pub fn count_at(&self, center: f64) -> Option<f64> {
        let i = self
            .centers
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - center).abs().total_cmp(&(b.1 - center).abs()))?
            .0;
        Some(self.counts[i])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau_center_ns,counts,background,signal,density_per_ns")?;
        for i in 0..self.centers.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.centers[i] * 1e9,
                self.counts[i],
                self.background[i],
                self.signal[i],
                self.density[i] * 1e-9
            )?;
        }
        Ok(())
    }
}

fn build(
    set: &CorrelationSet,
    width: f64,
    step: f64,
    scale: &HistogramScale,
) -> Result<SlidingHistogram> {
    if !(width > 0.0 && step > 0.0) {
        return Err(Error::Config(format!(
            "histogram width and step must be positive, got {width} and {step}"
        )));
    }
    let reach = set.window();
    // centres k·step with the whole window inside [−reach, reach]
    let m = ((reach - 0.5 * width) / step + 1e-9).floor().max(0.0) as i64;
    let centers: Vec<f64> = (-m..=m).map(|k| k as f64 * step).collect();
    let mut tau: Vec<f64> = set.pairs.iter().map(|p| p.tau).collect();
    tau.sort_by(f64::total_cmp);

    let n = centers.len();
    let (mut counts, mut background, mut signal, mut density) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for &c in &centers {
        let (lo, hi) = (c - 0.5 * width, c + 0.5 * width);
        let count = (tau.partition_point(|&t| t < hi) - tau.partition_point(|&t| t < lo)) as f64;
        let bg = scale
            .background
            .map_or(0.0, |b| scale.n_cycles * b.expected(lo, hi));
        let s = mle_signal(count, bg)?;
        counts.push(count);
        background.push(bg);
        signal.push(s);
        density.push(if scale.pair_experiments > 0.0 {
            s / (scale.pair_experiments * width)
        } else {
            0.0
        });
    }
    Ok(SlidingHistogram {
        width,
        step,
        centers,
        counts,
        background,
        signal,
        density,
    })
}

/// Overlapping-window histogram of the pair offsets; `step` must be
/// smaller than `width`.
pub fn sliding_histogram(
    set: &CorrelationSet,
    width: f64,
    step: f64,
    scale: &HistogramScale,
) -> Result<SlidingHistogram> {
    if step >= width {
        return Err(Error::Config(format!(
            "sliding histogram needs step < width, got step {step} s and width {width} s"
        )));
    }
    build(set, width, step, scale)
}

/// Ordinary histogram: adjacent, non-overlapping windows.
pub fn histogram(
    set: &CorrelationSet,
    width: f64,
    scale: &HistogramScale,
) -> Result<SlidingHistogram> {
    build(set, width, width, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::correlations::CorrelationPair;
    use crate::interference::DetectionOutcome;

    fn set(taus: &[f64]) -> CorrelationSet {
        CorrelationSet {
            pairs: taus
                .iter()
                .map(|&tau| CorrelationPair {
                    first: DetectionOutcome::C1,
                    second: DetectionOutcome::D1,
                    tau,
                })
                .collect(),
            gate: (0.0, 450e-9),
            boundary: 225e-9,
        }
    }

    #[test]
    fn window_counts() {
        let s = set(&[0.0, 10e-9, 20e-9]);
        let h = sliding_histogram(&s, 25e-9, 5e-9, &HistogramScale::default()).unwrap();
        assert_eq!(h.count_at(10e-9), Some(3.0));
        assert!(sliding_histogram(&s, 25e-9, 25e-9, &HistogramScale::default()).is_err());
    }

    #[test]
    fn empty_set_is_zero() {
        let h = sliding_histogram(
            &set(&[]),
            DEFAULT_WIDTH,
            DEFAULT_STEP,
            &HistogramScale::default(),
        )
        .unwrap();
        assert!(!h.centers.is_empty());
        assert!(h.counts.iter().chain(&h.density).all(|&v| v == 0.0));
    }
}
