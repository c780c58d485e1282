//! Single-photon spatio-temporal modes: envelope, stepwise phase and polarization.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{simpson, simpson_piecewise, PHOTON_GRID};

/// Default photon length (450 ns).
pub const DEFAULT_PHOTON_LENGTH: f64 = 450e-9;

/// Early (`I1`) or late (`I2`) half of the photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeBin {
    I1,
    I2,
}

impl TimeBin {
    pub const ALL: [TimeBin; 2] = [TimeBin::I1, TimeBin::I2];

    /// Bin containing `t` for a photon of length `duration`, or `None` outside the support.
    pub fn of(t: f64, duration: f64) -> Option<TimeBin> {
        if !(0.0..=duration).contains(&t) {
            None
        } else if t < 0.5 * duration {
            Some(TimeBin::I1)
        } else {
            Some(TimeBin::I2)
        }
    }

    pub fn index(self) -> usize {
        match self {
            TimeBin::I1 => 0,
            TimeBin::I2 => 1,
        }
    }

    /// `[start, end)` of the bin.
    pub fn range(self, duration: f64) -> (f64, f64) {
        match self {
            TimeBin::I1 => (0.0, 0.5 * duration),
            TimeBin::I2 => (0.5 * duration, duration),
        }
    }
}

/// Amplitude samples of a user-supplied envelope; interpolated linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledEnvelope {
    times: Vec<f64>,
    amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeShape {
    /// `sin²(2πt/δt)` on `[0, δt]`: two humps with a node at `δt/2`.
    SinSquaredDoubleHump,
    Custom(SampledEnvelope),
}

/// Real amplitude envelope `ε(t)`, normalized so that `∫|ε|² dt = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEnvelope {
    duration: f64,
    shape: EnvelopeShape,
    scale: f64,
}

impl TemporalEnvelope {
    pub fn sin_squared(duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidEnvelope(format!(
                "duration must be positive, got {duration}"
            )));
        }
        Ok(Self {
            duration,
            shape: EnvelopeShape::SinSquaredDoubleHump,
            // ∫ sin⁴(2πt/δt) dt over one period is 3δt/8
            scale: (8.0 / (3.0 * duration)).sqrt(),
        })
    }

    /// Envelope from `(t, amplitude)` samples. The support runs from 0 to the
    /// last sample time; the result is renormalized.
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidEnvelope("need at least two samples".into()));
        }
        if samples
            .iter()
            .any(|(t, a)| !t.is_finite() || !a.is_finite())
        {
            return Err(Error::InvalidEnvelope("non-finite sample".into()));
        }
        if samples[0].0 < 0.0 {
            return Err(Error::InvalidEnvelope(
                "sample times must be non-negative".into(),
            ));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidEnvelope(
                "sample times must be strictly increasing".into(),
            ));
        }
        let (times, amplitudes): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
        let duration = *times.last().unwrap();
        let grid = SampledEnvelope { times, amplitudes };
        let norm = simpson_piecewise(
            |t| grid.interpolate(t).powi(2),
            0.0,
            duration,
            &grid.times,
            PHOTON_GRID,
        );
        if norm <= 0.0 {
            return Err(Error::InvalidEnvelope("envelope has zero energy".into()));
        }
        Ok(Self {
            duration,
            shape: EnvelopeShape::Custom(grid),
            scale: norm.sqrt().recip(),
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn shape(&self) -> &EnvelopeShape {
        &self.shape
    }

    /// Normalized amplitude `ε(t)`; zero outside `[0, δt]`.
    pub fn amplitude(&self, t: f64) -> f64 {
        if !(0.0..=self.duration).contains(&t) {
            return 0.0;
        }
        match &self.shape {
            EnvelopeShape::SinSquaredDoubleHump => {
                self.scale * (2.0 * PI * t / self.duration).sin().powi(2)
            }
            EnvelopeShape::Custom(grid) => self.scale * grid.interpolate(t),
        }
    }

    /// Intensity density `2|ε(t)|²`, normalized to unit mass on each half for
    /// the double-hump shape: `(16/3)·sin⁴(2πt/δt)/δt`.
    pub fn intensity_density(&self, t: f64) -> f64 {
        2.0 * self.amplitude(t).powi(2)
    }

    /// Times where the envelope or its derivative may be discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            EnvelopeShape::SinSquaredDoubleHump => vec![0.0, 0.5 * self.duration, self.duration],
            EnvelopeShape::Custom(grid) => {
                let mut b = grid.times.clone();
                b.push(0.5 * self.duration);
                b
            }
        }
    }

    /// `∫|ε|²` over `[a, b]`.
    pub fn energy_between(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(0.0), b.min(self.duration));
        simpson_piecewise(
            |t| self.amplitude(t).powi(2),
            a,
            b,
            &self.breakpoints(),
            PHOTON_GRID,
        )
    }

    /// Largest `|ε(t)|²` on `[a, b]` (used as a rejection bound).
    fn peak_intensity(&self, a: f64, b: f64) -> f64 {
        match &self.shape {
            EnvelopeShape::SinSquaredDoubleHump => self.scale.powi(2),
            EnvelopeShape::Custom(grid) => {
                let ends = [grid.interpolate(a), grid.interpolate(b)];
                grid.times
                    .iter()
                    .zip(&grid.amplitudes)
                    .filter(|(t, _)| (a..=b).contains(*t))
                    .map(|(_, v)| *v)
                    .chain(ends)
                    .map(|v| (self.scale * v).powi(2))
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Draws a detection time inside `bin`, distributed as `|ε(t)|²` restricted to it.
    pub fn sample_time_in_bin<R: Rng + ?Sized>(&self, bin: TimeBin, rng: &mut R) -> f64 {
        let (a, b) = bin.range(self.duration);
        let bound = self.peak_intensity(a, b);
        loop {
            let t = rng.random_range(a..b);
            let u: f64 = rng.random();
            if u * bound <= self.amplitude(t).powi(2) {
                return t;
            }
        }
    }

    /// `true` when the two envelopes describe the same function.
    pub fn same_as(&self, other: &TemporalEnvelope) -> bool {
        self == other
    }
}

impl SampledEnvelope {
    fn interpolate(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t < ts[0] || t > *ts.last().unwrap() {
            return 0.0;
        }
        let i = ts.partition_point(|&x| x <= t);
        if i == ts.len() {
            return *self.amplitudes.last().unwrap();
        }
        if i == 0 {
            return self.amplitudes[0];
        }
        let (t0, t1) = (ts[i - 1], ts[i]);
        let (a0, a1) = (self.amplitudes[i - 1], self.amplitudes[i]);
        a0 + (a1 - a0) * (t - t0) / (t1 - t0)
    }
}

/// Piecewise-constant phase: `early` on `[0, δt/2)`, `late` on `[δt/2, δt]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub early: f64,
    pub late: f64,
}

impl PhaseProfile {
    pub fn flat() -> Self {
        Self::default()
    }

    /// Zero phase in `I1` and `phi` in `I2`.
    pub fn step(phi: f64) -> Self {
        Self {
            early: 0.0,
            late: phi,
        }
    }

    pub fn at(&self, t: f64, duration: f64) -> f64 {
        if t < 0.5 * duration {
            self.early
        } else {
            self.late
        }
    }
}

/// One photon wavepacket entering the beam splitter.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonMode {
    pub envelope: TemporalEnvelope,
    pub phase: PhaseProfile,
    polarization: f64,
}

impl PhotonMode {
    /// `polarization` is a linear-polarization angle, reduced into `[0, π)`.
    pub fn new(envelope: TemporalEnvelope, phase: PhaseProfile, polarization: f64) -> Self {
        let mut p = polarization.rem_euclid(PI);
        if p >= PI {
            p = 0.0;
        }
        Self {
            envelope,
            phase,
            polarization: p,
        }
    }

    pub fn polarization(&self) -> f64 {
        self.polarization
    }

    pub fn duration(&self) -> f64 {
        self.envelope.duration()
    }

    /// Relative polarization angle `θ = |θ_A − θ_B|` between two modes.
    pub fn relative_angle(&self, other: &PhotonMode) -> f64 {
        (self.polarization - other.polarization).abs()
    }

    /// `ζ(t) = ε(t)·exp(−iφ(t))`.
    pub fn spatio_temporal(&self, t: f64) -> Complex64 {
        let phi = self.phase.at(t, self.duration());
        Complex64::from_polar(self.envelope.amplitude(t), -phi)
    }

    /// `∫|ζ(t)|² dt`.
    pub fn norm(&self) -> f64 {
        simpson(
            |t| self.spatio_temporal(t).norm_sqr(),
            0.0,
            self.duration(),
            PHOTON_GRID,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 450e-9;

    #[test]
    fn envelope_nodes_and_peak() {
        let env = TemporalEnvelope::sin_squared(DT).unwrap();
        assert_eq!(env.amplitude(0.0), 0.0);
        assert!(env.amplitude(225e-9).abs() < 1e-3 * env.amplitude(112.5e-9));
        assert!(env.amplitude(-1e-9) == 0.0 && env.amplitude(451e-9) == 0.0);

        // peak constant from an independent quadrature of sin⁴ over one period
        let sin4 = simpson(|t| (2.0 * PI * t / DT).sin().powi(4), 0.0, DT, 1 << 14);
        assert!((sin4 - 3.0 * DT / 8.0).abs() < 1e-12 * DT);
        let expected_peak = (1.0 / sin4).sqrt();
        assert!((env.amplitude(112.5e-9) / expected_peak - 1.0).abs() < 1e-9);
        assert!((env.amplitude(112.5e-9) - (8.0 / (3.0 * DT)).sqrt()).abs() < 1e-9 * expected_peak);
    }

    #[test]
    fn envelope_is_normalized_and_symmetric() {
        let env = TemporalEnvelope::sin_squared(DT).unwrap();
        let n = env.energy_between(0.0, DT);
        assert!((n - 1.0).abs() < 1e-9);
        for k in 0..50 {
            let t = DT * k as f64 / 50.0;
            assert!((env.amplitude(t) - env.amplitude(DT - t)).abs() < 1e-9 * env.scale);
        }
    }

    #[test]
    fn intensity_density_values() {
        let env = TemporalEnvelope::sin_squared(DT).unwrap();
        let half = simpson(|t| env.intensity_density(t), 0.0, DT / 2.0, 4096);
        assert!((half - 1.0).abs() < 1e-10);
        assert_eq!(env.intensity_density(0.0), 0.0);
        let quarter = env.intensity_density(DT / 4.0);
        assert!((quarter * DT - 16.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn spatio_temporal_phase() {
        let env = TemporalEnvelope::sin_squared(DT).unwrap();
        let mode = PhotonMode::new(env.clone(), PhaseProfile::step(PI), 0.0);
        let t = 300e-9;
        let z = mode.spatio_temporal(t);
        assert!((z.re + env.amplitude(t)).abs() < 1e-9 * env.amplitude(t));
        assert!(z.im.abs() < 1e-9 * env.amplitude(t));

        let flat = PhotonMode::new(env.clone(), PhaseProfile::flat(), 0.0);
        for t in [10e-9, 200e-9, 400e-9] {
            assert_eq!(flat.spatio_temporal(t).im, 0.0);
        }
        assert!((mode.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn custom_envelope_is_renormalized() {
        let samples: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64 * 1e-8, 3.0)).collect();
        let env = TemporalEnvelope::from_samples(&samples).unwrap();
        assert!((env.energy_between(0.0, env.duration()) - 1.0).abs() < 1e-9);
        assert!((env.amplitude(5e-8) - (1.0 / 1e-7_f64).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn custom_envelope_rejects_non_monotonic_grid() {
        let err = TemporalEnvelope::from_samples(&[(0.0, 1.0), (2.0, 1.0), (1.0, 0.0)]);
        assert!(matches!(err, Err(Error::InvalidEnvelope(_))));
        let err = TemporalEnvelope::from_samples(&[(0.0, 1.0), (0.0, 1.0)]);
        assert!(matches!(err, Err(Error::InvalidEnvelope(_))));
    }

    #[test]
    fn polarization_is_reduced() {
        let env = TemporalEnvelope::sin_squared(DT).unwrap();
        let m = PhotonMode::new(env, PhaseProfile::flat(), 3.0 * PI / 2.0);
        assert!((m.polarization() - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_times_stay_in_bin() {
        use rand::SeedableRng;
        let env = TemporalEnvelope::sin_squared(DT).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let mut mean = 0.0;
        for _ in 0..n {
            let t = env.sample_time_in_bin(TimeBin::I2, &mut rng);
            assert!((DT / 2.0..DT).contains(&t));
            mean += t / n as f64;
        }
        // symmetric hump centred at 3δt/4
        assert!((mean - 0.75 * DT).abs() < 2e-9);
    }
}
