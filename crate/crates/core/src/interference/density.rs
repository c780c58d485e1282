//! Continuous-time joint detection densities.
//!
//! For clicks at `t0` in detector C and at `t0 + τ` in detector D the
//! cross-detector density is
//!
//! ```text
//! P(t0, τ) = ¼(x² + y²) − ½·w·x·y·cos Δ
//! x = ε_A(t0)·ε_B(t0+τ),  y = ε_A(t0+τ)·ε_B(t0)
//! Δ = φ_A(t0) − φ_A(t0+τ) + φ_B(t0+τ) − φ_B(t0)
//! ```
//!
//! with `w = μ·cos²θ`. The same-detector density (summed over C and D) flips
//! the sign of the interference term, so `cross + same = ½(x² + y²)` and the
//! pair integrates to one.

use std::io::Write;

use serde::Serialize;

use super::{CoherenceModel, Detector};
use crate::error::{Error, Result};
use crate::feedback::effective_phase_timeline;
use crate::photon::{PhaseProfile, PhotonMode, TimeBin};
use crate::quadrature::{simpson_piecewise, simpson_weights, PHOTON_GRID};

/// Default number of τ samples over `[−δt, δt]`.
pub const DEFAULT_TAU_POINTS: usize = 801;

/// Minimum τ samples per photon length.
pub const MIN_POINTS_PER_LENGTH: usize = 64;

/// Allowed deviation of `∫(P_joint + P_same) dτ` from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-4;

/// How photon B's late-bin phase is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PhaseControl {
    /// Both phase profiles are used as given.
    Static,
    /// A first click in `I1` sets photon B's late phase (D → π, C → 0),
    /// effective `latency` seconds after the click.
    Feedback { latency: f64 },
}

/// Joint-detection densities for a fixed photon pair and polarization angle.
#[derive(Debug, Clone)]
pub struct JointDensity {
    a: PhotonMode,
    b: PhotonMode,
    weight: f64,
    control: PhaseControl,
    duration: f64,
}

impl JointDensity {
    pub fn new(
        a: PhotonMode,
        b: PhotonMode,
        theta: f64,
        coherence: CoherenceModel,
        control: PhaseControl,
    ) -> Result<Self> {
        let (da, db) = (a.duration(), b.duration());
        if (da - db).abs() > 1e-12 * da.max(db) {
            return Err(Error::IncompatibleModes(format!(
                "photon lengths differ: {da} s vs {db} s"
            )));
        }
        if let PhaseControl::Feedback { latency } = control {
            if !(latency >= 0.0) {
                return Err(Error::Domain(format!(
                    "latency must be non-negative, got {latency}"
                )));
            }
        }
        let cos_theta = theta.cos();
        Ok(Self {
            a,
            b,
            weight: coherence.mu() * cos_theta * cos_theta,
            control,
            duration: da,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Interference weight `μ·cos²θ`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn control(&self) -> PhaseControl {
        self.control
    }

    /// Photon B's phase profile given which detector fired first and when.
    fn phase_b(&self, first: Detector, t_first: f64, t_second: f64) -> PhaseProfile {
        match self.control {
            PhaseControl::Static => self.b.phase,
            PhaseControl::Feedback { latency } => {
                if TimeBin::of(t_first, self.duration) != Some(TimeBin::I1) {
                    return self.b.phase;
                }
                let timeline = effective_phase_timeline(first, t_first, latency, self.duration);
                PhaseProfile {
                    early: self.b.phase.early,
                    late: self.b.phase.late + timeline.phase_at(t_second),
                }
            }
        }
    }

    /// Returns `(¼(x² + y²), ½·w·x·y·cos Δ)` for clicks at `t1` and `t2`.
    fn terms(&self, t1: f64, t2: f64, phase_b: &PhaseProfile) -> (f64, f64) {
        let ea = &self.a.envelope;
        let eb = &self.b.envelope;
        let x = ea.amplitude(t1) * eb.amplitude(t2);
        let y = ea.amplitude(t2) * eb.amplitude(t1);
        let d = self.duration;
        let delta =
            self.a.phase.at(t1, d) - self.a.phase.at(t2, d) + phase_b.at(t2, d) - phase_b.at(t1, d);
        let hv = 0.25 * (x * x + y * y);
        let interference = 0.5 * self.weight * x * y * delta.cos();
        (hv, interference)
    }

    /// Cross-detector density: C clicks at `t0`, D at `t0 + τ`.
    pub fn cross(&self, t0: f64, tau: f64) -> f64 {
        let t1 = t0 + tau;
        let phase_b = if tau >= 0.0 {
            self.phase_b(Detector::C, t0, t1)
        } else {
            self.phase_b(Detector::D, t1, t0)
        };
        let (hv, int) = self.terms(t0, t1, &phase_b);
        (hv - int).max(0.0)
    }

    /// Same-detector density summed over both detectors, for clicks at `t0` and `t0 + τ`.
    pub fn same(&self, t0: f64, tau: f64) -> f64 {
        let t1 = t0 + tau;
        let (first, second) = if tau >= 0.0 { (t0, t1) } else { (t1, t0) };
        match self.control {
            PhaseControl::Static => {
                let (hv, int) = self.terms(t0, t1, &self.b.phase);
                hv + int
            }
            PhaseControl::Feedback { .. } => {
                // each detector decides its own phase when it fires first
                let pc = self.phase_b(Detector::C, first, second);
                let pd = self.phase_b(Detector::D, first, second);
                let (hv, int_c) = self.terms(t0, t1, &pc);
                let (_, int_d) = self.terms(t0, t1, &pd);
                hv + 0.5 * (int_c + int_d)
            }
        }
    }

    fn t0_breaks(&self, tau: f64) -> Vec<f64> {
        let mut breaks = self.a.envelope.breakpoints();
        breaks.extend(self.b.envelope.breakpoints());
        let shifted: Vec<f64> = breaks.iter().map(|b| b - tau).collect();
        breaks.extend(shifted);
        breaks
    }

    fn integrate_t0<F: Fn(f64) -> f64>(&self, tau: f64, f: F) -> f64 {
        let d = self.duration;
        let lo = (-tau).max(0.0);
        let hi = d.min(d - tau);
        simpson_piecewise(f, lo, hi, &self.t0_breaks(tau), PHOTON_GRID)
    }

    /// `P_joint(τ) = ∫ P(t0, τ) dt0`.
    pub fn cross_tau(&self, tau: f64) -> f64 {
        self.integrate_t0(tau, |t0| self.cross(t0, tau))
    }

    /// `P_same(τ)`.
    pub fn same_tau(&self, tau: f64) -> f64 {
        self.integrate_t0(tau, |t0| self.same(t0, tau))
    }

    /// Samples both τ densities on `points` equally spaced values over
    /// `[−δt, δt]` (rounded up to an odd count) and checks their normalization.
    pub fn curve(&self, points: usize) -> Result<JointDensityCurve> {
        let intervals = points.saturating_sub(1).max(2).next_multiple_of(2);
        if intervals / 2 < MIN_POINTS_PER_LENGTH {
            return Err(Error::Accuracy(format!(
                "{points} τ samples give fewer than {MIN_POINTS_PER_LENGTH} points per photon length"
            )));
        }
        let d = self.duration;
        let h = 2.0 * d / intervals as f64;
        let tau: Vec<f64> = (0..=intervals).map(|i| -d + h * i as f64).collect();

        let eval = |&t: &f64| (self.cross_tau(t), self.same_tau(t));
        #[cfg(feature = "parallel")]
        let values: Vec<(f64, f64)> = {
            use rayon::prelude::*;
            tau.par_iter().map(eval).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let values: Vec<(f64, f64)> = tau.iter().map(eval).collect();

        let (cross, same) = values.into_iter().unzip();
        let curve = JointDensityCurve { tau, cross, same };
        let total = curve.integral_cross() + curve.integral_same();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Accuracy(format!(
                "∫(P_joint + P_same) dτ = {total}, outside 1 ± {NORMALIZATION_TOLERANCE}"
            )));
        }
        Ok(curve)
    }

    /// Cross-detector probability split by time bin: `[bin of C][bin of D]`.
    pub fn quadrants(&self) -> [[f64; 2]; 2] {
        let d = self.duration;
        let latency = match self.control {
            PhaseControl::Static => None,
            PhaseControl::Feedback { latency } => Some(latency),
        };
        let mut out = [[0.0; 2]; 2];
        for bc in TimeBin::ALL {
            for bd in TimeBin::ALL {
                let (c0, c1) = bc.range(d);
                let (d0, d1) = bd.range(d);
                let inner = |tc: f64| {
                    let mut breaks = self.b.envelope.breakpoints();
                    if let Some(l) = latency {
                        breaks.extend([tc - l, tc + l]);
                    }
                    simpson_piecewise(|td| self.cross(tc, td - tc), d0, d1, &breaks, 512)
                };
                let mut breaks = self.a.envelope.breakpoints();
                if let Some(l) = latency {
                    breaks.extend([d0 - l, d0 + l, d1 - l, d1 + l]);
                }
                out[bc.index()][bd.index()] = simpson_piecewise(inner, c0, c1, &breaks, 512);
            }
        }
        out
    }
}

/// Cross-detector density at a single `(t0, τ)` with static phases.
pub fn pjoint_t0_tau(
    a: &PhotonMode,
    b: &PhotonMode,
    theta: f64,
    coherence: CoherenceModel,
    t0: f64,
    tau: f64,
) -> Result<f64> {
    let jd = JointDensity::new(a.clone(), b.clone(), theta, coherence, PhaseControl::Static)?;
    Ok(jd.cross(t0, tau))
}

/// Same-detector density at a single `(t0, τ)` with static phases.
pub fn psame_t0_tau(
    a: &PhotonMode,
    b: &PhotonMode,
    theta: f64,
    coherence: CoherenceModel,
    t0: f64,
    tau: f64,
) -> Result<f64> {
    let jd = JointDensity::new(a.clone(), b.clone(), theta, coherence, PhaseControl::Static)?;
    Ok(jd.same(t0, tau))
}

/// `P_joint(τ)` and `P_same(τ)` sampled over `[−δt, δt]`, in 1/s.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDensityCurve {
    pub tau: Vec<f64>,
    pub cross: Vec<f64>,
    pub same: Vec<f64>,
}

impl JointDensityCurve {
    fn integrate(&self, values: &[f64]) -> f64 {
        let n = values.len() - 1;
        let h = self.tau[1] - self.tau[0];
        simpson_weights(n)
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            * h
    }

    pub fn integral_cross(&self) -> f64 {
        self.integrate(&self.cross)
    }

    pub fn integral_same(&self) -> f64 {
        self.integrate(&self.same)
    }

    /// Linear interpolation of the cross-detector curve.
    pub fn cross_at(&self, tau: f64) -> f64 {
        interpolate(&self.tau, &self.cross, tau)
    }

    pub fn same_at(&self, tau: f64) -> f64 {
        interpolate(&self.tau, &self.same, tau)
    }

    /// Mean cross-detector density over `[lo, hi)`, from the sampled curve.
    pub fn cross_mean(&self, lo: f64, hi: f64) -> f64 {
        let n = 64;
        let h = (hi - lo) / n as f64;
        let s: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * self.cross_at(lo + h * i as f64)
            })
            .sum();
        s * h / (hi - lo)
    }

    /// CSV with columns `tau_ns, p_cross_per_ns, p_same_per_ns`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau_ns,p_cross_per_ns,p_same_per_ns")?;
        for ((t, c), s) in self.tau.iter().zip(&self.cross).zip(&self.same) {
            writeln!(w, "{:.6},{:.9e},{:.9e}", t * 1e9, c * 1e-9, s * 1e-9)?;
        }
        Ok(())
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&v| v <= x).min(xs.len() - 1).max(1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let f = (x - x0) / (x1 - x0);
    ys[i - 1] + f * (ys[i] - ys[i - 1])
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::photon::TemporalEnvelope;

    const DT: f64 = 450e-9;

    fn mode(phi: f64, pol: f64) -> PhotonMode {
        PhotonMode::new(
            TemporalEnvelope::sin_squared(DT).unwrap(),
            PhaseProfile::step(phi),
            pol,
        )
    }

    fn eps(t: f64) -> f64 {
        TemporalEnvelope::sin_squared(DT).unwrap().amplitude(t)
    }

    #[test]
    fn identical_parallel_modes_never_cross() {
        let a = mode(0.0, 0.0);
        for (t0, tau) in [
            (10e-9, 100e-9),
            (200e-9, 230e-9),
            (300e-9, -150e-9),
            (0.0, 0.0),
        ] {
            let p = pjoint_t0_tau(&a, &a, 0.0, CoherenceModel::IDEAL, t0, tau).unwrap();
            assert_eq!(p, 0.0);
        }
    }

    #[test]
    fn perpendicular_ignores_phase() {
        for phi in [0.0, PI, 1.3] {
            let a = mode(0.0, 0.0);
            let b = mode(phi, PI / 2.0);
            let (t0, tau) = (80e-9, 260e-9);
            let p = pjoint_t0_tau(&a, &b, PI / 2.0, CoherenceModel::IDEAL, t0, tau).unwrap();
            let expected =
                0.25 * ((eps(t0) * eps(t0 + tau)).powi(2) + (eps(t0 + tau) * eps(t0)).powi(2));
            assert!((p - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn pi_phase_doubles_across_bins() {
        let a = mode(0.0, 0.0);
        let b = mode(PI, 0.0);
        let (t0, tau) = (100e-9, 200e-9);
        let par = pjoint_t0_tau(&a, &b, 0.0, CoherenceModel::IDEAL, t0, tau).unwrap();
        let perp = pjoint_t0_tau(&a, &b, PI / 2.0, CoherenceModel::IDEAL, t0, tau).unwrap();
        assert!((par / perp - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let a = mode(0.0, 0.0);
        let b = PhotonMode::new(
            TemporalEnvelope::sin_squared(401e-9).unwrap(),
            PhaseProfile::flat(),
            0.0,
        );
        assert!(matches!(
            pjoint_t0_tau(&a, &b, 0.0, CoherenceModel::IDEAL, 0.0, 0.0),
            Err(Error::IncompatibleModes(_))
        ));
    }

    #[test]
    fn coarse_grid_rejected() {
        let jd = JointDensity::new(
            mode(0.0, 0.0),
            mode(0.0, 0.0),
            0.0,
            CoherenceModel::IDEAL,
            PhaseControl::Static,
        )
        .unwrap();
        assert!(matches!(jd.curve(65), Err(Error::Accuracy(_))));
        assert!(jd.curve(129).is_ok());
    }

    #[test]
    fn perpendicular_cross_is_half_convolution() {
        let jd = JointDensity::new(
            mode(0.0, 0.0),
            mode(0.0, PI / 2.0),
            PI / 2.0,
            CoherenceModel::IDEAL,
            PhaseControl::Static,
        )
        .unwrap();
        // brute-force convolution of |ε|² with itself on a plain Riemann grid
        let n = 20_000;
        let h = DT / n as f64;
        for tau in [0.0, 100e-9, -225e-9, 380e-9] {
            let conv: f64 = (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) * h;
                    eps(t).powi(2) * eps(t + tau).powi(2)
                })
                .sum::<f64>()
                * h;
            let p = jd.cross_tau(tau);
            assert!((p - 0.5 * conv).abs() < 1e-6 * conv.max(1e-3 / DT));
        }
    }

    #[test]
    fn feedback_suppresses_c_first_cross_bin() {
        let jd = JointDensity::new(
            mode(0.0, 0.0),
            mode(0.0, 0.0),
            0.0,
            CoherenceModel::IDEAL,
            PhaseControl::Feedback { latency: 0.0 },
        )
        .unwrap();
        let q = jd.quadrants();
        // [bin C][bin D]
        assert!(q[0][1].abs() < 1e-9, "C1D2 = {}", q[0][1]);
        assert!((q[1][0] - 0.25).abs() < 1e-6, "C2D1 = {}", q[1][0]);
        assert!(q[0][0].abs() < 1e-9 && q[1][1].abs() < 1e-9);
        assert!(jd.cross_tau(225e-9) < 1e-12);
        assert!(jd.cross_tau(-225e-9) > 0.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let jd = JointDensity::new(
            mode(0.0, 0.0),
            mode(PI, 0.0),
            0.0,
            CoherenceModel::IDEAL,
            PhaseControl::Static,
        )
        .unwrap();
        let curve = jd.curve(129).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("tau_ns,p_cross_per_ns,p_same_per_ns"));
        assert_eq!(lines.count(), 129);
    }
}
