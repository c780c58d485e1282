//! Discrete time-bin algebra.
//!
//! Each photon is split into its early and late halves, `(A1 + A2)/√2` and
//! `(B1 + e^{iφ}B2)/√2`, and the two creation operators are pushed through
//! the beam splitter `A_j → (C_j + D_j)/√2`, `B_j → (C_j − D_j)/√2`.
//! Polarization is carried as an extra mode index and traced out at the end,
//! because the detectors do not resolve it.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde_json::{json, Value};

use super::{CoherenceModel, DetectionOutcome, Detector};
use crate::error::{Error, Result};
use crate::photon::TimeBin;

/// Four output modes (C1, C2, D1, D2) times two polarizations.
const MODES: usize = 8;

fn mode_index(outcome: DetectionOutcome, pol: usize) -> usize {
    2 * outcome.index() + pol
}

/// A single-photon creation vector over the output modes.
type Photon = [Complex64; MODES];

fn output_photon(bin_amplitudes: [Complex64; 2], port_sign: f64, pol: [f64; 2]) -> Photon {
    let mut v = [Complex64::new(0.0, 0.0); MODES];
    for bin in TimeBin::ALL {
        // ½ = 1/√2 from the bin split times 1/√2 from the beam splitter
        let amp = bin_amplitudes[bin.index()] * 0.5;
        for (p, &pa) in pol.iter().enumerate() {
            v[mode_index(DetectionOutcome::new(Detector::C, bin), p)] += amp * pa;
            v[mode_index(DetectionOutcome::new(Detector::D, bin), p)] += amp * port_sign * pa;
        }
    }
    v
}

/// Probabilities over the 8×8 occupation of `a† b† |0⟩`, indexed `[m][n]` with `m ≤ n`.
fn pair_probabilities(a: &Photon, b: &Photon) -> [[f64; MODES]; MODES] {
    let mut p = [[0.0; MODES]; MODES];
    for m in 0..MODES {
        // |2_m⟩ carries a factor √2! in its norm
        p[m][m] = 2.0 * (a[m] * b[m]).norm_sqr();
        for n in (m + 1)..MODES {
            p[m][n] = (a[m] * b[n] + a[n] * b[m]).norm_sqr();
        }
    }
    p
}

/// Unordered pair of detection outcomes, stored in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomePair(DetectionOutcome, DetectionOutcome);

impl OutcomePair {
    pub fn new(x: DetectionOutcome, y: DetectionOutcome) -> Self {
        if x.index() <= y.index() {
            Self(x, y)
        } else {
            Self(y, x)
        }
    }

    pub fn first(&self) -> DetectionOutcome {
        self.0
    }

    pub fn second(&self) -> DetectionOutcome {
        self.1
    }

    /// Both photons in the same detector and time bin: a click detector
    /// without number resolution cannot register this.
    pub fn is_bunched(&self) -> bool {
        self.0 == self.1
    }

    pub fn is_cross_detector(&self) -> bool {
        self.0.detector != self.1.detector
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.0, self.1)
    }

    pub fn all() -> impl Iterator<Item = OutcomePair> {
        let outs = DetectionOutcome::ALL;
        (0..4).flat_map(move |i| (i..4).map(move |j| OutcomePair::new(outs[i], outs[j])))
    }
}

impl fmt::Display for OutcomePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0, self.1)
    }
}

/// Probabilities of all ten unordered outcome pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    weights: BTreeMap<OutcomePair, f64>,
}

impl OutcomeDistribution {
    pub(crate) fn from_fn<F: Fn(OutcomePair) -> f64>(f: F) -> Self {
        Self {
            weights: OutcomePair::all().map(|p| (p, f(p))).collect(),
        }
    }

    /// Distribution for a single coherent component with relative polarization `theta`.
    fn pure(phi: f64, theta: f64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let a = output_photon([one, one], 1.0, [1.0, 0.0]);
        let b = output_photon(
            [one, Complex64::from_polar(1.0, phi)],
            -1.0,
            [theta.cos(), theta.sin()],
        );
        let p = pair_probabilities(&a, &b);
        Self::from_fn(|pair| {
            let (x, y) = (pair.first(), pair.second());
            let mut total = 0.0;
            for px in 0..2 {
                for py in 0..2 {
                    let (m, n) = (mode_index(x, px), mode_index(y, py));
                    if x == y && py < px {
                        continue;
                    }
                    total += p[m.min(n)][m.max(n)];
                }
            }
            total
        })
    }

    /// `weight·self + (1 − weight)·other`.
    pub fn mix(&self, other: &Self, weight: f64) -> Self {
        Self::from_fn(|p| weight * self.get(p) + (1.0 - weight) * other.get(p))
    }

    pub fn get(&self, pair: OutcomePair) -> f64 {
        self.weights[&pair]
    }

    pub fn prob(&self, x: DetectionOutcome, y: DetectionOutcome) -> f64 {
        self.get(OutcomePair::new(x, y))
    }

    pub fn iter(&self) -> impl Iterator<Item = (OutcomePair, f64)> + '_ {
        self.weights.iter().map(|(k, v)| (*k, *v))
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Probability that both photons land in the same detector and bin.
    pub fn bunched_total(&self) -> f64 {
        self.iter()
            .filter(|(p, _)| p.is_bunched())
            .map(|(_, v)| v)
            .sum()
    }

    /// Cross-detector probability with C in `bin_c` and D in `bin_d`.
    pub fn cross(&self, bin_c: TimeBin, bin_d: TimeBin) -> f64 {
        self.prob(
            DetectionOutcome::new(Detector::C, bin_c),
            DetectionOutcome::new(Detector::D, bin_d),
        )
    }

    /// Probability of photons in the given pair of bins, summed over detectors.
    pub fn bin_pair(&self, x: TimeBin, y: TimeBin) -> f64 {
        self.iter()
            .filter(|(p, _)| {
                let (a, b) = (p.first().bin, p.second().bin);
                (a, b) == (x, y) || (a, b) == (y, x)
            })
            .map(|(_, v)| v)
            .sum()
    }

    /// Detector distribution of the second click, in `second_bin`, given the
    /// first click `first`. Same-bin cross-detector pairs are split evenly
    /// between the two time orderings.
    pub fn conditional_second(
        &self,
        first: DetectionOutcome,
        second_bin: TimeBin,
    ) -> Result<SecondBinDistribution> {
        let weight = |det: Detector| {
            let second = DetectionOutcome::new(det, second_bin);
            let p = self.prob(first, second);
            if second_bin == first.bin && det != first.detector {
                0.5 * p
            } else {
                p
            }
        };
        let (c, d) = (weight(Detector::C), weight(Detector::D));
        let norm = c + d;
        if norm <= 1e-15 {
            return Err(Error::UndefinedConditional(first.to_string()));
        }
        Ok(SecondBinDistribution {
            c: c / norm,
            d: d / norm,
        })
    }

    /// JSON object keyed by pair label (`"C1D2"`), with probability and observability.
    pub fn to_json(&self) -> Value {
        let map: serde_json::Map<String, Value> = self
            .iter()
            .map(|(p, v)| {
                (
                    p.label(),
                    json!({ "probability": v, "observable": !p.is_bunched() }),
                )
            })
            .collect();
        Value::Object(map)
    }
}

/// Distribution of the remaining photon's detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondBinDistribution {
    pub c: f64,
    pub d: f64,
}

impl SecondBinDistribution {
    pub fn prob(&self, det: Detector) -> f64 {
        match det {
            Detector::C => self.c,
            Detector::D => self.d,
        }
    }
}

/// Outcome probabilities for late-bin phase `phi`, relative polarization
/// `theta` and mutual coherence `μ` (mixture with the distinguishable case).
pub fn timebin_output_distribution(
    phi: f64,
    theta: f64,
    coherence: CoherenceModel,
) -> OutcomeDistribution {
    let coherent = OutcomeDistribution::pure(phi, theta);
    let mu = coherence.mu();
    if mu == 1.0 {
        return coherent;
    }
    let distinguishable = OutcomeDistribution::pure(phi, std::f64::consts::FRAC_PI_2);
    coherent.mix(&distinguishable, mu)
}

/// Ideal (μ = 1, parallel) conditional distribution of the `I2` click given an `I1` click.
pub fn conditional_second_bin(first: DetectionOutcome, phi: f64) -> Result<SecondBinDistribution> {
    if first.bin != TimeBin::I1 {
        return Err(Error::Domain(format!("first click {first} is not in I1")));
    }
    timebin_output_distribution(phi, 0.0, CoherenceModel::IDEAL)
        .conditional_second(first, TimeBin::I2)
}
