use serde::Serialize;

use crate::interference::{DetectionOutcome, Detector};
use crate::photon::TimeBin;
use crate::sim::Recording;

/// One C×D click pair from a single cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationPair {
    pub first: DetectionOutcome,
    pub second: DetectionOutcome,
    /// `t_D − t_C` in seconds.
    pub tau: f64,
}

impl CorrelationPair {
    pub fn bin_of(&self, det: Detector) -> TimeBin {
        if self.first.detector == det {
            self.first.bin
        } else {
            self.second.bin
        }
    }
}

/// Gated same-cycle C×D pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CorrelationSet {
    pub pairs: Vec<CorrelationPair>,
    /// Gate `(p1, p2)` in cycle time.
    pub gate: (f64, f64),
    pub boundary: f64,
}

impl CorrelationSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn window(&self) -> f64 {
        self.gate.1 - self.gate.0
    }

    /// Pairs with the C click in `bc` and the D click in `bd`.
    pub fn count(&self, bc: TimeBin, bd: TimeBin) -> usize {
        self.pairs
            .iter()
            .filter(|p| p.bin_of(Detector::C) == bc && p.bin_of(Detector::D) == bd)
            .count()
    }
}

/// Clicks of one detector as `(cycle, time in cycle)`.
pub(crate) fn cycle_times(rec: &Recording, det: Detector, period_ps: u64) -> Vec<(u64, f64)> {
    rec.stream(det)
        .iter()
        .map(|(cycle, ps)| {
            // flooring to the TDC grid can put a click a tick before its cycle start
            let rel = ps.saturating_sub(cycle * period_ps);
            (cycle, rel as f64 * 1e-12)
        })
        .collect()
}

fn gated(v: &[(u64, f64)], gate: (f64, f64)) -> Vec<(u64, f64)> {
    v.iter()
        .copied()
        .filter(|&(_, t)| t >= gate.0 && t < gate.1)
        .collect()
}

/// Pairs every gated C click with every gated D click of the same cycle.
pub fn extract_correlations(
    rec: &Recording,
    period_ps: u64,
    gate: (f64, f64),
    boundary: f64,
) -> CorrelationSet {
    let c = gated(&cycle_times(rec, Detector::C, period_ps), gate);
    let d = gated(&cycle_times(rec, Detector::D, period_ps), gate);
    let bin = |t: f64| {
        if t < boundary {
            TimeBin::I1
        } else {
            TimeBin::I2
        }
    };
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < c.len() && j < d.len() {
        let (ci, di) = (c[i].0, d[j].0);
        if ci < di {
            i += 1;
        } else if di < ci {
            j += 1;
        } else {
            let ie = i + c[i..].iter().take_while(|x| x.0 == ci).count();
            let je = j + d[j..].iter().take_while(|x| x.0 == ci).count();
            for &(_, tc) in &c[i..ie] {
                for &(_, td) in &d[j..je] {
                    let oc = DetectionOutcome::new(Detector::C, bin(tc));
                    let od = DetectionOutcome::new(Detector::D, bin(td));
                    let (first, second) = if tc <= td { (oc, od) } else { (od, oc) };
                    pairs.push(CorrelationPair {
                        first,
                        second,
                        tau: td - tc,
                    });
                }
            }
            i = ie;
            j = je;
        }
    }
    CorrelationSet {
        pairs,
        gate,
        boundary,
    }
}

/// Sum over cycles of (gated clicks in cycle k) × (gated clicks in cycle k + 2).
pub fn two_cycle_products(rec: &Recording, period_ps: u64, gate: (f64, f64)) -> f64 {
    let mut cycles: Vec<u64> = Detector::ALL
        .iter()
        .flat_map(|&det| gated(&cycle_times(rec, det, period_ps), gate))
        .map(|(c, _)| c)
        .collect();
    cycles.sort_unstable();
    let mut runs: Vec<(u64, f64)> = Vec::new();
    for c in cycles {
        match runs.last_mut() {
            Some((k, n)) if *k == c => *n += 1.0,
            _ => runs.push((c, 1.0)),
        }
    }
    runs.iter()
        .map(|&(k, n)| {
            runs.binary_search_by_key(&(k + 2), |r| r.0)
                .map_or(0.0, |idx| n * runs[idx].1)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> Recording {
        let mut r = Recording {
            resolution_ps: 1,
            ..Default::default()
        };
        // cycle 0: C at 100 ns, D at 300 ns and at 700 ns (outside the gate)
        r.c.push(0, 100_000);
        r.d.push(0, 300_000);
        r.d.push(0, 700_000);
        // cycle 2: D at 50 ns, C at 400 ns
        r.d.push(2, 2_050_000);
        r.c.push(2, 2_400_000);
        r
    }

    #[test]
    fn pairs_within_cycles() {
        let set = extract_correlations(&rec(), 1_000_000, (0.0, 450e-9), 225e-9);
        assert_eq!(set.len(), 2);
        let p = set.pairs[0];
        assert_eq!(
            (p.first, p.second),
            (DetectionOutcome::C1, DetectionOutcome::D2)
        );
        assert!((p.tau - 200e-9).abs() < 1e-15);
        let q = set.pairs[1];
        assert_eq!(
            (q.first, q.second),
            (DetectionOutcome::D1, DetectionOutcome::C2)
        );
        assert!((q.tau + 350e-9).abs() < 1e-15);
        assert_eq!(set.count(TimeBin::I2, TimeBin::I1), 1);
    }

    #[test]
    fn two_cycle_product_counts() {
        // cycle 0 has 2 gated clicks, cycle 2 has 2
        assert_eq!(two_cycle_products(&rec(), 1_000_000, (0.0, 450e-9)), 4.0);
    }
}
