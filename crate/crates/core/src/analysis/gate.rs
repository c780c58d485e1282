//! Fit of the per-cycle arrival histogram: a constant background, the
//! double-hump photon window on `(p1, p2)` and a repump-light plateau on
//! `(p3, p4)`.
//!
//! The model is compared with the data as bin averages, which keeps the
//! objective continuous in the breakpoints even when they sit inside a bin.
//! The three amplitudes enter linearly and are solved for exactly at every
//! trial set of breakpoints, so the search only runs over `p1..p4`.

use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use serde::Serialize;

use crate::error::{Error, Result};

/// Minimum number of histogram bins accepted by [`fit_gate`].
pub const MIN_GATE_BINS: usize = 100;

const GRID_STEPS: usize = 40;
const COARSE_BINS: usize = 100;
const NM_STARTS: usize = 2;
const NM_ITERATIONS: u64 = 800;

/// Clicks per bin of cycle time, one full repetition period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrivalHistogram {
    pub period: f64,
    pub counts: Vec<f64>,
}

impl ArrivalHistogram {
    pub fn new(period: f64, counts: Vec<f64>) -> Self {
        Self { period, counts }
    }

    pub fn bin_width(&self) -> f64 {
        self.period / self.counts.len() as f64
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.counts.len() != other.counts.len() || self.period != other.period {
            return Err(Error::GridMismatch(
                "arrival histograms differ in binning".into(),
            ));
        }
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self::new(self.period, counts))
    }

    /// Sums groups of adjacent bins and keeps the per-fine-bin mean, so the
    /// model amplitudes stay on the same scale.
    fn coarsen(&self, target: usize) -> (Vec<f64>, usize) {
        let group = (self.counts.len() / target).max(1);
        let counts = self
            .counts
            .chunks(group)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        (counts, group)
    }
}

/// Photon term of the gate model over `u = 2π(t − p1)/(p2 − p1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum GateShape {
    /// `sin²u`, the published fit form.
    #[default]
    SinSquared,
    /// `sin⁴u`, the click density of a `sin²` amplitude envelope.
    SinFourth,
}

impl GateShape {
    fn value(self, u: f64) -> f64 {
        match self {
            GateShape::SinSquared => u.sin().powi(2),
            GateShape::SinFourth => u.sin().powi(4),
        }
    }

    /// Antiderivative in `u`.
    fn primitive(self, u: f64) -> f64 {
        match self {
            GateShape::SinSquared => 0.5 * u - 0.25 * (2.0 * u).sin(),
            GateShape::SinFourth => 0.375 * u - 0.25 * (2.0 * u).sin() + (4.0 * u).sin() / 32.0,
        }
    }
}

/// Fitted gate parameters, in counts per bin and seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    /// `sqrt(Σ (data − model)²)` over the fitted histogram.
    pub residual: f64,
    pub shape: GateShape,
}

impl GateFit {
    /// Point value `g(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let mut g = self.a;
        if t > self.p1 && t < self.p2 {
            g += self.b
                * self
                    .shape
                    .value(2.0 * PI * (t - self.p1) / (self.p2 - self.p1));
        }
        if t > self.p3 && t < self.p4 {
            g += self.c;
        }
        g
    }

    /// Mean of `g` over `[lo, hi)`.
    pub fn bin_average(&self, lo: f64, hi: f64) -> f64 {
        let basis = Basis::new([self.p1, self.p2, self.p3, self.p4], self.shape);
        let (s, r) = basis.columns(lo, hi);
        self.a + self.b * s + self.c * r
    }

    /// Expected histogram with `bins` bins over `period`.
    pub fn synthesize(&self, period: f64, bins: usize) -> ArrivalHistogram {
        let w = period / bins as f64;
        let counts = (0..bins)
            .map(|i| self.bin_average(i as f64 * w, (i + 1) as f64 * w))
            .collect();
        ArrivalHistogram::new(period, counts)
    }

    /// Gated photon window length `p2 − p1`.
    pub fn photon_window(&self) -> f64 {
        self.p2 - self.p1
    }

    /// Boundary between the two time bins.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.p1 + self.p2)
    }
}

struct Basis {
    p: [f64; 4],
    shape: GateShape,
}

impl Basis {
    fn new(p: [f64; 4], shape: GateShape) -> Self {
        Self { p, shape }
    }

    /// Bin averages of the photon shape and the repump plateau over `[lo, hi)`.
    fn columns(&self, lo: f64, hi: f64) -> (f64, f64) {
        let [p1, p2, p3, p4] = self.p;
        let w = hi - lo;
        let len = p2 - p1;
        let k = 2.0 * PI / len;
        let prim = |x: f64| self.shape.primitive(k * (x - p1)) / k;
        let (a, b) = (lo.max(p1), hi.min(p2));
        let s = if b > a { (prim(b) - prim(a)) / w } else { 0.0 };
        let r = (hi.min(p4) - lo.max(p3)).max(0.0) / w;
        (s, r)
    }
}

/// Normal-equation sums for the columns `(1, s, r)` and the data.
struct Gram {
    xx: [[f64; 3]; 3],
    xy: [f64; 3],
    yy: f64,
}

impl Gram {
    fn new(basis: &Basis, counts: &[f64], period: f64) -> Self {
        let w = period / counts.len() as f64;
        let mut g = Gram {
            xx: [[0.0; 3]; 3],
            xy: [0.0; 3],
            yy: 0.0,
        };
        for (i, &y) in counts.iter().enumerate() {
            let (s, r) = basis.columns(i as f64 * w, (i + 1) as f64 * w);
            let x = [1.0, s, r];
            for j in 0..3 {
                for k in 0..3 {
                    g.xx[j][k] += x[j] * x[k];
                }
                g.xy[j] += x[j] * y;
            }
            g.yy += y * y;
        }
        g
    }

    /// Least squares over the columns in `active`; `None` if singular.
    fn solve(&self, active: &[usize]) -> Option<([f64; 3], f64)> {
        let k = active.len();
        let mut m = [[0.0; 4]; 3];
        for (i, &ci) in active.iter().enumerate() {
            for (j, &cj) in active.iter().enumerate() {
                m[i][j] = self.xx[ci][cj];
            }
            m[i][k] = self.xy[ci];
        }
        // Gauss–Jordan with partial pivoting
        for col in 0..k {
            let piv = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
            if m[piv][col].abs() < 1e-12 * (1.0 + self.xx[0][0]) {
                return None;
            }
            m.swap(col, piv);
            for row in 0..k {
                if row != col {
                    let f = m[row][col] / m[col][col];
                    for j in col..=k {
                        m[row][j] -= f * m[col][j];
                    }
                }
            }
        }
        let mut coef = [0.0; 3];
        for (i, &ci) in active.iter().enumerate() {
            coef[ci] = m[i][k] / m[i][i];
        }
        // SSE = y·y − 2c·Xᵀy + cᵀ(XᵀX)c
        let mut sse = self.yy;
        for j in 0..3 {
            sse -= 2.0 * coef[j] * self.xy[j];
            for l in 0..3 {
                sse += coef[j] * self.xx[j][l] * coef[l];
            }
        }
        Some((coef, sse.max(0.0)))
    }
}

/// Best non-negative `(a, b, c)` for fixed breakpoints, and its SSE.
///
/// Every active set of the three bounds is tried; with three unknowns that
/// is cheaper than an iterative NNLS solver.
fn profile(basis: &Basis, counts: &[f64], period: f64) -> Option<([f64; 3], f64)> {
    const SUBSETS: [&[usize]; 7] = [&[0, 1, 2], &[0, 1], &[0, 2], &[1, 2], &[0], &[1], &[2]];
    let gram = Gram::new(basis, counts, period);
    let mut best: Option<([f64; 3], f64)> = Some(([0.0; 3], gram.yy));
    for active in SUBSETS {
        let Some((coef, sse)) = gram.solve(active) else {
            continue;
        };
        if coef.iter().any(|&c| c < 0.0) {
            continue;
        }
        if best.is_none_or(|(_, e)| sse < e) {
            best = Some((coef, sse));
        }
    }
    best
}

/// Direct residual, free of the cancellation in the normal-equation form.
fn residual(basis: &Basis, coef: [f64; 3], counts: &[f64], period: f64) -> f64 {
    let w = period / counts.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let (s, r) = basis.columns(i as f64 * w, (i + 1) as f64 * w);
            (y - coef[0] - coef[1] * s - coef[2] * r).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn feasible(p: &[f64; 4], period: f64) -> bool {
    let [p1, p2, p3, p4] = *p;
    p1 >= 0.0 && p1 < p2 && p2 <= p3 && p3 < p4 && p4 <= period
}

struct Objective<'a> {
    counts: &'a [f64],
    period: f64,
    shape: GateShape,
}

impl Objective<'_> {
    /// SSE at breakpoints given as fractions of the period.
    fn sse(&self, x: &[f64]) -> f64 {
        let p = [x[0], x[1], x[2], x[3]].map(|v| v * self.period);
        if !feasible(&p, self.period) {
            return f64::MAX;
        }
        profile(&Basis::new(p, self.shape), self.counts, self.period).map_or(f64::MAX, |(_, e)| e)
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.sse(x))
    }
}

fn nelder_mead(
    obj: Objective<'_>,
    start: &[f64],
    step: f64,
    tolerance: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut simplex = vec![start.to_vec()];
    for i in 0..start.len() {
        let mut v = start.to_vec();
        // step inward so the vertex stays feasible near the period edges
        v[i] += if v[i] + step <= 1.0 { step } else { -step };
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(tolerance)
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    let res = Executor::new(obj, solver)
        .configure(|s| s.max_iters(NM_ITERATIONS))
        .run()
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    let state = res.state();
    let best = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::FitFailure("no best parameters".into()))?;
    Ok((best, state.get_best_cost()))
}

/// Amplitudes `(a, b, c)` for fixed breakpoints.
pub fn fit_amplitudes(hist: &ArrivalHistogram, p: [f64; 4], shape: GateShape) -> Result<GateFit> {
    if !feasible(&p, hist.period) {
        return Err(Error::FitFailure(format!(
            "breakpoints {p:?} are not ordered within the period"
        )));
    }
    let basis = Basis::new(p, shape);
    let (coef, _) = profile(&basis, &hist.counts, hist.period)
        .ok_or_else(|| Error::FitFailure("singular amplitude fit".into()))?;
    let [a, b, c] = coef;
    let [p1, p2, p3, p4] = p;
    let residual = residual(&basis, coef, &hist.counts, hist.period);
    Ok(GateFit {
        a,
        b,
        c,
        p1,
        p2,
        p3,
        p4,
        residual,
        shape,
    })
}

/// Fits `g(t)` with the `sin²` photon term to one arrival histogram.
pub fn fit_gate(hist: &ArrivalHistogram) -> Result<GateFit> {
    fit_gate_with(hist, GateShape::SinSquared)
}

/// Fits `g(t)` with the given photon term.
pub fn fit_gate_with(hist: &ArrivalHistogram, shape: GateShape) -> Result<GateFit> {
    let n = hist.counts.len();
    if n < MIN_GATE_BINS {
        return Err(Error::FitFailure(format!(
            "histogram has {n} bins, need at least {MIN_GATE_BINS}"
        )));
    }
    if hist.counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::FitFailure(
            "counts must be finite and non-negative".into(),
        ));
    }
    if hist.total() <= 0.0 {
        return Err(Error::FitFailure("histogram is empty".into()));
    }
    let period = hist.period;

    // coarse grid on a rebinned copy
    let (coarse, group) = hist.coarsen(COARSE_BINS);
    let coarse_period = period * (coarse.len() * group) as f64 / n as f64;
    let grid: Vec<f64> = (0..=GRID_STEPS)
        .map(|i| i as f64 / GRID_STEPS as f64)
        .collect();
    let mut candidates: Vec<(f64, [f64; 4])> = Vec::new();
    for (i1, &x1) in grid.iter().enumerate() {
        for (i2, &x2) in grid.iter().enumerate().skip(i1 + 1) {
            for (i3, &x3) in grid.iter().enumerate().skip(i2) {
                for &x4 in grid.iter().skip(i3 + 1) {
                    let p = [x1, x2, x3, x4].map(|v| v * coarse_period);
                    if let Some((_, e)) = profile(&Basis::new(p, shape), &coarse, coarse_period) {
                        candidates.push((e, [x1, x2, x3, x4]));
                    }
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = coarse_period / period;

    let tolerance = 1e-13 * hist.counts.iter().map(|y| y * y).sum::<f64>();
    let objective = || Objective {
        counts: &hist.counts,
        period,
        shape,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (_, start) in candidates.iter().take(NM_STARTS) {
        let start: Vec<f64> = start.iter().map(|v| v * scale).collect();
        let step = 0.5 / GRID_STEPS as f64;
        let mut current = nelder_mead(objective(), &start, step, tolerance)?;
        // restarts shed a collapsed simplex
        for restart in 1..=3 {
            let step = step * 0.1f64.powi(restart);
            let next = nelder_mead(objective(), &current.0, step, tolerance * 1e-6)?;
            if next.1 <= current.1 {
                current = next;
            }
        }
        if best.as_ref().is_none_or(|b| current.1 < b.1) {
            best = Some(current);
        }
    }
    let (x, sse) = best.ok_or_else(|| Error::FitFailure("no feasible starting point".into()))?;
    if sse == f64::MAX {
        return Err(Error::FitFailure("search left the feasible region".into()));
    }
    fit_amplitudes(hist, [x[0], x[1], x[2], x[3]].map(|v| v * period), shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> GateFit {
        GateFit {
            a: 2.0,
            b: 50.0,
            c: 20.0,
            p1: 0.0,
            p2: 450e-9,
            p3: 500e-9,
            p4: 1000e-9,
            residual: 0.0,
            shape: GateShape::SinSquared,
        }
    }

    #[test]
    fn bin_average_matches_quadrature() {
        let g = GateFit {
            p1: 13e-9,
            ..reference()
        };
        let (lo, hi) = (10e-9, 20.5e-9);
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let mid: f64 = (0..n)
            .map(|i| g.eval(lo + (i as f64 + 0.5) * h))
            .sum::<f64>()
            / n as f64;
        assert!((g.bin_average(lo, hi) - mid).abs() < 1e-6);
    }

    #[test]
    fn empty_histogram_fails() {
        let h = ArrivalHistogram::new(1e-6, vec![0.0; 200]);
        assert!(matches!(fit_gate(&h), Err(Error::FitFailure(_))));
        let h = ArrivalHistogram::new(1e-6, vec![1.0; 50]);
        assert!(fit_gate(&h).is_err());
    }
}
