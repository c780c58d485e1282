//! Accidental-coincidence model built from the single-detector rates.
//!
//! `m_B` is the flat background and `m_P` the photon part of each
//! detector's click density inside the gate, both in clicks per cycle per
//! second on a common grid starting at the gate opening. Their pairwise
//! cross-correlations give the expected number of accidental C×D pairs per
//! cycle at each `τ = t_D − t_C`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interference::Detector;

/// Single-detector densities over the gated window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackgroundModel {
    /// Grid spacing in seconds.
    pub dt: f64,
    /// Indexed by [`Detector::index`].
    pub m_b: [Vec<f64>; 2],
    pub m_p: [Vec<f64>; 2],
}

impl BackgroundModel {
    pub fn new(dt: f64, m_b: [Vec<f64>; 2], m_p: [Vec<f64>; 2]) -> Result<Self> {
        let n = m_b[0].len();
        if [&m_b[1], &m_p[0], &m_p[1]].iter().any(|v| v.len() != n) || n == 0 {
            return Err(Error::GridMismatch(
                "background and photon densities must share one non-empty grid".into(),
            ));
        }
        if !(dt > 0.0) {
            return Err(Error::GridMismatch(format!(
                "grid spacing must be positive, got {dt}"
            )));
        }
        let all = m_b.iter().chain(&m_p).flatten();
        if all.clone().any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("densities must be non-negative".into()));
        }
        Ok(Self { dt, m_b, m_p })
    }

    pub fn len(&self) -> usize {
        self.m_b[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Expected accidental C×D pairs per cycle with the C click in
    /// `[c_lo, c_hi)` and the D click in `[d_lo, d_hi)`, times relative to
    /// the grid start. Photon–photon products are left out.
    pub fn quadrant(&self, c: (f64, f64), d: (f64, f64)) -> f64 {
        let mass = |v: &[f64], (lo, hi): (f64, f64)| -> f64 {
            v.iter()
                .enumerate()
                .map(|(i, x)| {
                    let (a, b) = (i as f64 * self.dt, (i + 1) as f64 * self.dt);
                    x * (b.min(hi) - a.max(lo)).max(0.0)
                })
                .sum()
        };
        let (ic, id) = (Detector::C.index(), Detector::D.index());
        let (bc, pc) = (mass(&self.m_b[ic], c), mass(&self.m_p[ic], c));
        let (bd, pd) = (mass(&self.m_b[id], d), mass(&self.m_p[id], d));
        bc * bd + bc * pd + pc * bd
    }
}

/// Cross-correlations of the single-detector densities on `τ = k·dt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackgroundCorrelations {
    pub dt: f64,
    pub tau: Vec<f64>,
    pub m_bb: Vec<f64>,
    pub m_bp: Vec<f64>,
    pub m_pb: Vec<f64>,
    pub m_pp: Vec<f64>,
    pub m_total: Vec<f64>,
}

/// `M_XY(τ) = ∫ m_X^C(t)·m_Y^D(t + τ) dt` over `[0, window)`.
fn correlate(c: &[f64], d: &[f64], n: usize, dt: f64) -> Vec<f64> {
    let n = n as isize;
    (-(n - 1)..n)
        .map(|k| {
            let lo = 0.max(-k);
            let hi = n.min(n - k);
            (lo..hi)
                .map(|i| c[i as usize] * d[(i + k) as usize])
                .sum::<f64>()
                * dt
        })
        .collect()
}

/// The four correlation terms over the first `window` seconds of the grid.
pub fn background_correlations(
    model: &BackgroundModel,
    window: f64,
) -> Result<BackgroundCorrelations> {
    let n = (window / model.dt).round() as usize;
    if n == 0 || n > model.len() || (n as f64 * model.dt - window).abs() > 1e-6 * model.dt {
        return Err(Error::GridMismatch(format!(
            "window {window} s is not a whole number of {} s grid steps within the model",
            model.dt
        )));
    }
    let (ic, id) = (Detector::C.index(), Detector::D.index());
    let dt = model.dt;
    let m_bb = correlate(&model.m_b[ic], &model.m_b[id], n, dt);
    let m_bp = correlate(&model.m_b[ic], &model.m_p[id], n, dt);
    let m_pb = correlate(&model.m_p[ic], &model.m_b[id], n, dt);
    let m_pp = correlate(&model.m_p[ic], &model.m_p[id], n, dt);
    let m_total = (0..m_bb.len())
        .map(|k| m_bb[k] + m_bp[k] + m_pb[k] + m_pp[k])
        .collect();
    let tau = (0..m_bb.len())
        .map(|k| (k as f64 - (n - 1) as f64) * dt)
        .collect();
    Ok(BackgroundCorrelations {
        dt,
        tau,
        m_bb,
        m_bp,
        m_pb,
        m_pp,
        m_total,
    })
}

impl BackgroundCorrelations {
    /// `M_total − M_PP`, the part that is subtracted.
    pub fn subtracted(&self, k: usize) -> f64 {
        self.m_total[k] - self.m_pp[k]
    }

    /// Expected accidental pairs per cycle with `τ ∈ [lo, hi)`.
    ///
    /// Each grid value stands for pair offsets spread over one step centred
    /// on its `τ`, so the integral is a sum of overlap lengths.
    pub fn expected(&self, lo: f64, hi: f64) -> f64 {
        let h = 0.5 * self.dt;
        self.tau
            .iter()
            .enumerate()
            .map(|(k, t)| self.subtracted(k) * ((t + h).min(hi) - (t - h).max(lo)).max(0.0))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_background_gives_triangle() {
        let (n, dt, r) = (50, 1e-9, 3e6);
        let m = BackgroundModel::new(dt, [vec![r; n], vec![r; n]], [vec![0.0; n], vec![0.0; n]])
            .unwrap();
        let corr = background_correlations(&m, n as f64 * dt).unwrap();
        let t = n as f64 * dt;
        for (k, tau) in corr.tau.iter().enumerate() {
            let oracle = r * r * (t - tau.abs());
            assert!((corr.m_bb[k] - oracle).abs() < 1e-9 * oracle.max(1.0));
            assert_eq!(corr.m_bp[k], 0.0);
        }
    }

    #[test]
    fn spikes_correlate_at_offset() {
        let (n, dt) = (40, 1e-9);
        let mut bc = vec![0.0; n];
        let mut pd = vec![0.0; n];
        bc[7] = 1.0;
        pd[25] = 1.0;
        let m = BackgroundModel::new(dt, [bc, vec![0.0; n]], [vec![0.0; n], pd]).unwrap();
        let corr = background_correlations(&m, n as f64 * dt).unwrap();
        let k = corr
            .m_bp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((corr.tau[k] - 18e-9).abs() < 1e-15);
    }

    #[test]
    fn mismatched_grid_rejected() {
        let r = BackgroundModel::new(
            1e-9,
            [vec![0.0; 3], vec![0.0; 4]],
            [vec![0.0; 3], vec![0.0; 3]],
        );
        assert!(matches!(r, Err(Error::GridMismatch(_))));
    }
}
