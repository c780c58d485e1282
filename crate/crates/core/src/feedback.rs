//! Conditional phase feedback: decision rule, dead-time error model and an
//! event-driven emulation of the TTL controller.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::{
    timebin_output_distribution, CoherenceModel, DetectionOutcome, Detector, OutcomeDistribution,
    OutcomePair,
};
use crate::photon::TimeBin;
use crate::quadrature::simpson;

/// Quadrature panels per axis for the dead-time integral.
const ERROR_RATE_GRID: usize = 1024;

/// Late-bin phase that steers the remaining photon into detector C.
pub fn decide_phase(first_click: Detector) -> f64 {
    match first_click {
        Detector::C => 0.0,
        Detector::D => PI,
    }
}

/// Intensity envelope in units of the photon length: unit mass per half.
fn unit_intensity(u: f64) -> f64 {
    16.0 / 3.0 * (2.0 * PI * u).sin().powi(4)
}

/// Probability that a cross-bin pair (one click per half, intensities each
/// normalized on their half) has its `I2` click within `dead_time` photon
/// lengths of the `I1` click.
pub fn error_rate(dead_time: f64) -> Result<f64> {
    if !(dead_time >= 0.0) {
        return Err(Error::Domain(format!(
            "dead-time fraction must be non-negative, got {dead_time}"
        )));
    }
    let lo = (0.5 - dead_time).max(0.0);
    let outer = |t1: f64| {
        let hi = (t1 + dead_time).min(1.0);
        if hi <= 0.5 {
            return 0.0;
        }
        unit_intensity(t1) * simpson(unit_intensity, 0.5, hi, ERROR_RATE_GRID)
    };
    Ok(simpson(outer, lo, 0.5, ERROR_RATE_GRID))
}

/// Feedback-loop delay broken into contributions, stored in picoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyBudget {
    components: Vec<(String, u64)>,
}

impl Default for LatencyBudget {
    fn default() -> Self {
        Self::new(vec![
            // only the sum of transit and SPCM response is measured
            ("optical transit + SPCM response".into(), 80_000),
            ("circuit response".into(), 7_000),
            ("signal rise time".into(), 5_500),
            ("cable delay".into(), 4_500),
        ])
    }
}

impl LatencyBudget {
    pub fn new(components: Vec<(String, u64)>) -> Self {
        Self { components }
    }

    /// Single lumped delay.
    pub fn lumped(seconds: f64) -> Self {
        Self::new(vec![("total".into(), (seconds * 1e12).round() as u64)])
    }

    pub fn components(&self) -> impl Iterator<Item = (&str, f64)> {
        self.components
            .iter()
            .map(|(l, ps)| (l.as_str(), *ps as f64 * 1e-12))
    }

    pub fn total_ps(&self) -> u64 {
        self.components.iter().map(|(_, ps)| ps).sum()
    }

    pub fn total(&self) -> f64 {
        self.total_ps() as f64 * 1e-12
    }
}

/// Photon-B late phase as a function of time after a first click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseTimeline {
    /// Time the new phase takes effect, if the switch happens at all.
    pub switch_at: Option<f64>,
    pub phase: f64,
}

impl PhaseTimeline {
    pub fn phase_at(&self, t: f64) -> f64 {
        match self.switch_at {
            Some(s) if t >= s => self.phase,
            _ => 0.0,
        }
    }
}

/// Phase applied after a first click at `time`, delayed by `latency`.
/// A switch that would land after `window_end` never happens.
pub fn effective_phase_timeline(
    first: Detector,
    time: f64,
    latency: f64,
    window_end: f64,
) -> PhaseTimeline {
    let phase = decide_phase(first);
    let at = time + latency;
    if phase == 0.0 || at > window_end {
        return PhaseTimeline {
            switch_at: None,
            phase: 0.0,
        };
    }
    PhaseTimeline {
        switch_at: Some(at),
        phase,
    }
}

/// Outcome distribution under ideal (zero-latency) feedback.
pub fn feedback_outcome_distribution(coherence: CoherenceModel) -> OutcomeDistribution {
    let unswitched = timebin_output_distribution(0.0, 0.0, coherence);
    let switched = timebin_output_distribution(PI, 0.0, coherence);
    OutcomeDistribution::from_fn(|pair: OutcomePair| {
        let (x, y) = (pair.first(), pair.second());
        if x.bin == y.bin {
            return unswitched.get(pair);
        }
        let (early, late) = if x.bin == TimeBin::I1 { (x, y) } else { (y, x) };
        let dist = match decide_phase(early.detector) {
            p if p == 0.0 => &unswitched,
            _ => &switched,
        };
        let marginal: f64 = Detector::ALL
            .iter()
            .map(|&d| dist.prob(early, DetectionOutcome::new(d, TimeBin::I2)))
            .sum();
        let cond = dist
            .conditional_second(early, TimeBin::I2)
            .map(|c| c.prob(late.detector))
            .unwrap_or(0.0);
        marginal * cond
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JkMode {
    Toggle,
    Hold,
}

/// Input levels of the controller at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CircuitInputs {
    pub det: bool,
    pub w_det: bool,
    pub w_phase: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircuitOutputs {
    pub phase: bool,
}

/// JK flip-flop, D latch and the wired-AND output stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircuitState {
    pub jk_q: bool,
    pub jk_mode: JkMode,
    pub latch_out: bool,
    pub phase_out: bool,
    prev_det: bool,
    last_time: Option<f64>,
}

impl Default for CircuitState {
    fn default() -> Self {
        Self {
            jk_q: false,
            jk_mode: JkMode::Hold,
            latch_out: false,
            phase_out: false,
            prev_det: false,
            last_time: None,
        }
    }
}

/// Advances the controller to `now` with new input levels.
///
/// A rising `w_det` (latched) clears Q and arms toggle mode. A rising `det`
/// edge while armed toggles Q, after which the JK holds until the next
/// window. `phase = Q ∧ w_phase`.
pub fn circuit_step(
    state: CircuitState,
    inputs: CircuitInputs,
    now: f64,
) -> Result<(CircuitState, CircuitOutputs)> {
    if let Some(last) = state.last_time {
        if now < last {
            return Err(Error::Sequencing { last, now });
        }
    }
    let mut s = state;
    let window_opens = inputs.w_det && !s.latch_out;
    s.latch_out = inputs.w_det;
    if window_opens {
        s.jk_q = false;
        s.jk_mode = JkMode::Toggle;
    } else if !s.latch_out {
        s.jk_mode = JkMode::Hold;
    }
    let det_edge = inputs.det && !s.prev_det;
    if det_edge && s.latch_out && s.jk_mode == JkMode::Toggle {
        s.jk_q = !s.jk_q;
        s.jk_mode = JkMode::Hold;
    }
    s.prev_det = inputs.det;
    s.phase_out = s.jk_q && inputs.w_phase;
    s.last_time = Some(now);
    Ok((s, CircuitOutputs { phase: s.phase_out }))
}

/// `W_det` and `W_phase` pulse timing within one cycle, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowTiming {
    pub w_det: (f64, f64),
    pub w_phase: (f64, f64),
}

impl Default for WindowTiming {
    /// 215 ns pulses centred in the two 225 ns halves of a 450 ns photon.
    fn default() -> Self {
        Self {
            w_det: (5e-9, 220e-9),
            w_phase: (230e-9, 445e-9),
        }
    }
}

impl WindowTiming {
    /// Windows that cover the two photon halves exactly.
    pub fn from_bins(duration: f64) -> Self {
        Self {
            w_det: (0.0, 0.5 * duration),
            w_phase: (0.5 * duration, duration),
        }
    }
}

/// One cycle of the controller fed with clicks of the monitored detector.
///
/// Clicks are given in photon time; the lumped latency shifts the moment
/// the toggled state reaches the photon.
#[derive(Debug, Clone)]
pub struct FeedbackController {
    windows: WindowTiming,
    latency: f64,
    state: CircuitState,
    now: f64,
    toggled_at: Option<f64>,
}

impl FeedbackController {
    pub fn new(windows: WindowTiming, latency: f64) -> Self {
        Self {
            windows,
            latency,
            state: CircuitState::default(),
            now: f64::NEG_INFINITY,
            toggled_at: None,
        }
    }

    fn levels(&self, t: f64, det: bool) -> CircuitInputs {
        let inside = |(a, b): (f64, f64)| t >= a && t < b;
        CircuitInputs {
            det,
            w_det: inside(self.windows.w_det),
            w_phase: inside(self.windows.w_phase),
        }
    }

    fn step(&mut self, t: f64, det: bool) -> Result<()> {
        let before = self.state.jk_q;
        let (s, _) = circuit_step(self.state, self.levels(t, det), t)?;
        self.state = s;
        self.now = t;
        if s.jk_q && !before {
            self.toggled_at = Some(t);
        }
        Ok(())
    }

    /// Runs the window edges up to `t` so the latch sees them in order.
    fn advance_to(&mut self, t: f64) -> Result<()> {
        let mut edges = [
            self.windows.w_det.0,
            self.windows.w_det.1,
            self.windows.w_phase.0,
            self.windows.w_phase.1,
        ];
        edges.sort_by(f64::total_cmp);
        for e in edges {
            if e > self.now && e <= t {
                self.step(e, false)?;
            }
        }
        Ok(())
    }

    /// A click of the monitored detector (D) at photon time `t`.
    pub fn click(&mut self, t: f64) -> Result<()> {
        self.advance_to(t)?;
        self.step(t, true)?;
        // det pulse ends before the next event
        self.step(t, false)
    }

    /// Phase seen by the photon at time `t`, given the clicks so far.
    pub fn phase_at(&self, t: f64) -> f64 {
        let in_phase_window = t >= self.windows.w_phase.0 && t < self.windows.w_phase.1;
        match self.toggled_at {
            Some(s) if in_phase_window && t >= s + self.latency => PI,
            _ => 0.0,
        }
    }

    pub fn state(&self) -> CircuitState {
        self.state
    }

    pub fn switched(&self) -> bool {
        self.toggled_at.is_some()
    }
}
