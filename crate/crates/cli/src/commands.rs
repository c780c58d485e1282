use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use hom_core::analysis::{
    analyze, contrast_visibility, ratio_visibility, AnalysisResult, Estimate,
};
use hom_core::feedback::error_rate;
use hom_core::interference::JointDensityCurve;
use hom_core::sim::{run_experiment, Recording};
use hom_core::ScenarioKind;
use serde_json::{json, Value};

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;

pub struct Output {
    dir: PathBuf,
    format: OutputFormat,
}

impl Output {
    pub fn new(dir: PathBuf, format: OutputFormat) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { dir, format })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.path(name);
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        Ok((path, BufWriter::new(f)))
    }

    pub fn write_with(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.create(name)?;
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, v: &Value) -> Result<PathBuf, CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, v)?;
            writeln!(w)
        })
    }

    /// A table in the configured format: `csv` writes via `f`, `json` writes `v`.
    pub fn write_table(
        &self,
        stem: &str,
        v: &Value,
        f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<PathBuf, CliError> {
        match self.format {
            OutputFormat::Csv => self.write_with(&format!("{stem}.csv"), f),
            OutputFormat::Json => self.write_json(&format!("{stem}.json"), v),
        }
    }
}

pub struct TheoryResult {
    pub curve: JointDensityCurve,
    pub normalization: f64,
    pub seconds: f64,
}

pub fn theory(cfg: &RunConfig, kind: ScenarioKind, out: &Output) -> Result<TheoryResult, CliError> {
    let start = Instant::now();
    let scenario = cfg.scenario_for(kind)?;
    let curve = scenario
        .joint_density(cfg.latency().total())?
        .curve(cfg.theory_points)?;
    let seconds = start.elapsed().as_secs_f64();
    let normalization = curve.integral_cross() + curve.integral_same();

    out.write_table(
        &format!("theory_{kind}"),
        &serde_json::to_value(&curve).unwrap(),
        |w| curve.write_csv(w),
    )?;
    let dist = scenario.outcome_distribution();
    out.write_json(
        &format!("outcomes_{kind}.json"),
        &json!({
            "scenario": kind.to_string(),
            "mu": cfg.mu,
            "probabilities": dist.to_json(),
            "integral_cross": curve.integral_cross(),
            "integral_same": curve.integral_same(),
        }),
    )?;
    Ok(TheoryResult {
        curve,
        normalization,
        seconds,
    })
}

pub fn simulate(
    cfg: &RunConfig,
    kind: ScenarioKind,
    n_cycles: u64,
    out: &Output,
) -> Result<(Recording, PathBuf), CliError> {
    let exp = cfg.experiment(kind)?;
    let run = run_experiment(&exp, n_cycles)?;
    let path = out.write_with(&format!("timestamps_{kind}.csv"), |w| {
        run.recording.write_csv(w)
    })?;
    out.write_with(&format!("truth_{kind}.jsonl"), |w| run.truth.write_jsonl(w))?;
    Ok((run.recording, path))
}

pub fn read_recording(path: &Path, resolution_ps: u64) -> Result<Recording, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(Recording::read_csv(BufReader::new(f), resolution_ps)?)
}

pub fn analyze_one(
    cfg: &RunConfig,
    kind: ScenarioKind,
    rec: &Recording,
    n_cycles: Option<u64>,
    out: &Output,
) -> Result<AnalysisResult, CliError> {
    let res = analyze(rec, &cfg.analysis(n_cycles))?;
    let h = &res.histogram;
    out.write_table(
        &format!("histogram_{kind}"),
        &serde_json::to_value(h).unwrap(),
        |w| h.write_csv(w),
    )?;
    let m = &res.matrix;
    out.write_table(
        &format!("matrix_{kind}"),
        &serde_json::to_value(m).unwrap(),
        |w| m.write_csv(w),
    )?;
    let mut summary = res.summary_json();
    summary["scenario"] = json!(kind.to_string());
    if kind == ScenarioKind::Feedback {
        summary["v_feed"] = visibility_json(contrast_visibility(m.c2d1, m.c1d2, "V_feed"));
    }
    out.write_json(&format!("analysis_{kind}.json"), &summary)?;
    Ok(res)
}

fn visibility_json(v: hom_core::Result<Estimate>) -> Value {
    match v {
        Ok(e) => json!({"value": e.value, "sigma": e.sigma}),
        Err(e) => json!({"error": e.to_string()}),
    }
}

/// Every visibility the available datasets support.
pub fn visibilities(results: &[(ScenarioKind, &AnalysisResult)]) -> Value {
    let find = |k| {
        results
            .iter()
            .find(|(kind, _)| *kind == k)
            .map(|(_, r)| &r.matrix)
    };
    let (a, b, c, d) = (
        find(ScenarioKind::Perpendicular),
        find(ScenarioKind::ParallelPhi0),
        find(ScenarioKind::ParallelPhiPi),
        find(ScenarioKind::Feedback),
    );
    let mut v = serde_json::Map::new();
    if let (Some(a), Some(b)) = (a, b) {
        v.insert(
            "v_hom".into(),
            visibility_json(ratio_visibility(b.all(), a.all(), "V_HOM")),
        );
        v.insert(
            "v_ref".into(),
            visibility_json(ratio_visibility(
                b.cross_interval(),
                a.cross_interval(),
                "V_ref",
            )),
        );
    }
    if let (Some(b), Some(c)) = (b, c) {
        v.insert(
            "v_phi".into(),
            visibility_json(contrast_visibility(
                c.cross_interval(),
                b.cross_interval(),
                "V_phi",
            )),
        );
    }
    if let Some(d) = d {
        v.insert(
            "v_feed".into(),
            visibility_json(contrast_visibility(d.c2d1, d.c1d2, "V_feed")),
        );
    }
    Value::Object(v)
}

/// Pearson χ² of the measured windows against `P_joint` averaged over each
/// window, with the expected accidentals added back. Windows expecting
/// fewer than five counts are skipped.
pub fn chi_square(res: &AnalysisResult, curve: &JointDensityCurve) -> (f64, usize) {
    let h = &res.histogram;
    let mut chi2 = 0.0;
    let mut dof = 0;
    for i in 0..h.centers.len() {
        let (lo, hi) = (h.centers[i] - 0.5 * h.width, h.centers[i] + 0.5 * h.width);
        let expected = res.pair_experiments * h.width * curve.cross_mean(lo, hi) + h.background[i];
        if expected >= 5.0 {
            chi2 += (h.counts[i] - expected).powi(2) / expected;
            dof += 1;
        }
    }
    (chi2, dof)
}

pub fn sweep_error_rate(
    from: f64,
    to: f64,
    steps: usize,
    photon_length: f64,
    out: &Output,
) -> Result<Vec<(f64, f64)>, CliError> {
    if !(steps >= 2 && to > from && from >= 0.0) {
        return Err(CliError::Config(format!(
            "sweep needs 0 ≤ from < to and at least 2 steps, got {from}..{to} in {steps}"
        )));
    }
    let rows: Vec<(f64, f64)> = (0..steps)
        .map(|i| {
            let t = from + (to - from) * i as f64 / (steps - 1) as f64;
            error_rate(t).map(|e| (t, e))
        })
        .collect::<hom_core::Result<_>>()?;
    let v = json!(rows
        .iter()
        .map(|&(t, e)| json!({"dead_time_fraction": t, "dead_time_ns": t * photon_length * 1e9, "error_rate": e}))
        .collect::<Vec<_>>());
    out.write_table("error_rate", &v, |w| {
        writeln!(w, "dead_time_fraction,dead_time_ns,error_rate")?;
        for &(t, e) in &rows {
            writeln!(w, "{t},{},{e}", t * photon_length * 1e9)?;
        }
        Ok(())
    })?;
    Ok(rows)
}

pub fn reproduce_all(cfg: &RunConfig, n_cycles: u64, out: &Output) -> Result<Value, CliError> {
    let mut theories = Vec::new();
    let mut analyses = Vec::new();
    let mut per_scenario = serde_json::Map::new();
    for kind in ScenarioKind::ALL {
        let th = theory(cfg, kind, out)?;
        let start = Instant::now();
        let (rec, _) = simulate(cfg, kind, n_cycles, out)?;
        let sim_seconds = start.elapsed().as_secs_f64();
        let res = analyze_one(cfg, kind, &rec, Some(n_cycles), out)?;
        let (chi2, dof) = chi_square(&res, &th.curve);
        let chi2_per_dof = if dof > 0 { chi2 / dof as f64 } else { f64::NAN };
        per_scenario.insert(
            kind.to_string(),
            json!({
                "normalization": th.normalization,
                "theory_seconds": th.seconds,
                "simulation_seconds": sim_seconds,
                "snr": res.snr,
                "pair_experiments": res.pair_experiments,
                "cross_bin_matrix": res.summary_json()["cross_bin_matrix"],
                "chi2": chi2,
                "dof": dof,
                "chi2_per_dof": chi2_per_dof,
                "chi2_ok": chi2_per_dof < cfg.max_chi2_per_dof,
            }),
        );
        theories.push(th);
        analyses.push((kind, res));
    }
    let refs: Vec<_> = analyses.iter().map(|(k, r)| (*k, r)).collect();
    let vis = visibilities(&refs);
    let within = |name: &str| {
        vis[name]["value"]
            .as_f64()
            .map(|v| (v - cfg.mu).abs() <= cfg.visibility_tolerance)
    };
    let latency = cfg.latency().total();
    let summary = json!({
        "n_cycles": n_cycles,
        "mu": cfg.mu,
        "seed": cfg.seed,
        "noiseless": cfg.noiseless,
        "feedback_latency_ns": latency * 1e9,
        "expected_feedback_error_rate": error_rate(latency / (cfg.photon_length_ns * 1e-9))?,
        "scenarios": per_scenario,
        "visibilities": vis,
        "v_ref_matches_mu": within("v_ref"),
    });
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}
