//! Config-driven runs and their artifacts.
//!
//! A run evaluates the configured protocol at every sweep point and renders:
//!
//! - `summary.json`: the effective config, every result with its oracle
//!   values, and the built-in consistency checks;
//! - `sweep.csv` (or `sweep.json`): one row per table entry, with a leading
//!   `sweep_value` column that is empty without a sweep;
//! - `shots.csv` (`shots_NNN.csv` per sweep point) when shots are recorded.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::carbon13::{xy_spectrum, SpectrumPoint};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::io::{json_bytes, shots_csv, write_atomic, Table};
use crate::metrology::{sensitivity_curves, CurvePoint};
use crate::protocols::{
    run_bell_covariance, run_c13_phase_cycle, run_phase_cycle, run_tppi_fidelity, run_two_time_overlap,
    run_two_time_swap, BellRunResult, Estimate, FidelityReport, PhaseCycleResult, RunSettings, TwoTimeResult,
};
use crate::readout::ShotRecord;

/// z-score beyond which an estimate is flagged as inconsistent with its oracle.
pub const CHECK_Z: f64 = 4.0;

/// Outcome of one named consistency check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, detail }
    }

    fn z(name: &str, est: &Estimate, target: f64, extra_se: f64) -> Self {
        let z = (est.value - target) / est.error().hypot(extra_se);
        Check::new(name, z.abs() < CHECK_Z, format!("estimate {} vs oracle {target}, z = {z:.2}", est.value))
    }
}

/// Result of one protocol evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ProtocolOutput {
    PhaseCycle(PhaseCycleResult),
    Bell(BellRunResult),
    Tppi(FidelityReport),
    TwoTime(TwoTimeResult),
    Curves(Vec<CurvePoint>),
    Spectrum(Vec<SpectrumPoint>),
}

pub fn run_experiment(exp: &Experiment, s: &RunSettings) -> Result<ProtocolOutput> {
    Ok(match exp {
        Experiment::PhaseCycle(p) => ProtocolOutput::PhaseCycle(run_phase_cycle(p, s)?),
        Experiment::C13Cycle(p) => ProtocolOutput::PhaseCycle(run_c13_phase_cycle(&p.cycle, &p.c13, s)?),
        Experiment::BellCovar(p) => ProtocolOutput::Bell(run_bell_covariance(p, s)?),
        Experiment::TppiFidelity(p) => ProtocolOutput::Tppi(run_tppi_fidelity(p, s)?),
        Experiment::TwoTimeSwap(p) => ProtocolOutput::TwoTime(run_two_time_swap(p, s)?),
        Experiment::TwoTimeOverlap(p) => ProtocolOutput::TwoTime(run_two_time_overlap(p, s)?),
        Experiment::SensitivityCurve(p) => {
            ProtocolOutput::Curves(sensitivity_curves(p.t, p.t_e, p.t2, &p.curves, &p.times))
        }
        Experiment::XySpectrum(p) => ProtocolOutput::Spectrum(xy_spectrum(&p.coupling, &p.taus, p.n_pulses)?),
    })
}

impl ProtocolOutput {
    pub fn shots(&self) -> &[ShotRecord] {
        match self {
            ProtocolOutput::PhaseCycle(r) => &r.shots,
            ProtocolOutput::Bell(r) => &r.shots,
            ProtocolOutput::Tppi(r) => &r.shots,
            ProtocolOutput::TwoTime(r) => &r.shots,
            ProtocolOutput::Curves(_) | ProtocolOutput::Spectrum(_) => &[],
        }
    }

    pub fn checks(&self) -> Vec<Check> {
        match self {
            ProtocolOutput::PhaseCycle(r) => {
                let mut out = vec![Check::new(
                    "no_drift",
                    !r.drift_warning,
                    format!("mean residual {} ± {}", r.mean_residual, r.mean_residual_se),
                )];
                if let Some(e) = r.expected_cov {
                    out.push(Check::z("cov_matches_oracle", &r.cov, e, 0.0));
                }
                out
            }
            ProtocolOutput::Bell(r) => {
                let mut out = Vec::new();
                if let Some(e) = r.expected_r_ideal {
                    out.push(Check::z("r_ideal_matches_oracle", &r.r_ideal, e, 0.0));
                }
                if let Some(c) = &r.contrast {
                    if let Some(e) = c.expected {
                        out.push(Check::z("contrast_difference_matches_oracle", &c.difference, e, 0.0));
                    }
                }
                out
            }
            ProtocolOutput::Tppi(r) => vec![
                Check::new(
                    "oscillation_at_twice_increment",
                    (r.frequency_phi / r.frequency_expected - 1.0).abs() < 1e-2,
                    format!("{} Hz vs {} Hz", r.frequency_phi, r.frequency_expected),
                ),
                Check::new(
                    "psi_flat",
                    r.amplitude_psi < 0.05 * r.amplitude_phi.max(f64::MIN_POSITIVE),
                    format!("amplitude ratio {}", r.amplitude_psi / r.amplitude_phi),
                ),
                Check::new(
                    "fit_recovers_state",
                    (r.a0_fit - r.a0_true).abs() < 0.05,
                    format!("a0 {} vs {}", r.a0_fit, r.a0_true),
                ),
            ],
            ProtocolOutput::TwoTime(r) => r
                .points
                .iter()
                .map(|p| {
                    Check::z(
                        &format!("point_{:.4}us_matches_oracle", p.t * 1e6),
                        &p.correlation,
                        p.expected,
                        p.expected_se,
                    )
                })
                .collect(),
            ProtocolOutput::Curves(c) => vec![Check::new(
                "feasible_points",
                c.iter().any(|p| p.sigma_b.is_some()),
                format!("{} of {} points feasible", c.iter().filter(|p| p.sigma_b.is_some()).count(), c.len()),
            )],
            ProtocolOutput::Spectrum(_) => Vec::new(),
        }
    }

    /// Plot-ready rows.
    pub fn table(&self) -> Table {
        match self {
            ProtocolOutput::PhaseCycle(r) => {
                let mut t = Table::new(vec![
                    "cov",
                    "cov_se",
                    "cov_raw",
                    "baseline",
                    "expected_cov",
                    "var_a",
                    "var_b",
                    "var_c",
                    "var_d",
                    "mean_residual",
                    "attenuation",
                    "shots_per_cycle",
                ]);
                let v = r.variances;
                t.push(vec![
                    r.cov.value.into(),
                    r.cov.error().into(),
                    r.cov_raw.into(),
                    r.baseline.into(),
                    r.expected_cov.into(),
                    v[0].into(),
                    v[1].into(),
                    v[2].into(),
                    v[3].into(),
                    r.mean_residual.into(),
                    r.attenuation.into(),
                    r.shots_per_cycle.into(),
                ]);
                t
            }
            ProtocolOutput::Bell(r) => {
                let mut t = Table::new(vec![
                    "s_phi",
                    "s_psi",
                    "r_e",
                    "r_e_se",
                    "r_ideal",
                    "r_ideal_se",
                    "expected_r_ideal",
                    "contrast_difference",
                    "contrast_difference_se",
                ]);
                let c = r.contrast.as_ref();
                t.push(vec![
                    r.s_phi.into(),
                    r.s_psi.into(),
                    r.r_e.value.into(),
                    r.r_e.error().into(),
                    r.r_ideal.value.into(),
                    r.r_ideal.error().into(),
                    r.expected_r_ideal.into(),
                    c.map(|c| c.difference.value).into(),
                    c.map(|c| c.difference.error()).into(),
                ]);
                t
            }
            ProtocolOutput::Tppi(r) => {
                let mut t = Table::new(vec![
                    "tau",
                    "phi_tppi",
                    "contrast_phi",
                    "contrast_phi_se",
                    "contrast_psi",
                    "contrast_psi_se",
                ]);
                for p in &r.points {
                    t.push(vec![
                        p.tau.into(),
                        p.phi_tppi.into(),
                        p.contrast_phi.into(),
                        p.contrast_phi_se.into(),
                        p.contrast_psi.into(),
                        p.contrast_psi_se.into(),
                    ]);
                }
                t
            }
            ProtocolOutput::TwoTime(r) => {
                let mut t = Table::new(vec!["t", "correlation", "correlation_se", "expected", "expected_se"]);
                for p in &r.points {
                    t.push(vec![
                        p.t.into(),
                        p.correlation.value.into(),
                        p.correlation.error().into(),
                        p.expected.into(),
                        p.expected_se.into(),
                    ]);
                }
                t
            }
            ProtocolOutput::Curves(c) => {
                let mut t = Table::new(vec!["label", "total_time", "sigma_b", "sigma_b_approx"]);
                for p in c {
                    t.push(vec![
                        p.label.as_str().into(),
                        p.total_time.into(),
                        p.sigma_b.into(),
                        p.sigma_b_approx.into(),
                    ]);
                }
                t
            }
            ProtocolOutput::Spectrum(s) => {
                let mut t = Table::new(vec!["tau", "n_pulses", "signal"]);
                for p in s {
                    t.push(vec![p.tau.into(), p.n_pulses.into(), p.signal.into()]);
                }
                t
            }
        }
    }
}

/// All evaluations of one config.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub points: Vec<(Option<f64>, ProtocolOutput)>,
}

impl RunOutput {
    pub fn checks_passed(&self) -> bool {
        self.points.iter().all(|(_, o)| o.checks().iter().all(|c| c.passed))
    }
}

pub fn run_config(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let points = cfg
        .points()
        .into_iter()
        .map(|v| {
            let exp = match v {
                Some(x) => cfg.experiment_at(x)?,
                None => cfg.experiment.clone(),
            };
            Ok((v, run_experiment(&exp, &cfg.run)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput { config: cfg.clone(), points })
}

/// Format of the sweep table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

fn to_json<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

/// Summary document: protocol, effective config and per-point results.
pub fn summary(out: &RunOutput) -> Result<Value> {
    let points = out
        .points
        .iter()
        .map(|(v, o)| Ok(json!({ "sweep_value": v, "result": to_json(o)?, "checks": to_json(&o.checks())? })))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "protocol": out.config.experiment.id(),
        "config": to_json(&out.config)?,
        "checks_passed": out.checks_passed(),
        "points": points,
    }))
}

/// Named output files in a fixed order.
pub fn render(out: &RunOutput, format: TableFormat) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = vec![("summary.json".to_string(), json_bytes(&summary(out)?)?)];
    let mut table: Option<Table> = None;
    for (v, o) in &out.points {
        let t = o.table().with_leading("sweep_value", (*v).into());
        match table.as_mut() {
            Some(all) => all.extend(t),
            None => table = Some(t),
        }
    }
    let table = table.expect("at least one point");
    files.push(match format {
        TableFormat::Csv => ("sweep.csv".to_string(), table.to_csv()?),
        TableFormat::Json => ("sweep.json".to_string(), json_bytes(&table.to_json())?),
    });
    let swept = out.config.sweep.is_some();
    for (k, (_, o)) in out.points.iter().enumerate() {
        if out.config.run.record_shots && !o.shots().is_empty() {
            let name = if swept { format!("shots_{k:03}.csv") } else { "shots.csv".to_string() };
            files.push((name, shots_csv(o.shots())?));
        }
    }
    Ok(files)
}

/// Writes every file atomically into `dir`.
pub fn write_artifacts(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    for (name, bytes) in files {
        write_atomic(&dir.join(name), bytes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFormat;

    const BELL: &str = r#"
[run]
seed = 3
bootstrap_resamples = 50

[experiment]
protocol = "bell-covar"

[experiment.params]
shots_per_channel = 3000
contrast = true
oracle_samples = 2000

[experiment.params.source]
kind = "gaussian"
chi_c = 0.3
sign_b = 1.0

[experiment.params.sense]
kind = "xy8"
tau = 500e-9
n_pulses = 8

[experiment.params.readout]
alpha0 = 0.6
alpha1 = 0.12
sigma0_sq = 0.6
sigma1_sq = 0.12
p_nv_minus = 1.0
mode = "scc"
t_r = 1e-3

[experiment.params.coupling]
j_zz = 1149924.2
t_e = 2.732e-6

[sweep]
parameters = ["source.chi_c"]
values = [0.0, 0.3]
"#;

    fn config() -> ExperimentConfig {
        let text = BELL.replace("j_zz = 1149924.2", &format!("j_zz = {}", std::f64::consts::PI / 2.732e-6));
        ExperimentConfig::parse(&text, ConfigFormat::Toml).unwrap()
    }

    #[test]
    fn summary_echoes_config() {
        let cfg = config();
        let out = run_config(&cfg).unwrap();
        let doc = summary(&out).unwrap();
        let echoed: ExperimentConfig = serde_json::from_value(doc["config"].clone()).unwrap();
        assert_eq!(echoed, cfg);
        assert_eq!(doc["points"].as_array().unwrap().len(), 2);
        assert_eq!(doc["protocol"], "bell-covar");
    }

    #[test]
    fn render_files_and_columns() {
        let out = run_config(&config()).unwrap();
        let files = render(&out, TableFormat::Csv).unwrap();
        let names: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
        assert_eq!(names, ["summary.json", "sweep.csv", "shots_000.csv", "shots_001.csv"]);
        let sweep = String::from_utf8(files[1].1.clone()).unwrap();
        assert!(sweep.starts_with("sweep_value,s_phi,s_psi,r_e,"));
        assert_eq!(sweep.lines().count(), 3);
        let shots = crate::io::parse_shots_csv(&files[2].1).unwrap();
        assert_eq!(shots.len(), 4 * 3000);
        let json = render(&out, TableFormat::Json).unwrap();
        assert_eq!(json[1].0, "sweep.json");
    }

    #[test]
    fn rerun_is_byte_identical_across_thread_counts() {
        let cfg = config();
        let a = render(&run_config(&cfg).unwrap(), TableFormat::Csv).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| render(&run_config(&cfg).unwrap(), TableFormat::Csv).unwrap());
        assert_eq!(a, b);
    }
}
