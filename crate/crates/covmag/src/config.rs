//! Experiment configuration files.
//!
//! A config names one protocol with its parameters, the run settings and an
//! optional sweep over one or more parameters. TOML is the primary format and
//! JSON is accepted for files ending in `.json`. Unknown keys are rejected
//! and every error names the offending field path.
//!
//! ```toml
//! [run]
//! seed = 7
//!
//! [experiment]
//! protocol = "phase-cycle"
//!
//! [experiment.params]
//! shots_per_cycle = 100000
//! # ...
//!
//! [sweep]
//! parameters = ["source.amp_a", "source.amp_b"]
//! values = { start = 0.0, stop = 4e6, points = 11 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::carbon13::HyperfineCoupling;
use crate::error::{Error, Result};
use crate::metrology::CurveSpec;
use crate::protocols::{BellParams, C13Params, OverlapParams, PhaseCycleParams, RunSettings, SwapParams, TppiParams};

/// A list of values given explicitly or as an evenly spaced range, linear or
/// logarithmic, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        points: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            Grid::Values(ref v) => Ok(v.clone()),
            Grid::Range { start, stop, points, log } => {
                if points == 0 || !start.is_finite() || !stop.is_finite() {
                    return Err(Error::Domain("a range needs finite endpoints and >= 1 point".into()));
                }
                if log && !(start > 0.0 && stop > 0.0) {
                    return Err(Error::Domain("a logarithmic range needs positive endpoints".into()));
                }
                let step = |k: usize| if points == 1 { 0.0 } else { k as f64 / (points - 1) as f64 };
                Ok((0..points)
                    .map(|k| {
                        if log {
                            (start.ln() + (stop.ln() - start.ln()) * step(k)).exp()
                        } else {
                            start + (stop - start) * step(k)
                        }
                    })
                    .collect())
            }
        }
    }
}

/// Deserializes a `Vec<f64>` field from either a list or a [`Grid`] range.
pub fn grid<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    Grid::deserialize(d)?.values().map_err(serde::de::Error::custom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C13CycleParams {
    pub cycle: PhaseCycleParams,
    pub c13: C13Params,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityCurveParams {
    /// Phase integration time, s.
    pub t: f64,
    /// Entangling gate duration, s.
    pub t_e: f64,
    /// Coherence time, s.
    pub t2: f64,
    #[serde(default = "CurveSpec::reference_set")]
    pub curves: Vec<CurveSpec>,
    /// Total averaging times, s.
    #[serde(deserialize_with = "grid")]
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XySpectrumParams {
    pub coupling: HyperfineCoupling,
    /// Interpulse spacings, s.
    #[serde(deserialize_with = "grid")]
    pub taus: Vec<f64>,
    pub n_pulses: u32,
}

/// Protocol and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    PhaseCycle(PhaseCycleParams),
    C13Cycle(C13CycleParams),
    BellCovar(BellParams),
    TppiFidelity(TppiParams),
    TwoTimeSwap(SwapParams),
    TwoTimeOverlap(OverlapParams),
    SensitivityCurve(SensitivityCurveParams),
    XySpectrum(XySpectrumParams),
}

impl Experiment {
    /// Subcommand name of the protocol.
    pub fn id(&self) -> &'static str {
        match self {
            Experiment::PhaseCycle(_) => "phase-cycle",
            Experiment::C13Cycle(_) => "c13-cycle",
            Experiment::BellCovar(_) => "bell-covar",
            Experiment::TppiFidelity(_) => "tppi-fidelity",
            Experiment::TwoTimeSwap(_) => "two-time-swap",
            Experiment::TwoTimeOverlap(_) => "two-time-overlap",
            Experiment::SensitivityCurve(_) => "sensitivity-curve",
            Experiment::XySpectrum(_) => "xy-spectrum",
        }
    }
}

/// Parameters set to each value of a grid in turn. Paths are dotted keys
/// relative to `experiment.params`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameters: Vec<String>,
    #[serde(deserialize_with = "grid")]
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; the command line takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSettings,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Accepted config syntaxes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

impl ConfigFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ConfigFormat::Json,
            _ => ConfigFormat::Toml,
        }
    }
}

fn path_error<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> Error {
    let path = e.path().to_string();
    Error::Config { path, message: e.into_inner().to_string() }
}

impl ExperimentConfig {
    pub fn parse(text: &str, format: ConfigFormat) -> Result<Self> {
        let cfg: ExperimentConfig = match format {
            ConfigFormat::Toml => {
                serde_path_to_error::deserialize(toml::Deserializer::new(text)).map_err(path_error)?
            }
            ConfigFormat::Json => {
                let mut de = serde_json::Deserializer::from_str(text);
                serde_path_to_error::deserialize(&mut de).map_err(path_error)?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, ConfigFormat::from_path(path))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config { path: String::new(), message: e.to_string() })
    }

    /// Checks run settings and that every sweep value yields valid parameters.
    pub fn validate(&self) -> Result<()> {
        self.run.validate().map_err(|e| Error::Config { path: "run".into(), message: e.to_string() })?;
        if let Some(sw) = &self.sweep {
            if sw.parameters.is_empty() || sw.values.is_empty() {
                return Err(Error::Config { path: "sweep".into(), message: "needs parameters and values".into() });
            }
            for &v in &sw.values {
                self.experiment_at(v)?;
            }
        }
        Ok(())
    }

    /// The experiment with every sweep parameter set to `value`.
    pub fn experiment_at(&self, value: f64) -> Result<Experiment> {
        let Some(sw) = &self.sweep else {
            return Ok(self.experiment.clone());
        };
        let mut doc = serde_json::to_value(&self.experiment)
            .map_err(|e| Error::Config { path: "experiment".into(), message: e.to_string() })?;
        for p in &sw.parameters {
            set_number(&mut doc["params"], p, value)?;
        }
        let ser = serde_json::to_vec(&doc).expect("json value serializes");
        let mut de = serde_json::Deserializer::from_slice(&ser);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let inner = path_error(e);
            match inner {
                Error::Config { path, message } => Error::Config {
                    path: format!("experiment.{path}"),
                    message: format!("with sweep value {value}: {message}"),
                },
                other => other,
            }
        })
    }

    /// Sweep values, or a single point without a sweep.
    pub fn points(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(sw) => sw.values.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        }
    }
}

/// Replaces the numeric leaf at `path`. Integer fields stay integers when
/// the value is integral.
fn set_number(root: &mut Value, path: &str, value: f64) -> Result<()> {
    let err = |message: String| Error::Config { path: format!("sweep.parameters[{path}]"), message };
    let mut node = root;
    for key in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(key).ok_or_else(|| err(format!("no field `{key}`")))?,
            Value::Array(items) => {
                let i: usize = key.parse().map_err(|_| err(format!("`{key}` is not an index")))?;
                items.get_mut(i).ok_or_else(|| err(format!("index {i} out of range")))?
            }
            _ => return Err(err(format!("`{key}` is not inside a table"))),
        };
    }
    *node = match node {
        Value::Number(n) if n.is_u64() && value >= 0.0 && value.fract() == 0.0 => Value::from(value as u64),
        Value::Number(n) if n.is_i64() && value.fract() == 0.0 => Value::from(value as i64),
        Value::Number(_) | Value::Null => Value::from(value),
        _ => return Err(err("target is not numeric".into())),
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHASE_CYCLE: &str = r#"
[run]
seed = 7
block_size = 50

[experiment]
protocol = "phase-cycle"

[experiment.params]
shots_per_cycle = 2000

[experiment.params.source]
kind = "tone"
f0 = 2e6
amp_a = 1e6
amp_b = 1e6

[experiment.params.sense]
kind = "hahn"
tau = 1e-6
n_pulses = 1

[experiment.params.readout]
alpha0 = 0.6
alpha1 = 0.12
sigma0_sq = 0.6
sigma1_sq = 0.12
p_nv_minus = 1.0
mode = "scc"
t_r = 1e-3

[sweep]
parameters = ["source.amp_a", "source.amp_b"]
values = { start = 0.0, stop = 2e6, points = 3 }
"#;

    #[test]
    fn toml_parses_and_round_trips() {
        let cfg = ExperimentConfig::parse(PHASE_CYCLE, ConfigFormat::Toml).unwrap();
        assert_eq!(cfg.experiment.id(), "phase-cycle");
        assert_eq!(cfg.sweep.as_ref().unwrap().values, vec![0.0, 1e6, 2e6]);
        assert!(cfg.run.record_shots);
        let back = ExperimentConfig::parse(&cfg.to_toml().unwrap(), ConfigFormat::Toml).unwrap();
        assert_eq!(back, cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&json, ConfigFormat::Json).unwrap(), cfg);
    }

    #[test]
    fn sweep_sets_all_parameters() {
        let cfg = ExperimentConfig::parse(PHASE_CYCLE, ConfigFormat::Toml).unwrap();
        let Experiment::PhaseCycle(p) = cfg.experiment_at(2e6).unwrap() else { panic!() };
        let doc = serde_json::to_value(p.source).unwrap();
        assert_eq!(doc["amp_a"], 2e6);
        assert_eq!(doc["amp_b"], 2e6);
    }

    #[test]
    fn integer_fields_accept_integral_sweeps() {
        let text = PHASE_CYCLE
            .replace(r#"["source.amp_a", "source.amp_b"]"#, r#"["shots_per_cycle"]"#)
            .replace("{ start = 0.0, stop = 2e6, points = 3 }", "[100, 200]");
        let cfg = ExperimentConfig::parse(&text, ConfigFormat::Toml).unwrap();
        let Experiment::PhaseCycle(p) = cfg.experiment_at(200.0).unwrap() else { panic!() };
        assert_eq!(p.shots_per_cycle, 200);
        let bad = text.replace("[100, 200]", "[100.5]");
        assert!(matches!(ExperimentConfig::parse(&bad, ConfigFormat::Toml), Err(Error::Config { .. })));
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let text = PHASE_CYCLE.replace("alpha1 = 0.12", "alpha1 = 0.12\nalpha2 = 0.3");
        match ExperimentConfig::parse(&text, ConfigFormat::Toml) {
            Err(Error::Config { path, message }) => {
                assert!(path.contains("readout"), "{path}");
                assert!(message.contains("alpha2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = PHASE_CYCLE.replace("[run]", "[runs]");
        assert!(matches!(ExperimentConfig::parse(&text, ConfigFormat::Toml), Err(Error::Config { .. })));
        let text = PHASE_CYCLE.replace("\"source.amp_a\"", "\"source.amp_c\"");
        match ExperimentConfig::parse(&text, ConfigFormat::Toml) {
            Err(Error::Config { path, .. }) => assert!(path.contains("source.amp_c")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grids() {
        let g = Grid::Range { start: 1.0, stop: 100.0, points: 3, log: true };
        let v = g.values().unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12 && (v[2] - 100.0).abs() < 1e-12);
        assert_eq!(Grid::Range { start: 2.0, stop: 5.0, points: 1, log: false }.values().unwrap(), vec![2.0]);
        assert!(Grid::Range { start: 0.0, stop: 1.0, points: 0, log: false }.values().is_err());
    }
}
