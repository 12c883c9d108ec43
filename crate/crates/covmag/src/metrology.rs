//! Closed-form SNR, sensitivity and correlated-spectrum calculators.
//!
//! Times are in seconds and angular frequencies in rad/s.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noisefield::correlated_sin_moment;

/// NV electron gyromagnetic ratio, rad/s/T (28.024 GHz/T).
pub const GAMMA_E: f64 = 2.0 * PI * 28.024e9;

/// One hertz, carried explicitly so that `σ_B²` keeps units of T²·Hz⁻¹·Hz.
pub const HZ: f64 = 1.0;

/// `√(2N)·e^{−χ_e}·r/√(1 + σ_R²)` for `N` total experiments.
pub fn snr_entangled(r_ideal: f64, sigma_r: f64, chi_e: f64, n: f64) -> f64 {
    (2.0 * n).sqrt() * (-chi_e).exp() * r_ideal / (1.0 + sigma_r * sigma_r).sqrt()
}

/// `√N·r/σ_R²` for a resolvable pair read out `N` times.
pub fn snr_noninteracting(r_ideal: f64, sigma_r: f64, n: f64) -> f64 {
    n.sqrt() * r_ideal / (sigma_r * sigma_r)
}

/// `√(2N)·r/(r + σ_R²)` with `N` experiments per phase cycle (4N in total).
pub fn snr_variance_based(r_ideal: f64, sigma_r: f64, n_per_cycle: f64) -> f64 {
    (2.0 * n_per_cycle).sqrt() * r_ideal / (r_ideal + sigma_r * sigma_r)
}

/// Entangled over non-interacting SNR. `exact` gives the ratio of the two
/// formulas, otherwise the high-σ_R form `√2·σ_R·e^{−χ_e}`.
pub fn snr_gain(sigma_r: f64, chi_e: f64, exact: bool) -> f64 {
    if exact {
        SQRT_2 * sigma_r * sigma_r * (-chi_e).exp() / (1.0 + sigma_r * sigma_r).sqrt()
    } else {
        SQRT_2 * sigma_r * (-chi_e).exp()
    }
}

/// Timing budget of a repeated experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBudget {
    /// Phase integration time, s.
    pub t: f64,
    /// Entangling gate duration, s.
    pub t_e: f64,
    /// Readout time, s.
    pub t_r: f64,
    /// Total averaging time, s.
    pub total_time: f64,
    /// Coherence time, s.
    pub t2: f64,
}

impl ExperimentBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t", self.t), ("t_r", self.t_r), ("total_time", self.total_time), ("t2", self.t2)] {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.t_e < 0.0 {
            return Err(Error::Domain(format!("t_e must be >= 0, got {}", self.t_e)));
        }
        Ok(())
    }

    /// Number of entangled experiments, `T/(t + 2t_e + t_R)`.
    pub fn experiments(&self) -> f64 {
        self.total_time / (self.t + 2.0 * self.t_e + self.t_r)
    }
}

/// Minimum detectable `σ_B²` in T², exact and large-N forms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub exact: f64,
    pub approx: f64,
}

fn log_form(t: f64, x: f64, what: &str) -> Result<Sensitivity> {
    if !(x < 1.0) {
        return Err(Error::InfeasibleBudget(format!(
            "{what} = {x:.4} >= 1: readout noise times decoherence exceeds the square root of the experiment count"
        )));
    }
    let pref = PI * HZ / (4.0 * GAMMA_E * GAMMA_E * t);
    Ok(Sensitivity { exact: -pref * (-x).ln_1p(), approx: pref * x })
}

/// Entangled protocol:
/// `σ²_B,min = −(π·Hz/4γ²t)·ln(1 − √2·σ_R·e^{2(t+2t_e)/T₂}/√N)`.
pub fn sensitivity_min(budget: &ExperimentBudget, sigma_r: f64) -> Result<Sensitivity> {
    budget.validate()?;
    let b = budget;
    let x = SQRT_2 * sigma_r * (2.0 * (b.t + 2.0 * b.t_e) / b.t2).exp() / b.experiments().sqrt();
    log_form(b.t, x, "sqrt(2)*sigma_R*exp(2(t+2t_e)/T2)/sqrt(N)")
}

/// Resolvable non-interacting pair with the same budget and no gates:
/// `σ²_B,min = −(π·Hz/4γ²t)·ln(1 − 2σ_R²·e^{2t/T₂}/√N)`, `N = T/(t + t_R)`.
pub fn sensitivity_min_classical(budget: &ExperimentBudget, sigma_r: f64) -> Result<Sensitivity> {
    budget.validate()?;
    let b = budget;
    let n = b.total_time / (b.t + b.t_r);
    let x = 2.0 * sigma_r * sigma_r * (2.0 * b.t / b.t2).exp() / n.sqrt();
    log_form(b.t, x, "2*sigma_R^2*exp(2t/T2)/sqrt(N)")
}

/// `S_C = (π/2t)·asinh(r/(C₁C₂))`.
pub fn spectrum_reconstruct(r_ideal: f64, c1: f64, c2: f64, t: f64) -> Result<f64> {
    if c1 * c2 == 0.0 {
        return Err(Error::DegenerateCoherence);
    }
    if !(c1 > 0.0 && c1 <= 1.0 && c2 > 0.0 && c2 <= 1.0) {
        return Err(Error::Domain(format!("coherences must lie in (0, 1], got {c1}, {c2}")));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be > 0, got {t}")));
    }
    let ratio = r_ideal / (c1 * c2);
    if !ratio.is_finite() {
        return Err(Error::DegenerateCoherence);
    }
    Ok(PI / (2.0 * t) * ratio.asinh())
}

/// Forward model paired with [`spectrum_reconstruct`]: a flat correlated
/// level `s_c` over time `t` plus local exponents. Returns `(r, C₁, C₂)` with
/// `C_i = e^{−χ̃_i − χ_C}` and `χ_C = t·s_c/π`.
pub fn correlated_forward(s_c: f64, chi_local_a: f64, chi_local_b: f64, t: f64) -> Result<(f64, f64, f64)> {
    let chi_c = t * s_c / PI;
    let r = (-chi_local_a - chi_local_b).exp() * correlated_sin_moment(chi_c)?;
    Ok((r, (-chi_local_a - chi_c).exp(), (-chi_local_b - chi_c).exp()))
}

/// Readout configuration compared on a sensitivity curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub label: String,
    pub entangled: bool,
    pub sigma_r: f64,
    /// Readout time, s.
    pub t_r: f64,
}

/// Readout noise assumed for room-temperature charge-conversion readout.
pub const SIGMA_R_SCC: f64 = 3.0;
/// Readout noise of conventional fluorescence readout.
pub const SIGMA_R_CONVENTIONAL: f64 = 35.0;

impl CurveSpec {
    pub fn new(label: &str, entangled: bool, sigma_r: f64, t_r: f64) -> Self {
        CurveSpec { label: label.to_string(), entangled, sigma_r, t_r }
    }

    /// The standard comparison: an entangled pair with conventional readout
    /// (300 ns) against non-interacting pairs with conventional readout and
    /// with charge-conversion readout (1 ms).
    pub fn reference_set() -> Vec<CurveSpec> {
        vec![
            CurveSpec::new("entangled_conventional", true, SIGMA_R_CONVENTIONAL, 300e-9),
            CurveSpec::new("noninteracting_conventional", false, SIGMA_R_CONVENTIONAL, 300e-9),
            CurveSpec::new("noninteracting_scc", false, SIGMA_R_SCC, 1e-3),
        ]
    }
}

/// One point of a sensitivity curve; `sigma_b` is `None` when infeasible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub label: String,
    pub total_time: f64,
    pub sigma_b: Option<f64>,
    pub sigma_b_approx: Option<f64>,
}

/// `σ_B,min` (T) against averaging time for each curve.
pub fn sensitivity_curves(t: f64, t_e: f64, t2: f64, curves: &[CurveSpec], times: &[f64]) -> Vec<CurvePoint> {
    let mut out = Vec::with_capacity(curves.len() * times.len());
    for c in curves {
        for &total_time in times {
            let budget = ExperimentBudget { t, t_e: if c.entangled { t_e } else { 0.0 }, t_r: c.t_r, total_time, t2 };
            let res = if c.entangled {
                sensitivity_min(&budget, c.sigma_r)
            } else {
                sensitivity_min_classical(&budget, c.sigma_r)
            };
            let (sigma_b, sigma_b_approx) = match res {
                Ok(s) => (Some(s.exact.sqrt()), Some(s.approx.sqrt())),
                Err(_) => (None, None),
            };
            out.push(CurvePoint { label: c.label.clone(), total_time, sigma_b, sigma_b_approx });
        }
    }
    out
}
