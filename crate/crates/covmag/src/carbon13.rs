//! NV–¹³C conditional dynamics under XY dynamical decoupling.
//!
//! The nuclear spin precesses about different axes depending on the NV state.
//! An XY train with interpulse spacing τ turns that difference into a
//! conditional NV rotation, which is used as a selective spin flip.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold on resonance depth and on `sin²(Nφ/2)` for a calibrated flip.
pub const FLIP_THRESHOLD: f64 = 0.99;

/// Below this the closed-form denominator is treated as singular.
const SINGULAR_DENOMINATOR: f64 = 1e-9;

/// Larmor-to-hyperfine ratio above which the analytic resonance is used.
const STRONG_FIELD_RATIO: f64 = 50.0;

/// Grid size of the numeric resonance search.
const SEARCH_POINTS: usize = 10_000;

/// Largest pulse count considered when calibrating a flip.
const MAX_PULSES: u32 = 1_000_000;

/// XY8 block length; flip trains are whole blocks so they are identity on an
/// uncoupled NV.
pub const XY_BLOCK: u32 = 8;

/// Hyperfine coupling of one ¹³C to the NV, all in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperfineCoupling {
    pub a_par: f64,
    pub a_perp: f64,
    pub omega_l: f64,
}

impl HyperfineCoupling {
    pub fn new(a_par: f64, a_perp: f64, omega_l: f64) -> Result<Self> {
        let h = Self { a_par, a_perp, omega_l };
        h.validate()?;
        Ok(h)
    }

    /// Coupling used when none is configured: 2π·(0.5, 0.3) MHz at
    /// 2π·1.894 MHz Larmor frequency.
    pub fn fixture() -> Self {
        Self { a_par: 2.0 * PI * 0.5e6, a_perp: 2.0 * PI * 0.3e6, omega_l: 2.0 * PI * 1.894e6 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_l > 0.0) || !self.omega_l.is_finite() {
            return Err(Error::Domain(format!("omega_L must be > 0, got {}", self.omega_l)));
        }
        if !self.a_par.is_finite() || !self.a_perp.is_finite() {
            return Err(Error::Domain("hyperfine components must be finite".into()));
        }
        if !(self.omega_tilde() > 0.0) {
            return Err(Error::Domain("effective precession frequency vanishes".into()));
        }
        Ok(())
    }

    /// Precession frequency with the NV in the coupled state.
    pub fn omega_tilde(&self) -> f64 {
        (self.a_par + self.omega_l).hypot(self.a_perp)
    }

    /// Transverse component of the coupled precession axis.
    pub fn a_x(&self) -> f64 {
        self.a_perp / self.omega_tilde()
    }

    /// Longitudinal component of the coupled precession axis.
    pub fn a_z(&self) -> f64 {
        (self.a_par + self.omega_l) / self.omega_tilde()
    }

    /// Whether the Larmor frequency dominates the hyperfine terms.
    pub fn is_strong_field(&self) -> bool {
        self.omega_l >= STRONG_FIELD_RATIO * self.a_par.hypot(self.a_perp)
    }
}

/// Per-pulse-pair nuclear rotation angle and conditional contrast at spacing τ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XyTerms {
    /// Nuclear rotation angle per pair of π pulses.
    pub phi: f64,
    /// Conditional contrast in [0, 2]; the signal dips to `1 − contrast`.
    pub contrast: f64,
}

impl XyTerms {
    /// Contrast normalised to [0, 1].
    pub fn depth(&self) -> f64 {
        self.contrast / 2.0
    }
}

fn raw_terms(h: &HyperfineCoupling, tau: f64) -> (f64, f64, f64) {
    let a = h.omega_tilde() * tau / 2.0;
    let b = h.omega_l * tau / 2.0;
    let cos_phi = a.cos() * b.cos() - h.a_z() * a.sin() * b.sin();
    let numerator = h.a_x().powi(2) * (1.0 - a.cos()) * (1.0 - b.cos());
    (cos_phi, numerator, 1.0 + cos_phi)
}

/// Rotation angle and conditional contrast at spacing `tau`.
///
/// Where the denominator vanishes the contrast is the limit along τ,
/// taken as the mean of symmetric neighbours far enough out to be regular.
pub fn xy_terms(h: &HyperfineCoupling, tau: f64) -> XyTerms {
    let (cos_phi, numerator, denominator) = raw_terms(h, tau);
    let phi = cos_phi.clamp(-1.0, 1.0).acos();
    if denominator.abs() >= SINGULAR_DENOMINATOR {
        return XyTerms { phi, contrast: numerator / denominator };
    }
    let mut step = tau * 1e-6;
    for _ in 0..40 {
        let (_, n_lo, d_lo) = raw_terms(h, tau - step);
        let (_, n_hi, d_hi) = raw_terms(h, tau + step);
        if d_lo.abs() >= 1e3 * SINGULAR_DENOMINATOR && d_hi.abs() >= 1e3 * SINGULAR_DENOMINATOR {
            return XyTerms { phi, contrast: 0.5 * (n_lo / d_lo + n_hi / d_hi) };
        }
        step *= 2.0;
    }
    XyTerms { phi, contrast: 0.0 }
}

fn check_spacing(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("interpulse spacing must be > 0, got {tau}")));
    }
    Ok(())
}

/// Normalised fluorescence signal in [−1, 1] after an XY train of `n_pulses`
/// π pulses at spacing `tau`: `1 − contrast·sin²(N·φ/2)`.
pub fn xy_signal(h: &HyperfineCoupling, tau: f64, n_pulses: u32) -> Result<f64> {
    h.validate()?;
    check_spacing(tau)?;
    if n_pulses == 0 {
        return Err(Error::Domain("pulse count must be >= 1".into()));
    }
    let t = xy_terms(h, tau);
    let s = (n_pulses as f64 * t.phi / 2.0).sin();
    Ok((1.0 - t.contrast * s * s).clamp(-1.0, 1.0))
}

/// Probability that the NV ends flipped, `(1 − S)/2`.
pub fn flip_probability(h: &HyperfineCoupling, tau: f64, n_pulses: u32) -> Result<f64> {
    Ok((1.0 - xy_signal(h, tau, n_pulses)?) / 2.0)
}

/// Resonance depth `contrast/2` at spacing `tau`.
pub fn resonance_depth(h: &HyperfineCoupling, tau: f64) -> f64 {
    xy_terms(h, tau).depth()
}

/// First resonant interpulse spacing.
///
/// In strong field this is `2π/(2ω_L + A_∥)`; otherwise the depth is searched
/// numerically with [`first_resonance_tau_numeric`].
pub fn first_resonance_tau(h: &HyperfineCoupling) -> Result<f64> {
    h.validate()?;
    if h.is_strong_field() {
        Ok(first_resonance_tau_analytic(h))
    } else {
        first_resonance_tau_numeric(h)
    }
}

/// Strong-field resonance `2π/(2ω_L + A_∥)`.
pub fn first_resonance_tau_analytic(h: &HyperfineCoupling) -> f64 {
    2.0 * PI / (2.0 * h.omega_l + h.a_par)
}

/// First local maximum of the depth in `(0, 4π/ω_L]` that reaches half of the
/// window maximum, refined by golden-section search.
pub fn first_resonance_tau_numeric(h: &HyperfineCoupling) -> Result<f64> {
    h.validate()?;
    let hi = 4.0 * PI / h.omega_l;
    let dt = hi / SEARCH_POINTS as f64;
    let grid: Vec<f64> = (1..=SEARCH_POINTS).map(|k| k as f64 * dt).collect();
    let depth: Vec<f64> = grid.iter().map(|&t| resonance_depth(h, t)).collect();
    let peak = depth.iter().cloned().fold(0.0, f64::max);
    if !(peak > 1e-9) {
        return Err(Error::NoResonance(format!("conditional contrast is zero over (0, {hi:.3e}] s")));
    }
    let k = (1..depth.len() - 1)
        .find(|&k| depth[k] >= depth[k - 1] && depth[k] >= depth[k + 1] && depth[k] >= 0.5 * peak)
        .ok_or_else(|| Error::NoResonance("no interior maximum in the search window".into()))?;
    Ok(golden_max(|t| resonance_depth(h, t), grid[k - 1], grid[k + 1]))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Smallest multiple of `block` with `sin²(N·φ/2) ≥ 0.99`.
pub fn pulses_for_rotation(phi: f64, block: u32) -> Result<u32> {
    if block == 0 {
        return Err(Error::Domain("pulse block must be >= 1".into()));
    }
    let mut n = block;
    while n <= MAX_PULSES {
        if (n as f64 * phi / 2.0).sin().powi(2) >= FLIP_THRESHOLD {
            return Ok(n);
        }
        n += block;
    }
    Err(Error::NoResonance(format!("no pulse count up to {MAX_PULSES} completes the rotation (phi = {phi})")))
}

/// Pulse count of the selective flip at a resonant spacing, in whole XY8
/// blocks.
pub fn flip_pulse_count(h: &HyperfineCoupling, tau_res: f64) -> Result<u32> {
    h.validate()?;
    check_spacing(tau_res)?;
    let t = xy_terms(h, tau_res);
    if t.depth() <= FLIP_THRESHOLD {
        return Err(Error::NotResonant { depth: t.depth(), threshold: FLIP_THRESHOLD });
    }
    pulses_for_rotation(t.phi, XY_BLOCK)
}

/// One point of an XY spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub tau: f64,
    pub n_pulses: u32,
    pub signal: f64,
}

/// Signal over a spacing grid.
pub fn xy_spectrum(h: &HyperfineCoupling, taus: &[f64], n_pulses: u32) -> Result<Vec<SpectrumPoint>> {
    taus.par_iter().map(|&tau| Ok(SpectrumPoint { tau, n_pulses, signal: xy_signal(h, tau, n_pulses)? })).collect()
}
