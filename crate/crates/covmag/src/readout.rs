//! Photon-counting readout models.

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::spins;
use crate::tolerances::POISSON_MATCH;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutMode {
    Conventional,
    Scc,
}

/// Spin-dependent photon statistics of one NV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutModel {
    /// Mean photons per shot in `m_s = 0`.
    pub alpha0: f64,
    /// Mean photons per shot in `m_s = 1`.
    pub alpha1: f64,
    /// Photon variance in `m_s = 0`; equal to `alpha0` for Poisson counts.
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
    /// Probability that the NV initializes in the negative charge state.
    pub p_nv_minus: f64,
    pub mode: ReadoutMode,
    /// Readout duration, s.
    pub t_r: f64,
}

impl ReadoutModel {
    pub fn poisson(alpha0: f64, alpha1: f64, mode: ReadoutMode, t_r: f64) -> Result<Self> {
        Self::new(alpha0, alpha1, alpha0, alpha1, 1.0, mode, t_r)
    }

    pub fn new(
        alpha0: f64,
        alpha1: f64,
        sigma0_sq: f64,
        sigma1_sq: f64,
        p_nv_minus: f64,
        mode: ReadoutMode,
        t_r: f64,
    ) -> Result<Self> {
        let m = ReadoutModel { alpha0, alpha1, sigma0_sq, sigma1_sq, p_nv_minus, mode, t_r };
        m.validate()?;
        Ok(m)
    }

    /// Spin-to-charge conversion: 0.60 vs 0.12 photons, 1 ms readout.
    pub fn scc() -> Self {
        Self::poisson(0.60, 0.12, ReadoutMode::Scc, 1e-3).expect("valid preset")
    }

    /// Green-fluorescence readout: 0.030 vs 0.021 photons, 300 ns readout.
    pub fn conventional() -> Self {
        Self::poisson(0.030, 0.021, ReadoutMode::Conventional, 300e-9).expect("valid preset")
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha0, self.alpha1, self.sigma0_sq, self.sigma1_sq, self.t_r];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidReadout("means, variances and t_r must be finite and >= 0".into()));
        }
        if self.alpha0 == self.alpha1 {
            return Err(Error::DegenerateContrast);
        }
        if !(self.p_nv_minus > 0.0 && self.p_nv_minus <= 1.0) {
            return Err(Error::InvalidReadout(format!("p_nv_minus = {} not in (0, 1]", self.p_nv_minus)));
        }
        for (alpha, var) in [(self.alpha0, self.sigma0_sq), (self.alpha1, self.sigma1_sq)] {
            if var < alpha * (1.0 - POISSON_MATCH) {
                return Err(Error::InvalidReadout(format!(
                    "sub-Poisson variance {var} < mean {alpha} cannot be sampled"
                )));
            }
        }
        Ok(())
    }

    pub fn contrast(&self) -> f64 {
        self.alpha0 - self.alpha1
    }

    /// `(α₀ − α₁)/(α₀ + α₁)`.
    pub fn contrast_ratio(&self) -> f64 {
        (self.alpha0 - self.alpha1) / (self.alpha0 + self.alpha1)
    }

    /// Same model with means and variances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        ReadoutModel {
            alpha0: self.alpha0 * factor,
            alpha1: self.alpha1 * factor,
            sigma0_sq: self.sigma0_sq * factor,
            sigma1_sq: self.sigma1_sq * factor,
            ..*self
        }
    }

    fn moments(&self, spin_one: bool) -> (f64, f64) {
        if spin_one {
            (self.alpha1, self.sigma1_sq)
        } else {
            (self.alpha0, self.sigma0_sq)
        }
    }

    /// Photon count of one NV. A failed charge initialization emits counts
    /// from the `m_s = 1` distribution regardless of spin.
    pub fn sample_counts<R: Rng + ?Sized>(&self, spin_one: bool, rng: &mut R) -> u64 {
        let dark = self.p_nv_minus < 1.0 && rng.gen::<f64>() >= self.p_nv_minus;
        let (mean, var) = self.moments(spin_one || dark);
        sample_count(mean, var, rng)
    }
}

/// Poisson when `var = mean`, otherwise Gamma-Poisson with the given variance.
fn sample_count<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let lambda = if var <= mean * (1.0 + POISSON_MATCH) {
        mean
    } else {
        let excess = var - mean;
        Gamma::new(mean * mean / excess, excess / mean).expect("positive gamma parameters").sample(rng)
    };
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
}

/// `σ_R = √(1 + 2(σ₀² + σ₁²)/(α₀ − α₁)²)`.
pub fn sigma_r_general(m: &ReadoutModel) -> Result<f64> {
    if m.alpha0 == m.alpha1 {
        return Err(Error::DegenerateContrast);
    }
    Ok((1.0 + 2.0 * (m.sigma0_sq + m.sigma1_sq) / m.contrast().powi(2)).sqrt())
}

/// Variance of one NV's counts when it is in `m_s = 0` with probability `p0`.
pub fn mixture_variance(m: &ReadoutModel, p0: f64) -> f64 {
    let p1 = 1.0 - p0;
    p0 * m.sigma0_sq + p1 * m.sigma1_sq + p0 * p1 * m.contrast().powi(2)
}

/// Mixture variance expressed through the measured mean of one NV. Means
/// outside `[α₁, α₀]` are clamped with a warning.
pub fn baseline_variance_from_mean(m: &ReadoutModel, mu: f64) -> f64 {
    let (lo, hi) = (m.alpha0.min(m.alpha1), m.alpha0.max(m.alpha1));
    let mu = if mu < lo || mu > hi {
        warn!("mean {mu} outside [{lo}, {hi}]; clamped for baseline variance");
        mu.clamp(lo, hi)
    } else {
        mu
    };
    let d = m.contrast();
    ((mu - m.alpha1) / d) * m.sigma0_sq + ((m.alpha0 - mu) / d) * m.sigma1_sq + (mu - m.alpha1) * (m.alpha0 - mu)
}

/// Phase-cycled baseline `[σ²(μ𝒜) − σ²(μℬ) − σ²(μ𝒞) + σ²(μ𝒟)]/4`, each NV
/// assigned half of the summed two-NV mean.
pub fn phase_cycled_baseline(m: &ReadoutModel, mu: [f64; 4]) -> f64 {
    let v = mu.map(|x| baseline_variance_from_mean(m, x / 2.0));
    (v[0] - v[1] - v[2] + v[3]) / 4.0
}

/// Joint spin outcome drawn from basis-ordered probabilities, as `(m_a, m_b)`.
pub fn sample_spins<R: Rng + ?Sized>(p_state: &[f64; 4], rng: &mut R) -> (u8, u8) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in p_state.iter().enumerate() {
        acc += p;
        if u < acc {
            return spins(i);
        }
    }
    spins(p_state.iter().rposition(|p| *p > 0.0).unwrap_or(3))
}

/// Draws a joint spin outcome then per-NV counts. Returns `(n_a, n_b)`.
pub fn sample_photons<R: Rng + ?Sized>(m: &ReadoutModel, p_state: &[f64; 4], rng: &mut R) -> (u64, u64) {
    let (ma, mb) = sample_spins(p_state, rng);
    (m.sample_counts(ma == 1, rng), m.sample_counts(mb == 1, rng))
}

/// Tag identifying the channel a shot belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CycleTag {
    A,
    B,
    C,
    D,
    PhiSig,
    PhiRef,
    PsiSig,
    PsiRef,
    SwapPlusSig,
    SwapMinusSig,
    SwapPlusRef,
    SwapMinusRef,
}

impl CycleTag {
    pub fn label(self) -> &'static str {
        match self {
            CycleTag::A => "A",
            CycleTag::B => "B",
            CycleTag::C => "C",
            CycleTag::D => "D",
            CycleTag::PhiSig => "phi_sig",
            CycleTag::PhiRef => "phi_ref",
            CycleTag::PsiSig => "psi_sig",
            CycleTag::PsiRef => "psi_ref",
            CycleTag::SwapPlusSig => "swap_plus_sig",
            CycleTag::SwapMinusSig => "swap_minus_sig",
            CycleTag::SwapPlusRef => "swap_plus_ref",
            CycleTag::SwapMinusRef => "swap_minus_ref",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        use CycleTag::*;
        [A, B, C, D, PhiSig, PhiRef, PsiSig, PsiRef, SwapPlusSig, SwapMinusSig, SwapPlusRef, SwapMinusRef]
            .into_iter()
            .find(|t| t.label() == s)
    }
}

/// One simulated shot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotRecord {
    pub shot: u64,
    pub cycle_tag: CycleTag,
    pub photons: u64,
    pub seed_index: u64,
}
