//! Bell-state fidelity from a phase-incremented readout.
//!
//! Advancing every pulse phase of the Φ readout block by `φ = ω·τ` makes the
//! `|1,1⟩↔|0,0⟩` coherence oscillate at `2ω` in the contrast, while the
//! single-quantum terms stay at zero frequency. Fitting that oscillation gives
//! the coherence magnitude and phase, and from them a fidelity lower bound.
//! The Ψ sweep is flat because a global phase advance leaves Ψ unchanged.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use super::{acquire, clean, excited_count, ChannelStats, RunSettings};
use crate::error::{Error, Result};
use crate::gates::{disentangle_block, entangle_block, BellVariant, CouplingSpec, FinalPulse, PulseBlock};
use crate::hilbert::{DensityMatrix, Mat4, PureState, C64};
use crate::noisefield::DecoherenceModel;
use crate::readout::{sample_photons, CycleTag, ReadoutModel, ShotRecord};
use crate::stats::{fit_sinusoid, frequency_scan};

/// Residual rms, in per-point standard errors, above which a fit is rejected.
const MAX_RESIDUAL_SIGMAS: f64 = 4.0;

/// Injected generated state with a single `|1,1⟩↔|0,0⟩` coherence
/// `a0·e^{−i·coh_phase_a}/2` and equal populations of those two states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoGen {
    pub a0: f64,
    pub coh_phase_a: f64,
}

impl RhoGen {
    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        if !(0.0..=1.0).contains(&self.a0) {
            return Err(Error::InvalidState(format!("a0 = {} not in [0, 1]", self.a0)));
        }
        let mut m = Mat4::zeros();
        m.0[0][0] = C64::new(0.5, 0.0);
        m.0[3][3] = C64::new(0.5, 0.0);
        m.0[0][3] = C64::from_polar(self.a0 / 2.0, -self.coh_phase_a);
        m.0[3][0] = m.0[0][3].conj();
        DensityMatrix::new(m)
    }

    /// Reads `(a0, coh_phase_a)` from a density matrix.
    pub fn from_density(rho: &DensityMatrix) -> Self {
        let c = rho.matrix().0[0][3];
        RhoGen { a0: 2.0 * c.norm(), coh_phase_a: -c.arg() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TppiParams {
    pub readout: ReadoutModel,
    #[serde(default)]
    pub decoherence: DecoherenceModel,
    pub coupling: CouplingSpec,
    /// Phase increment rate, rad/s.
    pub omega_tppi: f64,
    /// Increment times τ, s.
    #[serde(deserialize_with = "crate::config::grid")]
    pub taus: Vec<f64>,
    /// Charge-state probability entering the fidelity prefactor.
    pub p_nv_minus: f64,
    /// Shots per channel and τ point; 0 evaluates the expectation exactly.
    pub shots_per_point: u64,
    /// Replaces the simulated generated state.
    #[serde(default)]
    pub rho_gen: Option<RhoGen>,
}

/// Contrast of both sweeps at one increment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TppiPoint {
    pub tau: f64,
    pub phi_tppi: f64,
    pub contrast_phi: f64,
    pub contrast_phi_se: f64,
    pub contrast_psi: f64,
    pub contrast_psi_se: f64,
}

/// Decoherence combinations over one gate duration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateDecay {
    /// `e^{−χ_a} + e^{−χ_b}`.
    pub sigma_ab: f64,
    /// `e^{−χ_a} − e^{−χ_b}`.
    pub delta_ab: f64,
    /// `e^{−χ_a}·e^{−χ_b}`.
    pub pi_ab: f64,
}

impl GateDecay {
    pub fn from_coherences(ca: f64, cb: f64) -> Self {
        GateDecay { sigma_ab: ca + cb, delta_ab: ca - cb, pi_ab: ca * cb }
    }

    /// Expected fidelity over `p²`, `(1 + σ_ab + π_ab)/4`.
    pub fn expected_fidelity(&self) -> f64 {
        (1.0 + self.sigma_ab + self.pi_ab) / 4.0
    }
}

/// Expected fidelity under one decoherence form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormValue {
    pub form: String,
    pub expected_over_p2: f64,
}

/// Expected fidelity over `p²` for exponential and stretched (p = 2) decay,
/// each evaluated over one and over two gate durations. The first entry is
/// the default form.
pub fn fidelity_form_sensitivity(t2_a: f64, t2_b: f64, t_e: f64) -> Vec<FormValue> {
    let mut out = Vec::new();
    for (stretch, name) in [(1.0, "exponential"), (2.0, "stretched p=2")] {
        let model = DecoherenceModel { stretch, ..DecoherenceModel::exponential(t2_a, t2_b) };
        for (scale, interval) in [(1.0, "t_e"), (2.0, "2 t_e")] {
            let (ca, cb) = model.gate_coherences(scale * t_e);
            out.push(FormValue {
                form: format!("{name} over {interval}"),
                expected_over_p2: GateDecay::from_coherences(ca, cb).expected_fidelity(),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub a0_fit: f64,
    /// Coherence phase of the `|1,1⟩↔|0,0⟩` term from the fit.
    pub coh_phase_a_fit: f64,
    /// Values read directly from the generated state.
    pub a0_true: f64,
    pub coh_phase_a_true: f64,
    /// `p²·(a0/2)(1 − sin φ)`.
    pub f_bound: f64,
    /// `(p²/4)(1 + σ_ab + π_ab)`.
    pub f_expected: f64,
    pub p_nv_minus: f64,
    pub decay: GateDecay,
    /// Fitted oscillation amplitudes of the Φ and Ψ sweeps at `2ω`.
    pub amplitude_phi: f64,
    pub amplitude_psi: f64,
    /// Frequency of the Φ sweep from a free scan, Hz, and the expected `2ω/2π`.
    pub frequency_phi: f64,
    pub frequency_expected: f64,
    pub rms_residual: f64,
    pub forms: Vec<FormValue>,
    pub points: Vec<TppiPoint>,
    #[serde(skip)]
    pub shots: Vec<ShotRecord>,
}

/// Density matrix after a block with dephasing `(ca, cb)` after its first pulse.
fn through_block(rho: &DensityMatrix, block: &PulseBlock, ca: f64, cb: f64) -> DensityMatrix {
    rho.evolve(&block.first).dephase(ca, cb).evolve(&block.middle).evolve(&block.last)
}

/// State produced by the entangling block with gate dephasing.
pub fn generated_state(spec: &CouplingSpec, variant: BellVariant, ca: f64, cb: f64) -> Result<DensityMatrix> {
    let start = DensityMatrix::from_pure(&PureState::basis(0, 0));
    Ok(through_block(&start, &entangle_block(spec, variant)?, ca, cb))
}

fn contrast_from_means(sig: f64, reference: f64) -> f64 {
    (sig - reference) / (sig + reference)
}

fn contrast_se(sig: &ChannelStats, reference: &ChannelStats) -> f64 {
    let (s, r) = (sig.sum.mean(), reference.sum.mean());
    let t2 = (s + r).powi(2);
    ((2.0 * r / t2 * sig.sum.mean_se()).powi(2) + (2.0 * s / t2 * reference.sum.mean_se()).powi(2)).sqrt()
}

pub fn run_tppi_fidelity(p: &TppiParams, s: &RunSettings) -> Result<FidelityReport> {
    p.readout.validate()?;
    p.decoherence.validate()?;
    p.coupling.check_calibrated()?;
    s.validate()?;
    if !(p.p_nv_minus > 0.0 && p.p_nv_minus <= 1.0) {
        return Err(Error::Domain(format!("p_nv_minus = {} not in (0, 1]", p.p_nv_minus)));
    }
    let (lo, hi) = p.taus.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    if p.taus.len() < 8 || !(2.0 * p.omega_tppi.abs() * (hi - lo) >= 2.0 * TAU) {
        return Err(Error::Domain("the increment sweep must cover at least two periods of 2φ with >= 8 points".into()));
    }
    let (ca, cb) = p.decoherence.gate_coherences(p.coupling.t_e);
    let decay = GateDecay::from_coherences(ca, cb);
    let rho_phi = match p.rho_gen {
        Some(r) => r.density_matrix()?,
        None => generated_state(&p.coupling, BellVariant::Phi, ca, cb)?,
    };
    let rho_psi = generated_state(&p.coupling, BellVariant::Psi, ca, cb)?;
    let truth = RhoGen::from_density(&rho_phi);
    let m = p.readout;
    let tags = [CycleTag::PhiSig, CycleTag::PhiRef, CycleTag::PsiSig, CycleTag::PsiRef];
    let mut points = Vec::with_capacity(p.taus.len());
    let mut shots = Vec::new();
    for (k, &tau) in p.taus.iter().enumerate() {
        let phase = p.omega_tppi * tau;
        let mut pops = Vec::with_capacity(4);
        for (variant, rho) in [(BellVariant::Phi, &rho_phi), (BellVariant::Psi, &rho_psi)] {
            for last in [FinalPulse::Plus, FinalPulse::Minus] {
                let block = disentangle_block(&p.coupling, variant, last, phase)?;
                pops.push(clean(through_block(rho, &block, ca, cb).populations()));
            }
        }
        let photons = |q: &[f64; 4]| 2.0 * m.alpha0 + (m.alpha1 - m.alpha0) * excited_count(q);
        let point = if p.shots_per_point == 0 {
            TppiPoint {
                tau,
                phi_tppi: phase,
                contrast_phi: contrast_from_means(photons(&pops[0]), photons(&pops[1])),
                contrast_phi_se: 0.0,
                contrast_psi: contrast_from_means(photons(&pops[2]), photons(&pops[3])),
                contrast_psi_se: 0.0,
            }
        } else {
            let acq = acquire(&tags, p.shots_per_point, s, k as u64, |ctx, rng| {
                let mm = if ctx.drift == 1.0 { m } else { m.scaled(ctx.drift) };
                sample_photons(&mm, &pops[ctx.channel], rng)
            });
            let c = acq.merged();
            shots.extend(acq.shots);
            TppiPoint {
                tau,
                phi_tppi: phase,
                contrast_phi: contrast_from_means(c[0].sum.mean(), c[1].sum.mean()),
                contrast_phi_se: contrast_se(&c[0], &c[1]),
                contrast_psi: contrast_from_means(c[2].sum.mean(), c[3].sum.mean()),
                contrast_psi_se: contrast_se(&c[2], &c[3]),
            }
        };
        points.push(point);
    }
    let x: Vec<f64> = points.iter().map(|q| q.tau).collect();
    let y_phi: Vec<f64> = points.iter().map(|q| q.contrast_phi).collect();
    let y_psi: Vec<f64> = points.iter().map(|q| q.contrast_psi).collect();
    let omega = 2.0 * p.omega_tppi;
    let fit = fit_sinusoid(&x, &y_phi, omega)?;
    let fit_psi = fit_sinusoid(&x, &y_psi, omega)?;
    let mean_se = points.iter().map(|q| q.contrast_phi_se).sum::<f64>() / points.len() as f64;
    if fit.rms_residual > MAX_RESIDUAL_SIGMAS * mean_se + 1e-9 {
        return Err(Error::PoorFit(format!(
            "rms residual {:.3e} exceeds {MAX_RESIDUAL_SIGMAS} x per-point error {mean_se:.3e}",
            fit.rms_residual
        )));
    }
    let scale = m.contrast_ratio() * decay.sigma_ab / 2.0;
    let a0_fit = fit.amplitude() / scale;
    let coh_phase_a_fit = (-fit.cos_coef).atan2(fit.sin_coef);
    let p2 = p.p_nv_minus * p.p_nv_minus;
    let f_expected_hz = omega / TAU;
    let frequency_phi = frequency_scan(&x, &y_phi, 0.5 * f_expected_hz, 1.5 * f_expected_hz, 201)?;
    Ok(FidelityReport {
        a0_fit,
        coh_phase_a_fit,
        a0_true: truth.a0,
        coh_phase_a_true: truth.coh_phase_a,
        f_bound: p2 * (a0_fit / 2.0) * (1.0 - coh_phase_a_fit.sin()),
        f_expected: p2 * decay.expected_fidelity(),
        p_nv_minus: p.p_nv_minus,
        decay,
        amplitude_phi: fit.amplitude(),
        amplitude_psi: fit_psi.amplitude(),
        frequency_phi,
        frequency_expected: f_expected_hz,
        rms_residual: fit.rms_residual,
        forms: fidelity_form_sensitivity(p.decoherence.t2_a, p.decoherence.t2_b, p.coupling.t_e),
        points,
        shots,
    })
}

/// The ideal Φ coherence phase.
pub const IDEAL_COH_PHASE: f64 = -FRAC_PI_2;
