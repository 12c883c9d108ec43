//! Correlation sensing with Bell pairs.
//!
//! Shots alternate between Φ and Ψ preparations. A correlated field rotates
//! Φ at the sum of the two phases and Ψ at their difference, so half the
//! difference of the two mean signals is `⟨sin φ_a sin φ_b⟩`.

use serde::{Deserialize, Serialize};

use super::{acquire, clean, excited_count, mix_gate, ChannelStats, Estimate, RunSettings};
use crate::error::{Error, Result};
use crate::gates::{disentangle, entangle, external_phase, BellVariant, CouplingSpec, FinalPulse, Nv, PhasePair};
use crate::hilbert::{apply, DensityMatrix, PureState, UnitaryOp};
use crate::noisefield::{CorrelatedSource, DecoherenceModel, SequenceTiming};
use crate::protocols::phase_cycle::phase_moment;
use crate::readout::{sample_photons, sigma_r_general, CycleTag, ReadoutModel, ShotRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellParams {
    pub source: CorrelatedSource,
    pub sense: SequenceTiming,
    pub readout: ReadoutModel,
    #[serde(default)]
    pub decoherence: DecoherenceModel,
    pub coupling: CouplingSpec,
    pub shots_per_channel: u64,
    /// Also acquire reference channels and report contrast signals.
    #[serde(default)]
    pub contrast: bool,
    #[serde(default = "default_oracle_samples")]
    pub oracle_samples: u64,
}

fn default_oracle_samples() -> u64 {
    200_000
}

/// Contrast-mode signals `(S_sig − S_ref)/(S_sig + S_ref)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastSignals {
    pub s_phi: f64,
    pub s_psi: f64,
    /// `(S_Ψ − S_Φ)/2`, expected `k·r_ideal` with `k = (α₀−α₁)/(α₀+α₁)`.
    pub difference: Estimate,
    pub expected: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellRunResult {
    pub shots_per_channel: u64,
    /// Mean summed photon count of the Φ and Ψ signal channels.
    pub s_phi: f64,
    pub s_psi: f64,
    /// `(S_Ψ − S_Φ)/2` in photons, expected `(α₀ − α₁)·r_ideal`.
    pub r_e: Estimate,
    /// `r_e/(α₀ − α₁)`.
    pub r_ideal: Estimate,
    pub contrast: Option<ContrastSignals>,
    /// Gate coherence `K` and sensing coherence `e^{−χ_a−χ_b}`.
    pub gate_coherence: f64,
    pub sense_coherence: f64,
    pub phase_moment: Option<[f64; 2]>,
    /// `K·e^{−χ_a−χ_b}·⟨sin φ_a sin φ_b⟩`.
    pub expected_r_ideal: Option<f64>,
    /// Predicted `r_e/σ_S` per Φ/Ψ shot pair,
    /// `√(2/(1+σ_R²))·K·e^{−χ_a−χ_b}·⟨sin φ_a sin φ_b⟩`.
    pub predicted_snr_per_pair: Option<f64>,
    #[serde(skip)]
    pub shots: Vec<ShotRecord>,
}

/// Precomputed propagators of one channel.
#[derive(Clone, Copy, Debug)]
pub(crate) struct BellChannel {
    pub prep: PureState,
    pub readout: UnitaryOp,
}

impl BellChannel {
    pub(crate) fn new(spec: &CouplingSpec, variant: BellVariant, last: FinalPulse) -> Result<Self> {
        Ok(BellChannel {
            prep: apply(&entangle(spec, variant)?, &PureState::basis(0, 0)),
            readout: disentangle(spec, variant, last)?,
        })
    }

    /// Populations after phases, sensing dephasing `(ca, cb)` and gate mixing `k`.
    pub(crate) fn populations(&self, phases: PhasePair, ca: f64, cb: f64, k: f64) -> [f64; 4] {
        let sensed = apply(&external_phase(phases), &self.prep);
        let rho = DensityMatrix::from_pure(&sensed).dephase(ca, cb).evolve(&self.readout);
        clean(mix_gate(rho.populations(), k))
    }
}

/// Expected `m_s = 1` counts `(S_Φ, S_Ψ)` of the signal channels for fixed
/// phases without decoherence. `(S_Φ − S_Ψ)/2 = sin φ_a sin φ_b`.
pub fn bell_ideal_signals(spec: &CouplingSpec, phases: PhasePair) -> Result<(f64, f64)> {
    let phi = BellChannel::new(spec, BellVariant::Phi, FinalPulse::Plus)?;
    let psi = BellChannel::new(spec, BellVariant::Psi, FinalPulse::Plus)?;
    Ok((excited_count(&phi.populations(phases, 1.0, 1.0, 1.0)), excited_count(&psi.populations(phases, 1.0, 1.0, 1.0))))
}

fn mean_diff(c: &[ChannelStats], plus: usize, minus: usize) -> (f64, f64) {
    let v = (c[plus].sum.mean() - c[minus].sum.mean()) / 2.0;
    let se = c[plus].sum.mean_se().hypot(c[minus].sum.mean_se()) / 2.0;
    (v, se)
}

fn contrast_of(sig: f64, reference: f64) -> f64 {
    (sig - reference) / (sig + reference)
}

/// Delta-method standard error of `(S_sig − S_ref)/(S_sig + S_ref)`.
fn contrast_se(sig: &ChannelStats, reference: &ChannelStats) -> f64 {
    let (s, r) = (sig.sum.mean(), reference.sum.mean());
    let t2 = (s + r).powi(2);
    ((2.0 * r / t2 * sig.sum.mean_se()).powi(2) + (2.0 * s / t2 * reference.sum.mean_se()).powi(2)).sqrt()
}

pub fn run_bell_covariance(p: &BellParams, s: &RunSettings) -> Result<BellRunResult> {
    p.source.validate()?;
    p.sense.validate()?;
    p.readout.validate()?;
    p.decoherence.validate()?;
    p.coupling.check_calibrated()?;
    s.validate()?;
    if p.shots_per_channel < 2 {
        return Err(Error::Domain("at least 2 shots per channel are needed".into()));
    }
    let span = p.sense.duration();
    let ca = p.decoherence.coherence_sense(Nv::A, span);
    let cb = p.decoherence.coherence_sense(Nv::B, span);
    let k = p.decoherence.gate_coherence_mean(p.coupling.t_e);
    let mut tags = vec![CycleTag::PhiSig, CycleTag::PsiSig];
    let mut chans = vec![
        BellChannel::new(&p.coupling, BellVariant::Phi, FinalPulse::Plus)?,
        BellChannel::new(&p.coupling, BellVariant::Psi, FinalPulse::Plus)?,
    ];
    if p.contrast {
        tags.extend([CycleTag::PhiRef, CycleTag::PsiRef]);
        chans.push(BellChannel::new(&p.coupling, BellVariant::Phi, FinalPulse::Minus)?);
        chans.push(BellChannel::new(&p.coupling, BellVariant::Psi, FinalPulse::Minus)?);
    }
    let m = p.readout;
    let acq = acquire(&tags, p.shots_per_channel, s, 0, |ctx, rng| {
        let phases = p.source.realize(span, rng).phases(&p.sense, 0.0);
        let pops = chans[ctx.channel].populations(phases, ca, cb, k);
        let mm = if ctx.drift == 1.0 { m } else { m.scaled(ctx.drift) };
        sample_photons(&mm, &pops, rng)
    });
    let c = acq.merged();
    let (r_val, r_se) = mean_diff(&c, 1, 0);
    let boot = acq.bootstrap(s.bootstrap_resamples, s.seed, |c| mean_diff(c, 1, 0).0);
    let r_e = Estimate { value: r_val, se: r_se, bootstrap: boot };
    let scale = m.contrast();
    let r_ideal = Estimate {
        value: r_val / scale,
        se: r_se / scale.abs(),
        bootstrap: boot.map(|b| crate::stats::BootstrapSummary {
            se: b.se / scale.abs(),
            lo: (b.lo / scale).min(b.hi / scale),
            hi: (b.lo / scale).max(b.hi / scale),
            resamples: b.resamples,
        }),
    };
    let pm = (p.oracle_samples > 0 || !matches!(p.source, CorrelatedSource::Tone(_)))
        .then(|| phase_moment(&p.source, &p.sense, p.oracle_samples, s.seed))
        .transpose()?;
    let expected_r_ideal = pm.map(|(r, _)| k * ca * cb * r);
    let contrast = p.contrast.then(|| {
        let stat = |c: &[ChannelStats]| {
            (contrast_of(c[1].sum.mean(), c[3].sum.mean()) - contrast_of(c[0].sum.mean(), c[2].sum.mean())) / 2.0
        };
        let s_phi = contrast_of(c[0].sum.mean(), c[2].sum.mean());
        let s_psi = contrast_of(c[1].sum.mean(), c[3].sum.mean());
        ContrastSignals {
            s_phi,
            s_psi,
            difference: Estimate {
                value: stat(&c),
                se: contrast_se(&c[0], &c[2]).hypot(contrast_se(&c[1], &c[3])) / 2.0,
                bootstrap: acq.bootstrap(s.bootstrap_resamples, s.seed, stat),
            },
            expected: expected_r_ideal.map(|r| m.contrast_ratio() * r),
        }
    });
    let sigma_r = sigma_r_general(&m)?;
    Ok(BellRunResult {
        shots_per_channel: p.shots_per_channel,
        s_phi: c[0].sum.mean(),
        s_psi: c[1].sum.mean(),
        r_e,
        r_ideal,
        contrast,
        gate_coherence: k,
        sense_coherence: ca * cb,
        phase_moment: pm.map(|(a, b)| [a, b]),
        expected_r_ideal,
        predicted_snr_per_pair: expected_r_ideal.map(|r| (2.0 / (1.0 + sigma_r * sigma_r)).sqrt() * r),
        shots: acq.shots,
    })
}
