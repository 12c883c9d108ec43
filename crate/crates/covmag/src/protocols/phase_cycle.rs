//! Variance-based covariance detection for two unresolved NVs.
//!
//! Both NVs are read together, so only the variance of the summed count is
//! available. Four cycles alternate the relative orientation of the mapped
//! signals; the combination `(v𝒜 − vℬ − v𝒞 + v𝒟)/8` keeps the cross term and
//! cancels the local variances.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{acquire, oracle_mean, Acquisition, ChannelStats, Estimate, RunSettings};
use crate::carbon13::{flip_probability, flip_pulse_count, HyperfineCoupling};
use crate::error::{Error, Result};
use crate::gates::Nv;
use crate::noisefield::{correlated_sin_moment, CorrelatedSource, DecoherenceModel, SequenceTiming};
use crate::readout::{phase_cycled_baseline, CycleTag, ReadoutModel, ShotRecord};

/// Residual of the cycle means, in standard errors, that flags drift.
const DRIFT_SIGMAS: f64 = 5.0;

const CYCLES: [CycleTag; 4] = [CycleTag::A, CycleTag::B, CycleTag::C, CycleTag::D];

/// Shared inputs of the phase-cycling protocols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseCycleParams {
    pub source: CorrelatedSource,
    pub sense: SequenceTiming,
    pub readout: ReadoutModel,
    #[serde(default)]
    pub decoherence: DecoherenceModel,
    pub shots_per_cycle: u64,
    /// Samples of the noise-free phase-moment oracle; 0 skips it.
    #[serde(default = "default_oracle_samples")]
    pub oracle_samples: u64,
}

fn default_oracle_samples() -> u64 {
    200_000
}

/// ¹³C-conditioned flip used as the orientation alternation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C13Params {
    pub coupling: HyperfineCoupling,
    /// Spacing of blocks without a selective flip, s.
    pub tau0: f64,
    /// Spacing of blocks with a selective flip, s.
    pub tau1: f64,
    /// Pulse count; calibrated at `tau1` when absent.
    #[serde(default)]
    pub n_flip: Option<u32>,
    /// Overrides the flip probability at `tau1` (and sets it to 0 at `tau0`).
    #[serde(default)]
    pub forced_flip: Option<f64>,
}

/// Outcome of a four-cycle run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCycleResult {
    pub shots_per_cycle: u64,
    /// Variance of the summed count per cycle 𝒜..𝒟.
    pub variances: [f64; 4],
    pub variance_se: [f64; 4],
    pub means: [f64; 4],
    /// `(v𝒜 − vℬ − v𝒞 + v𝒟)/8`.
    pub cov_raw: f64,
    /// Mean-based local-variance baseline.
    pub baseline: f64,
    /// `cov_raw − baseline`.
    pub cov: Estimate,
    /// `μ𝒜 − μℬ − μ𝒞 + μ𝒟`, zero in expectation.
    pub mean_residual: f64,
    pub mean_residual_se: f64,
    pub drift_warning: bool,
    /// Signed mapping factors `(f_a, f_b)` per cycle.
    pub factors: [[f64; 2]; 4],
    /// `(f_a f_b)𝒜 − … + (f_a f_b)𝒟` over 4; 1 for ideal alternation.
    pub attenuation: f64,
    /// Coherence prefactor `e^{−χ_a − χ_b}` of the sensing window.
    pub coherence: f64,
    /// `⟨sin φ_a sin φ_b⟩` from the noise-free oracle, with its standard error.
    pub phase_moment: Option<[f64; 2]>,
    /// `¼(α₀ − α₁)²·coherence·⟨sin φ_a sin φ_b⟩·attenuation`.
    pub expected_cov: Option<f64>,
    #[serde(skip)]
    pub shots: Vec<ShotRecord>,
}

/// `⟨sin φ_a sin φ_b⟩` for a source sensed over `seq`: exact for the
/// Gaussian source, sampled for tones. Returns `(mean, standard error)`.
pub fn phase_moment(source: &CorrelatedSource, seq: &SequenceTiming, samples: u64, seed: u64) -> Result<(f64, f64)> {
    match source {
        CorrelatedSource::None => Ok((0.0, 0.0)),
        CorrelatedSource::Gaussian { chi_c, sign_b } => Ok((sign_b * correlated_sin_moment(*chi_c)?, 0.0)),
        CorrelatedSource::Tone(_) => {
            let span = seq.duration();
            Ok(oracle_mean(samples, seed, |rng| {
                let p = source.realize(span, rng).phases(seq, 0.0);
                p.phi_a.sin() * p.phi_b.sin()
            }))
        }
    }
}

fn validate(p: &PhaseCycleParams, s: &RunSettings) -> Result<()> {
    p.source.validate()?;
    p.sense.validate()?;
    p.readout.validate()?;
    p.decoherence.validate()?;
    s.validate()?;
    if p.shots_per_cycle < 2 {
        return Err(Error::Domain("at least 2 shots per cycle are needed for a variance".into()));
    }
    if p.shots_per_cycle < 1000 {
        warn!("{} shots per cycle is too few for a meaningful variance estimate", p.shots_per_cycle);
    }
    Ok(())
}

fn corrected_cov(m: &ReadoutModel, c: &[ChannelStats]) -> f64 {
    let v: Vec<f64> = c.iter().map(|x| x.sum.variance()).collect();
    let mu = [c[0].sum.mean(), c[1].sum.mean(), c[2].sum.mean(), c[3].sum.mean()];
    (v[0] - v[1] - v[2] + v[3]) / 8.0 - phase_cycled_baseline(m, mu)
}

fn run_cycles(p: &PhaseCycleParams, s: &RunSettings, factors: [[f64; 2]; 4]) -> Result<PhaseCycleResult> {
    validate(p, s)?;
    let span = p.sense.duration();
    let ca = p.decoherence.coherence_sense(Nv::A, span);
    let cb = p.decoherence.coherence_sense(Nv::B, span);
    let m = p.readout;
    let acq: Acquisition = acquire(&CYCLES, p.shots_per_cycle, s, 0, |ctx, rng| {
        let phases = p.source.realize(span, rng).phases(&p.sense, 0.0);
        let [fa, fb] = factors[ctx.channel];
        let p1a = 0.5 * (1.0 - fa * ca * phases.phi_a.sin());
        let p1b = 0.5 * (1.0 - fb * cb * phases.phi_b.sin());
        let spin_a = rng.gen::<f64>() < p1a;
        let spin_b = rng.gen::<f64>() < p1b;
        let mm = if ctx.drift == 1.0 { m } else { m.scaled(ctx.drift) };
        (mm.sample_counts(spin_a, rng), mm.sample_counts(spin_b, rng))
    });
    let c = acq.merged();
    let variances = [0, 1, 2, 3].map(|k| c[k].sum.variance());
    let variance_se = [0, 1, 2, 3].map(|k| c[k].sum.variance_se());
    let means = [0, 1, 2, 3].map(|k| c[k].sum.mean());
    let cov_raw = (variances[0] - variances[1] - variances[2] + variances[3]) / 8.0;
    let baseline = phase_cycled_baseline(&m, means);
    let cov_se = variance_se.iter().map(|x| x * x).sum::<f64>().sqrt() / 8.0;
    let bootstrap = acq.bootstrap(s.bootstrap_resamples, s.seed, |c| corrected_cov(&m, c));
    let mean_residual = means[0] - means[1] - means[2] + means[3];
    let mean_residual_se = (0..4).map(|k| c[k].sum.mean_se().powi(2)).sum::<f64>().sqrt();
    let drift_warning = mean_residual.abs() > DRIFT_SIGMAS * mean_residual_se;
    if drift_warning {
        warn!(
            "cycle-mean residual {mean_residual:.3e} exceeds {DRIFT_SIGMAS} standard errors ({mean_residual_se:.3e}): systematic drift"
        );
    }
    let prod = factors.map(|f| f[0] * f[1]);
    let attenuation = (prod[0] - prod[1] - prod[2] + prod[3]) / 4.0;
    let phase_moment = (p.oracle_samples > 0 || !matches!(p.source, CorrelatedSource::Tone(_)))
        .then(|| phase_moment(&p.source, &p.sense, p.oracle_samples, s.seed))
        .transpose()?;
    let expected_cov = phase_moment.map(|(r, _)| 0.25 * m.contrast().powi(2) * ca * cb * r * attenuation);
    Ok(PhaseCycleResult {
        shots_per_cycle: p.shots_per_cycle,
        variances,
        variance_se,
        means,
        cov_raw,
        baseline,
        cov: Estimate { value: cov_raw - baseline, se: cov_se, bootstrap },
        mean_residual,
        mean_residual_se,
        drift_warning,
        factors,
        attenuation,
        coherence: ca * cb,
        phase_moment: phase_moment.map(|(a, b)| [a, b]),
        expected_cov,
        shots: acq.shots,
    })
}

/// Four cycles with orientation signs 𝒜 = (+,+), ℬ = (+,−), 𝒞 = (−,+),
/// 𝒟 = (−,−) on the mapped signals of NV a and NV b.
pub fn run_phase_cycle(p: &PhaseCycleParams, s: &RunSettings) -> Result<PhaseCycleResult> {
    run_cycles(p, s, [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
}

/// Flip probabilities `(at tau1, at tau0)` and the pulse count used.
pub fn c13_flip_probabilities(c: &C13Params) -> Result<(f64, f64, u32)> {
    let n = match c.n_flip {
        Some(n) => n,
        None => flip_pulse_count(&c.coupling, c.tau1)?,
    };
    if let Some(f) = c.forced_flip {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Domain(format!("forced flip probability {f} not in [0, 1]")));
        }
        return Ok((f, 0.0, n));
    }
    Ok((flip_probability(&c.coupling, c.tau1, n)?, flip_probability(&c.coupling, c.tau0, n)?, n))
}

/// Phase cycling where the relative orientation is set by a ¹³C-conditioned
/// flip of NV a. Cycles 𝒜 and 𝒟 use spacing `tau0` (𝒟 with both NVs
/// globally inverted), ℬ and 𝒞 use `tau1`. A flip with probability `p`
/// scales NV a's mapped signal by `1 − 2p`.
pub fn run_c13_phase_cycle(p: &PhaseCycleParams, c: &C13Params, s: &RunSettings) -> Result<PhaseCycleResult> {
    c.coupling.validate()?;
    let (p_flip, q_flip, _) = c13_flip_probabilities(c)?;
    let (on, off) = (1.0 - 2.0 * p_flip, 1.0 - 2.0 * q_flip);
    run_cycles(p, s, [[off, 1.0], [on, 1.0], [on, 1.0], [-off, -1.0]])
}

/// Covariance of separately read counts of a spectrally resolvable pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvablePairResult {
    pub shots: u64,
    /// Sample covariance of `(n_a, n_b)`.
    pub cov: Estimate,
    /// `cov/(¼(α₀ − α₁)²)`, an estimate of `e^{−χ_a−χ_b}⟨sin φ_a sin φ_b⟩`.
    pub r_ideal: Estimate,
    pub expected_cov: Option<f64>,
}

/// Reads both NVs separately on every shot; `shots_per_cycle` shots in total.
pub fn run_resolvable_pair(p: &PhaseCycleParams, s: &RunSettings) -> Result<ResolvablePairResult> {
    validate(p, s)?;
    let span = p.sense.duration();
    let ca = p.decoherence.coherence_sense(Nv::A, span);
    let cb = p.decoherence.coherence_sense(Nv::B, span);
    let m = p.readout;
    let acq = acquire(&[CycleTag::A], p.shots_per_cycle, s, 0, |ctx, rng| {
        let phases = p.source.realize(span, rng).phases(&p.sense, 0.0);
        let spin_a = rng.gen::<f64>() < 0.5 * (1.0 - ca * phases.phi_a.sin());
        let spin_b = rng.gen::<f64>() < 0.5 * (1.0 - cb * phases.phi_b.sin());
        let mm = if ctx.drift == 1.0 { m } else { m.scaled(ctx.drift) };
        (mm.sample_counts(spin_a, rng), mm.sample_counts(spin_b, rng))
    });
    let c = acq.merged();
    let cov = Estimate {
        value: c[0].pair.covariance(),
        se: c[0].pair.covariance_se(),
        bootstrap: acq.bootstrap(s.bootstrap_resamples, s.seed, |c| c[0].pair.covariance()),
    };
    let scale = 0.25 * m.contrast().powi(2);
    let r_ideal = Estimate {
        value: cov.value / scale,
        se: cov.se / scale,
        bootstrap: cov.bootstrap.map(|b| crate::stats::BootstrapSummary {
            se: b.se / scale,
            lo: b.lo / scale,
            hi: b.hi / scale,
            resamples: b.resamples,
        }),
    };
    let pm = (p.oracle_samples > 0 || !matches!(p.source, CorrelatedSource::Tone(_)))
        .then(|| phase_moment(&p.source, &p.sense, p.oracle_samples, s.seed))
        .transpose()?;
    Ok(ResolvablePairResult {
        shots: p.shots_per_cycle,
        cov,
        r_ideal,
        expected_cov: pm.map(|(r, _)| scale * ca * cb * r),
    })
}
