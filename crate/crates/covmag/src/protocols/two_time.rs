//! Two-time correlators.
//!
//! The SWAP protocol senses on NV a, hands the phase to NV b and senses again
//! after a delay, giving `⟨sin φ_a(0) sin φ_b(t)⟩`. The idle NV always sits in
//! `m_s = 0`, so the coupling never acts during sensing.
//!
//! The overlap protocol starts from a Bell pair and lets the two sensing
//! windows overlap in time. NV b's early delay phase and NV a's late delay
//! phase enter as cosine weights on the correlator.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{acquire, clean, excited_count, mix_gate, oracle_mean, ChannelStats, Estimate, RunSettings};
use crate::error::{Error, Result};
use crate::gates::{
    disentangle, entangle, external_phase, rotation_single, swap_from_cnots, BellVariant, CouplingSpec, FinalPulse, Nv,
    PhasePair, SwapSign,
};
use crate::hilbert::{apply, DensityMatrix, PureState, UnitaryOp, C64};
use crate::noisefield::{CorrelatedSource, DecoherenceModel, SequenceTiming, SourceShot};
use crate::readout::{sample_photons, CycleTag, ReadoutModel, ShotRecord};

fn default_oracle_samples() -> u64 {
    200_000
}

/// Result of one sweep point: MC estimate and the exact expectation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoTimePoint {
    /// Delay (SWAP) or window offset (overlap), s.
    pub t: f64,
    pub correlation: Estimate,
    pub expected: f64,
    pub expected_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoTimeResult {
    pub points: Vec<TwoTimePoint>,
    #[serde(skip)]
    pub shots: Vec<ShotRecord>,
}

fn check_common(
    source: &CorrelatedSource,
    m: &ReadoutModel,
    deco: &DecoherenceModel,
    s: &RunSettings,
    shots: u64,
) -> Result<()> {
    source.validate()?;
    m.validate()?;
    deco.validate()?;
    s.validate()?;
    if shots < 2 {
        return Err(Error::Domain("at least 2 shots per channel are needed".into()));
    }
    Ok(())
}

/// Phase of a tone or static source over a Hahn echo of length `t`
/// starting at `t0`; zero for an empty window.
fn delay_phases(shot: &SourceShot, t0: f64, t: f64) -> Result<PhasePair> {
    if t <= 0.0 {
        return Ok(PhasePair::default());
    }
    Ok(shot.phases(&SequenceTiming::hahn(t)?, t0))
}

// ---------------------------------------------------------------------------
// SWAP
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapParams {
    pub source: CorrelatedSource,
    /// Sensing sequence used by both windows.
    pub sense: SequenceTiming,
    pub readout: ReadoutModel,
    #[serde(default)]
    pub decoherence: DecoherenceModel,
    pub coupling: CouplingSpec,
    /// Gaps between the end of NV a's window and the start of NV b's, s.
    #[serde(deserialize_with = "crate::config::grid")]
    pub delays: Vec<f64>,
    pub shots_per_channel: u64,
    /// Place both windows at the same time regardless of the delay. Only
    /// meaningful as a cross-check against the same-time correlator.
    #[serde(default)]
    pub force_same_window: bool,
    #[serde(default = "default_oracle_samples")]
    pub oracle_samples: u64,
}

/// Coherence factors applied along the SWAP path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwapCoherence {
    pub sense_a: f64,
    /// Gate and delay attenuation of the transferred coherence on NV b.
    pub transfer: f64,
    pub sense_b: f64,
}

impl SwapCoherence {
    pub const NONE: SwapCoherence = SwapCoherence { sense_a: 1.0, transfer: 1.0, sense_b: 1.0 };

    pub fn product(&self) -> f64 {
        self.sense_a * self.transfer * self.sense_b
    }
}

/// Populations at the end of the SWAP sequence. `sign` selects the central
/// half-pulse phase of the CNOTs; `last` selects the final NV b pulse about
/// −y (`Plus`, signal) or +y (`Minus`, reference).
pub fn swap_populations(sign: SwapSign, last: FinalPulse, a1: f64, b2: f64, c: SwapCoherence) -> [f64; 4] {
    let start = apply(&rotation_single(Nv::A, FRAC_PI_2, FRAC_PI_2), &PureState::basis(0, 0));
    let final_phase = match last {
        FinalPulse::Plus => -FRAC_PI_2,
        FinalPulse::Minus => FRAC_PI_2,
    };
    let rho = DensityMatrix::from_pure(&start)
        .evolve(&external_phase(PhasePair::new(a1, 0.0)))
        .dephase(c.sense_a, 1.0)
        .evolve(&swap_from_cnots(sign))
        .dephase(1.0, c.transfer)
        .evolve(&external_phase(PhasePair::new(0.0, b2)))
        .dephase(1.0, c.sense_b)
        .evolve(&rotation_single(Nv::B, FRAC_PI_2, final_phase));
    clean(rho.populations())
}

const SWAP_TAGS: [CycleTag; 4] =
    [CycleTag::SwapPlusSig, CycleTag::SwapMinusSig, CycleTag::SwapPlusRef, CycleTag::SwapMinusRef];
const SWAP_CHANNELS: [(SwapSign, FinalPulse); 4] = [
    (SwapSign::Plus, FinalPulse::Plus),
    (SwapSign::Minus, FinalPulse::Plus),
    (SwapSign::Plus, FinalPulse::Minus),
    (SwapSign::Minus, FinalPulse::Minus),
];

/// `[(S₊sig − S₋sig) − (S₊ref − S₋ref)]/2` in units of NVs in `m_s = 1`.
fn swap_combination(s: [f64; 4]) -> f64 {
    ((s[0] - s[1]) - (s[2] - s[3])) / 2.0
}

fn swap_estimate(c: &[ChannelStats], scale: f64) -> (f64, f64) {
    let v = swap_combination([c[0].sum.mean(), c[1].sum.mean(), c[2].sum.mean(), c[3].sum.mean()]) / scale;
    let se = c.iter().map(|x| x.sum.mean_se().powi(2)).sum::<f64>().sqrt() / 2.0 / scale.abs();
    (v, se)
}

/// Times `(t0_a, t0_b)` of the two windows and the span they cover.
fn swap_windows(p: &SwapParams, delay: f64) -> (f64, f64, f64) {
    let t = p.sense.duration();
    let t0_b = if p.force_same_window { 0.0 } else { t + delay };
    (0.0, t0_b, t0_b + t)
}

pub fn run_two_time_swap(p: &SwapParams, s: &RunSettings) -> Result<TwoTimeResult> {
    check_common(&p.source, &p.readout, &p.decoherence, s, p.shots_per_channel)?;
    p.sense.validate()?;
    p.coupling.check_calibrated()?;
    if p.delays.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::Domain("delays must be >= 0 so that the windows do not overlap".into()));
    }
    let m = p.readout;
    let span = p.sense.duration();
    let k = p.decoherence.gate_coherence_mean(p.coupling.t_e);
    let scale = m.alpha1 - m.alpha0;
    let mut points = Vec::with_capacity(p.delays.len());
    let mut shots = Vec::new();
    for (idx, &delay) in p.delays.iter().enumerate() {
        let coh = SwapCoherence {
            sense_a: p.decoherence.coherence_sense(Nv::A, span),
            transfer: k * p.decoherence.coherence_delay(Nv::B, if p.force_same_window { 0.0 } else { delay }),
            sense_b: p.decoherence.coherence_sense(Nv::B, span),
        };
        let (t0_a, t0_b, total) = swap_windows(p, delay);
        let phases = |rng: &mut crate::rng::Stream| {
            let shot = p.source.realize(total, rng);
            (shot.phases(&p.sense, t0_a).phi_a, shot.phases(&p.sense, t0_b).phi_b)
        };
        let acq = acquire(&SWAP_TAGS, p.shots_per_channel, s, idx as u64, |ctx, rng| {
            let (a1, b2) = phases(rng);
            let (sign, last) = SWAP_CHANNELS[ctx.channel];
            let pops = swap_populations(sign, last, a1, b2, coh);
            let mm = if ctx.drift == 1.0 { m } else { m.scaled(ctx.drift) };
            sample_photons(&mm, &pops, rng)
        });
        let c = acq.merged();
        let (value, se) = swap_estimate(&c, scale);
        let bootstrap = acq.bootstrap(s.bootstrap_resamples, s.seed, |c| swap_estimate(c, scale).0);
        let (expected, expected_se) = oracle_mean(p.oracle_samples.max(1), s.seed ^ idx as u64, |rng| {
            let (a1, b2) = phases(rng);
            let counts = SWAP_CHANNELS.map(|(sign, last)| excited_count(&swap_populations(sign, last, a1, b2, coh)));
            swap_combination(counts)
        });
        points.push(TwoTimePoint { t: delay, correlation: Estimate { value, se, bootstrap }, expected, expected_se });
        shots.extend(acq.shots);
    }
    Ok(TwoTimeResult { points, shots })
}

// ---------------------------------------------------------------------------
// Overlapping windows
// ---------------------------------------------------------------------------

/// The four phases of the overlap sequence: NV a's sensing (`a1`) and late
/// delay (`a2`) windows, NV b's early delay (`b1`) and sensing (`b2`) windows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlapPhases {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

/// Coherence factors of the four windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapCoherence {
    pub sense_a: f64,
    pub delay_a: f64,
    pub delay_b: f64,
    pub sense_b: f64,
}

impl OverlapCoherence {
    pub const NONE: OverlapCoherence = OverlapCoherence { sense_a: 1.0, delay_a: 1.0, delay_b: 1.0, sense_b: 1.0 };
}

/// Closed-form amplitudes of the final state in basis order
/// `(|1,1⟩, |1,0⟩, |0,1⟩, |0,0⟩)`, up to the global phase
/// `e^{−i(a1+a2+b1+b2)/2}`.
pub fn overlap_amplitudes(variant: BellVariant, ph: OverlapPhases) -> [f64; 4] {
    let (c, s) = (|x: f64| (x / 2.0).cos(), |x: f64| (x / 2.0).sin());
    let OverlapPhases { a1, a2, b1, b2 } = ph;
    match variant {
        BellVariant::Phi => [
            c(a1 + b2) * c(a2) * c(b1) + c(a1 - b2) * s(a2) * s(b1),
            -(c(a1 + b2) * s(a2) * c(b1) - c(a1 - b2) * c(a2) * s(b1)),
            -(s(a2 + b1) * s(a1) * c(b2) + s(a2 - b1) * c(a1) * s(b2)),
            c(a2 + b1) * s(a1) * c(b2) + c(a2 - b1) * c(a1) * s(b2),
        ],
        BellVariant::Psi => [
            c(a2 - b1) * c(a1) * c(b2) + c(a2 + b1) * s(a1) * s(b2),
            -(c(a1 - b2) * s(a2) * c(b1) - c(a1 + b2) * c(a2) * s(b1)),
            -(s(a2 + b1) * s(a1) * c(b2) - s(a2 - b1) * c(a1) * s(b2)),
            c(a2 + b1) * s(a1) * c(b2) - c(a2 - b1) * c(a1) * s(b2),
        ],
    }
}

/// Pulse sequence of the overlap protocol as five stages separated by the
/// three phase windows.
#[derive(Clone, Copy, Debug)]
struct OverlapSequence {
    prep: PureState,
    event2: UnitaryOp,
    readout: UnitaryOp,
}

impl OverlapSequence {
    fn new(spec: &CouplingSpec, variant: BellVariant, last: FinalPulse) -> Result<Self> {
        let bell = apply(&entangle(spec, BellVariant::Phi)?, &PureState::basis(0, 0));
        let event2_phase = match variant {
            BellVariant::Phi => PI,
            BellVariant::Psi => 0.0,
        };
        Ok(OverlapSequence {
            prep: apply(&rotation_single(Nv::B, FRAC_PI_2, 0.0), &bell),
            event2: rotation_single(Nv::B, FRAC_PI_2, event2_phase),
            readout: disentangle(spec, variant, last)?,
        })
    }

    fn density(&self, ph: OverlapPhases, c: OverlapCoherence) -> DensityMatrix {
        DensityMatrix::from_pure(&self.prep)
            .evolve(&external_phase(PhasePair::new(ph.a1, ph.b1)))
            .dephase(c.sense_a, c.delay_b)
            .evolve(&self.event2)
            .evolve(&external_phase(PhasePair::new(0.0, ph.b2)))
            .dephase(1.0, c.sense_b)
            .evolve(&rotation_single(Nv::A, FRAC_PI_2, -FRAC_PI_2))
            .evolve(&external_phase(PhasePair::new(ph.a2, 0.0)))
            .dephase(c.delay_a, 1.0)
            .evolve(&rotation_single(Nv::A, FRAC_PI_2, FRAC_PI_2))
            .evolve(&self.readout)
    }

    fn state(&self, ph: OverlapPhases) -> PureState {
        let ops = [
            external_phase(PhasePair::new(ph.a1, ph.b1)),
            self.event2,
            external_phase(PhasePair::new(0.0, ph.b2)),
            rotation_single(Nv::A, FRAC_PI_2, -FRAC_PI_2),
            external_phase(PhasePair::new(ph.a2, 0.0)),
            rotation_single(Nv::A, FRAC_PI_2, FRAC_PI_2),
            self.readout,
        ];
        apply(&UnitaryOp::sequence(&ops), &self.prep)
    }
}

/// Final signal-channel state of the overlap sequence from exact propagation.
pub fn overlap_final_state(spec: &CouplingSpec, variant: BellVariant, ph: OverlapPhases) -> Result<PureState> {
    Ok(OverlapSequence::new(spec, variant, FinalPulse::Minus)?.state(ph))
}

/// `(S_Ψ − S_Φ)/2` of the signal channels for fixed phases, no decoherence.
/// Equals `((cos a2 + cos b1)/2)·sin a1·sin b2`.
pub fn overlap_ideal_difference(spec: &CouplingSpec, ph: OverlapPhases) -> Result<f64> {
    let count = |v| -> Result<f64> {
        let seq = OverlapSequence::new(spec, v, FinalPulse::Minus)?;
        Ok(excited_count(&clean(seq.density(ph, OverlapCoherence::NONE).populations())))
    };
    Ok((count(BellVariant::Psi)? - count(BellVariant::Phi)?) / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapParams {
    pub source: CorrelatedSource,
    /// NV a's sensing window, starting at time zero.
    pub sense_a: SequenceTiming,
    /// NV b's sensing window, starting at each offset.
    pub sense_b: SequenceTiming,
    pub readout: ReadoutModel,
    #[serde(default)]
    pub decoherence: DecoherenceModel,
    pub coupling: CouplingSpec,
    /// Start times of NV b's window, s.
    #[serde(deserialize_with = "crate::config::grid")]
    pub offsets: Vec<f64>,
    pub shots_per_channel: u64,
    #[serde(default = "default_oracle_samples")]
    pub oracle_samples: u64,
}

/// Window layout for one offset: NV a senses over `[0, T_a]` and idles to the
/// end of NV b's window; NV b idles over `[0, offset]` and then senses.
#[derive(Clone, Copy, Debug, PartialEq)]
struct OverlapWindows {
    offset: f64,
    t_a: f64,
    end: f64,
}

impl OverlapWindows {
    fn new(p: &OverlapParams, offset: f64) -> Result<Self> {
        let (t_a, end) = (p.sense_a.duration(), offset + p.sense_b.duration());
        if !(offset >= 0.0) || end < t_a {
            return Err(Error::Domain(format!(
                "offset {offset} must be >= 0 with NV b's window ending after NV a's ({end} < {t_a})"
            )));
        }
        Ok(OverlapWindows { offset, t_a, end })
    }

    fn coherence(&self, p: &OverlapParams) -> OverlapCoherence {
        let d = &p.decoherence;
        OverlapCoherence {
            sense_a: d.coherence_sense(Nv::A, self.t_a),
            delay_a: d.coherence_delay(Nv::A, self.end - self.t_a),
            delay_b: d.coherence_delay(Nv::B, self.offset),
            sense_b: d.coherence_sense(Nv::B, p.sense_b.duration()),
        }
    }

    fn phases(&self, p: &OverlapParams, shot: &SourceShot) -> Result<OverlapPhases> {
        Ok(OverlapPhases {
            a1: shot.phases(&p.sense_a, 0.0).phi_a,
            a2: delay_phases(shot, self.t_a, self.end - self.t_a)?.phi_a,
            b1: delay_phases(shot, 0.0, self.offset)?.phi_b,
            b2: shot.phases(&p.sense_b, self.offset).phi_b,
        })
    }
}

const OVERLAP_TAGS: [CycleTag; 4] = [CycleTag::PhiSig, CycleTag::PhiRef, CycleTag::PsiSig, CycleTag::PsiRef];

/// `[(S_Ψsig − S_Ψref) − (S_Φsig − S_Φref)]/4` in units of NVs in `m_s = 1`.
fn overlap_combination(s: [f64; 4]) -> f64 {
    ((s[2] - s[3]) - (s[0] - s[1])) / 4.0
}

fn overlap_estimate(c: &[ChannelStats], scale: f64) -> (f64, f64) {
    let v = overlap_combination([c[0].sum.mean(), c[1].sum.mean(), c[2].sum.mean(), c[3].sum.mean()]) / scale;
    let se = c.iter().map(|x| x.sum.mean_se().powi(2)).sum::<f64>().sqrt() / 4.0 / scale.abs();
    (v, se)
}

pub fn run_two_time_overlap(p: &OverlapParams, s: &RunSettings) -> Result<TwoTimeResult> {
    check_common(&p.source, &p.readout, &p.decoherence, s, p.shots_per_channel)?;
    p.sense_a.validate()?;
    p.sense_b.validate()?;
    p.coupling.check_calibrated()?;
    let m = p.readout;
    let k = p.decoherence.gate_coherence_mean(p.coupling.t_e);
    let seqs = [
        OverlapSequence::new(&p.coupling, BellVariant::Phi, FinalPulse::Minus)?,
        OverlapSequence::new(&p.coupling, BellVariant::Phi, FinalPulse::Plus)?,
        OverlapSequence::new(&p.coupling, BellVariant::Psi, FinalPulse::Minus)?,
        OverlapSequence::new(&p.coupling, BellVariant::Psi, FinalPulse::Plus)?,
    ];
    let scale = m.alpha1 - m.alpha0;
    let mut points = Vec::with_capacity(p.offsets.len());
    let mut shots = Vec::new();
    for (idx, &offset) in p.offsets.iter().enumerate() {
        let w = OverlapWindows::new(p, offset)?;
        let coh = w.coherence(p);
        // Window validity was checked above, so the Hahn windows are well formed.
        let phases =
            |rng: &mut crate::rng::Stream| w.phases(p, &p.source.realize(w.end, rng)).expect("validated windows");
        let pops = |ch: usize, ph| clean(mix_gate(seqs[ch].density(ph, coh).populations(), k));
        let acq = acquire(&OVERLAP_TAGS, p.shots_per_channel, s, idx as u64, |ctx, rng| {
            let q = pops(ctx.channel, phases(rng));
            let mm = if ctx.drift == 1.0 { m } else { m.scaled(ctx.drift) };
            sample_photons(&mm, &q, rng)
        });
        let c = acq.merged();
        let (value, se) = overlap_estimate(&c, scale);
        let bootstrap = acq.bootstrap(s.bootstrap_resamples, s.seed, |c| overlap_estimate(c, scale).0);
        let (expected, expected_se) = oracle_mean(p.oracle_samples.max(1), s.seed ^ idx as u64, |rng| {
            let ph = phases(rng);
            overlap_combination([0, 1, 2, 3].map(|ch| excited_count(&pops(ch, ph))))
        });
        points.push(TwoTimePoint { t: offset, correlation: Estimate { value, se, bootstrap }, expected, expected_se });
        shots.extend(acq.shots);
    }
    Ok(TwoTimeResult { points, shots })
}

/// Amplitudes of a final state as real numbers after removing the global
/// phase of the exact path, `e^{−i(a1+a2+b1+b2)/2}` for Φ and its negative
/// for Ψ. `None` if any residual imaginary part exceeds `tol`.
pub fn real_amplitudes(state: &PureState, variant: BellVariant, ph: OverlapPhases, tol: f64) -> Option<[f64; 4]> {
    let sign = match variant {
        BellVariant::Phi => 1.0,
        BellVariant::Psi => -1.0,
    };
    let g = C64::from_polar(sign, (ph.a1 + ph.a2 + ph.b1 + ph.b2) / 2.0);
    let amp = state.amplitudes().map(|z| z * g);
    amp.iter().all(|z| z.im.abs() <= tol).then(|| amp.map(|z| z.re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisefield::{AcToneSpec, SequenceKind};
    use crate::protocols::bell::{run_bell_covariance, BellParams};
    use crate::readout::ReadoutMode;
    use proptest::prelude::*;

    fn spec() -> CouplingSpec {
        CouplingSpec::from_gate_time(2.732e-6).unwrap()
    }

    fn readout() -> ReadoutModel {
        ReadoutModel::poisson(0.6, 0.12, ReadoutMode::Scc, 1e-3).unwrap()
    }

    fn settings(seed: u64) -> RunSettings {
        let mut s = RunSettings::new(seed);
        s.bootstrap_resamples = 0;
        s
    }

    const GRID: [f64; 5] = [0.0, PI / 4.0, -PI / 4.0, FRAC_PI_2, -FRAC_PI_2];

    #[test]
    fn exact_state_matches_closed_form_on_grid() {
        let sp = spec();
        let mut worst: f64 = 0.0;
        for v in [BellVariant::Phi, BellVariant::Psi] {
            for &a1 in &GRID {
                for &a2 in &GRID {
                    for &b1 in &GRID {
                        for &b2 in &GRID {
                            let ph = OverlapPhases { a1, a2, b1, b2 };
                            let st = overlap_final_state(&sp, v, ph).unwrap();
                            let amp = real_amplitudes(&st, v, ph, 1e-10).expect("real after global phase");
                            let want = overlap_amplitudes(v, ph);
                            for i in 0..4 {
                                worst = worst.max((amp[i] - want[i]).abs());
                            }
                        }
                    }
                }
            }
        }
        assert!(worst < 1e-10, "{worst}");
    }

    proptest! {
        #[test]
        fn difference_is_weighted_product_of_sines(a1 in -3.0f64..3.0, a2 in -3.0f64..3.0, b1 in -3.0f64..3.0, b2 in -3.0f64..3.0) {
            let d = overlap_ideal_difference(&spec(), OverlapPhases { a1, a2, b1, b2 }).unwrap();
            let want = (a2.cos() + b1.cos()) / 2.0 * a1.sin() * b2.sin();
            prop_assert!((d - want).abs() < 1e-12);
        }

        #[test]
        fn closed_form_is_normalized(a1 in -3.0f64..3.0, a2 in -3.0f64..3.0, b1 in -3.0f64..3.0, b2 in -3.0f64..3.0) {
            for v in [BellVariant::Phi, BellVariant::Psi] {
                let n: f64 = overlap_amplitudes(v, OverlapPhases { a1, a2, b1, b2 }).iter().map(|x| x * x).sum();
                prop_assert!((n - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn swap_difference_is_product_of_sines(a1 in -3.0f64..3.0, b2 in -3.0f64..3.0) {
            let counts = SWAP_CHANNELS.map(|(sg, last)| excited_count(&swap_populations(sg, last, a1, b2, SwapCoherence::NONE)));
            prop_assert!((swap_combination(counts) - a1.sin() * b2.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn delay_free_reduction() {
        for &a1 in &GRID {
            for &b2 in &GRID {
                let d = overlap_ideal_difference(&spec(), OverlapPhases { a1, b2, ..Default::default() }).unwrap();
                assert!((d - a1.sin() * b2.sin()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn swap_coherences_scale_the_product() {
        let c = SwapCoherence { sense_a: 0.9, transfer: 0.7, sense_b: 0.8 };
        let counts = SWAP_CHANNELS.map(|(sg, last)| excited_count(&swap_populations(sg, last, 1.1, -0.4, c)));
        assert!((swap_combination(counts) - c.product() * 1.1f64.sin() * (-0.4f64).sin()).abs() < 1e-12);
    }

    fn tone_swap(amp_b: f64, delays: Vec<f64>, shots: u64) -> SwapParams {
        SwapParams {
            source: CorrelatedSource::Tone(AcToneSpec::pure(500e3, 0.8e6, amp_b)),
            sense: SequenceTiming::new(SequenceKind::Hahn, 1e-6, 1).unwrap(),
            readout: readout(),
            decoherence: DecoherenceModel::exponential(50e-6, 50e-6),
            coupling: spec(),
            delays,
            shots_per_channel: shots,
            force_same_window: false,
            oracle_samples: 20_000,
        }
    }

    #[test]
    fn swap_tracks_oracle_and_oscillates() {
        let delays: Vec<f64> = (0..4).map(|k| k as f64 * 0.5e-6).collect();
        let r = run_two_time_swap(&tone_swap(0.8e6, delays.clone(), 15_000), &settings(11)).unwrap();
        for pt in &r.points {
            let z = (pt.correlation.value - pt.expected) / pt.correlation.se.hypot(pt.expected_se);
            assert!(z.abs() < 4.0, "{pt:?}");
        }
        // Windows start 1 µs apart at zero gap, half a tone period, so the
        // correlation starts negative and changes sign every 0.5 µs of delay.
        let e: Vec<f64> = r.points.iter().map(|p| p.expected).collect();
        assert!(e[0] < -0.05 && e[2] > 0.05 && e[1].abs() < 0.01 && e[3].abs() < 0.01, "{e:?}");
        let flipped = run_two_time_swap(&tone_swap(-0.8e6, delays, 2), &settings(11)).unwrap();
        for (a, b) in r.points.iter().zip(&flipped.points) {
            assert!((a.expected + b.expected).abs() < 6.0 * a.expected_se.max(1e-4));
        }
    }

    #[test]
    fn forced_same_window_matches_same_time_correlator() {
        let src = CorrelatedSource::Gaussian { chi_c: 0.4, sign_b: 1.0 };
        let sense = SequenceTiming::new(SequenceKind::Xy8, 500e-9, 8).unwrap();
        let deco = DecoherenceModel::exponential(35e-6, 35e-6);
        let sw = SwapParams {
            source: src,
            sense,
            readout: readout(),
            decoherence: deco,
            coupling: spec(),
            delays: vec![0.0],
            shots_per_channel: 40_000,
            force_same_window: true,
            oracle_samples: 40_000,
        };
        let r = run_two_time_swap(&sw, &settings(5)).unwrap();
        let bell = BellParams {
            source: src,
            sense,
            readout: readout(),
            decoherence: deco,
            coupling: spec(),
            shots_per_channel: 2,
            contrast: false,
            oracle_samples: 100_000,
        };
        let want = run_bell_covariance(&bell, &settings(5)).unwrap().expected_r_ideal.unwrap();
        let pt = r.points[0];
        assert!((pt.expected - want).abs() < 4.0 * pt.expected_se + 1e-3, "{} vs {want}", pt.expected);
        assert!(pt.correlation.z_score(want).abs() < 3.5, "{:?} vs {want}", pt.correlation);
    }

    #[test]
    fn negative_delay_is_rejected() {
        let p = tone_swap(0.8e6, vec![-1e-7], 10);
        assert!(matches!(run_two_time_swap(&p, &settings(1)), Err(Error::Domain(_))));
    }

    fn tone_overlap(offsets: Vec<f64>, shots: u64) -> OverlapParams {
        OverlapParams {
            source: CorrelatedSource::Tone(AcToneSpec::pure(2.5e6, 1.5e6, 1.5e6)),
            sense_a: SequenceTiming::new(SequenceKind::Xy8, 200e-9, 8).unwrap(),
            sense_b: SequenceTiming::new(SequenceKind::Xy8, 200e-9, 8).unwrap(),
            readout: readout(),
            decoherence: DecoherenceModel::exponential(50e-6, 50e-6),
            coupling: spec(),
            offsets,
            shots_per_channel: shots,
            oracle_samples: 10_000,
        }
    }

    #[test]
    fn overlap_tracks_oracle() {
        let r = run_two_time_overlap(&tone_overlap(vec![0.0, 0.2e-6, 0.4e-6], 15_000), &settings(3)).unwrap();
        for pt in &r.points {
            let z = (pt.correlation.value - pt.expected) / pt.correlation.se.hypot(pt.expected_se);
            assert!(z.abs() < 4.0, "{pt:?}");
        }
    }

    #[test]
    fn overlap_requires_ordered_windows() {
        let mut p = tone_overlap(vec![0.0], 10);
        p.sense_b = SequenceTiming::new(SequenceKind::Hahn, 0.5e-6, 1).unwrap();
        assert!(matches!(run_two_time_overlap(&p, &settings(1)), Err(Error::Domain(_))));
    }
}
