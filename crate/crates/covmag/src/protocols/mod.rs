//! End-to-end experiment simulators.
//!
//! Every protocol draws shots into channels (phase cycles, Bell variants,
//! signal/reference). Shots are grouped into blocks that interleave the
//! channels; each block owns an integer accumulator and each shot its own
//! random stream, so results do not depend on thread count.

pub mod bell;
pub mod phase_cycle;
pub mod tppi;
pub mod two_time;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::readout::{CycleTag, ShotRecord};
use crate::rng::{salt, Stream, StreamFamily};
use crate::stats::{block_bootstrap, merge_all, Accumulate, BootstrapSummary, Moments, PairMoments};

pub use bell::{run_bell_covariance, BellParams, BellRunResult};
pub use phase_cycle::{
    run_c13_phase_cycle, run_phase_cycle, run_resolvable_pair, C13Params, PhaseCycleParams, PhaseCycleResult,
    ResolvablePairResult,
};
pub use tppi::{run_tppi_fidelity, FidelityReport, RhoGen, TppiParams};
pub use two_time::{run_two_time_overlap, run_two_time_swap, OverlapParams, SwapParams, TwoTimePoint, TwoTimeResult};

/// Bits reserved for the shot index within one sweep point.
const POINT_SHIFT: u32 = 40;

fn default_block() -> u64 {
    100
}

fn default_resamples() -> usize {
    10_000
}

fn default_record() -> bool {
    true
}

/// Seed, blocking and output options shared by all protocols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub seed: u64,
    /// Shots per block; channels alternate block by block.
    #[serde(default = "default_block")]
    pub block_size: u64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    /// Keep every shot for the per-shot CSV. On by default in config files.
    #[serde(default = "default_record")]
    pub record_shots: bool,
    /// Relative amplitude of a per-block brightness drift, `1 + drift·u`
    /// with `u` uniform on [−1, 1].
    #[serde(default)]
    pub drift: f64,
}

impl RunSettings {
    pub fn new(seed: u64) -> Self {
        RunSettings {
            seed,
            block_size: default_block(),
            bootstrap_resamples: default_resamples(),
            record_shots: false,
            drift: 0.0,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.block_size == 0 {
            return Err(crate::Error::Domain("block_size must be >= 1".into()));
        }
        if !(self.drift >= 0.0 && self.drift < 1.0) {
            return Err(crate::Error::Domain(format!("drift must lie in [0, 1), got {}", self.drift)));
        }
        Ok(())
    }
}

/// Sufficient statistics of one channel: the summed two-NV count and the
/// per-NV pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub sum: Moments,
    pub pair: PairMoments,
}

impl ChannelStats {
    fn push(&mut self, a: u64, b: u64) {
        self.sum.push(a + b);
        self.pair.push(a, b);
    }
}

impl Accumulate for ChannelStats {
    fn merge(&mut self, other: &Self) {
        self.sum.merge(&other.sum);
        self.pair.merge(&other.pair);
    }
}

/// Fewest blocks per channel for which a block bootstrap is reported.
pub const MIN_BOOTSTRAP_BLOCKS: usize = 20;

/// Shots of one acquisition, per channel and per block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Acquisition {
    pub tags: Vec<CycleTag>,
    pub blocks: Vec<Vec<ChannelStats>>,
    pub shots: Vec<ShotRecord>,
}

impl Acquisition {
    /// Channel totals in tag order.
    pub fn merged(&self) -> Vec<ChannelStats> {
        self.blocks.iter().map(|b| merge_all(b)).collect()
    }

    /// Block bootstrap of a statistic of the channel totals. `None` when
    /// resampling is off or some channel has too few blocks for the spread
    /// of resampled values to mean anything; callers then fall back to the
    /// analytic error.
    pub fn bootstrap<F>(&self, resamples: usize, seed: u64, statistic: F) -> Option<BootstrapSummary>
    where
        F: Fn(&[ChannelStats]) -> f64 + Sync,
    {
        let enough = self.blocks.iter().all(|b| b.len() >= MIN_BOOTSTRAP_BLOCKS);
        (resamples > 0 && enough).then(|| block_bootstrap(&self.blocks, resamples, seed, statistic))
    }
}

/// What a shot needs to know about its place in the acquisition.
#[derive(Clone, Copy, Debug)]
pub struct ShotContext {
    pub channel: usize,
    pub shot: u64,
    /// Multiplicative brightness factor of the shot's block.
    pub drift: f64,
}

/// Runs `shots_per_channel` shots on every channel. `point` separates the
/// streams of different sweep points. `shot_fn` returns the two NV counts.
pub fn acquire<F>(
    tags: &[CycleTag],
    shots_per_channel: u64,
    settings: &RunSettings,
    point: u64,
    shot_fn: F,
) -> Acquisition
where
    F: Fn(&ShotContext, &mut Stream) -> (u64, u64) + Sync,
{
    let channels = tags.len() as u64;
    let block = settings.block_size.max(1);
    let rounds = shots_per_channel.div_ceil(block);
    let base = point << POINT_SHIFT;
    let shots = StreamFamily::new(settings.seed, salt::SHOT);
    let drift = StreamFamily::new(settings.seed, salt::DRIFT);
    let per_block: Vec<(ChannelStats, Vec<ShotRecord>)> = (0..rounds * channels)
        .into_par_iter()
        .map(|g| {
            let (round, channel) = (g / channels, (g % channels) as usize);
            let factor = if settings.drift > 0.0 {
                1.0 + settings.drift * drift.get(base | g).gen_range(-1.0..=1.0)
            } else {
                1.0
            };
            let count = block.min(shots_per_channel - round * block);
            let mut stats = ChannelStats::default();
            let mut records = Vec::new();
            for j in 0..count {
                let index = base | (g * block + j);
                let mut rng = shots.get(index);
                let ctx = ShotContext { channel, shot: index, drift: factor };
                let (a, b) = shot_fn(&ctx, &mut rng);
                stats.push(a, b);
                if settings.record_shots {
                    records.push(ShotRecord {
                        shot: index,
                        cycle_tag: tags[channel],
                        photons: a + b,
                        seed_index: index,
                    });
                }
            }
            (stats, records)
        })
        .collect();
    let mut acq = Acquisition {
        tags: tags.to_vec(),
        blocks: vec![Vec::with_capacity(rounds as usize); tags.len()],
        shots: Vec::new(),
    };
    for (g, (stats, records)) in per_block.into_iter().enumerate() {
        acq.blocks[g % tags.len()].push(stats);
        acq.shots.extend(records);
    }
    acq
}

/// Mean and standard error of `sample` over independent oracle streams.
pub fn oracle_mean<F>(samples: u64, seed: u64, sample: F) -> (f64, f64)
where
    F: Fn(&mut Stream) -> f64 + Sync,
{
    let fam = StreamFamily::new(seed, salt::ORACLE);
    let chunk = 4096u64;
    let parts: Vec<(f64, f64)> = (0..samples.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let (mut s1, mut s2) = (0.0, 0.0);
            for i in c * chunk..((c + 1) * chunk).min(samples) {
                let x = sample(&mut fam.get(i));
                s1 += x;
                s2 += x * x;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = samples as f64;
    let mean = s1 / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Estimate with its analytic standard error and optional bootstrap summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub bootstrap: Option<BootstrapSummary>,
}

impl Estimate {
    /// Bootstrap standard error when available, else the analytic one.
    pub fn error(&self) -> f64 {
        self.bootstrap.map_or(self.se, |b| b.se)
    }

    /// Number of standard errors between the estimate and `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target) / self.error()
    }
}

/// Populations relaxed toward `½(|1,1⟩⟨1,1| + |0,0⟩⟨0,0|)` by a gate
/// coherence factor `k`.
pub(crate) fn mix_gate(p: [f64; 4], k: f64) -> [f64; 4] {
    [k * p[0] + (1.0 - k) * 0.5, k * p[1], k * p[2], k * p[3] + (1.0 - k) * 0.5]
}

/// Expected number of NVs in `m_s = 1` for basis-ordered populations.
pub(crate) fn excited_count(p: &[f64; 4]) -> f64 {
    2.0 * p[0] + p[1] + p[2]
}

/// Clamps tiny negative round-off and renormalises.
pub(crate) fn clean(p: [f64; 4]) -> [f64; 4] {
    let q = p.map(|x| x.max(0.0));
    let s: f64 = q.iter().sum();
    q.map(|x| x / s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acquisition_is_thread_independent() {
        let tags = [CycleTag::A, CycleTag::B, CycleTag::C];
        let mut s = RunSettings::new(42);
        s.block_size = 7;
        s.record_shots = true;
        s.drift = 0.1;
        let f = |ctx: &ShotContext, rng: &mut Stream| -> (u64, u64) {
            (rng.gen_range(0..5) + ctx.channel as u64, (rng.gen_range(0.0..10.0) * ctx.drift) as u64)
        };
        let par = acquire(&tags, 101, &s, 3, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let ser = pool.install(|| acquire(&tags, 101, &s, 3, f));
        assert_eq!(par, ser);
        assert_eq!(par.shots.len(), 303);
        assert!(par.merged().iter().all(|c| c.sum.n == 101));
        assert_eq!(par.blocks[0].len(), 15);
        let other = acquire(&tags, 101, &s, 4, f);
        assert_ne!(par.merged(), other.merged());
    }

    #[test]
    fn bootstrap_needs_enough_blocks() {
        let mut s = RunSettings::new(3);
        let f = |_: &ShotContext, rng: &mut Stream| -> (u64, u64) { (rng.gen_range(0..5), rng.gen_range(0..5)) };
        let stat = |c: &[ChannelStats]| c[0].sum.mean();
        s.block_size = 50;
        let few = acquire(&[CycleTag::A], 100, &s, 0, f);
        assert_eq!(few.bootstrap(100, 1, stat), None);
        s.block_size = 5;
        let many = acquire(&[CycleTag::A], 100, &s, 0, f);
        assert_eq!(many.bootstrap(100, 1, stat).unwrap().resamples, 100);
        assert_eq!(many.bootstrap(0, 1, stat), None);
    }

    #[test]
    fn oracle_mean_of_uniform() {
        let (m, se) = oracle_mean(100_000, 1, |r| r.gen::<f64>());
        assert!((m - 0.5).abs() < 4.0 * se);
        assert!((se - (1.0f64 / 12.0 / 1e5).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn gate_mixing_preserves_trace() {
        let p = mix_gate([0.1, 0.2, 0.3, 0.4], 0.7);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(mix_gate([0.0, 0.0, 0.0, 1.0], 0.0), [0.5, 0.0, 0.0, 0.5]);
    }
}
