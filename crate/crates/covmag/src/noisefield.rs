//! Classical test fields, decoupling filter functions and decoherence.
//!
//! Sequences are described by their ±1 toggling function `y(t)`. An N-pulse
//! sequence with spacing τ has π pulses at `(k + ½)τ` and lasts `Nτ`; a Hahn
//! echo is the N = 1 case. The filter weight `F(ω)/ω²` is normalized to
//! `(π/8)|Y(ω)|²`, where `Y` is the Fourier transform of `y`, so a flat
//! spectrum confined to the fundamental passband gives `χ ≈ tS/π`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::PhasePair;
use crate::hilbert::C64;
use crate::tolerances::QUADRATURE_REL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Hahn,
    Xy4,
    Xy8,
    Xy16,
}

impl SequenceKind {
    fn block(self) -> usize {
        match self {
            SequenceKind::Hahn => 1,
            SequenceKind::Xy4 => 4,
            SequenceKind::Xy8 => 8,
            SequenceKind::Xy16 => 16,
        }
    }
}

/// Decoupling sequence timing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceTiming {
    pub kind: SequenceKind,
    /// Interpulse spacing, s.
    pub tau: f64,
    pub n_pulses: usize,
}

impl SequenceTiming {
    pub fn new(kind: SequenceKind, tau: f64, n_pulses: usize) -> Result<Self> {
        let s = SequenceTiming { kind, tau, n_pulses };
        s.validate()?;
        Ok(s)
    }

    /// Hahn echo of total length `total`.
    pub fn hahn(total: f64) -> Result<Self> {
        Self::new(SequenceKind::Hahn, total, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Domain(format!("tau must be positive, got {}", self.tau)));
        }
        let block = self.kind.block();
        let ok = match self.kind {
            SequenceKind::Hahn => self.n_pulses == 1,
            _ => self.n_pulses >= block && self.n_pulses.is_multiple_of(block),
        };
        if !ok {
            return Err(Error::Domain(format!(
                "{:?} needs a pulse count that is a multiple of {block}, got {}",
                self.kind, self.n_pulses
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.n_pulses as f64 * self.tau
    }

    pub fn pulse_times(&self) -> Vec<f64> {
        (0..self.n_pulses).map(|k| (k as f64 + 0.5) * self.tau).collect()
    }

    /// `(start, end, sign)` of each constant piece of the toggling function.
    pub fn segments(&self) -> Vec<(f64, f64, f64)> {
        let mut edges = vec![0.0];
        edges.extend(self.pulse_times());
        edges.push(self.duration());
        edges.windows(2).enumerate().map(|(k, w)| (w[0], w[1], if k % 2 == 0 { 1.0 } else { -1.0 })).collect()
    }
}

/// Random-phase AC test tone shared by both NVs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcToneSpec {
    /// Tone frequency, Hz.
    pub f0: f64,
    /// Peak phase-accumulation rate at NV a, rad/s. The sign encodes the
    /// addressed transition.
    pub amp_a: f64,
    pub amp_b: f64,
    /// Bandwidth of added phase noise, Hz. Zero is a pure tone.
    #[serde(default)]
    pub phase_noise_bw: f64,
    /// RMS of the added phase noise, rad.
    #[serde(default = "default_phase_noise_rms")]
    pub phase_noise_rms: f64,
}

fn default_phase_noise_rms() -> f64 {
    1.0
}

impl AcToneSpec {
    pub fn pure(f0: f64, amp_a: f64, amp_b: f64) -> Self {
        AcToneSpec { f0, amp_a, amp_b, phase_noise_bw: 0.0, phase_noise_rms: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::Domain(format!("tone frequency must be positive, got {}", self.f0)));
        }
        if self.phase_noise_bw < 0.0 || self.phase_noise_rms < 0.0 {
            return Err(Error::Domain("phase-noise bandwidth and rms must be >= 0".into()));
        }
        Ok(())
    }
}

/// Piecewise-linear phase noise on knots spaced `1/(2·bw)`.
#[derive(Clone, Debug, PartialEq)]
struct PhaseKnots {
    origin: f64,
    spacing: f64,
    values: Vec<f64>,
}

impl PhaseKnots {
    fn value(&self, t: f64) -> f64 {
        let x = (t - self.origin) / self.spacing;
        let k = (x.floor() as usize).min(self.values.len() - 2);
        let f = x - k as f64;
        self.values[k] * (1.0 - f) + self.values[k + 1] * f
    }

    fn knot_times_in(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        let first = ((t0 - self.origin) / self.spacing).ceil().max(0.0) as usize;
        (first..self.values.len())
            .map(move |k| self.origin + k as f64 * self.spacing)
            .take_while(move |&t| t < t1)
            .filter(move |&t| t > t0)
    }
}

/// One shot's realization of the tone: start phase and phase-noise path.
#[derive(Clone, Debug, PartialEq)]
pub struct ToneShot {
    omega: f64,
    theta0: f64,
    knots: Option<PhaseKnots>,
}

impl ToneShot {
    /// Draws a uniform start phase and, for `phase_noise_bw > 0`, a noise
    /// path covering `[0, span]`.
    pub fn sample<R: Rng + ?Sized>(spec: &AcToneSpec, span: f64, rng: &mut R) -> Self {
        let theta0 = rng.gen_range(0.0..TAU);
        let knots = (spec.phase_noise_bw > 0.0).then(|| {
            let spacing = 0.5 / spec.phase_noise_bw;
            let origin = -rng.gen_range(0.0..spacing);
            let count = ((span - origin) / spacing).ceil() as usize + 2;
            let normal = Normal::new(0.0, spec.phase_noise_rms).expect("finite rms");
            PhaseKnots { origin, spacing, values: (0..count).map(|_| normal.sample(rng)).collect() }
        });
        ToneShot { omega: TAU * spec.f0, theta0, knots }
    }

    /// Pure tone with a fixed start phase.
    pub fn with_phase(f0: f64, theta0: f64) -> Self {
        ToneShot { omega: TAU * f0, theta0, knots: None }
    }

    /// `∫ y(t) cos(ω(t₀+t) + θ₀ + δθ(t₀+t)) dt` over the sequence started at `t0`.
    pub fn weight(&self, seq: &SequenceTiming, t0: f64) -> f64 {
        let mut total = 0.0;
        for (a, b, sign) in seq.segments() {
            let (ua, ub) = (t0 + a, t0 + b);
            let mut cuts = vec![ua];
            if let Some(k) = &self.knots {
                cuts.extend(k.knot_times_in(ua, ub));
            }
            cuts.push(ub);
            for w in cuts.windows(2) {
                total += sign * self.cos_integral(w[0], w[1]);
            }
        }
        total
    }

    fn total_phase(&self, t: f64) -> f64 {
        self.omega * t + self.theta0 + self.knots.as_ref().map_or(0.0, |k| k.value(t))
    }

    /// Exact integral of `cos` of a phase that is linear on `[u0, u1]`.
    fn cos_integral(&self, u0: f64, u1: f64) -> f64 {
        let (p0, p1) = (self.total_phase(u0), self.total_phase(u1));
        let slope = (p1 - p0) / (u1 - u0);
        if (slope * (u1 - u0)).abs() < 1e-8 {
            (u1 - u0) * (0.5 * (p0 + p1)).cos()
        } else {
            (p1.sin() - p0.sin()) / slope
        }
    }
}

/// Correlated field sensed by both NVs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CorrelatedSource {
    /// No applied field.
    None,
    Tone(AcToneSpec),
    /// Quasi-static Gaussian phase with variance `2χ_C`, identical on both NVs
    /// up to `sign_b`.
    Gaussian {
        chi_c: f64,
        sign_b: f64,
    },
}

impl CorrelatedSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            CorrelatedSource::None => Ok(()),
            CorrelatedSource::Tone(t) => t.validate(),
            CorrelatedSource::Gaussian { chi_c, sign_b } => {
                if *chi_c < 0.0 || !chi_c.is_finite() {
                    return Err(Error::Domain(format!("chi_c must be >= 0, got {chi_c}")));
                }
                if sign_b.abs() != 1.0 {
                    return Err(Error::Domain(format!("sign_b must be +1 or -1, got {sign_b}")));
                }
                Ok(())
            }
        }
    }

    /// Same source with NV b's coupling sign reversed.
    pub fn flipped_b(&self) -> Self {
        match *self {
            CorrelatedSource::None => CorrelatedSource::None,
            CorrelatedSource::Tone(t) => CorrelatedSource::Tone(AcToneSpec { amp_b: -t.amp_b, ..t }),
            CorrelatedSource::Gaussian { chi_c, sign_b } => CorrelatedSource::Gaussian { chi_c, sign_b: -sign_b },
        }
    }

    /// Draws one shot's realization covering `[0, span]`.
    pub fn realize<R: Rng + ?Sized>(&self, span: f64, rng: &mut R) -> SourceShot {
        match self {
            CorrelatedSource::None => SourceShot::Silent,
            CorrelatedSource::Tone(spec) => SourceShot::Tone { spec: *spec, shot: ToneShot::sample(spec, span, rng) },
            CorrelatedSource::Gaussian { chi_c, sign_b } => {
                let g = if *chi_c > 0.0 {
                    Normal::new(0.0, (2.0 * chi_c).sqrt()).expect("finite").sample(rng)
                } else {
                    0.0
                };
                SourceShot::Static { phi_a: g, phi_b: sign_b * g }
            }
        }
    }
}

/// One shot of a [`CorrelatedSource`].
#[derive(Clone, Debug, PartialEq)]
pub enum SourceShot {
    Silent,
    Tone { spec: AcToneSpec, shot: ToneShot },
    Static { phi_a: f64, phi_b: f64 },
}

impl SourceShot {
    /// Phases of both NVs for the same window.
    pub fn phases(&self, seq: &SequenceTiming, t0: f64) -> PhasePair {
        match self {
            SourceShot::Silent => PhasePair::default(),
            SourceShot::Tone { spec, shot } => {
                let w = shot.weight(seq, t0);
                PhasePair::new(spec.amp_a * w, spec.amp_b * w)
            }
            SourceShot::Static { phi_a, phi_b } => PhasePair::new(*phi_a, *phi_b),
        }
    }
}

/// Phases sensed by both NVs in one window starting at time zero.
pub fn sample_phase_pair<R: Rng + ?Sized>(spec: &AcToneSpec, seq: &SequenceTiming, rng: &mut R) -> PhasePair {
    CorrelatedSource::Tone(*spec).realize(seq.duration(), rng).phases(seq, 0.0)
}

/// Noise power spectral density in rad²/s units, evaluated at angular
/// frequency ω ≥ 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpectralDensity {
    Flat {
        level: f64,
    },
    /// Flat between `lo` and `hi` (rad/s), zero elsewhere.
    Band {
        level: f64,
        lo: f64,
        hi: f64,
    },
    /// Pair of Lorentzians at `±center` with half width `width`.
    Lorentzian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Linear interpolation of `(ω, S)` pairs, zero outside the table.
    Tabulated {
        points: Vec<(f64, f64)>,
    },
}

impl SpectralDensity {
    /// Flat level `γ_e² σ_B² / Hz`.
    pub fn flat_from_field(sigma_b: f64) -> Self {
        SpectralDensity::Flat { level: crate::metrology::GAMMA_E.powi(2) * sigma_b * sigma_b }
    }

    /// Parses a two-column whitespace-separated table; `#` starts a comment.
    pub fn from_table_text(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Config {
                    path: format!("spectrum line {}", lineno + 1),
                    message: e.to_string(),
                })
            };
            if cols.len() != 2 {
                return Err(Error::Config {
                    path: format!("spectrum line {}", lineno + 1),
                    message: format!("expected 2 columns, got {}", cols.len()),
                });
            }
            points.push((parse(cols[0])?, parse(cols[1])?));
        }
        let s = SpectralDensity::Tabulated { points };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(m.to_string()));
        match self {
            SpectralDensity::Flat { level } if *level < 0.0 => bad("spectral level must be >= 0"),
            SpectralDensity::Band { level, lo, hi } if *level < 0.0 || lo > hi || *lo < 0.0 => {
                bad("band needs level >= 0 and 0 <= lo <= hi")
            }
            SpectralDensity::Lorentzian { amplitude, width, .. } if *amplitude < 0.0 || *width <= 0.0 => {
                bad("lorentzian needs amplitude >= 0 and width > 0")
            }
            SpectralDensity::Tabulated { points } => {
                if points.len() < 2 {
                    return bad("tabulated spectrum needs at least 2 points");
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) || points.iter().any(|p| p.1 < 0.0 || p.0 < 0.0) {
                    return bad("tabulated spectrum needs ascending ω >= 0 and S >= 0");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let w = omega.abs();
        match self {
            SpectralDensity::Flat { level } => *level,
            SpectralDensity::Band { level, lo, hi } => {
                if w >= *lo && w <= *hi {
                    *level
                } else {
                    0.0
                }
            }
            SpectralDensity::Lorentzian { amplitude, center, width } => {
                let l = |x: f64| width * width / (x * x + width * width);
                amplitude * (l(w - center) + l(w + center))
            }
            SpectralDensity::Tabulated { points } => {
                if w < points[0].0 || w > points[points.len() - 1].0 {
                    return 0.0;
                }
                let k = points.partition_point(|p| p.0 <= w).clamp(1, points.len() - 1);
                let (x0, y0) = points[k - 1];
                let (x1, y1) = points[k];
                y0 + (y1 - y0) * (w - x0) / (x1 - x0)
            }
        }
    }

    /// Frequency above which the spectrum is effectively flat or zero.
    fn feature_edge(&self) -> f64 {
        match self {
            SpectralDensity::Flat { .. } => 0.0,
            SpectralDensity::Band { hi, .. } => *hi,
            SpectralDensity::Lorentzian { center, width, .. } => center + 200.0 * width,
            SpectralDensity::Tabulated { points } => points[points.len() - 1].0,
        }
    }

    fn is_identically_zero(&self) -> bool {
        match self {
            SpectralDensity::Flat { level } | SpectralDensity::Band { level, .. } => *level == 0.0,
            SpectralDensity::Lorentzian { amplitude, .. } => *amplitude == 0.0,
            SpectralDensity::Tabulated { points } => points.iter().all(|p| p.1 == 0.0),
        }
    }
}

/// Filter function of a decoupling sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterFunction {
    segments: Vec<(f64, f64, f64)>,
    duration: f64,
}

impl FilterFunction {
    pub fn new(seq: &SequenceTiming) -> Self {
        FilterFunction { segments: seq.segments(), duration: seq.duration() }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Fourier transform `Y(ω) = ∫ y(t) e^{iωt} dt`.
    pub fn transform(&self, omega: f64) -> C64 {
        self.segments
            .iter()
            .map(|&(a, b, s)| {
                let len = b - a;
                if (omega * len).abs() < 1e-6 {
                    C64::from_polar(s * len, omega * 0.5 * (a + b))
                } else {
                    let d = C64::from_polar(1.0, omega * b) - C64::from_polar(1.0, omega * a);
                    d * C64::new(0.0, -s / omega)
                }
            })
            .sum()
    }

    /// `F(ω)/ω² = (π/8)|Y(ω)|²`.
    pub fn weight(&self, omega: f64) -> f64 {
        PI / 8.0 * self.transform(omega).norm_sqr()
    }

    /// `F(ω)`.
    pub fn value(&self, omega: f64) -> f64 {
        omega * omega * self.weight(omega)
    }

    /// Sum of squared jumps of `y`, counting the two ends. Sets the mean
    /// high-frequency level `⟨|Y|²⟩ → Σc²/ω²`.
    fn jump_power(&self) -> f64 {
        2.0 + 4.0 * (self.segments.len() as f64 - 1.0)
    }

    fn shortest_segment(&self) -> f64 {
        self.segments.iter().map(|s| s.1 - s.0).fold(f64::INFINITY, f64::min)
    }
}

/// Filter function of a standard sequence.
pub fn filter_function(kind: SequenceKind, tau: f64, n_pulses: usize) -> Result<FilterFunction> {
    Ok(FilterFunction::new(&SequenceTiming::new(kind, tau, n_pulses)?))
}

/// `χ = (1/π) ∫₀^∞ S(ω) F(ω)/ω² dω`.
///
/// The integral runs panel by panel (panel width a quarter of the filter
/// linewidth) with adaptive Simpson refinement, up to a cutoff well above both
/// the filter's harmonics and the spectrum's features. The remaining tail uses
/// the mean high-frequency level of the filter.
pub fn chi_from_spectrum(s: &SpectralDensity, f: &FilterFunction) -> Result<f64> {
    s.validate()?;
    if s.is_identically_zero() {
        return Ok(0.0);
    }
    let integrand = |w: f64| s.eval(w) * f.weight(w) / PI;
    let panel = PI / (2.0 * f.duration());
    let cutoff = (400.0 * PI / f.shortest_segment()).max(2.0 * s.feature_edge());
    let n_panels = (cutoff / panel).ceil() as usize;
    if n_panels > 50_000_000 {
        return Err(Error::Integration(format!("{n_panels} panels needed; spectrum or sequence out of range")));
    }
    let coarse: f64 = (0..n_panels)
        .map(|k| {
            let (a, b) = (k as f64 * panel, (k + 1) as f64 * panel);
            (b - a) / 6.0 * (integrand(a) + 4.0 * integrand(0.5 * (a + b)) + integrand(b))
        })
        .sum();
    let scale = coarse.abs().max(f64::MIN_POSITIVE);
    let tol = QUADRATURE_REL * scale / n_panels as f64;
    let mut total = 0.0;
    for k in 0..n_panels {
        let (a, b) = (k as f64 * panel, (k + 1) as f64 * panel);
        total += adaptive_simpson(&integrand, a, b, tol, 30).map_err(|depth| {
            Error::Integration(format!("no convergence on [{a:.3e}, {b:.3e}] rad/s after {depth} levels"))
        })?;
    }
    let tail = s.eval(cutoff) * (PI / 8.0) * f.jump_power() / cutoff / PI;
    let chi = total + tail;
    if !chi.is_finite() {
        return Err(Error::Integration(format!("non-finite result (panels {total}, tail {tail})")));
    }
    Ok(chi.max(0.0))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> std::result::Result<f64, u32> {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> std::result::Result<f64, u32> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if !delta.is_finite() {
            return Err(depth);
        }
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(depth);
        }
        Ok(rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, max_depth).map_err(|_| max_depth)
}

/// `⟨sin φ_a sin φ_b⟩ = e^{−2χ_C} sinh(2χ_C)` for identical Gaussian phases.
pub fn correlated_sin_moment(chi_c: f64) -> Result<f64> {
    if chi_c < 0.0 || !chi_c.is_finite() {
        return Err(Error::Domain(format!("chi_c must be >= 0, got {chi_c}")));
    }
    Ok(-0.5 * (-4.0 * chi_c).exp_m1())
}

/// Coherence decay per NV: `χ(t) = (t/T₂)^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceModel {
    /// Coherence time of NV a during sensing and gates, s. Infinite (the
    /// default, omitted when written out) disables decay.
    #[serde(default = "infinite", skip_serializing_if = "is_infinite")]
    pub t2_a: f64,
    #[serde(default = "infinite", skip_serializing_if = "is_infinite")]
    pub t2_b: f64,
    /// Stretch exponent p.
    #[serde(default = "one")]
    pub stretch: f64,
    /// Coherence times during idle delays; default to the sensing values.
    #[serde(default)]
    pub t2_delay_a: Option<f64>,
    #[serde(default)]
    pub t2_delay_b: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn infinite() -> f64 {
    f64::INFINITY
}

fn is_infinite(x: &f64) -> bool {
    x.is_infinite()
}

impl Default for DecoherenceModel {
    fn default() -> Self {
        Self::none()
    }
}

impl DecoherenceModel {
    pub fn none() -> Self {
        Self::exponential(f64::INFINITY, f64::INFINITY)
    }

    pub fn exponential(t2_a: f64, t2_b: f64) -> Self {
        DecoherenceModel { t2_a, t2_b, stretch: 1.0, t2_delay_a: None, t2_delay_b: None }
    }

    pub fn validate(&self) -> Result<()> {
        let times = [Some(self.t2_a), Some(self.t2_b), self.t2_delay_a, self.t2_delay_b];
        if times.iter().flatten().any(|t| !(*t > 0.0)) {
            return Err(Error::Domain("coherence times must be > 0".into()));
        }
        if !(self.stretch > 0.0 && self.stretch.is_finite()) {
            return Err(Error::Domain(format!("stretch exponent must be > 0, got {}", self.stretch)));
        }
        Ok(())
    }

    fn chi(&self, t: f64, t2: f64) -> f64 {
        if t2.is_infinite() || t <= 0.0 {
            0.0
        } else {
            (t / t2).powf(self.stretch)
        }
    }

    fn t2(&self, nv: crate::gates::Nv) -> f64 {
        match nv {
            crate::gates::Nv::A => self.t2_a,
            crate::gates::Nv::B => self.t2_b,
        }
    }

    fn t2_delay(&self, nv: crate::gates::Nv) -> f64 {
        match nv {
            crate::gates::Nv::A => self.t2_delay_a.unwrap_or(self.t2_a),
            crate::gates::Nv::B => self.t2_delay_b.unwrap_or(self.t2_b),
        }
    }

    /// Exponent accumulated while sensing for `t`.
    pub fn chi_sense(&self, nv: crate::gates::Nv, t: f64) -> f64 {
        self.chi(t, self.t2(nv))
    }

    /// Exponent accumulated over an idle delay of `t`.
    pub fn chi_delay(&self, nv: crate::gates::Nv, t: f64) -> f64 {
        self.chi(t, self.t2_delay(nv))
    }

    /// Exponent accumulated over an entangling-gate interval `t`.
    pub fn chi_ent(&self, nv: crate::gates::Nv, t: f64) -> f64 {
        self.chi(t, self.t2(nv))
    }

    pub fn coherence_sense(&self, nv: crate::gates::Nv, t: f64) -> f64 {
        (-self.chi_sense(nv, t)).exp()
    }

    pub fn coherence_delay(&self, nv: crate::gates::Nv, t: f64) -> f64 {
        (-self.chi_delay(nv, t)).exp()
    }

    /// Mean gate coherence `(e^{−χe,a(2t_e)} + e^{−χe,b(2t_e)})/2` for one
    /// entangle/disentangle pair.
    pub fn gate_coherence_mean(&self, t_e: f64) -> f64 {
        use crate::gates::Nv;
        0.5 * ((-self.chi_ent(Nv::A, 2.0 * t_e)).exp() + (-self.chi_ent(Nv::B, 2.0 * t_e)).exp())
    }

    /// Per-NV coherence over one gate duration.
    pub fn gate_coherences(&self, t_e: f64) -> (f64, f64) {
        use crate::gates::Nv;
        ((-self.chi_ent(Nv::A, t_e)).exp(), (-self.chi_ent(Nv::B, t_e)).exp())
    }
}
