//! Fast invariant suite: matrix goldens and closed-form identities.
//!
//! The hooks deliberately corrupt one quantity so that the suite can be shown
//! to catch the corresponding failure.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::carbon13::{first_resonance_tau_analytic, resonance_depth, HyperfineCoupling};
use crate::cli::Check;
use crate::error::Result;
use crate::gates::{
    disentangle_phi, disentangle_psi, entangle_phi, entangle_psi, swap_from_cnots, CouplingSpec, PhasePair, SwapSign,
};
use crate::hilbert::{apply, Mat4, PureState, C64};
use crate::metrology::snr_gain;
use crate::noisefield::correlated_sin_moment;
use crate::protocols::bell::bell_ideal_signals;
use crate::protocols::two_time::{overlap_amplitudes, overlap_final_state, real_amplitudes, OverlapPhases};
use crate::readout::{mixture_variance, sigma_r_general, ReadoutModel};
use crate::tolerances::STRUCTURAL;

/// Fault injection for testing the suite itself.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SelfTestHooks {
    /// Scales one entry of the Φ entangling matrix before checks.
    pub perturb_gate: bool,
    /// Scales the computed readout-noise factor before checks.
    pub perturb_sigma_r: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelfTestReport {
    pub checks: Vec<Check>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Ids of failing checks.
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Reference propagators: `(e^{−iπ/4}/√2)·M` with the integer matrices below.
fn reference(entries: [[(f64, f64); 4]; 4]) -> Mat4 {
    Mat4(entries.map(|row| row.map(|(re, im)| C64::new(re, im)))).scale(C64::from_polar(FRAC_1_SQRT_2, -PI / 4.0))
}

fn reference_phi() -> Mat4 {
    let (o, z, i, mi) = ((1., 0.), (0., 0.), (0., 1.), (0., -1.));
    reference([[o, z, z, i], [z, o, mi, z], [z, mi, o, z], [i, z, z, o]])
}

fn reference_psi() -> Mat4 {
    let (o, z, i, mo) = ((1., 0.), (0., 0.), (0., 1.), (-1., 0.));
    reference([[z, i, o, z], [i, z, z, mo], [mo, z, z, i], [z, o, i, z]])
}

fn reference_psi_readout() -> Mat4 {
    let (o, z, i, mo) = ((1., 0.), (0., 0.), (0., 1.), (-1., 0.));
    reference([[z, mo, i, z], [o, z, z, i], [i, z, z, o], [z, i, mo, z]])
}

fn max_err(name: &str, err: f64, tol: f64) -> Check {
    Check::new(name, err < tol, format!("max deviation {err:.3e} (tolerance {tol:.0e})"))
}

pub fn run_selftest(hooks: SelfTestHooks) -> Result<SelfTestReport> {
    let spec = CouplingSpec::from_gate_time(2.732e-6)?;
    let mut phi = *entangle_phi(&spec)?.matrix();
    if hooks.perturb_gate {
        phi.0[0][0] *= 1.001;
    }
    let ops =
        [phi, *entangle_psi(&spec)?.matrix(), *disentangle_phi(&spec)?.matrix(), *disentangle_psi(&spec)?.matrix()];
    let mut checks = vec![Check::new(
        "gates.unitarity",
        ops.iter()
            .chain([swap_from_cnots(SwapSign::Plus).matrix(), swap_from_cnots(SwapSign::Minus).matrix()])
            .all(|m| m.is_unitary(STRUCTURAL)),
        "entangling, disentangling and SWAP propagators".into(),
    )];
    let golden = [reference_phi(), reference_psi(), reference_phi(), reference_psi_readout()];
    let err = ops.iter().zip(&golden).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
    checks.push(max_err("gates.bell_matrices", err, 1e-12));

    let ket = apply(&entangle_phi(&spec)?, &PureState::basis(0, 0));
    let k = C64::from_polar(FRAC_1_SQRT_2, -PI / 4.0);
    let err = (ket.amplitude(0, 0) - k).norm().max((ket.amplitude(1, 1) - k * C64::new(0.0, 1.0)).norm());
    checks.push(max_err("gates.bell_kets", err, 1e-12));

    let grid = [0.0, PI / 4.0, -PI / 4.0, PI / 2.0, -PI / 2.0];
    let mut err: f64 = 0.0;
    for &a in &grid {
        for &b in &grid {
            let (sp, ss) = bell_ideal_signals(&spec, PhasePair::new(a, b))?;
            err = err.max(((sp - ss) / 2.0 - a.sin() * b.sin()).abs());
        }
    }
    checks.push(max_err("gates.difference_signal", err, 1e-12));

    let ground =
        PureState::normalized([C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)])?;
    let load = PureState::normalized([C64::new(0.0, 0.0), C64::new(0.6, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.8)])?;
    let moved = apply(&swap_from_cnots(SwapSign::Plus), &load);
    let want = PureState::normalized([C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.6, 0.0), C64::new(0.0, 0.8)])?;
    let fixed = apply(&swap_from_cnots(SwapSign::Plus), &ground).distance_up_to_phase(&ground);
    checks.push(max_err("gates.swap_transfer", moved.distance_up_to_phase(&want).max(fixed), 1e-12));

    let mut err: f64 = 0.0;
    for v in [crate::gates::BellVariant::Phi, crate::gates::BellVariant::Psi] {
        for (a1, a2, b1, b2) in [(0.3, -0.7, 1.1, 0.4), (PI / 4.0, PI / 2.0, -PI / 4.0, 0.0), (2.0, 1.0, -2.5, -1.2)] {
            let ph = OverlapPhases { a1, a2, b1, b2 };
            let st = overlap_final_state(&spec, v, ph)?;
            let want = overlap_amplitudes(v, ph);
            err = err.max(match real_amplitudes(&st, v, ph, 1e-10) {
                Some(amp) => amp.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
                None => f64::INFINITY,
            });
        }
    }
    checks.push(max_err("two_time.overlap_amplitudes", err, 1e-10));

    let mut err: f64 = 0.0;
    for m in [ReadoutModel::scc(), ReadoutModel::conventional()] {
        let mut s = sigma_r_general(&m)?;
        if hooks.perturb_sigma_r {
            s *= 1.01;
        }
        // At equal spin populations the single-NV variance is C²σ_R²/4.
        let via_mixture = (4.0 * mixture_variance(&m, 0.5)).sqrt() / m.contrast().abs();
        err = err.max((s / via_mixture - 1.0).abs());
    }
    checks.push(max_err("readout.sigma_r_identity", err, 1e-12));

    let mut err: f64 = 0.0;
    for chi in [0.0f64, 0.01, 0.1, 0.5, 2.0] {
        let direct = (-2.0 * chi).exp() * (2.0 * chi).sinh();
        err = err.max((correlated_sin_moment(chi)? - direct).abs());
    }
    checks.push(max_err("noisefield.sin_moment", err, 1e-14));

    let h = HyperfineCoupling::new(2.0 * PI * 1.894e6 / 100.0, 2.0 * PI * 1.894e6 / 150.0, 2.0 * PI * 1.894e6)?;
    let tau = first_resonance_tau_analytic(&h);
    let depth = resonance_depth(&h, tau);
    checks.push(Check::new("carbon13.strong_field_resonance", depth > 0.99, format!("depth {depth}")));

    let g = snr_gain(30.0, 0.0, true);
    checks.push(Check::new("metrology.snr_gain", (g / (30.0 * 2f64.sqrt()) - 1.0).abs() < 0.01, format!("gain {g}")));

    Ok(SelfTestReport { checks })
}
