//! Pulse-sequence propagators on the two-qubit subspace.
//!
//! Pulses are instantaneous. A rotation by `theta` about the in-plane axis at
//! phase `phase` is `exp[−iθ(cos φ·I_x + sin φ·I_y)]` with `I_x = σx/2`,
//! `I_y = σy/2`. The Ising term uses `I_z = diag(m_s) = diag(1, 0)`, so
//! `exp(−i J I_z⊗I_z t) = diag(e^{−iJt}, 1, 1, 1)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Mat2, Mat4, UnitaryOp, C64, I, ONE};
use crate::tolerances::GATE_CALIBRATION;

/// Which NV a single-qubit operation addresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nv {
    A,
    B,
}

/// Bell-state family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellVariant {
    Phi,
    Psi,
}

/// Sign of the last half-pulse of a disentangling block.
///
/// `Plus` maps the phase-acquired Bell state onto the readout populations
/// (signal); `Minus` swaps `|0,0⟩ ↔ |1,1⟩` and `|1,0⟩ ↔ |0,1⟩` relative to it
/// (reference).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalPulse {
    Plus,
    Minus,
}

impl FinalPulse {
    fn sign(self) -> f64 {
        match self {
            FinalPulse::Plus => 1.0,
            FinalPulse::Minus => -1.0,
        }
    }
}

/// Phase of the central half-pulse of each CNOT: `Plus` is −x, `Minus` is +x.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwapSign {
    Plus,
    Minus,
}

/// NV–NV coupling and entangling-gate duration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    /// Ising coupling, rad/s.
    pub j_zz: f64,
    /// Gate duration, s.
    pub t_e: f64,
}

impl CouplingSpec {
    pub fn new(j_zz: f64, t_e: f64) -> Result<Self> {
        if !(j_zz > 0.0 && j_zz.is_finite()) {
            return Err(Error::Domain(format!("j_zz must be positive, got {j_zz}")));
        }
        if !(t_e > 0.0 && t_e.is_finite()) {
            return Err(Error::Domain(format!("t_e must be positive, got {t_e}")));
        }
        Ok(CouplingSpec { j_zz, t_e })
    }

    /// Gate duration chosen so that `t_e = π/J_zz`.
    pub fn from_gate_time(t_e: f64) -> Result<Self> {
        Self::new(PI / t_e, t_e)
    }

    pub fn check_calibrated(&self) -> Result<()> {
        let product = self.j_zz * self.t_e;
        if ((product - PI) / PI).abs() > GATE_CALIBRATION {
            return Err(Error::MiscalibratedGate { product });
        }
        Ok(())
    }
}

/// Phases acquired by each NV under external fields.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePair {
    pub phi_a: f64,
    pub phi_b: f64,
}

impl PhasePair {
    pub fn new(phi_a: f64, phi_b: f64) -> Self {
        PhasePair { phi_a, phi_b }
    }
}

impl std::ops::Add for PhasePair {
    type Output = PhasePair;
    fn add(self, rhs: PhasePair) -> PhasePair {
        PhasePair::new(self.phi_a + rhs.phi_a, self.phi_b + rhs.phi_b)
    }
}

/// Single-qubit rotation by `theta` about the in-plane axis at `phase`.
pub fn rotation(theta: f64, phase: f64) -> Mat2 {
    let c = C64::new((theta / 2.0).cos(), 0.0);
    let s = (theta / 2.0).sin();
    let off_up = -I * s * C64::from_polar(1.0, -phase);
    let off_dn = -I * s * C64::from_polar(1.0, phase);
    Mat2([[c, off_up], [off_dn, c]])
}

/// Both NVs rotated about the x axis.
pub fn rotation_global(phi: f64) -> UnitaryOp {
    rotation_global_axis(phi, 0.0)
}

/// Both NVs rotated by `theta` about the axis at `phase`.
pub fn rotation_global_axis(theta: f64, phase: f64) -> UnitaryOp {
    let r = rotation(theta, phase);
    UnitaryOp::from_trusted(Mat4::kron(&r, &r))
}

/// NV a rotated by `phi` and NV b by `−phi` about the x axis.
pub fn rotation_relative(phi: f64) -> UnitaryOp {
    rotation_relative_axis(phi, 0.0)
}

pub fn rotation_relative_axis(theta: f64, phase: f64) -> UnitaryOp {
    UnitaryOp::from_trusted(Mat4::kron(&rotation(theta, phase), &rotation(-theta, phase)))
}

/// Rotation of one NV, identity on the other.
pub fn rotation_single(nv: Nv, theta: f64, phase: f64) -> UnitaryOp {
    let r = rotation(theta, phase);
    let id = Mat2::identity();
    let m = match nv {
        Nv::A => Mat4::kron(&r, &id),
        Nv::B => Mat4::kron(&id, &r),
    };
    UnitaryOp::from_trusted(m)
}

/// `exp(−i J_zz I_z⊗I_z t)`.
pub fn ising_evolution(j_zz: f64, t: f64) -> Result<UnitaryOp> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("evolution time must be >= 0, got {t}")));
    }
    Ok(UnitaryOp::from_trusted(Mat4::diag([C64::from_polar(1.0, -j_zz * t), ONE, ONE, ONE])))
}

/// Controlled-Z, equal to `ising_evolution(J, π/J)` for any J.
pub fn controlled_z() -> UnitaryOp {
    UnitaryOp::from_trusted(Mat4::diag([-ONE, ONE, ONE, ONE]))
}

/// Diagonal propagator for phases acquired under external fields.
pub fn external_phase(p: PhasePair) -> UnitaryOp {
    UnitaryOp::from_trusted(Mat4::diag([
        C64::from_polar(1.0, -(p.phi_a + p.phi_b)),
        C64::from_polar(1.0, -p.phi_a),
        C64::from_polar(1.0, -p.phi_b),
        ONE,
    ]))
}

/// Echo-type block `last · middle · first`, kept in parts so that callers can
/// insert dephasing after the first half-pulse.
#[derive(Clone, Copy, Debug)]
pub struct PulseBlock {
    pub first: UnitaryOp,
    pub middle: UnitaryOp,
    pub last: UnitaryOp,
}

impl PulseBlock {
    pub fn unitary(&self) -> UnitaryOp {
        UnitaryOp::sequence(&[self.first, self.middle, self.last])
    }
}

fn echo_middle(spec: &CouplingSpec, phase: f64) -> UnitaryOp {
    let half = UnitaryOp::from_trusted(Mat4::diag([C64::from_polar(1.0, -spec.j_zz * spec.t_e / 2.0), ONE, ONE, ONE]));
    UnitaryOp::sequence(&[half, rotation_global_axis(PI, phase), half])
}

fn half_pulse(variant: BellVariant, theta: f64, phase: f64) -> UnitaryOp {
    match variant {
        BellVariant::Phi => rotation_global_axis(theta, phase),
        BellVariant::Psi => rotation_relative_axis(theta, phase),
    }
}

/// Entangling block for `|0,0⟩ → |Φ⟩` or `|Ψ⟩`.
pub fn entangle_block(spec: &CouplingSpec, variant: BellVariant) -> Result<PulseBlock> {
    spec.check_calibrated()?;
    Ok(PulseBlock {
        first: rotation_global_axis(FRAC_PI_2, 0.0),
        middle: echo_middle(spec, 0.0),
        last: half_pulse(variant, FRAC_PI_2, 0.0),
    })
}

/// Disentangling block with every pulse phase advanced by `phase`.
pub fn disentangle_block(
    spec: &CouplingSpec,
    variant: BellVariant,
    last: FinalPulse,
    phase: f64,
) -> Result<PulseBlock> {
    spec.check_calibrated()?;
    Ok(PulseBlock {
        first: half_pulse(variant, -FRAC_PI_2, phase),
        middle: echo_middle(spec, phase),
        last: rotation_global_axis(last.sign() * FRAC_PI_2, phase),
    })
}

pub fn entangle(spec: &CouplingSpec, variant: BellVariant) -> Result<UnitaryOp> {
    Ok(entangle_block(spec, variant)?.unitary())
}

pub fn entangle_phi(spec: &CouplingSpec) -> Result<UnitaryOp> {
    entangle(spec, BellVariant::Phi)
}

pub fn entangle_psi(spec: &CouplingSpec) -> Result<UnitaryOp> {
    entangle(spec, BellVariant::Psi)
}

pub fn disentangle(spec: &CouplingSpec, variant: BellVariant, last: FinalPulse) -> Result<UnitaryOp> {
    Ok(disentangle_block(spec, variant, last, 0.0)?.unitary())
}

/// Φ disentangler with both half-pulses at −π/2.
pub fn disentangle_phi(spec: &CouplingSpec) -> Result<UnitaryOp> {
    disentangle(spec, BellVariant::Phi, FinalPulse::Minus)
}

/// Ψ disentangler with a relative −π/2 first and a global +π/2 last.
pub fn disentangle_psi(spec: &CouplingSpec) -> Result<UnitaryOp> {
    disentangle(spec, BellVariant::Psi, FinalPulse::Plus)
}

/// Signal disentangler with all pulse phases advanced by `phi_tppi`.
pub fn disentangle_tppi(spec: &CouplingSpec, phi_tppi: f64, variant: BellVariant) -> Result<UnitaryOp> {
    Ok(disentangle_block(spec, variant, FinalPulse::Plus, phi_tppi)?.unitary())
}

/// CNOT built from target half-pulses around a controlled-Z:
/// `π/2(+x)`, CZ, `π/2(∓x)` on the target.
///
/// With `SwapSign::Plus` the target flips when the control is in `m_s = 1`.
/// `SwapSign::Minus` flips it when the control is in `m_s = 0`.
pub fn cnot(control: Nv, sign: SwapSign, omit_final_half_pulse: bool) -> UnitaryOp {
    let target = match control {
        Nv::A => Nv::B,
        Nv::B => Nv::A,
    };
    let mut ops = vec![rotation_single(target, FRAC_PI_2, 0.0), controlled_z()];
    if !omit_final_half_pulse {
        let phase = match sign {
            SwapSign::Plus => PI,
            SwapSign::Minus => 0.0,
        };
        ops.push(rotation_single(target, FRAC_PI_2, phase));
    }
    UnitaryOp::sequence(&ops)
}

/// SWAP for an NV b that starts in `|0⟩`: the leading CNOT of the usual
/// three is dropped.
///
/// `Plus` maps `|ψ⟩_a|0⟩_b → |0⟩_a|ψ⟩_b` exactly. `Minus` leaves NV a in `|0⟩`
/// and hands NV b the state with populations exchanged.
pub fn swap_from_cnots(sign: SwapSign) -> UnitaryOp {
    UnitaryOp::sequence(&[cnot(Nv::A, sign, false), cnot(Nv::B, sign, false)])
}
