//! Dense linear algebra on the two-qubit subspace.
//!
//! Basis order is `(|1,1⟩, |1,0⟩, |0,1⟩, |0,0⟩)` = `kron(NVa, NVb)` with the
//! single-qubit order `(|1⟩, |0⟩)`.

use std::ops::Mul;

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances::{EIGEN_FLOOR, STRUCTURAL};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Index of `|m_a, m_b⟩` in the fixed basis order.
pub const fn index(m_a: u8, m_b: u8) -> usize {
    3 - (2 * m_a as usize + m_b as usize)
}

/// Spin projection `(m_a, m_b)` of a basis index.
pub const fn spins(idx: usize) -> (u8, u8) {
    let code = 3 - idx;
    ((code >> 1) as u8, (code & 1) as u8)
}

/// 2×2 complex matrix in the single-qubit order `(|1⟩, |0⟩)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j];
            }
        }
        Mat2(out)
    }
}

/// 4×4 complex matrix on the two-qubit subspace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4(pub [[C64; 4]; 4]);

impl Mat4 {
    pub fn zeros() -> Self {
        Mat4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        Self::diag([ONE; 4])
    }

    pub fn diag(d: [C64; 4]) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    /// `a ⊗ b` with `a` acting on NV a.
    pub fn kron(a: &Mat2, b: &Mat2) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = a.0[i / 2][j / 2] * b.0[i % 2][j % 2];
            }
        }
        m
    }

    pub fn dagger(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|v| *v *= s);
        m
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Mat4) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.dagger() * *self).max_abs_diff(&Mat4::identity()) < tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.dagger()) < tol
    }

    pub fn mul_vec(&self, v: &[C64; 4]) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|j| self.0[i][j] * v[j]).sum();
        }
        out
    }

    /// Whether `self = e^{iθ}·other` for some global phase θ.
    pub fn equals_up_to_phase(&self, other: &Mat4, tol: f64) -> bool {
        let mut overlap = ZERO;
        for i in 0..4 {
            for j in 0..4 {
                overlap += other.0[i][j].conj() * self.0[i][j];
            }
        }
        if overlap.norm() == 0.0 {
            return self.max_abs_diff(&Mat4::zeros()) < tol && other.max_abs_diff(&Mat4::zeros()) < tol;
        }
        let phase = overlap / overlap.norm();
        self.max_abs_diff(&other.scale(phase)) < tol
    }

    fn to_nalgebra(self) -> Matrix4<C64> {
        Matrix4::from_fn(|i, j| self.0[i][j])
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, rhs: Mat4) -> Mat4 {
        let mut out = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] = (0..4).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        out
    }
}

/// Normalized two-qubit pure state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureState {
    amp: [C64; 4],
}

impl PureState {
    /// Validates normalization to [`STRUCTURAL`].
    pub fn new(amp: [C64; 4]) -> Result<Self> {
        let s = PureState { amp };
        if (s.norm_sqr() - 1.0).abs() > STRUCTURAL {
            return Err(Error::InvalidState(format!("norm^2 = {}", s.norm_sqr())));
        }
        Ok(s)
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amp: [C64; 4]) -> Result<Self> {
        let n = amp.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("zero or non-finite amplitudes".into()));
        }
        Ok(PureState { amp: amp.map(|c| c / n) })
    }

    pub fn basis(m_a: u8, m_b: u8) -> Self {
        let mut amp = [ZERO; 4];
        amp[index(m_a, m_b)] = ONE;
        PureState { amp }
    }

    pub fn amplitudes(&self) -> &[C64; 4] {
        &self.amp
    }

    pub fn amplitude(&self, m_a: u8, m_b: u8) -> C64 {
        self.amp[index(m_a, m_b)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `|⟨self|other⟩|`, insensitive to global phase.
    pub fn overlap_abs(&self, other: &PureState) -> f64 {
        self.amp.iter().zip(other.amp.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm()
    }

    /// Largest amplitude deviation after removing the best global phase.
    pub fn distance_up_to_phase(&self, other: &PureState) -> f64 {
        let ov: C64 = other.amp.iter().zip(self.amp.iter()).map(|(a, b)| a.conj() * b).sum();
        let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { ONE };
        self.amp.iter().zip(other.amp.iter()).map(|(a, b)| (a - b * phase).norm()).fold(0.0, f64::max)
    }
}

/// Unitary operator on the two-qubit subspace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitaryOp {
    m: Mat4,
}

impl UnitaryOp {
    /// Validates `U†U = I` to [`STRUCTURAL`].
    pub fn new(m: Mat4) -> Result<Self> {
        if !m.is_unitary(STRUCTURAL) {
            let dev = (m.dagger() * m).max_abs_diff(&Mat4::identity());
            return Err(Error::InvalidOperator(format!("|U†U - I|max = {dev:e}")));
        }
        Ok(UnitaryOp { m })
    }

    /// For products of operators already known to be unitary.
    pub(crate) fn from_trusted(m: Mat4) -> Self {
        UnitaryOp { m }
    }

    pub fn identity() -> Self {
        UnitaryOp { m: Mat4::identity() }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.m
    }

    pub fn dagger(&self) -> Self {
        UnitaryOp { m: self.m.dagger() }
    }

    /// Operator product `self · rhs` (rhs acts first).
    pub fn then_after(&self, rhs: &UnitaryOp) -> Self {
        UnitaryOp { m: self.m * rhs.m }
    }

    /// Product of operators listed in application order (first applied first).
    pub fn sequence(ops: &[UnitaryOp]) -> Self {
        ops.iter().fold(UnitaryOp::identity(), |acc, op| op.then_after(&acc))
    }
}

impl Mul for UnitaryOp {
    type Output = UnitaryOp;
    fn mul(self, rhs: UnitaryOp) -> UnitaryOp {
        self.then_after(&rhs)
    }
}

/// `U·s`. Unitarity is guaranteed by [`UnitaryOp`].
pub fn apply(u: &UnitaryOp, s: &PureState) -> PureState {
    PureState { amp: u.m.mul_vec(&s.amp) }
}

/// `U·s` for a raw matrix, rejecting non-unitary input.
pub fn apply_matrix(m: &Mat4, s: &PureState) -> Result<PureState> {
    let u = UnitaryOp::new(*m)?;
    Ok(apply(&u, s))
}

/// `|cᵢ|²` in basis order.
pub fn measure_populations(s: &PureState) -> [f64; 4] {
    s.amp.map(|c| c.norm_sqr())
}

/// Two-qubit density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix {
    m: Mat4,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: Mat4) -> Result<Self> {
        if !m.is_hermitian(STRUCTURAL) {
            return Err(Error::InvalidState("density matrix is not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STRUCTURAL || tr.im.abs() > STRUCTURAL {
            return Err(Error::InvalidState(format!("trace = {tr}")));
        }
        let rho = DensityMatrix { m };
        let lowest = rho.eigenvalues()[0];
        if lowest < EIGEN_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {lowest:e}")));
        }
        Ok(rho)
    }

    #[cfg(test)]
    pub(crate) fn from_trusted(m: Mat4) -> Self {
        DensityMatrix { m }
    }

    pub fn from_pure(s: &PureState) -> Self {
        let mut m = Mat4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = s.amp[i] * s.amp[j].conj();
            }
        }
        DensityMatrix { m }
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix { m: Mat4::diag([C64::new(0.25, 0.0); 4]) }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.m
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let ev = self.m.to_nalgebra().symmetric_eigenvalues();
        let mut out = [ev[0], ev[1], ev[2], ev[3]];
        out.sort_by(|a, b| a.total_cmp(b));
        out
    }

    pub fn purity(&self) -> f64 {
        (self.m * self.m).trace().re
    }

    /// `U ρ U†`.
    pub fn evolve(&self, u: &UnitaryOp) -> Self {
        DensityMatrix { m: u.m * self.m * u.m.dagger() }
    }

    /// Local dephasing: coherences between states that differ in NV a are
    /// multiplied by `c_a`, and by `c_b` where NV b differs.
    pub fn dephase(&self, c_a: f64, c_b: f64) -> Self {
        let mut m = self.m;
        for i in 0..4 {
            for j in 0..4 {
                let (ai, bi) = spins(i);
                let (aj, bj) = spins(j);
                let mut f = 1.0;
                if ai != aj {
                    f *= c_a;
                }
                if bi != bj {
                    f *= c_b;
                }
                m.0[i][j] *= f;
            }
        }
        DensityMatrix { m }
    }

    pub fn populations(&self) -> [f64; 4] {
        [self.m.0[0][0].re, self.m.0[1][1].re, self.m.0[2][2].re, self.m.0[3][3].re]
    }
}

/// `Tr[ρ_target·ρ]` for a pure target.
pub fn fidelity(target: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    for (name, r) in [("target", target), ("state", rho)] {
        if !r.m.is_hermitian(STRUCTURAL) {
            return Err(Error::InvalidState(format!("{name} is not Hermitian")));
        }
    }
    if (target.purity() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!("target is not pure (purity {})", target.purity())));
    }
    let f = (target.m * rho.m).trace().re;
    if !(-STRUCTURAL..=1.0 + STRUCTURAL).contains(&f) {
        return Err(Error::InvalidState(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}
