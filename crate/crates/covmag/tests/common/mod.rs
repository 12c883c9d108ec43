//! Test oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use covmag::carbon13::HyperfineCoupling;
use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C;

/// Nuclear spin up, down and fully mixed.
pub fn nuclear_states() -> [Matrix2<C>; 3] {
    let z = C::new(0.0, 0.0);
    let r = |x: f64| C::new(x, 0.0);
    [Matrix2::new(r(1.0), z, z, z), Matrix2::new(z, z, z, r(1.0)), Matrix2::new(r(0.5), z, z, r(0.5))]
}

/// Direct NV⊗¹³C propagation of an XY train.
///
/// The NV starts in |0⟩ and the nucleus in `rho_n`. The NV basis is
/// (|0⟩, |1⟩) with the hyperfine term active in |1⟩. The train is a π/2
/// pulse about x, `n` π pulses in the XY8 phase pattern with τ/2 edges and
/// spacing τ, then a π/2 pulse about −x. Returns `2·P(NV in |0⟩) − 1`.
pub struct XyPropagator {
    half: Matrix4<C>,
    full: Matrix4<C>,
}

impl XyPropagator {
    pub fn new(h: &HyperfineCoupling, tau: f64) -> Self {
        let z = C::new(0.0, 0.0);
        let r = |x: f64| C::new(x, 0.0);
        let ix = Matrix2::new(z, r(0.5), r(0.5), z);
        let iz = Matrix2::new(r(0.5), z, z, r(-0.5));
        let p1 = Matrix2::new(z, z, z, r(1.0));
        let id = Matrix2::<C>::identity();
        let ham = p1.kronecker(&(iz * r(h.a_par) + ix * r(h.a_perp))) + id.kronecker(&(iz * r(h.omega_l)));
        let half: Matrix4<C> = (ham * C::new(0.0, -tau / 2.0)).exp();
        XyPropagator { half, full: half * half }
    }

    fn pulse(theta: f64, phase: f64) -> Matrix4<C> {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let e = C::from_polar(1.0, phase);
        let m = Matrix2::new(C::new(c, 0.0), C::new(0.0, -s) * e.conj(), C::new(0.0, -s) * e, C::new(c, 0.0));
        m.kronecker(&Matrix2::identity())
    }

    pub fn signal(&self, n: u32, rho_n: &Matrix2<C>) -> f64 {
        let xy = [0.0, PI / 2.0, 0.0, PI / 2.0, PI / 2.0, 0.0, PI / 2.0, 0.0];
        let mut u = self.half * Self::pulse(PI / 2.0, 0.0);
        for k in 0..n {
            u = Self::pulse(PI, xy[k as usize % 8]) * u;
            u = if k + 1 < n { self.full * u } else { self.half * u };
        }
        u = Self::pulse(PI / 2.0, PI) * u;
        let z = C::new(0.0, 0.0);
        let rho0 = Matrix2::new(C::new(1.0, 0.0), z, z, z).kronecker(rho_n);
        let rho = u * rho0 * u.adjoint();
        2.0 * (rho[(0, 0)] + rho[(1, 1)]).re - 1.0
    }

    /// Probability that the NV ends in |1⟩.
    pub fn flip(&self, n: u32, rho_n: &Matrix2<C>) -> f64 {
        (1.0 - self.signal(n, rho_n)) / 2.0
    }
}

/// Strong-field coupling: A_∥ = ω_L/100, A_⊥ = ω_L/150 at 1.894 MHz.
pub fn strong_field() -> HyperfineCoupling {
    let wl = 2.0 * PI * 1.894e6;
    HyperfineCoupling::new(wl / 100.0, wl / 150.0, wl).unwrap()
}

/// Relative difference `|a/b − 1|`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}
