//! Numerical tolerances shared across the crate.

/// Structural checks: unitarity, Hermiticity, trace, normalization.
pub const STRUCTURAL: f64 = 1e-12;

/// Quantities accumulated over many operations.
pub const ACCUMULATED: f64 = 1e-9;

/// Smallest eigenvalue accepted for a density matrix.
pub const EIGEN_FLOOR: f64 = -1e-10;

/// Relative tolerance for calibrating J_zz * t_e against pi.
pub const GATE_CALIBRATION: f64 = 1e-9;

/// Relative tolerance of the spectral quadrature.
pub const QUADRATURE_REL: f64 = 1e-6;

/// Denominator magnitude below which the ¹³C depth uses its series limit.
pub const DEPTH_SINGULAR: f64 = 1e-9;

/// Relative match between sigma^2 and alpha that selects Poisson sampling.
pub const POISSON_MATCH: f64 = 1e-12;
