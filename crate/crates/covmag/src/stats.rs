//! Exact-integer accumulators, block bootstrap and small fitting routines.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{salt, stream};

/// Accumulators that merge associatively.
pub trait Accumulate: Clone + Default + Send + Sync {
    fn merge(&mut self, other: &Self);
}

/// Power sums of a nonnegative integer sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub s1: u128,
    pub s2: u128,
    pub s3: u128,
    pub s4: u128,
}

impl Moments {
    pub fn push(&mut self, x: u64) {
        let x = x as u128;
        self.n += 1;
        self.s1 += x;
        self.s2 += x * x;
        self.s3 += x * x * x;
        self.s4 += x * x * x * x;
    }

    pub fn mean(&self) -> f64 {
        self.s1 as f64 / self.n as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.n as i128;
        let num = n * self.s2 as i128 - (self.s1 as i128) * (self.s1 as i128);
        num as f64 / (self.n as f64 * (self.n as f64 - 1.0))
    }

    fn central(&self) -> (f64, f64) {
        let n = self.n as f64;
        let mu = self.mean();
        let (r2, r3, r4) = (self.s2 as f64 / n, self.s3 as f64 / n, self.s4 as f64 / n);
        let m2 = r2 - mu * mu;
        let m4 = r4 - 4.0 * mu * r3 + 6.0 * mu * mu * r2 - 3.0 * mu.powi(4);
        (m2, m4)
    }

    /// Standard error of the mean.
    pub fn mean_se(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    /// Large-sample standard error of the variance, `√((m4 − m2²)/n)`.
    pub fn variance_se(&self) -> f64 {
        let (m2, m4) = self.central();
        ((m4 - m2 * m2).max(0.0) / self.n as f64).sqrt()
    }
}

impl Accumulate for Moments {
    fn merge(&mut self, o: &Self) {
        self.n += o.n;
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.s3 += o.s3;
        self.s4 += o.s4;
    }
}

/// Mixed power sums of a pair of integer samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMoments {
    pub n: u64,
    pub a: u128,
    pub b: u128,
    pub aa: u128,
    pub bb: u128,
    pub ab: u128,
    pub aab: u128,
    pub abb: u128,
    pub aabb: u128,
}

impl PairMoments {
    pub fn push(&mut self, a: u64, b: u64) {
        let (a, b) = (a as u128, b as u128);
        self.n += 1;
        self.a += a;
        self.b += b;
        self.aa += a * a;
        self.bb += b * b;
        self.ab += a * b;
        self.aab += a * a * b;
        self.abb += a * b * b;
        self.aabb += a * a * b * b;
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> f64 {
        let n = self.n as i128;
        let num = n * self.ab as i128 - self.a as i128 * self.b as i128;
        num as f64 / (self.n as f64 * (self.n as f64 - 1.0))
    }

    /// Large-sample standard error of the covariance.
    pub fn covariance_se(&self) -> f64 {
        let n = self.n as f64;
        let (ma, mb) = (self.a as f64 / n, self.b as f64 / n);
        let f = |x: u128| x as f64 / n;
        let m22 = f(self.aabb) - 2.0 * mb * f(self.aab) + mb * mb * f(self.aa) - 2.0 * ma * f(self.abb)
            + 4.0 * ma * mb * f(self.ab)
            - 2.0 * ma * mb * mb * f(self.a)
            + ma * ma * f(self.bb)
            - 2.0 * ma * ma * mb * f(self.b)
            + ma * ma * mb * mb;
        let c = f(self.ab) - ma * mb;
        ((m22 - c * c).max(0.0) / n).sqrt()
    }
}

impl Accumulate for PairMoments {
    fn merge(&mut self, o: &Self) {
        self.n += o.n;
        self.a += o.a;
        self.b += o.b;
        self.aa += o.aa;
        self.bb += o.bb;
        self.ab += o.ab;
        self.aab += o.aab;
        self.abb += o.abb;
        self.aabb += o.aabb;
    }
}

/// Merge a slice of accumulators in order.
pub fn merge_all<T: Accumulate>(items: &[T]) -> T {
    items.iter().fold(T::default(), |mut acc, x| {
        acc.merge(x);
        acc
    })
}

/// Percentile bootstrap summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    pub resamples: usize,
}

/// Block bootstrap. Each group (for example a phase-cycle channel) holds the
/// accumulators of its blocks; blocks are resampled with replacement within
/// their group and `statistic` sees one merged accumulator per group.
pub fn block_bootstrap<T, F>(groups: &[Vec<T>], resamples: usize, seed: u64, statistic: F) -> BootstrapSummary
where
    T: Accumulate,
    F: Fn(&[T]) -> f64 + Sync,
{
    let mut values: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, salt::BOOTSTRAP, r as u64);
            let merged: Vec<T> = groups
                .iter()
                .map(|blocks| {
                    let mut acc = T::default();
                    for _ in 0..blocks.len() {
                        acc.merge(&blocks[rng.gen_range(0..blocks.len())]);
                    }
                    acc
                })
                .collect();
            statistic(&merged)
        })
        .collect();
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let n = finite.len().max(1) as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let se = (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    values.sort_by(|a, b| a.total_cmp(b));
    let pick = |q: f64| {
        if values.is_empty() {
            f64::NAN
        } else {
            values[((q * (values.len() - 1) as f64).round() as usize).min(values.len() - 1)]
        }
    };
    BootstrapSummary { se, lo: pick(0.025), hi: pick(0.975), resamples }
}

/// Least-squares fit of `y = A sin(ωx) + B cos(ωx) + C` at fixed ω.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub sin_coef: f64,
    pub cos_coef: f64,
    pub offset: f64,
    pub rms_residual: f64,
}

impl SinusoidFit {
    pub fn amplitude(&self) -> f64 {
        self.sin_coef.hypot(self.cos_coef)
    }
}

pub fn fit_sinusoid(x: &[f64], y: &[f64], omega: f64) -> Result<SinusoidFit> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::PoorFit(format!("need >= 4 paired points, got {} and {}", x.len(), y.len())));
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = Vector3::new((omega * xi).sin(), (omega * xi).cos(), 1.0);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let coef = ata.lu().solve(&aty).ok_or_else(|| Error::PoorFit("singular normal equations".into()))?;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let model = coef[0] * (omega * xi).sin() + coef[1] * (omega * xi).cos() + coef[2];
            (yi - model).powi(2)
        })
        .sum();
    Ok(SinusoidFit {
        sin_coef: coef[0],
        cos_coef: coef[1],
        offset: coef[2],
        rms_residual: (ss / x.len() as f64).sqrt(),
    })
}

/// Frequency (in units of 1/x) whose fixed-frequency sinusoid fit leaves the
/// smallest residual: coarse scan over `[f_lo, f_hi]`, then golden-section
/// refinement around the best grid point.
pub fn frequency_scan(x: &[f64], y: &[f64], f_lo: f64, f_hi: f64, grid: usize) -> Result<f64> {
    let tau = std::f64::consts::TAU;
    let cost = |f: f64| fit_sinusoid(x, y, tau * f).map(|r| r.rms_residual).unwrap_or(f64::INFINITY);
    let step = (f_hi - f_lo) / (grid.max(2) - 1) as f64;
    let (mut best, mut best_cost) = (f_lo, f64::INFINITY);
    for k in 0..grid.max(2) {
        let f = f_lo + k as f64 * step;
        let c = cost(f);
        if c < best_cost {
            best = f;
            best_cost = c;
        }
    }
    let (mut a, mut b) = ((best - step).max(f_lo), (best + step).min(f_hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * best.abs().max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    if !best_cost.is_finite() {
        return Err(Error::PoorFit("frequency scan found no finite fit".into()));
    }
    Ok((a + b) / 2.0)
}

/// Slope of `ln y` against `ln x` by ordinary least squares.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
