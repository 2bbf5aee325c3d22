//! Heat kernel `S_n`, its spatial gradient, and the closed-form time-panel
//! integrals used as product-integration weights by the layer operators.
//!
//! For `t > 0` the kernel is `S_n(t, x) = (4 pi t)^(-n/2) exp(-|x|^2 / (4 t))`
//! and it vanishes for `t <= 0`. All solvers in this crate fix `n = 2`, where
//! the panel integrals reduce to exponential integrals:
//!
//! ```text
//! int_{s0}^{s1} (4 pi u)^(-1) exp(-d^2/(4u)) du
//!     = (1/(4 pi)) [E1(d^2/(4 s1)) - E1(d^2/(4 s0))]      (d > 0)
//!     = (1/(4 pi)) log(s1/s0)                             (d = 0, s0 > 0)
//! ```
//!
//! `E1` is implemented locally (series below 1, continued fraction above) so
//! the crate carries no special-function dependency.

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// A space-time evaluation point for the heat kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernelPoint {
    /// Time difference.
    pub t: f64,
    /// Spatial offset in R^n.
    pub x: Vec<f64>,
}

impl HeatKernelPoint {
    pub fn new(t: f64, x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::KernelDimension(x.len()));
        }
        if t == 0.0 && x.iter().all(|c| *c == 0.0) {
            return Err(Error::KernelUndefinedAtOrigin);
        }
        Ok(Self { t, x })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Exponential integral `E1(x) = int_x^inf exp(-u)/u du` for `x > 0`.
///
/// Power series for `x <= 1`, modified-Lentz continued fraction above.
/// Relative accuracy is at the 1e-15 level over the whole range.
pub fn exp_integral_e1(x: f64) -> f64 {
    if x < 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return f64::INFINITY;
    }
    if x <= 1.0 {
        // E1(x) = -gamma - ln x + sum_{k>=1} (-1)^(k+1) x^k / (k k!)
        let mut sum = 0.0;
        let mut term = x;
        let mut k = 1usize;
        loop {
            sum += term;
            k += 1;
            // term_k = term_{k-1} * (-x) (k-1) / k^2
            term *= -x * (k as f64 - 1.0) / ((k * k) as f64);
            if term.abs() < 1e-18 * sum.abs().max(1e-300) || k > 60 {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        // Continued fraction E1(x) = e^{-x} * 1/(x+1- 1/(x+3- 4/(x+5- ...)))
        // evaluated with the modified Lentz algorithm.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=400 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let delta = c * d;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x).exp() * h
    }
}

/// Heat kernel `S_n(t, x)` for `x.len() = n >= 2`; zero branch for `t <= 0`.
pub fn eval_s(t: f64, x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::KernelDimension(n));
    }
    let r2: f64 = x.iter().map(|c| c * c).sum();
    if t == 0.0 && r2 == 0.0 {
        return Err(Error::KernelUndefinedAtOrigin);
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    Ok((FOUR_PI * t).powf(-(n as f64) / 2.0) * (-r2 / (4.0 * t)).exp())
}

/// Spatial gradient `grad_x S_n(t, x) = -x/(2t) S_n(t, x)`; zero for `t <= 0`.
pub fn eval_grad_s(t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let s = eval_s(t, x)?;
    if t <= 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    Ok(x.iter().map(|c| -c / (2.0 * t) * s).collect())
}

/// `int_{s0}^{s1} (4 pi u)^(-1) exp(-d^2/(4u)) du` for the 2-D kernel.
///
/// Rejects the divergent case `d = 0, s0 = 0` and ill-ordered panels.
pub fn panel_time_integral(d: f64, s0: f64, s1: f64) -> Result<f64> {
    if !(s0 >= 0.0) || !(s1 > s0) || !s1.is_finite() {
        return Err(Error::InvalidPanel { s0, s1 });
    }
    if d < 0.0 {
        return Err(Error::InvalidPanel { s0: d, s1 });
    }
    if d == 0.0 {
        if s0 == 0.0 {
            return Err(Error::DivergentPanelIntegral);
        }
        return Ok((s1 / s0).ln() / FOUR_PI);
    }
    Ok(lag_weight(d * d, s0, s1))
}

/// Fast path of [`panel_time_integral`] taking `d^2`; assumes a valid panel
/// and handles `d = 0` only for `s0 > 0`.
#[inline]
pub(crate) fn lag_weight(d2: f64, s0: f64, s1: f64) -> f64 {
    if d2 == 0.0 {
        return (s1 / s0).ln() / FOUR_PI;
    }
    let upper = exp_integral_e1(d2 / (4.0 * s1));
    let lower = if s0 == 0.0 {
        0.0
    } else {
        exp_integral_e1(d2 / (4.0 * s0))
    };
    (upper - lower) / FOUR_PI
}

/// Scalar factor `g` such that `int_{s0}^{s1} grad_x S_2(u, x) du = g(|x|^2) x`.
///
/// Closed form: `g = -(exp(-d^2/(4 s1)) - exp(-d^2/(4 s0))) / (2 pi d^2)`,
/// with the `s0 = 0` exponential read as zero. The `d -> 0` limit
/// `(1/(8 pi)) (1/s1 - 1/s0)` only matters multiplied by `x = 0`, so callers
/// pass `d2 > 0` or use the product directly.
#[inline]
pub(crate) fn grad_time_factor(d2: f64, s0: f64, s1: f64) -> f64 {
    debug_assert!(d2 > 0.0);
    let upper = (-d2 / (4.0 * s1)).exp();
    let lower = if s0 == 0.0 {
        0.0
    } else {
        (-d2 / (4.0 * s0)).exp()
    };
    -(upper - lower) / (2.0 * std::f64::consts::PI * d2)
}

/// Value of the lag-0 time-integrated kernel with its log singularity removed:
/// `lim_{d->0} [ (1/(4pi)) E1(d^2/(4 dt)) + (1/(2pi)) ln d ]`.
#[inline]
pub(crate) fn lag0_log_subtracted_limit(dt: f64) -> f64 {
    ((4.0 * dt).ln() - EULER_GAMMA) / FOUR_PI
}
