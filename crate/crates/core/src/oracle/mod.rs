//! Independent verification machinery: closed-form caloric fields used to
//! manufacture boundary data with a known solution, and a finite-difference
//! reference solver (`fd`) that shares no numerical kernels with the
//! layer-potential path.

pub mod fd;

use crate::error::{Error, Result};
use crate::geometry::{dist2, BoundaryCurve, Point, ShapeMap};
use crate::grid::{BoundaryTag, Density, SpaceTimeGrid};
use crate::kernel::exp_integral_e1;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Closed-form fields for manufactured-solution testing.
///
/// `RampSource` is a point source at `x0` switched on at `t = 0` with
/// strength `q(tau) = strength * tau`:
///
/// ```text
/// u(t, x) = int_0^t S_2(t - tau, x - x0) q(tau) dtau
///         = (strength / 4 pi) [ (t + r^2/4) E1(z) - t e^{-z} ],   z = r^2/(4 t).
/// ```
///
/// It is exactly caloric away from `x0` and vanishes with all derivatives at
/// `t = 0`, so the manufactured problem has zero data defect.
///
/// `ShiftedGaussian` is `u*(t, x) = S_2(t + t0, x - x0)`, used through its
/// time-zeroed variant `u* - u*(0, .)`; that variant is caloric only up to
/// the stationary correction `Lap u*(0, .)`, which [`ManufacturedField::defect`]
/// reports so tests can budget for it.
#[derive(Debug, Clone, PartialEq)]
pub enum ManufacturedField {
    RampSource { x0: Point, strength: f64 },
    ShiftedGaussian { x0: Point, t0: f64 },
}

impl ManufacturedField {
    pub fn source_point(&self) -> Point {
        match self {
            ManufacturedField::RampSource { x0, .. } => *x0,
            ManufacturedField::ShiftedGaussian { x0, .. } => *x0,
        }
    }

    /// Field value; the shifted Gaussian is returned time-zeroed.
    pub fn value(&self, t: f64, x: Point) -> f64 {
        match self {
            ManufacturedField::RampSource { x0, strength } => {
                if t <= 0.0 {
                    return 0.0;
                }
                let r2 = dist2(x, *x0);
                let z = r2 / (4.0 * t);
                if z > 700.0 {
                    return 0.0;
                }
                strength / FOUR_PI * ((t + 0.25 * r2) * exp_integral_e1(z) - t * (-z).exp())
            }
            ManufacturedField::ShiftedGaussian { x0, t0 } => {
                let r2 = dist2(x, *x0);
                let s = |tt: f64| (-r2 / (4.0 * tt)).exp() / (FOUR_PI * tt);
                if t <= 0.0 {
                    0.0
                } else {
                    s(t + t0) - s(*t0)
                }
            }
        }
    }

    pub fn gradient(&self, t: f64, x: Point) -> Point {
        match self {
            ManufacturedField::RampSource { x0, strength } => {
                if t <= 0.0 {
                    return [0.0, 0.0];
                }
                let dx = x[0] - x0[0];
                let dy = x[1] - x0[1];
                let r2 = dx * dx + dy * dy;
                let r = r2.sqrt();
                let z = r2 / (4.0 * t);
                if z > 700.0 {
                    return [0.0, 0.0];
                }
                // d/dr u = (strength/4pi) [ (r/2) E1(z) - (2 t / r) e^{-z} ]
                let du_dr =
                    strength / FOUR_PI * (0.5 * r * exp_integral_e1(z) - 2.0 * t / r * (-z).exp());
                [du_dr * dx / r, du_dr * dy / r]
            }
            ManufacturedField::ShiftedGaussian { x0, t0 } => {
                let dx = x[0] - x0[0];
                let dy = x[1] - x0[1];
                let r2 = dx * dx + dy * dy;
                let s = |tt: f64| (-r2 / (4.0 * tt)).exp() / (FOUR_PI * tt);
                if t <= 0.0 {
                    return [0.0, 0.0];
                }
                let a = -s(t + t0) / (2.0 * (t + t0)) + s(*t0) / (2.0 * t0);
                [a * dx, a * dy]
            }
        }
    }

    pub fn normal_derivative(&self, t: f64, x: Point, nu: Point) -> f64 {
        let g = self.gradient(t, x);
        g[0] * nu[0] + g[1] * nu[1]
    }

    /// Volume defect of the time-zeroed field: `Lap u*(0, x)`. Zero for the
    /// ramp source, which is exactly caloric with zero initial data.
    pub fn defect(&self, x: Point) -> f64 {
        match self {
            ManufacturedField::RampSource { .. } => 0.0,
            ManufacturedField::ShiftedGaussian { x0, t0 } => {
                let r2 = dist2(x, *x0);
                let s = (-r2 / (4.0 * t0)).exp() / (FOUR_PI * t0);
                s * (r2 / (4.0 * t0 * t0) - 1.0 / t0)
            }
        }
    }

    /// Maximum defect magnitude over a sampling of the annulus, reported so
    /// tolerance budgets can quote it.
    pub fn max_defect(&self, outer: &BoundaryCurve, shape: &ShapeMap) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..64 {
            let theta = i as f64 / 64.0 * 2.0 * std::f64::consts::PI;
            let a = shape.point(theta);
            let b = outer.point(theta);
            for q in 0..16 {
                let s = (q as f64 + 0.5) / 16.0;
                let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                worst = worst.max(self.defect(p).abs());
            }
        }
        worst
    }
}

/// Boundary data for the inhomogeneous linear mixed problem whose exact
/// solution is the manufactured field: Neumann datum on the outer boundary,
/// Robin datum `du/dnu + gamma u` on the inner boundary, plus the Dirichlet
/// trace targets the solver is compared against.
pub struct ManufacturedData {
    pub f_outer: Density,
    pub g_inner: Density,
    pub outer_target: Density,
    pub inner_target: Density,
}

pub fn manufactured_data(
    field: &ManufacturedField,
    outer: &BoundaryCurve,
    shape: &ShapeMap,
    grid: &SpaceTimeGrid,
    gamma: impl Fn(f64, f64) -> f64,
) -> Result<ManufacturedData> {
    // The source must sit strictly inside the image hole.
    let x0 = field.source_point();
    let winding = image_winding_number(shape, x0, 4 * grid.m_inner.max(128));
    if winding != 1 {
        return Err(Error::Inadmissible(format!(
            "manufactured source point ({}, {}) is not inside the hole",
            x0[0], x0[1]
        )));
    }

    let f_outer = Density::from_fn(BoundaryTag::Outer, grid, |t, theta| {
        let x = outer.point(theta);
        let nu = outer.normal_at(theta).expect("outer normal");
        field.normal_derivative(t, x, nu)
    });
    let g_inner = Density::from_fn(BoundaryTag::Inner, grid, |t, theta| {
        let x = shape.point(theta);
        let nu = shape.pullback_normal(theta).expect("inner normal");
        field.normal_derivative(t, x, nu) + gamma(t, theta) * field.value(t, x)
    });
    let outer_target =
        Density::from_fn(BoundaryTag::Outer, grid, |t, theta| field.value(t, outer.point(theta)));
    let inner_target =
        Density::from_fn(BoundaryTag::Inner, grid, |t, theta| field.value(t, shape.point(theta)));
    Ok(ManufacturedData { f_outer, g_inner, outer_target, inner_target })
}

fn image_winding_number(shape: &ShapeMap, p: Point, samples: usize) -> i32 {
    let m = samples.max(64);
    let dtheta = 2.0 * std::f64::consts::PI / m as f64;
    let mut total = 0.0;
    let mut prev = shape.point(0.0);
    for j in 1..=m {
        let cur = shape.point(j as f64 * dtheta);
        let v0 = [prev[0] - p[0], prev[1] - p[1]];
        let v1 = [cur[0] - p[0], cur[1] - p[1]];
        let cross = v0[0] * v1[1] - v0[1] * v1[0];
        let dot = v0[0] * v1[0] + v0[1] * v1[1];
        total += cross.atan2(dot);
        prev = cur;
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i32
}
