//! Browser bindings for the annulus heat solver. Three interactive
//! operations back the static demo page:
//!
//! - [`solve_field`]: temperature raster at the final time for a chosen hole
//!   shape, Robin nonlinearity, and Neumann drive;
//! - [`shape_sweep`]: interior temperature at a probe point along a family of
//!   uniformly scaled holes (the domain-to-solution map);
//! - [`ntd_response`]: outer Dirichlet trace over time produced by a single
//!   Fourier mode of Neumann data, for a given Robin coefficient.
//!
//! Grids are kept small so every call returns interactively; the same code
//! paths are exercised at verification resolution by the core test suite.

use wasm_bindgen::prelude::wasm_bindgen;

use heatbem::geometry::{BoundaryCurve, FourierDisplacement, ShapeMap};
use heatbem::grid::{BoundaryTag, Density, SpaceTimeGrid};
use heatbem::nonlinear_solver::{
    newton_solve, NewtonOptions, NonlinearProblem, RobinNonlinearity, RobinTerm, SpaceCoeff,
    TimeCoeff,
};
use heatbem::ntd::{assemble_ntd, gamma_from_reference};

const OUTER_RADIUS: f64 = 2.0;
const HOLE_RADIUS: f64 = 0.8;
const T_FINAL: f64 = 0.5;

fn demo_outer() -> BoundaryCurve {
    BoundaryCurve::circle([0.0, 0.0], OUTER_RADIUS)
}

fn demo_shape(hole_scale: f64, bump_amp: f64, bump_mode: usize) -> ShapeMap {
    let mut disp = FourierDisplacement::circle_scaling(HOLE_RADIUS, hole_scale);
    if bump_amp != 0.0 {
        disp = disp.add(&FourierDisplacement::circle_radial_bump(bump_amp, bump_mode.max(1)));
    }
    ShapeMap::new(BoundaryCurve::circle([0.0, 0.0], HOLE_RADIUS), disp)
}

fn demo_nonlinearity(g_linear: f64, g_quadratic: f64) -> RobinNonlinearity {
    let mut terms = Vec::new();
    if g_linear != 0.0 {
        terms.push(RobinTerm {
            power: 1,
            time: TimeCoeff::Constant(g_linear),
            space: SpaceCoeff::Constant(1.0),
        });
    }
    if g_quadratic != 0.0 {
        terms.push(RobinTerm {
            power: 2,
            time: TimeCoeff::Constant(g_quadratic),
            space: SpaceCoeff::Constant(1.0),
        });
    }
    RobinNonlinearity::new(terms).expect("demo nonlinearity satisfies G(0,x,0) = 0")
}

fn demo_f(grid: &SpaceTimeGrid, amp: f64) -> Density {
    Density::from_fn(BoundaryTag::Outer, grid, move |t, theta| {
        amp * t * (1.0 + 0.5 * theta.cos())
    })
}

/// Temperature raster over the bounding square of the outer disk.
#[wasm_bindgen]
pub struct FieldSnapshot {
    resolution: usize,
    values: Vec<f64>,
    mask: Vec<u8>,
    min: f64,
    max: f64,
    hole_outline: Vec<f64>,
}

#[wasm_bindgen]
impl FieldSnapshot {
    #[wasm_bindgen(getter)]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Row-major values, `resolution x resolution`; masked cells carry 0.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// 1 where the cell lies in the computational annulus.
    #[wasm_bindgen(getter)]
    pub fn mask(&self) -> Vec<u8> {
        self.mask.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn min(&self) -> f64 {
        self.min
    }

    #[wasm_bindgen(getter)]
    pub fn max(&self) -> f64 {
        self.max
    }

    /// Flattened `[x0, y0, x1, y1, ...]` polyline of the hole boundary.
    #[wasm_bindgen(getter)]
    pub fn hole_outline(&self) -> Vec<f64> {
        self.hole_outline.clone()
    }
}

/// Solve the nonlinear problem and rasterize the temperature at `t = T`.
///
/// `hole_scale` scales the reference hole (admissible range roughly
/// [0.5, 1.6]); `bump_amp`/`bump_mode` add a radial wobble; `g_linear` and
/// `g_quadratic` set the Robin law `du/dnu = g_lin u + g_quad u^2`; `f_amp`
/// scales the Neumann drive.
#[wasm_bindgen]
pub fn solve_field(
    hole_scale: f64,
    bump_amp: f64,
    bump_mode: usize,
    g_linear: f64,
    g_quadratic: f64,
    f_amp: f64,
    resolution: usize,
) -> Result<FieldSnapshot, String> {
    let n = resolution.clamp(16, 160);
    let grid = SpaceTimeGrid::new(T_FINAL, 12, 24, 24).map_err(|e| e.to_string())?;
    let outer = demo_outer();
    let shape = demo_shape(hole_scale, bump_amp, bump_mode);
    let report = shape.check_admissible_default(&outer, grid.m_inner);
    if !report.pass() {
        return Err(format!("shape not admissible: {}", report.failure_reason()));
    }
    let problem = NonlinearProblem {
        outer: outer.clone(),
        shape: shape.clone(),
        grid: grid.clone(),
        neumann_f: demo_f(&grid, f_amp),
        robin_g: demo_nonlinearity(g_linear, g_quadratic),
    };
    let state = newton_solve(&problem, None, NewtonOptions::default()).map_err(|e| e.to_string())?;

    // Keep a visual margin away from both boundaries: the quadrature layer
    // of the coarse demo grid is wide and values inside it are unreliable.
    let margin = 0.16;
    let span = 2.0 * OUTER_RADIUS;
    let mut values = vec![0.0; n * n];
    let mut mask = vec![0u8; n * n];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for iy in 0..n {
        for ix in 0..n {
            let x = -OUTER_RADIUS + (ix as f64 + 0.5) / n as f64 * span;
            let y = OUTER_RADIUS - (iy as f64 + 0.5) / n as f64 * span;
            let r = x.hypot(y);
            if r > OUTER_RADIUS - margin {
                continue;
            }
            // Distance to the hole via its polar profile (radial shapes).
            let ang = y.atan2(x);
            let hole_pt = shape.point(ang);
            let hole_r = hole_pt[0].hypot(hole_pt[1]);
            if r < hole_r + margin {
                continue;
            }
            let v = state.field.eval_unchecked(T_FINAL, [x, y]);
            values[iy * n + ix] = v;
            mask[iy * n + ix] = 1;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    let mut hole_outline = Vec::with_capacity(2 * 128);
    for i in 0..=128 {
        let p = shape.point(i as f64 / 128.0 * 2.0 * std::f64::consts::PI);
        hole_outline.push(p[0]);
        hole_outline.push(p[1]);
    }
    Ok(FieldSnapshot { resolution: n, values, mask, min: lo, max: hi, hole_outline })
}

/// Interior temperature at the probe point (1.4, 0) for holes scaled from 1
/// to `max_scale`: a direct view of the domain-to-solution map.
#[wasm_bindgen]
pub fn shape_sweep(
    n_steps: usize,
    max_scale: f64,
    g_linear: f64,
    g_quadratic: f64,
    f_amp: f64,
) -> Result<Vec<f64>, String> {
    let steps = n_steps.clamp(2, 33);
    let grid = SpaceTimeGrid::new(T_FINAL, 12, 24, 24).map_err(|e| e.to_string())?;
    let outer = demo_outer();
    let f = demo_f(&grid, f_amp);
    let g = demo_nonlinearity(g_linear, g_quadratic);

    // Warm-started continuation along the scaling path, evaluating without
    // the near-boundary guard (the demo grid is coarse and the probe point
    // sits mid-annulus).
    let mut warm: Option<(Density, Density)> = None;
    let mut values = Vec::with_capacity(steps);
    for i in 0..steps {
        let c = 1.0 + (max_scale - 1.0) * i as f64 / (steps - 1) as f64;
        let shape = demo_shape(c, 0.0, 1);
        let report = shape.check_admissible_default(&outer, grid.m_inner);
        if !report.pass() {
            return Err(format!("scale {c:.3} not admissible: {}", report.failure_reason()));
        }
        let problem = NonlinearProblem {
            outer: outer.clone(),
            shape,
            grid: grid.clone(),
            neumann_f: f.clone(),
            robin_g: g.clone(),
        };
        let state = match &warm {
            Some((m0, e0)) => newton_solve(&problem, Some((m0, e0)), NewtonOptions::default()),
            None => newton_solve(&problem, None, NewtonOptions::default()),
        }
        .map_err(|e| e.to_string())?;
        values.push(state.field.eval_unchecked(T_FINAL, [1.4, 0.0]));
        warm = Some((state.mu, state.eta));
    }
    Ok(values)
}

/// Outer Dirichlet trace over time at node 0 for the Neumann datum
/// `f(t, theta) = t cos(mode * theta)` under Robin coefficient `gamma`.
#[wasm_bindgen]
pub fn ntd_response(gamma: f64, mode: usize, hole_scale: f64) -> Result<Vec<f64>, String> {
    let grid = SpaceTimeGrid::new(T_FINAL, 24, 24, 24).map_err(|e| e.to_string())?;
    let outer = demo_outer();
    let shape = demo_shape(hole_scale, 0.0, 1);
    let report = shape.check_admissible_default(&outer, grid.m_inner);
    if !report.pass() {
        return Err(format!("shape not admissible: {}", report.failure_reason()));
    }
    let gamma_nodes = gamma_from_reference(&grid, |_| gamma);
    let ntd = assemble_ntd(&outer, &shape, &gamma_nodes, &grid).map_err(|e| e.to_string())?;
    let f = Density::from_fn(BoundaryTag::Outer, &grid, |t, theta| {
        t * (mode as f64 * theta).cos()
    });
    let trace = ntd.apply(&f);
    Ok((0..grid.n_t).map(|k| trace.values[k][0]).collect())
}

/// Crate version, surfaced on the demo page.
#[wasm_bindgen]
pub fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_snapshot_has_sane_raster() {
        let snap = solve_field(1.0, 0.05, 3, 0.5, -0.1, 1.0, 48).unwrap();
        assert_eq!(snap.resolution, 48);
        assert_eq!(snap.values.len(), 48 * 48);
        let inside = snap.mask.iter().filter(|m| **m == 1).count();
        assert!(inside > 400, "annulus raster too small: {inside}");
        assert!(snap.min <= snap.max);
        assert!(snap.values.iter().all(|v| v.is_finite()));
        assert_eq!(snap.hole_outline.len(), 2 * 129);

        // Inadmissible scale is reported, not panicked.
        assert!(solve_field(3.0, 0.0, 1, 0.5, 0.0, 1.0, 32).is_err());
    }

    #[test]
    fn sweep_values_vary_smoothly() {
        let vals = shape_sweep(9, 1.08, 0.5, -0.1, 1.0).unwrap();
        assert_eq!(vals.len(), 9);
        assert!(vals.iter().all(|v| v.is_finite()));
        let max_jump = vals.windows(2).map(|w| (w[0] - w[1]).abs()).fold(0.0f64, f64::max);
        let range = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max_jump <= range.max(1e-12), "sweep jumps exceed total variation");
    }

    #[test]
    fn ntd_response_is_causal_in_scale() {
        let trace = ntd_response(1.0, 1, 1.0).unwrap();
        assert_eq!(trace.len(), 24);
        assert!(trace.iter().all(|v| v.is_finite()));
        // Ramped data produce a trace that grows from (near) zero.
        assert!(trace[0].abs() < trace.last().unwrap().abs());
        // The Robin strength changes the response.
        let trace_stiff = ntd_response(20.0, 1, 1.0).unwrap();
        let diff: f64 = trace
            .iter()
            .zip(&trace_stiff)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff > 0.0);
    }
}
