//! Discrete single-layer operators: the trace `V`, the normal-derivative
//! operator `W*`, cross-boundary evaluation blocks, and interior field
//! evaluation. All operators are causal: in space-time they are
//! block-lower-triangular convolutions whose block at time lag `l` is
//!
//! ```text
//! B^l[i][j] = (time integral of the kernel over (l dt, (l+1) dt]) * w_j
//! ```
//!
//! with the time integral in closed form (kernel module) and the periodic
//! trapezoidal rule in space. The lag-0 diagonal of `V` integrates the
//! logarithmic near-field analytically (log subtraction over the local arc
//! panel); the lag-0 diagonal of `W*` is bounded and is integrated by graded
//! dyadic refinement of the local panel.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{dist2, BoundaryCurve, Point, ShapeMap};
use crate::grid::{BoundaryTag, Density, SpaceTimeGrid};
use crate::kernel;

/// Parametrized source of nodes: a fixed curve or the image of a shape map.
///
/// Integrals over the image curve are pulled back to the reference
/// parametrization, so the quadrature weight `|d/dtheta phi(y(theta))| dtheta`
/// carries the arc-length Jacobian automatically.
#[derive(Debug, Clone)]
pub enum CurveParam {
    Curve(BoundaryCurve),
    Image(ShapeMap),
}

impl CurveParam {
    pub fn point(&self, theta: f64) -> Point {
        match self {
            CurveParam::Curve(c) => c.point(theta),
            CurveParam::Image(s) => s.point(theta),
        }
    }

    pub fn tangent(&self, theta: f64) -> Point {
        match self {
            CurveParam::Curve(c) => c.tangent(theta),
            CurveParam::Image(s) => s.tangent(theta),
        }
    }
}

/// Nodes, normals and trapezoidal weights of one discretized boundary.
#[derive(Debug, Clone)]
pub struct BoundaryDiscretization {
    pub param: CurveParam,
    pub m: usize,
    pub thetas: Vec<f64>,
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    pub speeds: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BoundaryDiscretization {
    pub fn new(param: CurveParam, m: usize) -> Result<Self> {
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        let thetas: Vec<f64> = (0..m).map(|j| j as f64 * dtheta).collect();
        let mut points = Vec::with_capacity(m);
        let mut normals = Vec::with_capacity(m);
        let mut speeds = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for &theta in &thetas {
            let t = param.tangent(theta);
            let speed = t[0].hypot(t[1]);
            if speed < 1e-14 {
                return Err(Error::DegenerateTangent { theta });
            }
            points.push(param.point(theta));
            normals.push([t[1] / speed, -t[0] / speed]);
            speeds.push(speed);
            weights.push(speed * dtheta);
        }
        Ok(Self { param, m, thetas, points, normals, speeds, weights })
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.m as f64
    }

    /// Minimum distance from `p` to the node set.
    pub fn node_distance(&self, p: Point) -> f64 {
        self.points
            .iter()
            .map(|q| dist2(*q, p).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-lag blocks of one causal convolution operator.
#[derive(Debug, Clone)]
pub struct LayerBlocks {
    pub lags: Vec<DMatrix<f64>>,
}

impl LayerBlocks {
    pub fn n_lags(&self) -> usize {
        self.lags.len()
    }

    /// Convolution output at panel `k`: `sum_{l=0..=k} B^l z_{k-l}`.
    pub fn conv_at(&self, history: &[DVector<f64>], k: usize) -> DVector<f64> {
        let rows = self.lags[0].nrows();
        let mut out = DVector::zeros(rows);
        for l in 0..=k {
            out.gemv(1.0, &self.lags[l], &history[k - l], 1.0);
        }
        out
    }

    /// History part only: `sum_{l=1..=k} B^l z_{k-l}` (lag 0 excluded).
    pub fn history_at(&self, history: &[DVector<f64>], k: usize) -> DVector<f64> {
        let rows = self.lags[0].nrows();
        let mut out = DVector::zeros(rows);
        for l in 1..=k {
            out.gemv(1.0, &self.lags[l], &history[k - l], 1.0);
        }
        out
    }
}

/// Evaluation mode of a cross-boundary block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossMode {
    Trace,
    NormalDerivative,
}

/// Number of dyadic refinement levels for the bounded `W*` diagonal.
const WSTAR_GRADED_LEVELS: usize = 8;

/// Assemble the per-lag blocks of the single-layer trace operator `V` on one
/// boundary. The lag-0 diagonal handles the logarithmic singularity by
/// subtracting the `-(1/2 pi) log d` behavior and integrating it in closed
/// form over the local arc panel.
pub fn assemble_v(disc: &BoundaryDiscretization, grid: &SpaceTimeGrid) -> LayerBlocks {
    let m = disc.m;
    let dt = grid.dt();
    let half_panel = 0.5 * disc.dtheta();
    let mut lags = Vec::with_capacity(grid.n_t);
    for l in 0..grid.n_t {
        let s0 = l as f64 * dt;
        let s1 = (l + 1) as f64 * dt;
        let mut block = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                if l == 0 && i == j {
                    // Smooth remainder at d = 0 plus the local log integral:
                    // int_{-h}^{h} -(1/2pi) ln(a |s|) a ds = -(a h / pi)(ln(a h) - 1).
                    let a = disc.speeds[i];
                    let smooth = kernel::lag0_log_subtracted_limit(dt) * disc.weights[i];
                    let log_local = -(a * half_panel / std::f64::consts::PI)
                        * ((a * half_panel).ln() - 1.0);
                    block[(i, j)] = smooth + log_local;
                } else {
                    let d2 = dist2(disc.points[i], disc.points[j]);
                    block[(i, j)] = kernel::lag_weight(d2, s0, s1) * disc.weights[j];
                }
            }
        }
        lags.push(block);
    }
    LayerBlocks { lags }
}

/// Assemble the per-lag blocks of `W*` (normal derivative of the single-layer
/// potential) on one boundary. The lag-0 diagonal integrates the bounded
/// near-field kernel by graded dyadic refinement of the local arc panel.
pub fn assemble_wstar(disc: &BoundaryDiscretization, grid: &SpaceTimeGrid) -> LayerBlocks {
    let m = disc.m;
    let dt = grid.dt();
    let mut lags = Vec::with_capacity(grid.n_t);
    for l in 0..grid.n_t {
        let s0 = l as f64 * dt;
        let s1 = (l + 1) as f64 * dt;
        let mut block = DMatrix::zeros(m, m);
        for i in 0..m {
            let xi = disc.points[i];
            let nu = disc.normals[i];
            for j in 0..m {
                if l == 0 && i == j {
                    block[(i, j)] = wstar_diagonal(disc, i, dt);
                } else {
                    let dx = xi[0] - disc.points[j][0];
                    let dy = xi[1] - disc.points[j][1];
                    let d2 = dx * dx + dy * dy;
                    if d2 == 0.0 {
                        // Diagonal of a lag >= 1 block: the kernel factor is
                        // finite and multiplies nu . (x - y) = 0.
                        block[(i, j)] = 0.0;
                    } else {
                        let g = kernel::grad_time_factor(d2, s0, s1);
                        block[(i, j)] = (nu[0] * dx + nu[1] * dy) * g * disc.weights[j];
                    }
                }
            }
        }
        lags.push(block);
    }
    LayerBlocks { lags }
}

/// Lag-0 diagonal entry of `W*`: graded dyadic quadrature of the bounded
/// near-field kernel over the local panel `[theta_i - h, theta_i + h]`.
fn wstar_diagonal(disc: &BoundaryDiscretization, i: usize, dt: f64) -> f64 {
    let theta_i = disc.thetas[i];
    let xi = disc.points[i];
    let nu = disc.normals[i];
    let h = 0.5 * disc.dtheta();

    let integrand = |theta: f64| -> f64 {
        let y = disc.param.point(theta);
        let t = disc.param.tangent(theta);
        let speed = t[0].hypot(t[1]);
        let dx = xi[0] - y[0];
        let dy = xi[1] - y[1];
        let d2 = dx * dx + dy * dy;
        if d2 == 0.0 {
            return 0.0;
        }
        let g = kernel::grad_time_factor(d2, 0.0, dt);
        (nu[0] * dx + nu[1] * dy) * g * speed
    };

    // Two-point Gauss on dyadic subintervals graded toward theta_i, one
    // midpoint evaluation on the innermost sliver.
    let gauss = 0.5 / (3.0f64).sqrt();
    let mut total = 0.0;
    for side in [-1.0, 1.0] {
        let mut hi = h;
        for _ in 0..WSTAR_GRADED_LEVELS {
            let lo = 0.5 * hi;
            let mid = 0.5 * (lo + hi);
            let len = hi - lo;
            for q in [-1.0, 1.0] {
                let s = mid + q * gauss * len;
                total += 0.5 * len * integrand(theta_i + side * s);
            }
            hi = lo;
        }
        total += hi * integrand(theta_i + side * 0.5 * hi);
    }
    total
}

/// Assemble cross-boundary blocks: the potential generated on `source`
/// evaluated (trace) or normally differentiated (at `target`'s nodes).
/// The curves must be disjoint; the kernel is then smooth and plain product
/// integration times the trapezoidal rule applies.
pub fn assemble_cross(
    source: &BoundaryDiscretization,
    target: &BoundaryDiscretization,
    grid: &SpaceTimeGrid,
    mode: CrossMode,
) -> Result<LayerBlocks> {
    let mut min_d2 = f64::INFINITY;
    for p in &target.points {
        for q in &source.points {
            min_d2 = min_d2.min(dist2(*p, *q));
        }
    }
    let min_dist = min_d2.sqrt();
    if !(min_dist > 1e-9) {
        return Err(Error::CurvesIntersect { min_dist });
    }

    let dt = grid.dt();
    let mut lags = Vec::with_capacity(grid.n_t);
    for l in 0..grid.n_t {
        let s0 = l as f64 * dt;
        let s1 = (l + 1) as f64 * dt;
        let mut block = DMatrix::zeros(target.m, source.m);
        for i in 0..target.m {
            let xi = target.points[i];
            let nu = target.normals[i];
            for j in 0..source.m {
                let dx = xi[0] - source.points[j][0];
                let dy = xi[1] - source.points[j][1];
                let d2 = dx * dx + dy * dy;
                block[(i, j)] = match mode {
                    CrossMode::Trace => kernel::lag_weight(d2, s0, s1) * source.weights[j],
                    CrossMode::NormalDerivative => {
                        let g = kernel::grad_time_factor(d2, s0, s1);
                        (nu[0] * dx + nu[1] * dy) * g * source.weights[j]
                    }
                };
            }
        }
        lags.push(block);
    }
    Ok(LayerBlocks { lags })
}

/// The full set of causal blocks for an annular configuration.
#[derive(Debug, Clone)]
pub struct LayerOperatorSet {
    pub grid: SpaceTimeGrid,
    pub outer: BoundaryDiscretization,
    pub inner: BoundaryDiscretization,
    pub v_outer: LayerBlocks,
    pub v_inner: LayerBlocks,
    pub wstar_outer: LayerBlocks,
    pub wstar_inner: LayerBlocks,
    /// Trace of the outer potential at inner nodes.
    pub trace_out_on_in: LayerBlocks,
    /// Trace of the inner potential at outer nodes.
    pub trace_in_on_out: LayerBlocks,
    /// Normal derivative (inner normals) of the outer potential at inner nodes.
    pub dnormal_out_on_in: LayerBlocks,
    /// Normal derivative (outer normals) of the inner potential at outer nodes.
    pub dnormal_in_on_out: LayerBlocks,
}

impl LayerOperatorSet {
    /// Assemble every block for the annulus between `outer` and the image of
    /// `shape`. Fails if the discretized curves touch.
    pub fn assemble(
        outer: &BoundaryCurve,
        shape: &ShapeMap,
        grid: &SpaceTimeGrid,
    ) -> Result<Self> {
        let outer_disc =
            BoundaryDiscretization::new(CurveParam::Curve(outer.clone()), grid.m_outer)?;
        let inner_disc =
            BoundaryDiscretization::new(CurveParam::Image(shape.clone()), grid.m_inner)?;
        let v_outer = assemble_v(&outer_disc, grid);
        let v_inner = assemble_v(&inner_disc, grid);
        let wstar_outer = assemble_wstar(&outer_disc, grid);
        let wstar_inner = assemble_wstar(&inner_disc, grid);
        let trace_out_on_in = assemble_cross(&outer_disc, &inner_disc, grid, CrossMode::Trace)?;
        let trace_in_on_out = assemble_cross(&inner_disc, &outer_disc, grid, CrossMode::Trace)?;
        let dnormal_out_on_in =
            assemble_cross(&outer_disc, &inner_disc, grid, CrossMode::NormalDerivative)?;
        let dnormal_in_on_out =
            assemble_cross(&inner_disc, &outer_disc, grid, CrossMode::NormalDerivative)?;
        Ok(Self {
            grid: grid.clone(),
            outer: outer_disc,
            inner: inner_disc,
            v_outer,
            v_inner,
            wstar_outer,
            wstar_inner,
            trace_out_on_in,
            trace_in_on_out,
            dnormal_out_on_in,
            dnormal_in_on_out,
        })
    }

    /// Dirichlet trace of the represented field on the outer boundary at
    /// panel `k`.
    pub fn outer_trace_at(
        &self,
        mu: &[DVector<f64>],
        eta: &[DVector<f64>],
        k: usize,
    ) -> DVector<f64> {
        self.v_outer.conv_at(mu, k) + self.trace_in_on_out.conv_at(eta, k)
    }

    /// Dirichlet trace on the inner boundary (pulled back to reference
    /// parameters) at panel `k`.
    pub fn inner_trace_at(
        &self,
        mu: &[DVector<f64>],
        eta: &[DVector<f64>],
        k: usize,
    ) -> DVector<f64> {
        self.trace_out_on_in.conv_at(mu, k) + self.v_inner.conv_at(eta, k)
    }
}

/// Default near-boundary exclusion distance for interior evaluation.
pub fn default_delta_eval(ops: &LayerOperatorSet) -> f64 {
    let ds_max = ops
        .outer
        .weights
        .iter()
        .chain(ops.inner.weights.iter())
        .fold(0.0f64, |a, w| a.max(*w));
    2.0 * ds_max.max(ops.grid.dt().sqrt())
}

/// Evaluator of the represented field `u = v^+_outer[mu] + v^-_inner[eta]` at
/// interior space-time points. The evaluation integrates the piecewise
/// constant densities exactly in time, so the discrete field is exactly
/// caloric away from the boundary nodes and exactly causal.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub outer: BoundaryDiscretization,
    pub inner: BoundaryDiscretization,
    pub grid: SpaceTimeGrid,
    pub mu: Vec<DVector<f64>>,
    pub eta: Vec<DVector<f64>>,
    pub delta_eval: f64,
}

impl SolutionField {
    pub fn new(ops: &LayerOperatorSet, mu: Vec<DVector<f64>>, eta: Vec<DVector<f64>>) -> Self {
        Self {
            outer: ops.outer.clone(),
            inner: ops.inner.clone(),
            grid: ops.grid.clone(),
            mu,
            eta,
            delta_eval: default_delta_eval(ops),
        }
    }

    /// Evaluate at `(t, x)`; errors when `x` is inside the quadrature
    /// boundary layer of either curve.
    pub fn eval(&self, t: f64, x: Point) -> Result<f64> {
        let dist = self.outer.node_distance(x).min(self.inner.node_distance(x));
        if dist < self.delta_eval {
            return Err(Error::TooCloseToBoundary {
                t,
                x: x[0],
                y: x[1],
                dist,
                delta_eval: self.delta_eval,
            });
        }
        Ok(self.eval_unchecked(t, x))
    }

    /// Evaluation without the boundary-layer guard, for diagnostics that
    /// deliberately probe near the boundary.
    pub fn eval_unchecked(&self, t: f64, x: Point) -> f64 {
        single_layer_eval(&self.outer, &self.mu, &self.grid, t, x)
            + single_layer_eval(&self.inner, &self.eta, &self.grid, t, x)
    }
}

/// Exact-in-time evaluation of one single-layer potential of a piecewise
/// constant density at `(t, x)` off the boundary.
pub fn single_layer_eval(
    disc: &BoundaryDiscretization,
    density: &[DVector<f64>],
    grid: &SpaceTimeGrid,
    t: f64,
    x: Point,
) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let dt = grid.dt();
    let mut total = 0.0;
    for (k, dens_k) in density.iter().enumerate() {
        let panel_start = k as f64 * dt;
        if panel_start >= t {
            // Causal: later panels contribute exactly nothing.
            break;
        }
        let s_hi = t - panel_start;
        let s_lo = (t - (k + 1) as f64 * dt).max(0.0);
        for j in 0..disc.m {
            let d2 = dist2(x, disc.points[j]);
            total += dens_k[j] * kernel::lag_weight(d2, s_lo, s_hi) * disc.weights[j];
        }
    }
    total
}

/// Binary dump of per-lag blocks: magic `CALB1`, then `n_lags`, `rows`,
/// `cols` as little-endian u32, then row-major f64 blocks by lag.
pub fn write_blocks(blocks: &LayerBlocks, w: &mut impl std::io::Write) -> std::io::Result<()> {
    w.write_all(b"CALB1")?;
    let rows = blocks.lags[0].nrows();
    let cols = blocks.lags[0].ncols();
    for v in [blocks.lags.len() as u32, rows as u32, cols as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for block in &blocks.lags {
        for i in 0..rows {
            for j in 0..cols {
                w.write_all(&block[(i, j)].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Reader matching [`write_blocks`], used by regression tests.
pub fn read_blocks(r: &mut impl std::io::Read) -> std::io::Result<LayerBlocks> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != b"CALB1" {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "bad magic in block dump",
        ));
    }
    let mut buf4 = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut buf4)?;
        *d = u32::from_le_bytes(buf4) as usize;
    }
    let [n_lags, rows, cols] = dims;
    let mut buf8 = [0u8; 8];
    let mut lags = Vec::with_capacity(n_lags);
    for _ in 0..n_lags {
        let mut block = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                r.read_exact(&mut buf8)?;
                block[(i, j)] = f64::from_le_bytes(buf8);
            }
        }
        lags.push(block);
    }
    Ok(LayerBlocks { lags })
}

/// Convert a [`Density`] into the per-panel vectors used by the solvers.
pub fn density_to_vectors(d: &Density) -> Vec<DVector<f64>> {
    d.values.iter().map(|row| DVector::from_row_slice(row)).collect()
}

/// Convert per-panel vectors back into a [`Density`].
pub fn vectors_to_density(tag: BoundaryTag, vecs: &[DVector<f64>]) -> Density {
    Density {
        boundary: tag,
        values: vecs.iter().map(|v| v.iter().copied().collect()).collect(),
    }
}
