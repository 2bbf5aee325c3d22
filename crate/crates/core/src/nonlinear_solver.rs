//! The nonlinear mixed problem: polynomial Robin nonlinearities, the coupled
//! boundary residual, time-marching Newton iteration, the shape-parametrized
//! solution family, finite-difference shape-derivative diagnostics, and the
//! local-uniqueness check.
//!
//! The residual on a density pair `(mu, eta)` is
//!
//! ```text
//! r1 = (1/2 I + W*_outer) mu + nu_outer . grad v_inner[eta] - f
//! r2 = (-1/2 I + W*_inner) eta + nu_inner . grad v_outer[mu]
//!       - G(t, phi(y), trace of v_outer[mu] + V_inner[eta])
//! ```
//!
//! and a zero of the residual represents a solution of the mixed problem with
//! Neumann datum `f` and nonlinear Robin condition `du/dnu = G(t, x, u)` on
//! the inner boundary. Newton's Jacobian in the densities is the linearized
//! operator with `beta = dG/dxi` evaluated at the current trace, so each
//! panel is solved by Newton with the history frozen; causality makes this
//! equivalent to global Newton on the discrete system.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, FourierDisplacement, Point, ShapeMap};
use crate::grid::{BoundaryTag, Density, SpaceTimeGrid};
use crate::linear_solver::{base_step_matrix, factor_step, subtract_beta_rows};
use crate::potentials::{density_to_vectors, vectors_to_density, LayerOperatorSet, SolutionField};

/// Time coefficient `a_j(t)` of one polynomial term.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeCoeff {
    Constant(f64),
    /// `c * t`
    Ramp(f64),
    /// `c_0 + c_1 t + c_2 t^2 + ...`
    Poly(Vec<f64>),
}

impl TimeCoeff {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeCoeff::Constant(c) => *c,
            TimeCoeff::Ramp(c) => c * t,
            TimeCoeff::Poly(cs) => {
                let mut acc = 0.0;
                for c in cs.iter().rev() {
                    acc = acc * t + c;
                }
                acc
            }
        }
    }
}

/// Space coefficient `b_j(x)` of one polynomial term.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceCoeff {
    Constant(f64),
    /// `offset + amplitude * exp(-|x - center|^2 / width^2)`
    GaussBump { center: Point, width: f64, amplitude: f64, offset: f64 },
}

impl SpaceCoeff {
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            SpaceCoeff::Constant(c) => *c,
            SpaceCoeff::GaussBump { center, width, amplitude, offset } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                offset + amplitude * (-(dx * dx + dy * dy) / (width * width)).exp()
            }
        }
    }

    pub fn translated(&self, v: Point) -> Self {
        match self {
            SpaceCoeff::Constant(c) => SpaceCoeff::Constant(*c),
            SpaceCoeff::GaussBump { center, width, amplitude, offset } => SpaceCoeff::GaussBump {
                center: [center[0] + v[0], center[1] + v[1]],
                width: *width,
                amplitude: *amplitude,
                offset: *offset,
            },
        }
    }
}

/// One monomial term `a_j(t) b_j(x) xi^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobinTerm {
    pub power: u32,
    pub time: TimeCoeff,
    pub space: SpaceCoeff,
}

/// Polynomial Robin nonlinearity `G(t, x, xi) = sum_j a_j(t) b_j(x) xi^j`.
///
/// Construction enforces `G(0, x, 0) = 0`: every power-zero term must have a
/// vanishing time coefficient at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobinNonlinearity {
    pub terms: Vec<RobinTerm>,
}

impl RobinNonlinearity {
    pub fn new(terms: Vec<RobinTerm>) -> Result<Self> {
        for term in &terms {
            if term.power == 0 && term.time.eval(0.0) != 0.0 {
                return Err(Error::Config(
                    "Robin nonlinearity must satisfy G(0, x, 0) = 0".into(),
                ));
            }
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// The linear nonlinearity `G(t, x, xi) = -gamma xi`, embedding the
    /// linear Robin problem `du/dnu + gamma u = 0`.
    pub fn linear_gamma(gamma: f64) -> Self {
        Self {
            terms: vec![RobinTerm {
                power: 1,
                time: TimeCoeff::Constant(-gamma),
                space: SpaceCoeff::Constant(1.0),
            }],
        }
    }

    /// The quadratic benchmark nonlinearity `G(t, x, xi) = t xi - 0.1 xi^2`.
    pub fn quadratic_benchmark() -> Self {
        Self {
            terms: vec![
                RobinTerm {
                    power: 1,
                    time: TimeCoeff::Ramp(1.0),
                    space: SpaceCoeff::Constant(1.0),
                },
                RobinTerm {
                    power: 2,
                    time: TimeCoeff::Constant(-0.1),
                    space: SpaceCoeff::Constant(1.0),
                },
            ],
        }
    }

    pub fn eval(&self, t: f64, x: Point, xi: f64) -> f64 {
        let mut total = 0.0;
        for term in &self.terms {
            total += term.time.eval(t) * term.space.eval(x) * xi.powi(term.power as i32);
        }
        total
    }

    /// Partial derivative with respect to the state variable, computed
    /// symbolically from the polynomial coefficients.
    pub fn dxi(&self, t: f64, x: Point, xi: f64) -> f64 {
        let mut total = 0.0;
        for term in &self.terms {
            if term.power == 0 {
                continue;
            }
            total += term.power as f64
                * term.time.eval(t)
                * term.space.eval(x)
                * xi.powi(term.power as i32 - 1);
        }
        total
    }

    pub fn is_zero_at_zero_state(&self) -> bool {
        self.terms.iter().all(|term| term.power > 0 || term.time.eval(0.0) == 0.0)
    }

    /// Translate the spatial dependence rigidly (for equivariance tests).
    pub fn translated(&self, v: Point) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|term| RobinTerm {
                    power: term.power,
                    time: term.time.clone(),
                    space: term.space.translated(v),
                })
                .collect(),
        }
    }
}

/// Pointwise superposition operator: `(t_k, theta_j) -> G(t_k, phi(y_j), u[k][j])`.
///
/// Errors when an image node leaves the outer domain, where the spatial
/// coefficients are not defined.
pub fn eval_n_g(
    g: &RobinNonlinearity,
    shape: &ShapeMap,
    outer: &BoundaryCurve,
    grid: &SpaceTimeGrid,
    u_trace: &Density,
) -> Result<Density> {
    let thetas = grid.thetas(BoundaryTag::Inner);
    let image: Vec<Point> = thetas.iter().map(|&th| shape.point(th)).collect();
    for p in &image {
        if outer.winding_number(*p, 4 * grid.m_inner.max(128)) != 1 {
            return Err(Error::Inadmissible(format!(
                "image node ({:.4}, {:.4}) lies outside the outer domain",
                p[0], p[1]
            )));
        }
    }
    let values = (0..grid.n_t)
        .map(|k| {
            let t = grid.collocation_time(k);
            (0..grid.m_inner)
                .map(|j| g.eval(t, image[j], u_trace.values[k][j]))
                .collect()
        })
        .collect();
    Ok(Density { boundary: BoundaryTag::Inner, values })
}

/// The nonlinear problem bundle shared across operations.
pub struct NonlinearProblem {
    pub outer: BoundaryCurve,
    pub shape: ShapeMap,
    pub grid: SpaceTimeGrid,
    pub neumann_f: Density,
    pub robin_g: RobinNonlinearity,
}

/// Converged (or failed) Newton state.
pub struct NonlinearState {
    pub shape: ShapeMap,
    pub mu: Density,
    pub eta: Density,
    /// Max-norm residual per Newton iterate, per panel (the first entry of
    /// each panel is the residual at the initial iterate).
    pub residual_history: Vec<Vec<f64>>,
    pub converged: bool,
    pub outer_trace: Density,
    pub inner_trace: Density,
    pub field: SolutionField,
}

impl NonlinearState {
    /// Largest number of Newton corrections over all panels.
    pub fn max_panel_iterations(&self) -> usize {
        self.residual_history.iter().map(|h| h.len().saturating_sub(1)).max().unwrap_or(0)
    }
}

/// Newton tolerances.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol_newton: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol_newton: 1e-10, max_iter: 25 }
    }
}

/// Full space-time residual of a density pair, evaluated independently of the
/// marching path (no solver internals reused).
pub fn residual_m(
    ops: &LayerOperatorSet,
    shape: &ShapeMap,
    g: &RobinNonlinearity,
    mu: &Density,
    eta: &Density,
    neumann_f: &Density,
) -> (Density, Density) {
    let grid = &ops.grid;
    let mu_v = density_to_vectors(mu);
    let eta_v = density_to_vectors(eta);
    let f_v = density_to_vectors(neumann_f);
    let image: Vec<Point> = grid.thetas(BoundaryTag::Inner).iter().map(|&th| shape.point(th)).collect();

    let mut r1 = Vec::with_capacity(grid.n_t);
    let mut r2 = Vec::with_capacity(grid.n_t);
    for k in 0..grid.n_t {
        let t = grid.collocation_time(k);
        let mut row1 = ops.wstar_outer.conv_at(&mu_v, k) + ops.dnormal_in_on_out.conv_at(&eta_v, k);
        row1.axpy(0.5, &mu_v[k], 1.0);
        row1 -= &f_v[k];

        let trace = ops.inner_trace_at(&mu_v, &eta_v, k);
        let mut row2 = ops.wstar_inner.conv_at(&eta_v, k) + ops.dnormal_out_on_in.conv_at(&mu_v, k);
        row2.axpy(-0.5, &eta_v[k], 1.0);
        for j in 0..ops.inner.m {
            row2[j] -= g.eval(t, image[j], trace[j]);
        }
        r1.push(row1);
        r2.push(row2);
    }
    (
        vectors_to_density(BoundaryTag::Outer, &r1),
        vectors_to_density(BoundaryTag::Inner, &r2),
    )
}

/// Max norm of both residual components.
pub fn residual_norm(r: &(Density, Density)) -> f64 {
    r.0.linf().max(r.1.linf())
}

/// Time-marching Newton solve of the nonlinear system. `initial` provides
/// the starting iterate per panel (densities in the zero-at-t=0 class);
/// panels default to the previous panel's solution, which is the warm start
/// the continuation structure suggests.
pub fn newton_solve(
    problem: &NonlinearProblem,
    initial: Option<(&Density, &Density)>,
    options: NewtonOptions,
) -> Result<NonlinearState> {
    let report = problem.shape.check_admissible_default(&problem.outer, problem.grid.m_inner);
    if !report.pass() {
        return Err(Error::Inadmissible(report.failure_reason()));
    }
    let ops = LayerOperatorSet::assemble(&problem.outer, &problem.shape, &problem.grid)?;
    newton_solve_with(&ops, problem, initial, options)
}

/// Newton solve reusing assembled operators.
pub fn newton_solve_with(
    ops: &LayerOperatorSet,
    problem: &NonlinearProblem,
    initial: Option<(&Density, &Density)>,
    options: NewtonOptions,
) -> Result<NonlinearState> {
    let grid = &ops.grid;
    let n_t = grid.n_t;
    let mo = ops.outer.m;
    let mi = ops.inner.m;
    let g = &problem.robin_g;
    let f = density_to_vectors(&problem.neumann_f);
    let image: Vec<Point> =
        grid.thetas(BoundaryTag::Inner).iter().map(|&th| problem.shape.point(th)).collect();
    let base = base_step_matrix(ops);

    let mut mu: Vec<DVector<f64>> = Vec::with_capacity(n_t);
    let mut eta: Vec<DVector<f64>> = Vec::with_capacity(n_t);
    let mut residual_history: Vec<Vec<f64>> = Vec::with_capacity(n_t);

    for k in 0..n_t {
        let t = grid.collocation_time(k);
        let h1 = ops.wstar_outer.history_at(&mu, k) + ops.dnormal_in_on_out.history_at(&eta, k);
        let h2 = ops.wstar_inner.history_at(&eta, k) + ops.dnormal_out_on_in.history_at(&mu, k);
        let trace_hist = ops.trace_out_on_in.history_at(&mu, k) + ops.v_inner.history_at(&eta, k);

        // Starting iterate for this panel.
        let (mut mu_k, mut eta_k) = match initial {
            Some((m0, e0)) => (
                DVector::from_row_slice(&m0.values[k]),
                DVector::from_row_slice(&e0.values[k]),
            ),
            None => {
                if k == 0 {
                    (DVector::zeros(mo), DVector::zeros(mi))
                } else {
                    (mu[k - 1].clone(), eta[k - 1].clone())
                }
            }
        };

        let mut history = Vec::new();
        let mut converged = false;
        for _iter in 0..=options.max_iter {
            // Residual of the current iterate on this panel.
            let mut r1 = &ops.wstar_outer.lags[0] * &mu_k + &ops.dnormal_in_on_out.lags[0] * &eta_k;
            r1.axpy(0.5, &mu_k, 1.0);
            r1 += &h1;
            r1 -= &f[k];

            let mut trace = &ops.trace_out_on_in.lags[0] * &mu_k + &ops.v_inner.lags[0] * &eta_k;
            trace += &trace_hist;
            let mut r2 = &ops.wstar_inner.lags[0] * &eta_k + &ops.dnormal_out_on_in.lags[0] * &mu_k;
            r2.axpy(-0.5, &eta_k, 1.0);
            r2 += &h2;
            for j in 0..mi {
                r2[j] -= g.eval(t, image[j], trace[j]);
            }

            let res = r1.amax().max(r2.amax());
            history.push(res);
            if res < options.tol_newton {
                converged = true;
                break;
            }
            if !res.is_finite() {
                return Err(Error::NewtonFailure {
                    panel: k,
                    reason: "non-finite residual".into(),
                });
            }

            // Newton correction with the exact Jacobian at the iterate.
            let beta = DVector::from_fn(mi, |j, _| g.dxi(t, image[j], trace[j]));
            let mut jac = base.clone();
            subtract_beta_rows(&mut jac, ops, &beta);
            let mut rhs = DVector::zeros(mo + mi);
            rhs.rows_mut(0, mo).copy_from(&(-&r1));
            rhs.rows_mut(mo, mi).copy_from(&(-&r2));
            let delta = factor_step(jac, k)?
                .solve(&rhs)
                .ok_or(Error::SingularStep { panel: k, cond: f64::NAN })?;
            mu_k += delta.rows(0, mo);
            eta_k += delta.rows(mo, mi);
        }
        if !converged {
            return Err(Error::NewtonFailure {
                panel: k,
                reason: format!(
                    "no convergence in {} iterations (last residual {:.3e})",
                    options.max_iter,
                    history.last().copied().unwrap_or(f64::NAN)
                ),
            });
        }
        residual_history.push(history);
        mu.push(mu_k);
        eta.push(eta_k);
    }

    let outer_trace: Vec<DVector<f64>> = (0..n_t).map(|k| ops.outer_trace_at(&mu, &eta, k)).collect();
    let inner_trace: Vec<DVector<f64>> = (0..n_t).map(|k| ops.inner_trace_at(&mu, &eta, k)).collect();
    let field = SolutionField::new(ops, mu.clone(), eta.clone());
    Ok(NonlinearState {
        shape: problem.shape.clone(),
        mu: vectors_to_density(BoundaryTag::Outer, &mu),
        eta: vectors_to_density(BoundaryTag::Inner, &eta),
        residual_history,
        converged: true,
        outer_trace: vectors_to_density(BoundaryTag::Outer, &outer_trace),
        inner_trace: vectors_to_density(BoundaryTag::Inner, &inner_trace),
        field,
    })
}

/// Evaluation points for the solution family: fixed space-time probes that
/// must stay clear of every hole along a shape path.
pub type ProbeSet = Vec<(f64, Point)>;

/// Solve along a path of shapes, warm-starting each solve from the previous
/// shape's densities, and sample the interior field at the probe points.
pub fn family_u_phi(
    outer: &BoundaryCurve,
    shapes: &[ShapeMap],
    grid: &SpaceTimeGrid,
    neumann_f: &Density,
    robin_g: &RobinNonlinearity,
    probes: &ProbeSet,
    options: NewtonOptions,
) -> Result<Vec<Vec<f64>>> {
    let mut per_shape = Vec::with_capacity(shapes.len());
    let mut warm: Option<(Density, Density)> = None;
    for (index, shape) in shapes.iter().enumerate() {
        let report = shape.check_admissible_default(outer, grid.m_inner);
        if !report.pass() {
            return Err(Error::ShapePath { index, reason: report.failure_reason() });
        }
        let problem = NonlinearProblem {
            outer: outer.clone(),
            shape: shape.clone(),
            grid: grid.clone(),
            neumann_f: neumann_f.clone(),
            robin_g: robin_g.clone(),
        };
        let state = match &warm {
            Some((m0, e0)) => newton_solve(&problem, Some((m0, e0)), options),
            None => newton_solve(&problem, None, options),
        }
        .map_err(|e| Error::ShapePath { index, reason: e.to_string() })?;

        let mut values = Vec::with_capacity(probes.len());
        for &(t, p) in probes {
            let v = state
                .field
                .eval(t, p)
                .map_err(|e| Error::ShapePath { index, reason: e.to_string() })?;
            values.push(v);
        }
        warm = Some((state.mu.clone(), state.eta.clone()));
        per_shape.push(values);
    }
    Ok(per_shape)
}

/// Central-difference shape derivatives of the interior values along a
/// perturbation direction, with a Richardson consistency report.
pub struct ShapeDerivativeReport {
    pub eps: Vec<f64>,
    /// `estimates[e][p]`: derivative estimate at probe `p` for `eps[e]`.
    pub estimates: Vec<Vec<f64>>,
    /// `||D_e - D_{e+1}|| / ||D_{e+1} - D_{e+2}||` for consecutive triples;
    /// close to 4 when the map is C^3 in the shape parameter and the eps
    /// sequence halves.
    pub richardson_ratios: Vec<f64>,
}

pub fn shape_derivative_fd(
    outer: &BoundaryCurve,
    base_shape: &ShapeMap,
    direction: &FourierDisplacement,
    eps_list: &[f64],
    grid: &SpaceTimeGrid,
    neumann_f: &Density,
    robin_g: &RobinNonlinearity,
    probes: &ProbeSet,
    options: NewtonOptions,
) -> Result<ShapeDerivativeReport> {
    if direction.is_zero() {
        let estimates = vec![vec![0.0; probes.len()]; eps_list.len()];
        return Ok(ShapeDerivativeReport {
            eps: eps_list.to_vec(),
            estimates,
            richardson_ratios: vec![],
        });
    }
    let mut estimates = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let plus = base_shape.perturbed(direction, eps);
        let minus = base_shape.perturbed(direction, -eps);
        let values =
            family_u_phi(outer, &[plus, minus], grid, neumann_f, robin_g, probes, options)?;
        let d: Vec<f64> = values[0]
            .iter()
            .zip(&values[1])
            .map(|(a, b)| (a - b) / (2.0 * eps))
            .collect();
        estimates.push(d);
    }
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut ratios = Vec::new();
    for w in estimates.windows(3) {
        let d01: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
        let d12: Vec<f64> = w[1].iter().zip(&w[2]).map(|(a, b)| a - b).collect();
        ratios.push(norm(&d01) / norm(&d12).max(1e-300));
    }
    Ok(ShapeDerivativeReport { eps: eps_list.to_vec(), estimates, richardson_ratios: ratios })
}

/// Result of comparing a candidate discrete solution against the reference
/// solution at the same shape.
pub struct UniquenessReport {
    pub candidate_residual: f64,
    pub outer_trace_distance: f64,
    pub inner_trace_distance: f64,
    pub density_distance: f64,
    pub agrees: bool,
}

/// Check whether a candidate density pair solving the discrete system agrees
/// with the reference solution: boundary-trace and density distances below
/// `tol_unique`.
pub fn local_uniqueness_check(
    ops: &LayerOperatorSet,
    problem: &NonlinearProblem,
    reference: &NonlinearState,
    candidate_mu: &Density,
    candidate_eta: &Density,
    tol_newton: f64,
    tol_unique: f64,
) -> UniquenessReport {
    let res = residual_m(ops, &problem.shape, &problem.robin_g, candidate_mu, candidate_eta, &problem.neumann_f);
    let candidate_residual = residual_norm(&res);

    let mu_v = density_to_vectors(candidate_mu);
    let eta_v = density_to_vectors(candidate_eta);
    let mut outer_d: f64 = 0.0;
    let mut inner_d: f64 = 0.0;
    for k in 0..ops.grid.n_t {
        let to = ops.outer_trace_at(&mu_v, &eta_v, k);
        let ti = ops.inner_trace_at(&mu_v, &eta_v, k);
        for j in 0..ops.outer.m {
            outer_d = outer_d.max((to[j] - reference.outer_trace.values[k][j]).abs());
        }
        for j in 0..ops.inner.m {
            inner_d = inner_d.max((ti[j] - reference.inner_trace.values[k][j]).abs());
        }
    }
    let density_distance = candidate_mu
        .sub(&reference.mu)
        .linf()
        .max(candidate_eta.sub(&reference.eta).linf());
    UniquenessReport {
        candidate_residual,
        outer_trace_distance: outer_d,
        inner_trace_distance: inner_d,
        density_distance,
        agrees: candidate_residual < tol_newton
            && outer_d < tol_unique
            && inner_d < tol_unique,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_solver::{march_solve, LinearMixedProblem};
    use approx::assert_relative_eq;

    fn annulus() -> (BoundaryCurve, ShapeMap) {
        (
            BoundaryCurve::circle([0.0, 0.0], 2.0),
            ShapeMap::identity(BoundaryCurve::circle([0.0, 0.0], 0.8)),
        )
    }

    fn benchmark_f(grid: &SpaceTimeGrid) -> Density {
        Density::from_fn(BoundaryTag::Outer, grid, |t, theta| t * (1.0 + 0.5 * theta.cos()))
    }

    #[test]
    fn robin_nonlinearity_basics() {
        // G(t, x, xi) = t xi^2 at u = 2: 4 t.
        let g = RobinNonlinearity::new(vec![RobinTerm {
            power: 2,
            time: TimeCoeff::Ramp(1.0),
            space: SpaceCoeff::Constant(1.0),
        }])
        .unwrap();
        assert_relative_eq!(g.eval(0.3, [0.0, 0.0], 2.0), 1.2, epsilon = 1e-15);
        assert_relative_eq!(g.dxi(0.3, [0.0, 0.0], 2.0), 1.2, epsilon = 1e-15);

        // Condition G(0, x, 0) = 0 rejects a constant source term.
        assert!(RobinNonlinearity::new(vec![RobinTerm {
            power: 0,
            time: TimeCoeff::Constant(1.0),
            space: SpaceCoeff::Constant(1.0),
        }])
        .is_err());
        // A ramp source term is fine.
        assert!(RobinNonlinearity::new(vec![RobinTerm {
            power: 0,
            time: TimeCoeff::Ramp(1.0),
            space: SpaceCoeff::Constant(1.0),
        }])
        .is_ok());
    }

    #[test]
    fn eval_n_g_matches_pointwise_loop() {
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 4, 12, 12).unwrap();
        // Tabulated coefficients via a polynomial in t and a spatial bump.
        let g = RobinNonlinearity::new(vec![RobinTerm {
            power: 1,
            time: TimeCoeff::Poly(vec![0.2, 1.3, -0.4]),
            space: SpaceCoeff::GaussBump {
                center: [0.3, -0.2],
                width: 1.1,
                amplitude: 0.8,
                offset: 0.5,
            },
        }])
        .unwrap();
        let trace = Density::from_fn(BoundaryTag::Inner, &grid, |t, theta| t + theta.sin());
        let out = eval_n_g(&g, &shape, &outer, &grid, &trace).unwrap();
        for k in 0..grid.n_t {
            let t = grid.collocation_time(k);
            for (j, &theta) in grid.thetas(BoundaryTag::Inner).iter().enumerate() {
                let x = shape.point(theta);
                let a = 0.2 + 1.3 * t - 0.4 * t * t;
                let dxc = x[0] - 0.3;
                let dyc = x[1] + 0.2;
                let b = 0.5 + 0.8 * (-(dxc * dxc + dyc * dyc) / (1.1 * 1.1)).exp();
                let expected = a * b * trace.values[k][j];
                assert!((out.values[k][j] - expected).abs() < 1e-15);
            }
        }

        // G(t, x, xi) = t xi^2 at the constant trace u = 2: output 4 t_k.
        let tsq = RobinNonlinearity::new(vec![RobinTerm {
            power: 2,
            time: TimeCoeff::Ramp(1.0),
            space: SpaceCoeff::Constant(1.0),
        }])
        .unwrap();
        let two = Density::from_fn(BoundaryTag::Inner, &grid, |_, _| 2.0);
        let out = eval_n_g(&tsq, &shape, &outer, &grid, &two).unwrap();
        for k in 0..grid.n_t {
            let t = grid.collocation_time(k);
            for j in 0..grid.m_inner {
                assert!((out.values[k][j] - 4.0 * t).abs() < 1e-15);
            }
        }

        // G = 0 gives zero output.
        let zero = RobinNonlinearity::zero();
        let out = eval_n_g(&zero, &shape, &outer, &grid, &trace).unwrap();
        assert_eq!(out.linf(), 0.0);

        // Image outside the domain errors.
        let big = ShapeMap::new(
            BoundaryCurve::circle([0.0, 0.0], 0.8),
            crate::geometry::FourierDisplacement::circle_scaling(0.8, 4.0),
        );
        assert!(eval_n_g(&zero, &big, &outer, &grid, &trace).is_err());
    }

    #[test]
    fn residual_of_zero_densities_is_minus_data() {
        // With vanishing densities all potentials vanish, so r1 = -f and
        // r2 = -G(t, x, 0) = 0 for state-homogeneous nonlinearities.
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 4, 12, 12).unwrap();
        let f = benchmark_f(&grid);
        let ops = LayerOperatorSet::assemble(&outer, &shape, &grid).unwrap();
        let zero_mu = Density::zeros(BoundaryTag::Outer, &grid);
        let zero_eta = Density::zeros(BoundaryTag::Inner, &grid);
        let g = RobinNonlinearity::quadratic_benchmark();
        let (r1, r2) = residual_m(&ops, &shape, &g, &zero_mu, &zero_eta, &f);
        for k in 0..grid.n_t {
            for j in 0..12 {
                assert_eq!(r1.values[k][j], -f.values[k][j]);
                assert_eq!(r2.values[k][j], 0.0);
            }
        }
    }

    #[test]
    fn zero_data_converges_immediately_to_zero() {
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 6, 12, 12).unwrap();
        let problem = NonlinearProblem {
            outer,
            shape,
            grid: grid.clone(),
            neumann_f: Density::zeros(BoundaryTag::Outer, &grid),
            robin_g: RobinNonlinearity::quadratic_benchmark(),
        };
        let state = newton_solve(&problem, None, NewtonOptions::default()).unwrap();
        assert!(state.converged);
        assert_eq!(state.max_panel_iterations(), 0);
        for k in 0..grid.n_t {
            for j in 0..12 {
                assert_eq!(state.mu.values[k][j].to_bits(), 0.0f64.to_bits());
                assert_eq!(state.eta.values[k][j].to_bits(), 0.0f64.to_bits());
            }
        }
    }

    #[test]
    fn linear_g_converges_in_one_newton_step_per_panel() {
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 6, 16, 16).unwrap();
        let problem = NonlinearProblem {
            outer,
            shape,
            grid: grid.clone(),
            neumann_f: benchmark_f(&grid),
            robin_g: RobinNonlinearity::linear_gamma(1.0),
        };
        let state = newton_solve(&problem, None, NewtonOptions::default()).unwrap();
        for (k, hist) in state.residual_history.iter().enumerate() {
            // One correction, then residual below 1e-10.
            assert!(
                hist.len() <= 2,
                "panel {k} took {} Newton corrections",
                hist.len() - 1
            );
            assert!(hist.last().unwrap() < &1e-10);
        }
    }

    #[test]
    fn linear_embedding_matches_linear_solver() {
        // G(t, x, xi) = -gamma xi reproduces the linear Robin problem.
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 8, 16, 16).unwrap();
        let gamma = 0.9;
        let f = benchmark_f(&grid);
        let nonlinear = NonlinearProblem {
            outer: outer.clone(),
            shape: shape.clone(),
            grid: grid.clone(),
            neumann_f: f.clone(),
            robin_g: RobinNonlinearity::linear_gamma(gamma),
        };
        let state = newton_solve(&nonlinear, None, NewtonOptions::default()).unwrap();

        let linear = LinearMixedProblem::with_gamma(
            outer,
            shape,
            grid.clone(),
            |_, _| gamma,
            f,
            Density::zeros(BoundaryTag::Inner, &grid),
        )
        .unwrap();
        let sol = march_solve(&linear).unwrap();
        let dmu = state.mu.sub(&sol.mu).linf();
        let deta = state.eta.sub(&sol.eta).linf();
        let scale = sol.mu.linf().max(sol.eta.linf());
        assert!(dmu / scale < 1e-10, "mu mismatch {dmu}");
        assert!(deta / scale < 1e-10, "eta mismatch {deta}");
    }

    #[test]
    fn converged_state_passes_independent_residual_check() {
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 8, 16, 16).unwrap();
        let problem = NonlinearProblem {
            outer: outer.clone(),
            shape: shape.clone(),
            grid: grid.clone(),
            neumann_f: benchmark_f(&grid),
            robin_g: RobinNonlinearity::quadratic_benchmark(),
        };
        let options = NewtonOptions::default();
        let state = newton_solve(&problem, None, options).unwrap();
        assert!(state.max_panel_iterations() <= 8);
        let ops = LayerOperatorSet::assemble(&problem.outer, &problem.shape, &grid).unwrap();
        let res = residual_m(&ops, &shape, &problem.robin_g, &state.mu, &state.eta, &problem.neumann_f);
        assert!(residual_norm(&res) < options.tol_newton * 10.0);
    }

    #[test]
    fn jacobian_matches_directional_finite_differences() {
        // Central FD of the residual in a density direction against the
        // assembled linearized operator with beta = dG/dxi at the state.
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 4, 12, 12).unwrap();
        let g = RobinNonlinearity::quadratic_benchmark();
        let f = benchmark_f(&grid);
        let ops = LayerOperatorSet::assemble(&outer, &shape, &grid).unwrap();

        let mu = Density::from_fn(BoundaryTag::Outer, &grid, |t, th| 0.3 * t + 0.2 * th.sin());
        let eta = Density::from_fn(BoundaryTag::Inner, &grid, |t, th| t * th.cos() - 0.1);
        let dmu = Density::from_fn(BoundaryTag::Outer, &grid, |t, th| (t + th).cos());
        let deta = Density::from_fn(BoundaryTag::Inner, &grid, |t, th| (2.0 * th - t).sin());

        let h = 1e-6;
        let plus = residual_m(&ops, &shape, &g, &mu.add(&dmu.scaled(h)), &eta.add(&deta.scaled(h)), &f);
        let minus = residual_m(&ops, &shape, &g, &mu.add(&dmu.scaled(-h)), &eta.add(&deta.scaled(-h)), &f);
        let fd1 = plus.0.sub(&minus.0).scaled(1.0 / (2.0 * h));
        let fd2 = plus.1.sub(&minus.1).scaled(1.0 / (2.0 * h));

        // beta from the symbolic derivative at the base state.
        let mu_v = density_to_vectors(&mu);
        let eta_v = density_to_vectors(&eta);
        let image: Vec<Point> =
            grid.thetas(BoundaryTag::Inner).iter().map(|&th| shape.point(th)).collect();
        let beta: Vec<DVector<f64>> = (0..grid.n_t)
            .map(|k| {
                let t = grid.collocation_time(k);
                let trace = ops.inner_trace_at(&mu_v, &eta_v, k);
                DVector::from_fn(12, |j, _| g.dxi(t, image[j], trace[j]))
            })
            .collect();
        let jbeta = crate::linear_solver::JBetaOperator::new(ops.clone(), beta);
        let (j1, j2) = jbeta.apply(&density_to_vectors(&dmu), &density_to_vectors(&deta));

        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..grid.n_t {
            for j in 0..12 {
                worst = worst.max((fd1.values[k][j] - j1[k][j]).abs());
                worst = worst.max((fd2.values[k][j] - j2[k][j]).abs());
                scale = scale.max(j1[k][j].abs()).max(j2[k][j].abs());
            }
        }
        assert!(worst / scale < 1e-5, "Jacobian vs FD relative error {}", worst / scale);
    }

    #[test]
    fn family_constant_path_is_bitwise_deterministic() {
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 8, 48, 48).unwrap();
        let f = benchmark_f(&grid);
        let g = RobinNonlinearity::quadratic_benchmark();
        let probes: ProbeSet = vec![(0.4, [1.4, 0.0]), (0.25, [0.0, -1.35])];
        let shapes = vec![shape.clone(), shape.clone(), shape];
        let values =
            family_u_phi(&outer, &shapes, &grid, &f, &g, &probes, NewtonOptions::default())
                .unwrap();
        for s in 1..3 {
            for p in 0..probes.len() {
                assert_eq!(values[0][p].to_bits(), values[s][p].to_bits());
            }
        }
        // First entry equals a direct solve.
        let problem = NonlinearProblem {
            outer: outer.clone(),
            shape: shapes_first(&outer),
            grid: grid.clone(),
            neumann_f: f,
            robin_g: g,
        };
        let state = newton_solve(&problem, None, NewtonOptions::default()).unwrap();
        for (p, &(t, x)) in probes.iter().enumerate() {
            assert_eq!(values[0][p].to_bits(), state.field.eval(t, x).unwrap().to_bits());
        }
    }

    fn shapes_first(_outer: &BoundaryCurve) -> ShapeMap {
        ShapeMap::identity(BoundaryCurve::circle([0.0, 0.0], 0.8))
    }

    #[test]
    fn family_scaling_path_varies_continuously() {
        let (outer, _) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 8, 48, 48).unwrap();
        let f = benchmark_f(&grid);
        let g = RobinNonlinearity::quadratic_benchmark();
        let probes: ProbeSet = vec![(0.5, [1.4, 0.0])];
        let reference = BoundaryCurve::circle([0.0, 0.0], 0.8);
        let path = |step: f64| -> Vec<ShapeMap> {
            let n = (0.05 / step).round() as usize;
            (0..=n)
                .map(|i| {
                    ShapeMap::new(
                        reference.clone(),
                        crate::geometry::FourierDisplacement::circle_scaling(
                            0.8,
                            1.0 + i as f64 * step,
                        ),
                    )
                })
                .collect()
        };
        let coarse =
            family_u_phi(&outer, &path(0.01), &grid, &f, &g, &probes, NewtonOptions::default())
                .unwrap();
        let fine =
            family_u_phi(&outer, &path(0.005), &grid, &f, &g, &probes, NewtonOptions::default())
                .unwrap();
        let max_jump = |vals: &[Vec<f64>]| {
            vals.windows(2)
                .map(|w| (w[0][0] - w[1][0]).abs())
                .fold(0.0f64, f64::max)
        };
        let jc = max_jump(&coarse);
        let jf = max_jump(&fine);
        assert!(jf < 0.75 * jc, "halving the path step did not shrink jumps: {jc} -> {jf}");
    }

    #[test]
    fn shape_derivative_zero_direction_is_zero() {
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 4, 12, 12).unwrap();
        let report = shape_derivative_fd(
            &outer,
            &shape,
            &FourierDisplacement::zero(),
            &[1e-2, 5e-3],
            &grid,
            &benchmark_f(&grid),
            &RobinNonlinearity::quadratic_benchmark(),
            &vec![(0.4, [1.4, 0.0])],
            NewtonOptions::default(),
        )
        .unwrap();
        for est in &report.estimates {
            assert!(est.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn pipeline_is_translation_equivariant() {
        // Rigidly translating both curves, the probe points, and the spatial
        // dependence of the nonlinearity leaves interior values unchanged.
        let shift = [0.45, -1.13];
        let grid = SpaceTimeGrid::new(0.5, 6, 48, 48).unwrap();
        let g_base = RobinNonlinearity::new(vec![RobinTerm {
            power: 1,
            time: TimeCoeff::Ramp(1.0),
            space: SpaceCoeff::GaussBump {
                center: [0.9, 0.0],
                width: 1.3,
                amplitude: 0.4,
                offset: 0.6,
            },
        }])
        .unwrap();
        let f = benchmark_f(&grid);
        let solve_at = |origin: [f64; 2], g: &RobinNonlinearity| {
            let problem = NonlinearProblem {
                outer: BoundaryCurve::circle(origin, 2.0),
                shape: ShapeMap::identity(BoundaryCurve::circle(origin, 0.8)),
                grid: grid.clone(),
                neumann_f: f.clone(),
                robin_g: g.clone(),
            };
            newton_solve(&problem, None, NewtonOptions::default()).unwrap()
        };
        let base = solve_at([0.0, 0.0], &g_base);
        let moved = solve_at(shift, &g_base.translated(shift));
        for i in 0..6 {
            let ang = i as f64 * std::f64::consts::PI / 3.0;
            let p = [1.4 * ang.cos(), 1.4 * ang.sin()];
            let a = base.field.eval(0.5, p).unwrap();
            let b = moved.field.eval(0.5, [p[0] + shift[0], p[1] + shift[1]]).unwrap();
            assert!(
                (a - b).abs() < 1e-10,
                "translation equivariance violated at angle {ang}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn radial_symmetry_of_scaling_derivatives() {
        // Radially symmetric data and a radial scaling direction give
        // derivative estimates that inherit the discrete rotational symmetry
        // of the pipeline exactly (probes at node-aligned angles).
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 6, 48, 48).unwrap();
        let f = Density::from_fn(BoundaryTag::Outer, &grid, |t, _| t);
        let g = RobinNonlinearity::quadratic_benchmark();
        let direction = FourierDisplacement::circle_radial_direction(0.8);
        let probes: ProbeSet = (0..8)
            .map(|i| {
                let ang = i as f64 / 8.0 * 2.0 * std::f64::consts::PI;
                (0.5, [1.4 * ang.cos(), 1.4 * ang.sin()])
            })
            .collect();
        let report = shape_derivative_fd(
            &outer,
            &shape,
            &direction,
            &[1e-2],
            &grid,
            &f,
            &g,
            &probes,
            NewtonOptions::default(),
        )
        .unwrap();
        let est = &report.estimates[0];
        for v in est.iter().skip(1) {
            assert!(
                (v - est[0]).abs() < 1e-9 * est[0].abs().max(1e-9),
                "asymmetric derivative estimates: {est:?}"
            );
        }
    }

    #[test]
    fn uniqueness_check_on_reference_is_zero_distance() {
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 6, 12, 12).unwrap();
        let problem = NonlinearProblem {
            outer: outer.clone(),
            shape: shape.clone(),
            grid: grid.clone(),
            neumann_f: benchmark_f(&grid),
            robin_g: RobinNonlinearity::quadratic_benchmark(),
        };
        let ops = LayerOperatorSet::assemble(&outer, &shape, &grid).unwrap();
        let state = newton_solve(&problem, None, NewtonOptions::default()).unwrap();
        let report = local_uniqueness_check(
            &ops,
            &problem,
            &state,
            &state.mu,
            &state.eta,
            1e-8,
            1e-8,
        );
        assert!(report.agrees);
        assert_eq!(report.outer_trace_distance, 0.0);
        assert_eq!(report.inner_trace_distance, 0.0);
        assert_eq!(report.density_distance, 0.0);
    }
}
