//! The linearized coupled boundary operator and the causal time-marching
//! solver for linear mixed Neumann/Robin problems on the annulus.
//!
//! The operator acts on density pairs `(mu, eta)`; its rows are
//!
//! ```text
//! row 1 (outer nodes):  (1/2 I + W*_outer) mu + nu_outer . grad v_inner[eta]
//! row 2 (inner nodes):  (-1/2 I + W*_inner) eta + nu_inner . grad v_outer[mu]
//!                        - beta (trace of v_outer[mu] + V_inner[eta])
//! ```
//!
//! A pair solving `row1 = f`, `row2 = g` represents the solution of the mixed
//! problem with Neumann datum `f` and Robin datum `du/dnu - beta u = g`; the
//! Robin convention `du/dnu + gamma u = g` corresponds to `beta = -gamma`.
//! With densities piecewise constant in time the space-time system is
//! block-lower-triangular and is solved panel by panel: at each step the
//! zero-lag two-by-two block system is solved with the history convolution on
//! the right-hand side.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, ShapeMap};
use crate::grid::{BoundaryTag, Density, SpaceTimeGrid};
use crate::potentials::{density_to_vectors, vectors_to_density, LayerOperatorSet, SolutionField};

/// A linear mixed problem: geometry, grid, Robin coefficient and data.
///
/// `beta` follows the `du/dnu - beta u = g` convention; use
/// [`LinearMixedProblem::with_gamma`] for the `du/dnu + gamma u = g` form.
/// `g = 0` reproduces the homogeneous Robin problems; the inhomogeneous `g`
/// exists for manufactured-solution testing.
#[derive(Debug, Clone)]
pub struct LinearMixedProblem {
    pub outer: BoundaryCurve,
    pub shape: ShapeMap,
    pub grid: SpaceTimeGrid,
    pub beta: Density,
    pub neumann_f: Density,
    pub inner_g: Density,
}

impl LinearMixedProblem {
    pub fn new(
        outer: BoundaryCurve,
        shape: ShapeMap,
        grid: SpaceTimeGrid,
        beta: Density,
        neumann_f: Density,
        inner_g: Density,
    ) -> Result<Self> {
        if !beta.is_finite() || !neumann_f.is_finite() || !inner_g.is_finite() {
            return Err(Error::NonFinite("linear problem data"));
        }
        Ok(Self { outer, shape, grid, beta, neumann_f, inner_g })
    }

    /// Problem with Robin condition `du/dnu + gamma u = g` on the inner
    /// boundary. `gamma` is sampled on the reference parametrization, which
    /// is how the Robin coefficient of the shape-dependent problem composes
    /// with the shape map.
    pub fn with_gamma(
        outer: BoundaryCurve,
        shape: ShapeMap,
        grid: SpaceTimeGrid,
        gamma: impl Fn(f64, f64) -> f64,
        neumann_f: Density,
        inner_g: Density,
    ) -> Result<Self> {
        let beta = Density::from_fn(BoundaryTag::Inner, &grid, |t, theta| -gamma(t, theta));
        Self::new(outer, shape, grid, beta, neumann_f, inner_g)
    }
}

/// The assembled causal operator together with the Robin coefficient.
pub struct JBetaOperator {
    pub ops: LayerOperatorSet,
    pub beta: Vec<DVector<f64>>,
    beta_time_constant: bool,
}

/// Assemble the linearized operator for `problem`.
pub fn assemble_jbeta(problem: &LinearMixedProblem) -> Result<JBetaOperator> {
    let report = problem.shape.check_admissible_default(&problem.outer, problem.grid.m_inner);
    if !report.pass() {
        return Err(Error::Inadmissible(report.failure_reason()));
    }
    let ops = LayerOperatorSet::assemble(&problem.outer, &problem.shape, &problem.grid)?;
    Ok(JBetaOperator::new(ops, density_to_vectors(&problem.beta)))
}

impl JBetaOperator {
    pub fn new(ops: LayerOperatorSet, beta: Vec<DVector<f64>>) -> Self {
        let beta_time_constant = beta.windows(2).all(|w| w[0] == w[1]);
        Self { ops, beta, beta_time_constant }
    }

    pub fn m_outer(&self) -> usize {
        self.ops.outer.m
    }

    pub fn m_inner(&self) -> usize {
        self.ops.inner.m
    }

    /// Apply the full space-time operator to a density pair.
    pub fn apply(
        &self,
        mu: &[DVector<f64>],
        eta: &[DVector<f64>],
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let n_t = self.ops.grid.n_t;
        let mut r1 = Vec::with_capacity(n_t);
        let mut r2 = Vec::with_capacity(n_t);
        for k in 0..n_t {
            let mut row1 = self.ops.wstar_outer.conv_at(mu, k)
                + self.ops.dnormal_in_on_out.conv_at(eta, k);
            row1.axpy(0.5, &mu[k], 1.0);

            let trace = self.ops.inner_trace_at(mu, eta, k);
            let mut row2 = self.ops.wstar_inner.conv_at(eta, k)
                + self.ops.dnormal_out_on_in.conv_at(mu, k);
            row2.axpy(-0.5, &eta[k], 1.0);
            row2 -= self.beta[k].component_mul(&trace);

            r1.push(row1);
            r2.push(row2);
        }
        (r1, r2)
    }

    /// Zero-lag step matrix at panel `k` (Robin row depends on `beta_k`).
    pub fn step_matrix(&self, k: usize) -> DMatrix<f64> {
        let mut a = base_step_matrix(&self.ops);
        subtract_beta_rows(&mut a, &self.ops, &self.beta[k]);
        a
    }
}

/// Zero-lag two-by-two block matrix without the Robin coupling:
/// `[[1/2 I + W*_outer^0, Cn_in_on_out^0], [Cn_out_on_in^0, -1/2 I + W*_inner^0]]`.
pub fn base_step_matrix(ops: &LayerOperatorSet) -> DMatrix<f64> {
    let mo = ops.outer.m;
    let mi = ops.inner.m;
    let mut a = DMatrix::zeros(mo + mi, mo + mi);
    for i in 0..mo {
        for j in 0..mo {
            a[(i, j)] = ops.wstar_outer.lags[0][(i, j)] + if i == j { 0.5 } else { 0.0 };
        }
        for j in 0..mi {
            a[(i, mo + j)] = ops.dnormal_in_on_out.lags[0][(i, j)];
        }
    }
    for i in 0..mi {
        for j in 0..mo {
            a[(mo + i, j)] = ops.dnormal_out_on_in.lags[0][(i, j)];
        }
        for j in 0..mi {
            a[(mo + i, mo + j)] =
                ops.wstar_inner.lags[0][(i, j)] - if i == j { 0.5 } else { 0.0 };
        }
    }
    a
}

/// Subtract the Robin coupling `diag(beta) [Ct^0 | V_inner^0]` from the inner
/// row block of a base step matrix.
pub fn subtract_beta_rows(a: &mut DMatrix<f64>, ops: &LayerOperatorSet, beta: &DVector<f64>) {
    let mo = ops.outer.m;
    let mi = ops.inner.m;
    for i in 0..mi {
        let b = beta[i];
        if b == 0.0 {
            continue;
        }
        for j in 0..mo {
            a[(mo + i, j)] -= b * ops.trace_out_on_in.lags[0][(i, j)];
        }
        for j in 0..mi {
            a[(mo + i, mo + j)] -= b * ops.v_inner.lags[0][(i, j)];
        }
    }
}

/// Factor a step matrix, rejecting (near-)singular systems with a cheap
/// conditioning diagnostic from the LU diagonal.
pub(crate) fn factor_step(
    a: DMatrix<f64>,
    panel: usize,
) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let lu = a.lu();
    let u = lu.u();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    if !(dmin > 1e-14 * dmax.max(1e-300)) {
        return Err(Error::SingularStep { panel, cond: dmax / dmin.max(1e-300) });
    }
    Ok(lu)
}

/// Solution of a linear mixed problem: densities, Dirichlet traces, and the
/// interior field evaluator.
pub struct LinearSolution {
    pub mu: Density,
    pub eta: Density,
    pub outer_trace: Density,
    pub inner_trace: Density,
    pub field: SolutionField,
}

/// Solve the problem panel by panel.
pub fn march_solve(problem: &LinearMixedProblem) -> Result<LinearSolution> {
    let jbeta = assemble_jbeta(problem)?;
    march_solve_with(&jbeta, &problem.neumann_f, &problem.inner_g)
}

/// Marching solve reusing an already assembled operator.
pub fn march_solve_with(
    jbeta: &JBetaOperator,
    neumann_f: &Density,
    inner_g: &Density,
) -> Result<LinearSolution> {
    let ops = &jbeta.ops;
    let grid = &ops.grid;
    let n_t = grid.n_t;
    let mo = jbeta.m_outer();
    let mi = jbeta.m_inner();
    let f = density_to_vectors(neumann_f);
    let g = density_to_vectors(inner_g);

    let shared_lu = if jbeta.beta_time_constant {
        Some(factor_step(jbeta.step_matrix(0), 0)?)
    } else {
        None
    };

    let mut mu: Vec<DVector<f64>> = Vec::with_capacity(n_t);
    let mut eta: Vec<DVector<f64>> = Vec::with_capacity(n_t);
    for k in 0..n_t {
        let h1 =
            ops.wstar_outer.history_at(&mu, k) + ops.dnormal_in_on_out.history_at(&eta, k);
        let h2 =
            ops.wstar_inner.history_at(&eta, k) + ops.dnormal_out_on_in.history_at(&mu, k);
        let trace_hist =
            ops.trace_out_on_in.history_at(&mu, k) + ops.v_inner.history_at(&eta, k);

        let mut rhs = DVector::zeros(mo + mi);
        let rhs1 = &f[k] - h1;
        let rhs2 = &g[k] - h2 + jbeta.beta[k].component_mul(&trace_hist);
        rhs.rows_mut(0, mo).copy_from(&rhs1);
        rhs.rows_mut(mo, mi).copy_from(&rhs2);

        // Zero right-hand side has the exactly-zero solution; skipping the
        // solve keeps zero-data and causality statements bitwise exact.
        let z = if rhs.iter().all(|v| *v == 0.0) {
            DVector::zeros(mo + mi)
        } else {
            match &shared_lu {
                Some(lu) => lu.solve(&rhs),
                None => factor_step(jbeta.step_matrix(k), k)?.solve(&rhs),
            }
            .ok_or(Error::SingularStep { panel: k, cond: f64::NAN })?
        };
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("marching step solution"));
        }

        mu.push(z.rows(0, mo).into_owned());
        eta.push(z.rows(mo, mi).into_owned());
    }

    let outer_trace: Vec<DVector<f64>> =
        (0..n_t).map(|k| ops.outer_trace_at(&mu, &eta, k)).collect();
    let inner_trace: Vec<DVector<f64>> =
        (0..n_t).map(|k| ops.inner_trace_at(&mu, &eta, k)).collect();

    let field = SolutionField::new(ops, mu.clone(), eta.clone());
    Ok(LinearSolution {
        mu: vectors_to_density(BoundaryTag::Outer, &mu),
        eta: vectors_to_density(BoundaryTag::Inner, &eta),
        outer_trace: vectors_to_density(BoundaryTag::Outer, &outer_trace),
        inner_trace: vectors_to_density(BoundaryTag::Inner, &inner_trace),
        field,
    })
}

/// Residual of a density pair under the full space-time operator:
/// `(J[mu,eta]_1 - f, J[mu,eta]_2 - g)`, max norm.
pub fn global_residual(
    jbeta: &JBetaOperator,
    mu: &Density,
    eta: &Density,
    neumann_f: &Density,
    inner_g: &Density,
) -> f64 {
    let (r1, r2) = jbeta.apply(&density_to_vectors(mu), &density_to_vectors(eta));
    let f = density_to_vectors(neumann_f);
    let g = density_to_vectors(inner_g);
    let mut worst: f64 = 0.0;
    for k in 0..jbeta.ops.grid.n_t {
        worst = worst.max((&r1[k] - &f[k]).amax());
        worst = worst.max((&r2[k] - &g[k]).amax());
    }
    worst
}

/// Assemble and solve the full dense space-time system in one shot. This is
/// the test oracle for the marching path on small grids; it never marches.
pub fn global_solve(problem: &LinearMixedProblem) -> Result<(Density, Density)> {
    let jbeta = assemble_jbeta(problem)?;
    let ops = &jbeta.ops;
    let n_t = ops.grid.n_t;
    let mo = jbeta.m_outer();
    let mi = jbeta.m_inner();
    let n_block = mo + mi;
    let n = n_block * n_t;

    let mut a = DMatrix::zeros(n, n);
    for k in 0..n_t {
        for l in 0..=k {
            let kp = k - l;
            // Row block 1.
            for i in 0..mo {
                for j in 0..mo {
                    let mut v = jbeta.ops.wstar_outer.lags[l][(i, j)];
                    if l == 0 && i == j {
                        v += 0.5;
                    }
                    a[(k * n_block + i, kp * n_block + j)] = v;
                }
                for j in 0..mi {
                    a[(k * n_block + i, kp * n_block + mo + j)] =
                        jbeta.ops.dnormal_in_on_out.lags[l][(i, j)];
                }
            }
            // Row block 2.
            for i in 0..mi {
                let b = jbeta.beta[k][i];
                for j in 0..mo {
                    a[(k * n_block + mo + i, kp * n_block + j)] =
                        jbeta.ops.dnormal_out_on_in.lags[l][(i, j)]
                            - b * jbeta.ops.trace_out_on_in.lags[l][(i, j)];
                }
                for j in 0..mi {
                    let mut v = jbeta.ops.wstar_inner.lags[l][(i, j)]
                        - b * jbeta.ops.v_inner.lags[l][(i, j)];
                    if l == 0 && i == j {
                        v -= 0.5;
                    }
                    a[(k * n_block + mo + i, kp * n_block + mo + j)] = v;
                }
            }
        }
    }

    let f = density_to_vectors(&problem.neumann_f);
    let g = density_to_vectors(&problem.inner_g);
    let mut rhs = DVector::zeros(n);
    for k in 0..n_t {
        rhs.rows_mut(k * n_block, mo).copy_from(&f[k]);
        rhs.rows_mut(k * n_block + mo, mi).copy_from(&g[k]);
    }
    let z = a
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularStep { panel: 0, cond: f64::NAN })?;

    let mut mu = Vec::with_capacity(n_t);
    let mut eta = Vec::with_capacity(n_t);
    for k in 0..n_t {
        mu.push(z.rows(k * n_block, mo).into_owned());
        eta.push(z.rows(k * n_block + mo, mi).into_owned());
    }
    Ok((
        vectors_to_density(BoundaryTag::Outer, &mu),
        vectors_to_density(BoundaryTag::Inner, &eta),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{manufactured_data, ManufacturedField};

    fn annulus() -> (BoundaryCurve, ShapeMap) {
        (
            BoundaryCurve::circle([0.0, 0.0], 2.0),
            ShapeMap::identity(BoundaryCurve::circle([0.0, 0.0], 0.8)),
        )
    }

    fn ramp_problem(grid: &SpaceTimeGrid, gamma: f64) -> (LinearMixedProblem, ManufacturedData) {
        let (outer, shape) = annulus();
        let field = ManufacturedField::RampSource { x0: [0.1, -0.05], strength: 1.0 };
        let data = manufactured_data(&field, &outer, &shape, grid, |_, _| gamma).unwrap();
        let problem = LinearMixedProblem::with_gamma(
            outer,
            shape,
            grid.clone(),
            |_, _| gamma,
            data.f_outer.clone(),
            data.g_inner.clone(),
        )
        .unwrap();
        (problem, data)
    }

    use crate::oracle::ManufacturedData;

    #[test]
    fn zero_data_gives_exactly_zero_solution() {
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 6, 16, 16).unwrap();
        let problem = LinearMixedProblem::with_gamma(
            outer,
            shape,
            grid.clone(),
            |_, _| 1.3,
            Density::zeros(BoundaryTag::Outer, &grid),
            Density::zeros(BoundaryTag::Inner, &grid),
        )
        .unwrap();
        let sol = march_solve(&problem).unwrap();
        for k in 0..grid.n_t {
            for j in 0..16 {
                assert_eq!(sol.mu.values[k][j].to_bits(), 0.0f64.to_bits());
                assert_eq!(sol.eta.values[k][j].to_bits(), 0.0f64.to_bits());
            }
        }
        assert_eq!(sol.field.eval_unchecked(0.3, [1.4, 0.0]).to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn solution_map_is_linear() {
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 5, 16, 16).unwrap();
        let f1 = Density::from_fn(BoundaryTag::Outer, &grid, |t, theta| t * (1.0 + theta.cos()));
        let f2 = Density::from_fn(BoundaryTag::Outer, &grid, |t, theta| (t * theta.sin()).cos() - 1.0);
        let zero_g = Density::zeros(BoundaryTag::Inner, &grid);
        let gamma = |_: f64, theta: f64| 0.7 + 0.2 * theta.sin();
        let solve = |f: Density| {
            let p = LinearMixedProblem::with_gamma(
                outer.clone(),
                shape.clone(),
                grid.clone(),
                gamma,
                f,
                zero_g.clone(),
            )
            .unwrap();
            march_solve(&p).unwrap()
        };
        let alpha = 1.7;
        let s1 = solve(f1.clone());
        let s2 = solve(f2.clone());
        let s12 = solve(f1.scaled(alpha).add(&f2));
        let combo_mu = s1.mu.scaled(alpha).add(&s2.mu);
        let combo_eta = s1.eta.scaled(alpha).add(&s2.eta);
        let dmu = s12.mu.sub(&combo_mu).linf();
        let deta = s12.eta.sub(&combo_eta).linf();
        let scale = s12.mu.linf().max(s12.eta.linf()).max(1.0);
        assert!(dmu / scale < 1e-12, "mu not linear: {dmu}");
        assert!(deta / scale < 1e-12, "eta not linear: {deta}");
    }

    #[test]
    fn manufactured_ramp_solution_is_recovered() {
        let grid = SpaceTimeGrid::new(0.5, 32, 32, 32).unwrap();
        let (problem, data) = ramp_problem(&grid, 1.0);
        let sol = march_solve(&problem).unwrap();
        let scale = data.inner_target.linf().max(data.outer_target.linf());
        let err_outer = sol.outer_trace.sub(&data.outer_target).linf();
        let err_inner = sol.inner_trace.sub(&data.inner_target).linf();
        let rel = err_outer.max(err_inner) / scale;
        assert!(rel < 2e-2, "relative trace error {rel}");
    }

    #[test]
    fn marched_solution_satisfies_global_system() {
        let grid = SpaceTimeGrid::new(0.5, 6, 12, 12).unwrap();
        let (problem, _) = ramp_problem(&grid, 0.8);
        let sol = march_solve(&problem).unwrap();
        let jbeta = assemble_jbeta(&problem).unwrap();
        let res = global_residual(&jbeta, &sol.mu, &sol.eta, &problem.neumann_f, &problem.inner_g);
        assert!(res < 1e-10, "global residual {res}");

        // Independent oracle: one-shot dense space-time solve.
        let (mu_g, eta_g) = global_solve(&problem).unwrap();
        let dmu = sol.mu.sub(&mu_g).linf();
        let deta = sol.eta.sub(&eta_g).linf();
        let scale = sol.mu.linf().max(sol.eta.linf()).max(1e-300);
        assert!(dmu / scale < 1e-10 && deta / scale < 1e-10, "marching vs global: {dmu}, {deta}");
    }

    #[test]
    fn interior_evaluation_reproduces_manufactured_field() {
        // Densities solved from manufactured data reproduce the closed-form
        // caloric field at interior points to solver accuracy. Node counts
        // keep the probe ring outside the evaluation boundary layer.
        let grid = SpaceTimeGrid::new(0.5, 32, 48, 48).unwrap();
        let (problem, _) = ramp_problem(&grid, 1.0);
        let sol = march_solve(&problem).unwrap();
        let field = crate::oracle::ManufacturedField::RampSource {
            x0: [0.1, -0.05],
            strength: 1.0,
        };
        let mut worst: f64 = 0.0;
        for i in 0..8 {
            let ang = i as f64 / 8.0 * 2.0 * std::f64::consts::PI + 0.05;
            let p = [1.4 * ang.cos(), 1.4 * ang.sin()];
            for &t in &[0.25, 0.5] {
                let got = sol.field.eval(t, p).unwrap();
                let want = field.value(t, p);
                worst = worst.max((got - want).abs());
            }
        }
        // Relative to the solution scale (the inner trace carries the
        // largest values of this field).
        let scale = field.value(0.5, problem.shape.point(0.0));
        assert!(
            worst / scale.abs() < 2e-2,
            "interior field error {} of scale {}",
            worst,
            scale
        );
    }

    #[test]
    fn solution_is_causal_under_data_truncation() {
        let grid = SpaceTimeGrid::new(0.5, 8, 12, 12).unwrap();
        let (problem, _) = ramp_problem(&grid, 1.0);
        let sol_full = march_solve(&problem).unwrap();
        let k0 = 5;
        let mut truncated = problem.clone();
        truncated.neumann_f = truncated.neumann_f.truncated_after(k0);
        truncated.inner_g = truncated.inner_g.truncated_after(k0);
        let sol_trunc = march_solve(&truncated).unwrap();
        for k in 0..k0 {
            for j in 0..12 {
                assert_eq!(
                    sol_full.mu.values[k][j].to_bits(),
                    sol_trunc.mu.values[k][j].to_bits()
                );
                assert_eq!(
                    sol_full.eta.values[k][j].to_bits(),
                    sol_trunc.eta.values[k][j].to_bits()
                );
            }
        }
    }

    #[test]
    fn beta_dependence_is_affine() {
        // J_{c beta}[mu,eta] - J_beta[mu,eta] = -(c-1) beta . (trace terms).
        let (outer, shape) = annulus();
        let grid = SpaceTimeGrid::new(0.5, 4, 12, 12).unwrap();
        let ops = LayerOperatorSet::assemble(&outer, &shape, &grid).unwrap();
        let beta_fn = |t: f64, theta: f64| 0.5 + 0.3 * (theta + t).cos();
        let beta = density_to_vectors(&Density::from_fn(BoundaryTag::Inner, &grid, beta_fn));
        let c = 2.6;
        let beta_c: Vec<DVector<f64>> = beta.iter().map(|b| b * c).collect();
        let j1 = JBetaOperator::new(ops.clone(), beta.clone());
        let j2 = JBetaOperator::new(ops.clone(), beta_c);
        let mu: Vec<DVector<f64>> =
            (0..4).map(|k| DVector::from_fn(12, |j, _| ((j + k) as f64 * 0.37).sin())).collect();
        let eta: Vec<DVector<f64>> =
            (0..4).map(|k| DVector::from_fn(12, |j, _| ((j * 2 + k) as f64 * 0.21).cos())).collect();
        let (a1, a2) = j1.apply(&mu, &eta);
        let (b1, b2) = j2.apply(&mu, &eta);
        for k in 0..4 {
            // Row 1 has no beta dependence.
            assert!((&a1[k] - &b1[k]).amax() < 1e-14);
            // Row 2 differs by exactly -(c - 1) beta . trace.
            let trace = ops.inner_trace_at(&mu, &eta, k);
            let expected = &a2[k] - (c - 1.0) * beta[k].component_mul(&trace);
            assert!(
                (&b2[k] - expected).amax() < 1e-12,
                "affine beta dependence violated at panel {k}"
            );
        }
    }

    #[test]
    fn jbeta_residual_of_manufactured_densities_is_small() {
        // Feed the solved densities through the independent full-operator
        // application: Neumann and Robin residuals at discretization error.
        let grid = SpaceTimeGrid::new(0.5, 16, 24, 24).unwrap();
        let (problem, data) = ramp_problem(&grid, 1.0);
        let sol = march_solve(&problem).unwrap();
        let jbeta = assemble_jbeta(&problem).unwrap();
        let (r1, r2) = jbeta.apply(
            &density_to_vectors(&sol.mu),
            &density_to_vectors(&sol.eta),
        );
        let f = density_to_vectors(&data.f_outer);
        let g = density_to_vectors(&data.g_inner);
        for k in 0..grid.n_t {
            assert!((&r1[k] - &f[k]).amax() < 1e-9);
            assert!((&r2[k] - &g[k]).amax() < 1e-9);
        }
    }
}
