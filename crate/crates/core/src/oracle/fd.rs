//! Finite-difference reference solver for the annulus between a star-shaped
//! inner boundary `r = rho(theta)` and an outer circle `r = R`, both centered
//! at the origin. Implicit Euler in time, second-order central differences in
//! space on the mapped polar grid
//!
//! ```text
//! r(s, theta) = rho(theta) + s (R - rho(theta)),   s in [0, 1],
//! ```
//!
//! with one-sided second-order boundary closures: a Neumann datum on the
//! outer circle and a (possibly nonlinear) Robin condition on the inner
//! boundary handled by a per-step Newton iteration. The linearized step
//! system is block-cyclic-tridiagonal over the angular blocks and is solved
//! directly by bordering.
//!
//! This path shares no numerical kernels with the layer-potential solver; it
//! exists purely as an independent oracle.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::FourierSeries;
use crate::nonlinear_solver::RobinNonlinearity;

/// Star-shaped inner boundary profile `rho(theta)` with two derivatives.
#[derive(Debug, Clone)]
pub enum RadialProfile {
    Constant(f64),
    Fourier(FourierSeries),
}

impl RadialProfile {
    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            RadialProfile::Constant(r) => *r,
            RadialProfile::Fourier(s) => s.eval(theta),
        }
    }

    pub fn d1(&self, theta: f64) -> f64 {
        match self {
            RadialProfile::Constant(_) => 0.0,
            RadialProfile::Fourier(s) => s.deriv(theta),
        }
    }

    pub fn d2(&self, theta: f64) -> f64 {
        match self {
            RadialProfile::Constant(_) => 0.0,
            RadialProfile::Fourier(s) => s.second_deriv(theta),
        }
    }
}

/// Inner boundary condition of the reference problem.
pub enum InnerCondition<'a> {
    /// `du/dnu + gamma(t, theta) u = g(t, theta)`
    Robin {
        gamma: Box<dyn Fn(f64, f64) -> f64 + 'a>,
        data: Box<dyn Fn(f64, f64) -> f64 + 'a>,
    },
    /// `du/dnu = G(t, x, u)`
    Nonlinear(&'a RobinNonlinearity),
}

/// Problem description for the reference solver.
pub struct FdProblem<'a> {
    pub inner: RadialProfile,
    pub outer_radius: f64,
    pub t_final: f64,
    /// Outer Neumann datum `f(t, theta)`.
    pub neumann: Box<dyn Fn(f64, f64) -> f64 + 'a>,
    pub condition: InnerCondition<'a>,
}

/// Grid resolution of the reference solver.
#[derive(Debug, Clone, Copy)]
pub struct FdResolution {
    pub n_theta: usize,
    pub n_s: usize,
    pub n_t: usize,
}

/// Space-time boundary traces and final field of the reference solution.
pub struct FdSolution {
    pub resolution: FdResolution,
    pub thetas: Vec<f64>,
    /// `inner_trace[n][i]`: solution at time `(n+1) dt` on the inner boundary.
    pub inner_trace: Vec<Vec<f64>>,
    pub outer_trace: Vec<Vec<f64>>,
    /// Final-time field, block per angle: `field[i][j]` at `(theta_i, s_j)`.
    pub field: Vec<Vec<f64>>,
    pub newton_iterations_max: usize,
}

impl FdSolution {
    /// Radial coordinate of grid node `(i, j)`.
    pub fn radius(&self, inner: &RadialProfile, outer_radius: f64, i: usize, j: usize) -> f64 {
        let a = inner.eval(self.thetas[i]);
        a + (j as f64 / self.resolution.n_s as f64) * (outer_radius - a)
    }

    /// Snapshot of the final-time field: CSV rows
    /// `t,r_index,theta_index,x,y,value`.
    pub fn write_field_csv(
        &self,
        inner: &RadialProfile,
        outer_radius: f64,
        t_final: f64,
        w: &mut impl std::io::Write,
    ) -> std::io::Result<()> {
        writeln!(w, "t,r_index,theta_index,x,y,value")?;
        for (i, col) in self.field.iter().enumerate() {
            let theta = self.thetas[i];
            for (j, v) in col.iter().enumerate() {
                let r = self.radius(inner, outer_radius, i, j);
                writeln!(
                    w,
                    "{t_final:.10},{j},{i},{:.10},{:.10},{v:.17e}",
                    r * theta.cos(),
                    r * theta.sin()
                )?;
            }
        }
        Ok(())
    }

    /// Downsample a trace to a coarser set of panels/nodes whose sizes divide
    /// this solution's sizes (used to compare against the integral-equation
    /// path at shared collocation points).
    pub fn downsample(trace: &[Vec<f64>], n_t: usize, m: usize) -> Vec<Vec<f64>> {
        let ct = trace.len() / n_t;
        let cm = trace[0].len() / m;
        assert!(ct >= 1 && cm >= 1 && trace.len() % n_t == 0 && trace[0].len() % m == 0);
        (0..n_t)
            .map(|k| (0..m).map(|j| trace[(k + 1) * ct - 1][j * cm]).collect())
            .collect()
    }
}

struct Metric {
    c_ss: f64,
    c_tt: f64,
    c_st: f64,
    c_s: f64,
}

/// Geometry helper: mapped-polar metric coefficients at `(s, theta_i)`.
fn metric(inner: &RadialProfile, outer_radius: f64, theta: f64, s: f64) -> Metric {
    let a = inner.eval(theta);
    let a1 = inner.d1(theta);
    let a2 = inner.d2(theta);
    let b = outer_radius - a;
    let b1 = -a1;
    let b2 = -a2;
    let r = a + s * b;
    let p = -(a1 + s * b1) / b;
    let p_s = -b1 / b;
    let p_t = -(a2 + s * b2) / b + (a1 + s * b1) * b1 / (b * b);
    Metric {
        c_ss: 1.0 / (b * b) + p * p / (r * r),
        c_tt: 1.0 / (r * r),
        c_st: 2.0 * p / (r * r),
        c_s: 1.0 / (r * b) + (p_t + p * p_s) / (r * r),
    }
}

/// Solve the problem with implicit Euler and per-step Newton. Second order in
/// space, first order in time.
pub fn fd_solve(problem: &FdProblem, resolution: FdResolution) -> Result<FdSolution> {
    let FdResolution { n_theta, n_s, n_t } = resolution;
    if n_theta < 8 || n_s < 4 || n_t < 1 {
        return Err(Error::InvalidGrid("reference solver needs n_theta >= 8, n_s >= 4".into()));
    }
    for i in 0..n_theta {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / n_theta as f64;
        if problem.inner.eval(theta) <= 0.0 || problem.inner.eval(theta) >= problem.outer_radius {
            return Err(Error::InvalidGrid("inner profile must satisfy 0 < rho < R".into()));
        }
    }

    let n = n_s + 1;
    let dt = problem.t_final / n_t as f64;
    let ds = 1.0 / n_s as f64;
    let dtheta = 2.0 * std::f64::consts::PI / n_theta as f64;
    let thetas: Vec<f64> = (0..n_theta).map(|i| i as f64 * dtheta).collect();

    // Per-angle geometry at the inner boundary closure.
    let rho: Vec<f64> = thetas.iter().map(|&t| problem.inner.eval(t)).collect();
    let rho1: Vec<f64> = thetas.iter().map(|&t| problem.inner.d1(t)).collect();
    let b: Vec<f64> = rho.iter().map(|&a| problem.outer_radius - a).collect();
    let norm_fac: Vec<f64> = (0..n_theta)
        .map(|i| (1.0 + (rho1[i] / rho[i]).powi(2)).sqrt())
        .collect();
    let p0: Vec<f64> = (0..n_theta).map(|i| rho1[i] / b[i]).collect();
    // u_s coefficient and u_theta coefficient of the inner normal derivative.
    let q_s: Vec<f64> = (0..n_theta)
        .map(|i| (1.0 / b[i] - (rho1[i] / (rho[i] * rho[i])) * (-p0[i] - 0.0)) / norm_fac[i])
        .collect();
    let q_t: Vec<f64> = (0..n_theta)
        .map(|i| -(rho1[i] / (rho[i] * rho[i])) / norm_fac[i])
        .collect();

    // Residual of the implicit step at state `u`, time `t`.
    let residual = |u: &[DVector<f64>], u_prev: &[DVector<f64>], t: f64| -> Vec<DVector<f64>> {
        let mut res = Vec::with_capacity(n_theta);
        for i in 0..n_theta {
            let im = (i + n_theta - 1) % n_theta;
            let ip = (i + 1) % n_theta;
            let mut r = DVector::zeros(n);
            for j in 1..n_s {
                let s = j as f64 * ds;
                let met = metric(&problem.inner, problem.outer_radius, thetas[i], s);
                let u_ss = (u[i][j + 1] - 2.0 * u[i][j] + u[i][j - 1]) / (ds * ds);
                let u_tt = (u[ip][j] - 2.0 * u[i][j] + u[im][j]) / (dtheta * dtheta);
                let u_st = (u[ip][j + 1] - u[ip][j - 1] - u[im][j + 1] + u[im][j - 1])
                    / (4.0 * ds * dtheta);
                let u_s = (u[i][j + 1] - u[i][j - 1]) / (2.0 * ds);
                let lap =
                    met.c_ss * u_ss + met.c_tt * u_tt + met.c_st * u_st + met.c_s * u_s;
                r[j] = (u[i][j] - u_prev[i][j]) / dt - lap;
            }
            // Outer Neumann closure.
            let us_out = (3.0 * u[i][n_s] - 4.0 * u[i][n_s - 1] + u[i][n_s - 2]) / (2.0 * ds);
            r[n_s] = us_out / b[i] - (problem.neumann)(t, thetas[i]);
            // Inner closure.
            let us_in = (-3.0 * u[i][0] + 4.0 * u[i][1] - u[i][2]) / (2.0 * ds);
            let ut_in = (u[ip][0] - u[im][0]) / (2.0 * dtheta);
            let dnu = q_s[i] * us_in + q_t[i] * ut_in;
            r[0] = match &problem.condition {
                InnerCondition::Robin { gamma, data } => {
                    dnu + gamma(t, thetas[i]) * u[i][0] - data(t, thetas[i])
                }
                InnerCondition::Nonlinear(g) => {
                    let x = [rho[i] * thetas[i].cos(), rho[i] * thetas[i].sin()];
                    dnu - g.eval(t, x, u[i][0])
                }
            };
            res.push(r);
        }
        res
    };

    // Jacobian blocks of the residual (A couples theta-1, B diagonal, C +1).
    let jacobian = |u: &[DVector<f64>], t: f64| -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let mut aa = Vec::with_capacity(n_theta);
        let mut bb = Vec::with_capacity(n_theta);
        let mut cc = Vec::with_capacity(n_theta);
        for i in 0..n_theta {
            let mut a = DMatrix::zeros(n, n);
            let mut bm = DMatrix::zeros(n, n);
            let mut c = DMatrix::zeros(n, n);
            for j in 1..n_s {
                let s = j as f64 * ds;
                let met = metric(&problem.inner, problem.outer_radius, thetas[i], s);
                bm[(j, j)] = 1.0 / dt + 2.0 * met.c_ss / (ds * ds) + 2.0 * met.c_tt / (dtheta * dtheta);
                bm[(j, j + 1)] = -met.c_ss / (ds * ds) - met.c_s / (2.0 * ds);
                bm[(j, j - 1)] = -met.c_ss / (ds * ds) + met.c_s / (2.0 * ds);
                c[(j, j)] = -met.c_tt / (dtheta * dtheta);
                a[(j, j)] = -met.c_tt / (dtheta * dtheta);
                let cross = met.c_st / (4.0 * ds * dtheta);
                c[(j, j + 1)] = -cross;
                c[(j, j - 1)] = cross;
                a[(j, j + 1)] = cross;
                a[(j, j - 1)] = -cross;
            }
            // Outer Neumann row.
            bm[(n_s, n_s)] = 3.0 / (2.0 * ds * b[i]);
            bm[(n_s, n_s - 1)] = -4.0 / (2.0 * ds * b[i]);
            bm[(n_s, n_s - 2)] = 1.0 / (2.0 * ds * b[i]);
            // Inner row.
            bm[(0, 0)] = q_s[i] * (-3.0) / (2.0 * ds);
            bm[(0, 1)] = q_s[i] * 4.0 / (2.0 * ds);
            bm[(0, 2)] = q_s[i] * (-1.0) / (2.0 * ds);
            c[(0, 0)] = q_t[i] / (2.0 * dtheta);
            a[(0, 0)] = -q_t[i] / (2.0 * dtheta);
            match &problem.condition {
                InnerCondition::Robin { gamma, .. } => {
                    bm[(0, 0)] += gamma(t, thetas[i]);
                }
                InnerCondition::Nonlinear(g) => {
                    let x = [rho[i] * thetas[i].cos(), rho[i] * thetas[i].sin()];
                    bm[(0, 0)] -= g.dxi(t, x, u[i][0]);
                }
            }
            aa.push(a);
            bb.push(bm);
            cc.push(c);
        }
        (aa, bb, cc)
    };

    let mut u: Vec<DVector<f64>> = vec![DVector::zeros(n); n_theta];
    let mut inner_trace = Vec::with_capacity(n_t);
    let mut outer_trace = Vec::with_capacity(n_t);
    let mut newton_max = 0usize;
    let tol = 1e-11;
    let max_newton = 30;

    for step in 0..n_t {
        let t = (step + 1) as f64 * dt;
        let u_prev = u.clone();
        let mut iterations = 0usize;
        loop {
            let res = residual(&u, &u_prev, t);
            let worst = res.iter().map(|r| r.amax()).fold(0.0f64, f64::max);
            if worst < tol {
                break;
            }
            if iterations >= max_newton {
                return Err(Error::NewtonFailure {
                    panel: step,
                    reason: format!("reference solver stalled at residual {worst:.3e}"),
                });
            }
            let (aa, bb, cc) = jacobian(&u, t);
            let rhs: Vec<DVector<f64>> = res.iter().map(|r| -r).collect();
            let delta = solve_block_cyclic_tridiag(&aa, &bb, &cc, &rhs)?;
            for i in 0..n_theta {
                u[i] += &delta[i];
            }
            iterations += 1;
        }
        newton_max = newton_max.max(iterations);
        inner_trace.push((0..n_theta).map(|i| u[i][0]).collect());
        outer_trace.push((0..n_theta).map(|i| u[i][n_s]).collect());
    }

    Ok(FdSolution {
        resolution,
        thetas,
        inner_trace,
        outer_trace,
        field: u.iter().map(|col| col.iter().copied().collect()).collect(),
        newton_iterations_max: newton_max,
    })
}

/// Direct solver for a block-cyclic-tridiagonal system
/// `A_i X_{i-1} + B_i X_i + C_i X_{i+1} = F_i` (indices mod m) by bordering
/// on the last block unknown.
pub fn solve_block_cyclic_tridiag(
    a: &[DMatrix<f64>],
    b: &[DMatrix<f64>],
    c: &[DMatrix<f64>],
    f: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let m = b.len();
    assert!(m >= 3, "need at least three angular blocks");
    let n = b[0].nrows();

    // Interior chain i = 0..m-2 with combined right-hand sides
    // [F | -G] where G carries the couplings to the border X_{m-1}.
    let rhs_cols = 1 + n;
    let mut rhs: Vec<DMatrix<f64>> = (0..m - 1).map(|_| DMatrix::zeros(n, rhs_cols)).collect();
    for i in 0..m - 1 {
        rhs[i].column_mut(0).copy_from(&f[i]);
    }
    for col in 0..n {
        for row in 0..n {
            // Row 0 couples to the border through A_0, row m-2 through C_{m-2}.
            rhs[0][(row, 1 + col)] = -a[0][(row, col)];
            rhs[m - 2][(row, 1 + col)] -= c[m - 2][(row, col)];
        }
    }

    // Block Thomas elimination on the chain.
    let mut diag: Vec<DMatrix<f64>> = Vec::with_capacity(m - 1);
    let mut rhs_mod = rhs;
    diag.push(b[0].clone());
    for i in 1..m - 1 {
        let lu = diag[i - 1].clone().lu();
        // L = A_i D_{i-1}^{-1}: solve D^T ... use solve on transposed system
        // via normal solves: X = A_i D^{-1} means X D = A_i.
        let dinv_c = lu
            .solve(&c[i - 1])
            .ok_or(Error::SingularStep { panel: i, cond: f64::NAN })?;
        let dinv_rhs = lu
            .solve(&rhs_mod[i - 1])
            .ok_or(Error::SingularStep { panel: i, cond: f64::NAN })?;
        let new_diag = &b[i] - &a[i] * &dinv_c;
        let correction = &a[i] * &dinv_rhs;
        rhs_mod[i] -= correction;
        diag.push(new_diag);
    }

    // Back substitution: columns [X_int | -W] with X_int = col 0.
    let mut sol: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, rhs_cols); m - 1];
    let lu_last = diag[m - 2].clone().lu();
    sol[m - 2] = lu_last
        .solve(&rhs_mod[m - 2])
        .ok_or(Error::SingularStep { panel: m - 2, cond: f64::NAN })?;
    for i in (0..m - 2).rev() {
        let tmp = &rhs_mod[i] - &c[i] * &sol[i + 1];
        sol[i] = diag[i]
            .clone()
            .lu()
            .solve(&tmp)
            .ok_or(Error::SingularStep { panel: i, cond: f64::NAN })?;
    }

    // Border equation: A_{m-1} X_{m-2} + B_{m-1} Y + C_{m-1} X_0 = F_{m-1}.
    let u0 = sol[0].column(0).into_owned();
    let w0 = sol[0].columns(1, n).into_owned();
    let um2 = sol[m - 2].column(0).into_owned();
    let wm2 = sol[m - 2].columns(1, n).into_owned();
    // X_i = U_i + W_i Y with W stored as the sensitivity columns.
    let border_matrix = &b[m - 1] + &a[m - 1] * &wm2 + &c[m - 1] * &w0;
    let border_rhs = &f[m - 1] - &a[m - 1] * &um2 - &c[m - 1] * &u0;
    let y = border_matrix
        .lu()
        .solve(&border_rhs)
        .ok_or(Error::SingularStep { panel: m - 1, cond: f64::NAN })?;

    let mut out: Vec<DVector<f64>> = Vec::with_capacity(m);
    for i in 0..m - 1 {
        let xi = sol[i].column(0).into_owned() + sol[i].columns(1, n) * &y;
        out.push(xi);
    }
    out.push(y);
    Ok(out)
}

/// One-dimensional radial reference solver for radially symmetric linear
/// problems on a true annulus: a third independent path used to validate the
/// two-dimensional solver.
pub fn fd_solve_radial(
    r_inner: f64,
    r_outer: f64,
    t_final: f64,
    gamma: f64,
    neumann: impl Fn(f64) -> f64,
    robin_data: impl Fn(f64) -> f64,
    n_r: usize,
    n_t: usize,
) -> Vec<Vec<f64>> {
    let n = n_r + 1;
    let dr = (r_outer - r_inner) / n_r as f64;
    let dt = t_final / n_t as f64;
    let mut u = vec![0.0f64; n];
    let mut traces = Vec::with_capacity(n_t);

    for step in 0..n_t {
        let t = (step + 1) as f64 * dt;
        // Dense assembly of the tridiagonal-with-boundary-rows system.
        let mut mat = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for j in 1..n_r {
            let r = r_inner + j as f64 * dr;
            mat[(j, j)] = 1.0 / dt + 2.0 / (dr * dr);
            mat[(j, j + 1)] = -1.0 / (dr * dr) - 1.0 / (2.0 * dr * r);
            mat[(j, j - 1)] = -1.0 / (dr * dr) + 1.0 / (2.0 * dr * r);
            rhs[j] = u[j] / dt;
        }
        // Inner Robin: du/dr + gamma u = g.
        mat[(0, 0)] = -3.0 / (2.0 * dr) + gamma;
        mat[(0, 1)] = 4.0 / (2.0 * dr);
        mat[(0, 2)] = -1.0 / (2.0 * dr);
        rhs[0] = robin_data(t);
        // Outer Neumann: du/dr = f.
        mat[(n_r, n_r)] = 3.0 / (2.0 * dr);
        mat[(n_r, n_r - 1)] = -4.0 / (2.0 * dr);
        mat[(n_r, n_r - 2)] = 1.0 / (2.0 * dr);
        rhs[n_r] = neumann(t);

        let sol = mat.lu().solve(&rhs).expect("radial step");
        u = sol.iter().copied().collect();
        traces.push(u.clone());
    }
    traces
}
