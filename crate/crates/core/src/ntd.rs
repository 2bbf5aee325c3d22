//! The Neumann-to-Dirichlet operator of the linear mixed problem as an
//! explicit causal matrix, plus finite-difference sensitivity diagnostics in
//! the shape and the Robin coefficient.
//!
//! The operator maps the Neumann datum on the outer boundary to the Dirichlet
//! trace of the solution there. With a time-constant Robin coefficient the
//! discrete solution map is a time convolution, so the operator is stored as
//! per-lag blocks; every block column is the response to a unit impulse
//! density on panel 0 at one outer node, obtained by marching the linear
//! solver with all impulses batched as matrix right-hand sides.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, FourierDisplacement, ShapeMap};
use crate::grid::{BoundaryTag, Density, SpaceTimeGrid};
use crate::linear_solver::{base_step_matrix, factor_step, subtract_beta_rows};
use crate::potentials::{density_to_vectors, vectors_to_density, LayerOperatorSet};

/// Causal per-lag blocks of the Neumann-to-Dirichlet map, with provenance.
#[derive(Debug, Clone)]
pub struct NtDOperator {
    pub lags: Vec<DMatrix<f64>>,
    pub grid: SpaceTimeGrid,
    pub gamma: DVector<f64>,
}

impl NtDOperator {
    /// Apply the operator to a Neumann datum: causal block convolution.
    pub fn apply(&self, f: &Density) -> Density {
        let f_v = density_to_vectors(f);
        let n_t = self.grid.n_t;
        let m = self.lags[0].nrows();
        let mut out = Vec::with_capacity(n_t);
        for k in 0..n_t {
            let mut row = DVector::zeros(m);
            for l in 0..=k {
                row.gemv(1.0, &self.lags[l], &f_v[k - l], 1.0);
            }
            out.push(row);
        }
        vectors_to_density(BoundaryTag::Outer, &out)
    }

    /// Max-abs entry over all lag blocks.
    pub fn max_abs(&self) -> f64 {
        self.lags.iter().map(|b| b.abs().max()).fold(0.0, f64::max)
    }

    /// Per-lag block max-abs norms, for CSV summaries.
    pub fn block_norms(&self) -> Vec<f64> {
        self.lags.iter().map(|b| b.abs().max()).collect()
    }

    pub fn sub(&self, other: &NtDOperator) -> Vec<DMatrix<f64>> {
        self.lags.iter().zip(&other.lags).map(|(a, b)| a - b).collect()
    }
}

/// Sample a Robin coefficient given on the reference inner boundary.
pub fn gamma_from_reference(grid: &SpaceTimeGrid, gamma: impl Fn(f64) -> f64) -> DVector<f64> {
    DVector::from_iterator(grid.m_inner, grid.thetas(BoundaryTag::Inner).iter().map(|&th| gamma(th)))
}

/// Sample a Robin coefficient given as a function on the domain, evaluated at
/// the image nodes (the composed form of the coefficient).
pub fn gamma_from_domain(
    grid: &SpaceTimeGrid,
    shape: &ShapeMap,
    gamma_tilde: impl Fn([f64; 2]) -> f64,
) -> DVector<f64> {
    DVector::from_iterator(
        grid.m_inner,
        grid.thetas(BoundaryTag::Inner).iter().map(|&th| gamma_tilde(shape.point(th))),
    )
}

/// Assemble the operator by column-impulse marching: the Neumann data are the
/// per-node indicator densities on panel 0, solved simultaneously through the
/// shared LU of the step matrix. Requires a time-constant `gamma` (values per
/// inner node) so the solution map is a convolution.
pub fn assemble_ntd(
    outer: &BoundaryCurve,
    shape: &ShapeMap,
    gamma: &DVector<f64>,
    grid: &SpaceTimeGrid,
) -> Result<NtDOperator> {
    let report = shape.check_admissible_default(outer, grid.m_inner);
    if !report.pass() {
        return Err(Error::Inadmissible(report.failure_reason()));
    }
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("Robin coefficient"));
    }
    let ops = LayerOperatorSet::assemble(outer, shape, grid)?;
    assemble_ntd_with(&ops, gamma)
}

/// Assembly reusing already assembled layer operators.
pub fn assemble_ntd_with(ops: &LayerOperatorSet, gamma: &DVector<f64>) -> Result<NtDOperator> {
    let grid = &ops.grid;
    let n_t = grid.n_t;
    let mo = ops.outer.m;
    let mi = ops.inner.m;
    let beta = -gamma;

    let mut step = base_step_matrix(ops);
    subtract_beta_rows(&mut step, ops, &beta);
    let lu = factor_step(step, 0)?;

    // March all impulse columns at once: Z_k is (mo + mi) x mo, the density
    // responses (mu; eta) at panel k to unit Neumann impulses on panel 0.
    let mut z: Vec<DMatrix<f64>> = Vec::with_capacity(n_t);
    for k in 0..n_t {
        let mut rhs = DMatrix::zeros(mo + mi, mo);
        if k == 0 {
            for j in 0..mo {
                rhs[(j, j)] = 1.0;
            }
        }
        for l in 1..=k {
            let zp = &z[k - l];
            let mu_p = zp.rows(0, mo);
            let eta_p = zp.rows(mo, mi);
            // Row 1 history.
            let mut h1 = &ops.wstar_outer.lags[l] * mu_p;
            h1 += &ops.dnormal_in_on_out.lags[l] * eta_p;
            // Row 2 history, including the Robin trace term.
            let mut h2 = &ops.wstar_inner.lags[l] * eta_p;
            h2 += &ops.dnormal_out_on_in.lags[l] * mu_p;
            let mut trace = &ops.trace_out_on_in.lags[l] * mu_p;
            trace += &ops.v_inner.lags[l] * eta_p;
            for i in 0..mi {
                for j in 0..mo {
                    h2[(i, j)] -= beta[i] * trace[(i, j)];
                }
            }
            rhs.rows_mut(0, mo).sub_assign_workaround(&h1);
            rhs.rows_mut(mo, mi).sub_assign_workaround(&h2);
        }
        let zk = lu
            .solve(&rhs)
            .ok_or(Error::SingularStep { panel: k, cond: f64::NAN })?;
        z.push(zk);
    }

    // Dirichlet trace blocks: D^l = sum_{l'=0..l} V_out^{l'} Mu_{l-l'} +
    // Ct_in_on_out^{l'} Eta_{l-l'}.
    let mut lags = Vec::with_capacity(n_t);
    for l in 0..n_t {
        let mut d = DMatrix::zeros(mo, mo);
        for lp in 0..=l {
            let zk = &z[l - lp];
            d += &ops.v_outer.lags[lp] * zk.rows(0, mo);
            d += &ops.trace_in_on_out.lags[lp] * zk.rows(mo, mi);
        }
        lags.push(d);
    }
    Ok(NtDOperator { lags, grid: grid.clone(), gamma: gamma.clone() })
}

trait SubAssignView {
    fn sub_assign_workaround(&mut self, rhs: &DMatrix<f64>);
}

impl SubAssignView for nalgebra::DMatrixViewMut<'_, f64> {
    fn sub_assign_workaround(&mut self, rhs: &DMatrix<f64>) {
        for j in 0..rhs.ncols() {
            for i in 0..rhs.nrows() {
                self[(i, j)] -= rhs[(i, j)];
            }
        }
    }
}

/// Finite-difference sensitivity of the operator blocks in a combined
/// direction `(h_phi, h_gamma)`, with Richardson consistency ratios.
pub struct NtdSensitivityReport {
    pub eps: Vec<f64>,
    /// Max-abs norm of the derivative blocks per eps.
    pub derivative_norms: Vec<f64>,
    /// `||D_e - D_{e+1}|| / ||D_{e+1} - D_{e+2}||` for consecutive triples.
    pub richardson_ratios: Vec<f64>,
    /// Derivative blocks at the finest eps.
    pub finest_blocks: Vec<DMatrix<f64>>,
}

pub fn ntd_sensitivity(
    outer: &BoundaryCurve,
    base_shape: &ShapeMap,
    base_gamma: &DVector<f64>,
    h_phi: Option<&FourierDisplacement>,
    h_gamma: Option<&DVector<f64>>,
    eps_list: &[f64],
    grid: &SpaceTimeGrid,
) -> Result<NtdSensitivityReport> {
    let zero_dir = h_phi.is_none_or(|d| d.is_zero())
        && h_gamma.is_none_or(|g| g.iter().all(|v| *v == 0.0));
    if zero_dir {
        let n_t = grid.n_t;
        return Ok(NtdSensitivityReport {
            eps: eps_list.to_vec(),
            derivative_norms: vec![0.0; eps_list.len()],
            richardson_ratios: vec![],
            finest_blocks: vec![DMatrix::zeros(grid.m_outer, grid.m_outer); n_t],
        });
    }

    let perturbed = |eps: f64| -> Result<NtDOperator> {
        let shape = match h_phi {
            Some(dir) => base_shape.perturbed(dir, eps),
            None => base_shape.clone(),
        };
        let gamma = match h_gamma {
            Some(hg) => base_gamma + hg * eps,
            None => base_gamma.clone(),
        };
        assemble_ntd(outer, &shape, &gamma, grid)
    };

    let mut derivatives: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let plus = perturbed(eps)?;
        let minus = perturbed(-eps)?;
        let d: Vec<DMatrix<f64>> = plus
            .lags
            .iter()
            .zip(&minus.lags)
            .map(|(a, b)| (a - b) / (2.0 * eps))
            .collect();
        derivatives.push(d);
    }

    let norm = |blocks: &[DMatrix<f64>]| -> f64 {
        blocks.iter().map(|b| b.abs().max()).fold(0.0, f64::max)
    };
    let derivative_norms: Vec<f64> = derivatives.iter().map(|d| norm(d)).collect();
    let mut richardson_ratios = Vec::new();
    for w in derivatives.windows(3) {
        let d01: Vec<DMatrix<f64>> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
        let d12: Vec<DMatrix<f64>> = w[1].iter().zip(&w[2]).map(|(a, b)| a - b).collect();
        richardson_ratios.push(norm(&d01) / norm(&d12).max(1e-300));
    }
    let finest_blocks = derivatives.pop().unwrap();
    Ok(NtdSensitivityReport {
        eps: eps_list.to_vec(),
        derivative_norms,
        richardson_ratios,
        finest_blocks,
    })
}
