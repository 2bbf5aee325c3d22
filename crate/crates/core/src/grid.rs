//! Shared space-time discretization: uniform time panels, periodic boundary
//! nodes, trapezoidal weights, and a discrete parabolic Hoelder seminorm
//! diagnostic.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::BoundaryCurve;

/// Which boundary a density lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Outer,
    Inner,
}

/// Uniform time panels times periodic boundary nodes on each boundary.
///
/// Panel `k` covers `(k dt, (k+1) dt]`; all operators collocate at the panel
/// end `t_k = (k+1) dt`. Spatial nodes sit at `theta_j = 2 pi j / m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    pub t_final: f64,
    pub n_t: usize,
    pub m_outer: usize,
    pub m_inner: usize,
}

impl SpaceTimeGrid {
    pub fn new(t_final: f64, n_t: usize, m_outer: usize, m_inner: usize) -> Result<Self> {
        if !(t_final > 0.0) {
            return Err(Error::InvalidGrid(format!("T must be positive, got {t_final}")));
        }
        if n_t == 0 {
            return Err(Error::InvalidGrid("need at least one time panel".into()));
        }
        for (name, m) in [("m_outer", m_outer), ("m_inner", m_inner)] {
            if m < 8 || m % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "{name} must be even and >= 8, got {m}"
                )));
            }
        }
        Ok(Self { t_final, n_t, m_outer, m_inner })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_final / self.n_t as f64
    }

    /// Collocation time of panel `k` (its right endpoint).
    #[inline]
    pub fn collocation_time(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.dt()
    }

    pub fn m(&self, tag: BoundaryTag) -> usize {
        match tag {
            BoundaryTag::Outer => self.m_outer,
            BoundaryTag::Inner => self.m_inner,
        }
    }

    /// Node parameters `theta_j` for a boundary with `m` nodes.
    pub fn thetas(&self, tag: BoundaryTag) -> Vec<f64> {
        let m = self.m(tag);
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        (0..m).map(|j| j as f64 * dtheta).collect()
    }

    /// Periodic trapezoidal weights on `curve` (equal to speed times the
    /// parameter spacing at each node).
    pub fn curve_weights(&self, tag: BoundaryTag, curve: &BoundaryCurve) -> Vec<f64> {
        let m = self.m(tag);
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        (0..m).map(|j| curve.speed(j as f64 * dtheta) * dtheta).collect()
    }
}

/// Boundary space-time function: one value per time panel per node,
/// piecewise constant in time and nodal in space. Represents functions that
/// vanish at `t = 0`; the panel-0 value is the value on `(0, dt]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub boundary: BoundaryTag,
    /// `values[k][j]`: panel `k`, node `j`.
    pub values: Vec<Vec<f64>>,
}

impl Density {
    pub fn zeros(boundary: BoundaryTag, grid: &SpaceTimeGrid) -> Self {
        let m = grid.m(boundary);
        Self { boundary, values: vec![vec![0.0; m]; grid.n_t] }
    }

    /// Sample `f(t_k, theta_j)` at collocation times and node parameters.
    pub fn from_fn(
        boundary: BoundaryTag,
        grid: &SpaceTimeGrid,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let thetas = grid.thetas(boundary);
        let values = (0..grid.n_t)
            .map(|k| {
                let t = grid.collocation_time(k);
                thetas.iter().map(|&theta| f(t, theta)).collect()
            })
            .collect();
        Self { boundary, values }
    }

    pub fn n_panels(&self) -> usize {
        self.values.len()
    }

    pub fn m(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn linf(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flat_map(|row| row.iter()).all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            boundary: self.boundary,
            values: self
                .values
                .iter()
                .map(|row| row.iter().map(|v| c * v).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.boundary, other.boundary);
        Self {
            boundary: self.boundary,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// Zero out all panels with index >= `k0`.
    pub fn truncated_after(&self, k0: usize) -> Self {
        let mut out = self.clone();
        for k in k0..out.values.len() {
            for v in &mut out.values[k] {
                *v = 0.0;
            }
        }
        out
    }

    /// CSV dump `panel,node,value`, row-major by panel.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "panel,node,value")?;
        for (k, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                writeln!(w, "{k},{j},{v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Discrete parabolic Hoelder seminorm of a density: the maximum of the time
/// quotient (exponent `alpha/2`, per node) and the space quotient (exponent
/// `alpha`, arc-length distances, per panel). Diagnostic only.
pub fn hoelder_seminorm(
    density: &Density,
    alpha: f64,
    grid: &SpaceTimeGrid,
    curve: &BoundaryCurve,
) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0);
    let n_t = density.n_panels();
    let m = density.m();
    let dt = grid.dt();

    // Cumulative arc length at nodes for geodesic distances.
    let dtheta = 2.0 * std::f64::consts::PI / m as f64;
    let mut cum = vec![0.0; m + 1];
    for j in 0..m {
        // Midpoint rule per parameter interval; adequate for a diagnostic.
        let mid = (j as f64 + 0.5) * dtheta;
        cum[j + 1] = cum[j] + curve.speed(mid) * dtheta;
    }
    let total = cum[m];
    let arc_dist = |i: usize, j: usize| -> f64 {
        let d = (cum[j] - cum[i]).abs();
        d.min(total - d)
    };

    let mut sup: f64 = 0.0;
    // Time quotient.
    for j in 0..m {
        for k1 in 0..n_t {
            for k2 in (k1 + 1)..n_t {
                let dtv = ((k2 - k1) as f64 * dt).powf(alpha / 2.0);
                sup = sup.max((density.values[k1][j] - density.values[k2][j]).abs() / dtv);
            }
        }
    }
    // Space quotient.
    for k in 0..n_t {
        for i in 0..m {
            for j in (i + 1)..m {
                let d = arc_dist(i, j);
                if d > 0.0 {
                    sup = sup.max(
                        (density.values[k][i] - density.values[k][j]).abs() / d.powf(alpha),
                    );
                }
            }
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;
    use approx::assert_relative_eq;

    #[test]
    fn grid_construction_and_weights() {
        let grid = SpaceTimeGrid::new(1.0, 16, 32, 32).unwrap();
        assert_relative_eq!(grid.dt(), 1.0 / 16.0);
        let single = SpaceTimeGrid::new(0.5, 1, 8, 8).unwrap();
        assert_eq!(single.n_t, 1);
        assert!(SpaceTimeGrid::new(1.0, 0, 32, 32).is_err());
        assert!(SpaceTimeGrid::new(1.0, 4, 7, 32).is_err());
        assert!(SpaceTimeGrid::new(1.0, 4, 10, 6).is_err());
        assert!(SpaceTimeGrid::new(-1.0, 4, 8, 8).is_err());

        // Trapezoidal weights recover arc length.
        let circle = BoundaryCurve::circle([0.3, -0.1], 1.7);
        let w = grid.curve_weights(BoundaryTag::Outer, &circle);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, circle.arc_length(), epsilon = 1e-10);

        let wavy = BoundaryCurve::radial_fourier(
            [0.0, 0.0],
            crate::geometry::FourierSeries { a0: 1.0, cos: vec![0.0, 0.0, 0.1], sin: vec![] },
        );
        let w = grid.curve_weights(BoundaryTag::Outer, &wavy);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, wavy.arc_length(), epsilon = 1e-10);
    }

    #[test]
    fn hoelder_seminorm_cases() {
        let grid = SpaceTimeGrid::new(1.0, 8, 16, 16).unwrap();
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0);

        // Constant density: zero seminorm.
        let constant = Density::from_fn(BoundaryTag::Outer, &grid, |_, _| 3.5);
        assert_eq!(hoelder_seminorm(&constant, 0.5, &grid, &circle), 0.0);

        // d(t, x) = t: time quotient |t1 - t2|^{1 - alpha/2}; brute-force scan
        // as the independent oracle.
        let ramp = Density::from_fn(BoundaryTag::Outer, &grid, |t, _| t);
        let dt = grid.dt();
        let mut oracle: f64 = 0.0;
        for k1 in 0..8 {
            for k2 in (k1 + 1)..8 {
                let diff = (k2 - k1) as f64 * dt;
                oracle = oracle.max(diff / diff.powf(0.25));
            }
        }
        assert_relative_eq!(hoelder_seminorm(&ramp, 0.5, &grid, &circle), oracle, epsilon = 1e-13);

        // d(t, x) = sin(theta): space quotient via exhaustive pair scan.
        let wave = Density::from_fn(BoundaryTag::Outer, &grid, |_, theta| theta.sin());
        let m = 16;
        let mut oracle: f64 = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let raw = (j - i) as f64 / m as f64 * 2.0 * std::f64::consts::PI;
                let d = raw.min(2.0 * std::f64::consts::PI - raw);
                let ti = i as f64 / m as f64 * 2.0 * std::f64::consts::PI;
                let tj = j as f64 / m as f64 * 2.0 * std::f64::consts::PI;
                oracle = oracle.max((ti.sin() - tj.sin()).abs() / d.powf(0.5));
            }
        }
        let got = hoelder_seminorm(&wave, 0.5, &grid, &circle);
        assert_relative_eq!(got, oracle, epsilon = 1e-12);
    }

    #[test]
    fn hoelder_seminorm_absolutely_homogeneous() {
        let grid = SpaceTimeGrid::new(1.0, 6, 12, 12).unwrap();
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0);
        let d = Density::from_fn(BoundaryTag::Outer, &grid, |t, theta| t * theta.cos() + 0.3);
        let base = hoelder_seminorm(&d, 0.4, &grid, &circle);
        for &c in &[-2.5f64, 0.0, 0.7, 10.0] {
            let scaled = hoelder_seminorm(&d.scaled(c), 0.4, &grid, &circle);
            assert!((scaled - c.abs() * base).abs() <= 1e-12 * (1.0 + base));
        }
    }

    #[test]
    fn hoelder_seminorm_monotone_under_refinement() {
        // On a fixed smooth function, refining the grid can only reveal more
        // of the continuous seminorm (up to quadrature error).
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0);
        let f = |t: f64, theta: f64| (2.0 * theta).sin() * t.sqrt().min(1.0);
        let mut prev = 0.0;
        for &(n_t, m) in &[(4usize, 8usize), (8, 16), (16, 32)] {
            let grid = SpaceTimeGrid::new(1.0, n_t, m, m).unwrap();
            let d = Density::from_fn(BoundaryTag::Outer, &grid, f);
            let s = hoelder_seminorm(&d, 0.5, &grid, &circle);
            assert!(s >= prev - 1e-8, "seminorm decreased under refinement: {s} < {prev}");
            prev = s;
        }
    }

    #[test]
    fn density_csv_roundtrip_format() {
        let grid = SpaceTimeGrid::new(1.0, 2, 8, 8).unwrap();
        let d = Density::from_fn(BoundaryTag::Outer, &grid, |t, theta| t + theta);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "panel,node,value");
        assert_eq!(text.lines().count(), 1 + 2 * 8);
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,0,"));
    }
}
