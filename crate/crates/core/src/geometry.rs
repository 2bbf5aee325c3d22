//! Boundary curves, shape maps of the inner boundary, and the admissibility
//! gate (injectivity, injective differential, containment with clearance).
//!
//! All curves are parametrized counterclockwise over `theta in [0, 2 pi)`; the
//! outward unit normal is the tangent rotated by `-pi/2`. Shape maps act on
//! the reference inner curve by a truncated Fourier displacement per
//! coordinate, which keeps every derived quantity (image tangent, pulled-back
//! normal, arc-length Jacobian) in closed form.

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

#[inline]
fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

/// Rotate by -pi/2: maps the CCW tangent to the outward normal direction.
#[inline]
fn rotate_minus_90(v: Point) -> Point {
    [v[1], -v[0]]
}

/// Truncated Fourier series `a0 + sum_k (a_k cos k theta + b_k sin k theta)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierSeries {
    pub a0: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn constant(a0: f64) -> Self {
        Self { a0, cos: Vec::new(), sin: Vec::new() }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut v = self.a0;
        for (k, a) in self.cos.iter().enumerate() {
            v += a * ((k + 1) as f64 * theta).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            v += b * ((k + 1) as f64 * theta).sin();
        }
        v
    }

    pub fn deriv(&self, theta: f64) -> f64 {
        let mut v = 0.0;
        for (k, a) in self.cos.iter().enumerate() {
            let kk = (k + 1) as f64;
            v -= a * kk * (kk * theta).sin();
        }
        for (k, b) in self.sin.iter().enumerate() {
            let kk = (k + 1) as f64;
            v += b * kk * (kk * theta).cos();
        }
        v
    }

    pub fn second_deriv(&self, theta: f64) -> f64 {
        let mut v = 0.0;
        for (k, a) in self.cos.iter().enumerate() {
            let kk = (k + 1) as f64;
            v -= a * kk * kk * (kk * theta).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            let kk = (k + 1) as f64;
            v -= b * kk * kk * (kk * theta).sin();
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        self.a0 == 0.0 && self.cos.iter().all(|c| *c == 0.0) && self.sin.iter().all(|c| *c == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            a0: self.a0 * factor,
            cos: self.cos.iter().map(|c| c * factor).collect(),
            sin: self.sin.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let nc = self.cos.len().max(other.cos.len());
        let ns = self.sin.len().max(other.sin.len());
        let mut cos = vec![0.0; nc];
        let mut sin = vec![0.0; ns];
        for (k, c) in self.cos.iter().enumerate() {
            cos[k] += c;
        }
        for (k, c) in other.cos.iter().enumerate() {
            cos[k] += c;
        }
        for (k, s) in self.sin.iter().enumerate() {
            sin[k] += s;
        }
        for (k, s) in other.sin.iter().enumerate() {
            sin[k] += s;
        }
        Self { a0: self.a0 + other.a0, cos, sin }
    }
}

/// Closed planar curve with closed-form parametrization and tangent.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCurve {
    Circle { center: Point, radius: f64 },
    Ellipse { center: Point, semi_x: f64, semi_y: f64 },
    /// Radial graph `rho(theta)` around `center`.
    RadialFourier { center: Point, rho: FourierSeries },
}

impl BoundaryCurve {
    pub fn circle(center: Point, radius: f64) -> Self {
        BoundaryCurve::Circle { center, radius }
    }

    pub fn ellipse(center: Point, semi_x: f64, semi_y: f64) -> Self {
        BoundaryCurve::Ellipse { center, semi_x, semi_y }
    }

    pub fn radial_fourier(center: Point, rho: FourierSeries) -> Self {
        BoundaryCurve::RadialFourier { center, rho }
    }

    pub fn point(&self, theta: f64) -> Point {
        let (c, s) = (theta.cos(), theta.sin());
        match self {
            BoundaryCurve::Circle { center, radius } => {
                [center[0] + radius * c, center[1] + radius * s]
            }
            BoundaryCurve::Ellipse { center, semi_x, semi_y } => {
                [center[0] + semi_x * c, center[1] + semi_y * s]
            }
            BoundaryCurve::RadialFourier { center, rho } => {
                let r = rho.eval(theta);
                [center[0] + r * c, center[1] + r * s]
            }
        }
    }

    /// Derivative of the parametrization with respect to theta.
    pub fn tangent(&self, theta: f64) -> Point {
        let (c, s) = (theta.cos(), theta.sin());
        match self {
            BoundaryCurve::Circle { radius, .. } => [-radius * s, radius * c],
            BoundaryCurve::Ellipse { semi_x, semi_y, .. } => [-semi_x * s, semi_y * c],
            BoundaryCurve::RadialFourier { rho, .. } => {
                let r = rho.eval(theta);
                let dr = rho.deriv(theta);
                [dr * c - r * s, dr * s + r * c]
            }
        }
    }

    pub fn speed(&self, theta: f64) -> f64 {
        norm(self.tangent(theta))
    }

    /// Outward unit normal (counterclockwise orientation assumed).
    pub fn normal_at(&self, theta: f64) -> Result<Point> {
        let t = self.tangent(theta);
        let len = norm(t);
        if len < 1e-14 {
            return Err(Error::DegenerateTangent { theta });
        }
        let n = rotate_minus_90(t);
        Ok([n[0] / len, n[1] / len])
    }

    /// Total arc length by an oversampled periodic trapezoidal rule; the rule
    /// converges geometrically for these analytic parametrizations.
    pub fn arc_length(&self) -> f64 {
        let m = 4096;
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        (0..m).map(|j| self.speed(j as f64 * dtheta)).sum::<f64>() * dtheta
    }

    /// Rough enclosing diameter, used to scale default clearances.
    pub fn diameter(&self) -> f64 {
        match self {
            BoundaryCurve::Circle { radius, .. } => 2.0 * radius,
            BoundaryCurve::Ellipse { semi_x, semi_y, .. } => 2.0 * semi_x.max(*semi_y),
            BoundaryCurve::RadialFourier { rho, .. } => {
                let m = 256;
                let dtheta = 2.0 * std::f64::consts::PI / m as f64;
                2.0 * (0..m)
                    .map(|j| rho.eval(j as f64 * dtheta))
                    .fold(0.0f64, f64::max)
            }
        }
    }

    /// Winding number about `p`, computed by summing signed turning angles
    /// over a dense polygonal sampling. Robust for non-convex curves.
    pub fn winding_number(&self, p: Point, samples: usize) -> i32 {
        let m = samples.max(64);
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        let mut total = 0.0;
        let mut prev = self.point(0.0);
        for j in 1..=m {
            let cur = self.point(j as f64 * dtheta);
            let v0 = [prev[0] - p[0], prev[1] - p[1]];
            let v1 = [cur[0] - p[0], cur[1] - p[1]];
            let cross = v0[0] * v1[1] - v0[1] * v1[0];
            let dot = v0[0] * v1[0] + v0[1] * v1[1];
            total += cross.atan2(dot);
            prev = cur;
        }
        (total / (2.0 * std::f64::consts::PI)).round() as i32
    }

    /// Minimum distance from `p` to a dense sampling of the curve.
    pub fn distance_to(&self, p: Point, samples: usize) -> f64 {
        let m = samples.max(64);
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        (0..m)
            .map(|j| dist2(self.point(j as f64 * dtheta), p).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Truncated Fourier displacement of a curve, one series per coordinate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierDisplacement {
    pub x: FourierSeries,
    pub y: FourierSeries,
}

impl FourierDisplacement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn eval(&self, theta: f64) -> Point {
        [self.x.eval(theta), self.y.eval(theta)]
    }

    pub fn deriv(&self, theta: f64) -> Point {
        [self.x.deriv(theta), self.y.deriv(theta)]
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { x: self.x.scaled(factor), y: self.y.scaled(factor) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { x: self.x.add(&other.x), y: self.y.add(&other.y) }
    }

    /// Constant translation by `v`.
    pub fn translation(v: Point) -> Self {
        Self { x: FourierSeries::constant(v[0]), y: FourierSeries::constant(v[1]) }
    }

    /// Displacement realizing `p -> center + c (p - center)` for a circle of
    /// radius `r` about `center`, i.e. uniform radial scaling.
    pub fn circle_scaling(radius: f64, factor: f64) -> Self {
        let amp = (factor - 1.0) * radius;
        Self {
            x: FourierSeries { a0: 0.0, cos: vec![amp], sin: vec![] },
            y: FourierSeries { a0: 0.0, cos: vec![], sin: vec![amp] },
        }
    }

    /// Unit radial direction field of a circle of radius `r`: the velocity of
    /// `circle_scaling` at `factor = 1`.
    pub fn circle_radial_direction(radius: f64) -> Self {
        Self {
            x: FourierSeries { a0: 0.0, cos: vec![radius], sin: vec![] },
            y: FourierSeries { a0: 0.0, cos: vec![], sin: vec![radius] },
        }
    }

    /// Radial bump `amp cos(m theta)` on a circle of radius `r`:
    /// displacement `amp cos(m theta) (cos theta, sin theta)` expanded in
    /// Fourier modes `m - 1` and `m + 1`.
    pub fn circle_radial_bump(amplitude: f64, mode: usize) -> Self {
        assert!(mode >= 1);
        let mut cos = vec![0.0; mode + 1];
        let mut sin = vec![0.0; mode + 1];
        // cos(m t) cos t = (cos(m+1)t + cos(m-1)t)/2
        cos[mode] += 0.5 * amplitude;
        if mode == 1 {
            // cos(0 t)/2 contributes to a0
        } else {
            cos[mode - 2] += 0.5 * amplitude;
        }
        // cos(m t) sin t = (sin(m+1)t - sin(m-1)t)/2
        sin[mode] += 0.5 * amplitude;
        if mode >= 2 {
            sin[mode - 2] -= 0.5 * amplitude;
        }
        let a0 = if mode == 1 { 0.5 * amplitude } else { 0.0 };
        Self {
            x: FourierSeries { a0, cos, sin: vec![] },
            y: FourierSeries { a0: 0.0, cos: vec![], sin },
        }
    }

    /// Displacement realizing a rigid rotation of a circle or ellipse about
    /// its center.
    pub fn rigid_rotation(curve: &BoundaryCurve, angle: f64) -> Self {
        let (ca, sa) = (angle.cos(), angle.sin());
        match curve {
            BoundaryCurve::Circle { radius, .. } => {
                // (R - I)(r cos, r sin)
                Self {
                    x: FourierSeries { a0: 0.0, cos: vec![radius * (ca - 1.0)], sin: vec![-radius * sa] },
                    y: FourierSeries { a0: 0.0, cos: vec![radius * sa], sin: vec![radius * (ca - 1.0)] },
                }
            }
            BoundaryCurve::Ellipse { semi_x, semi_y, .. } => Self {
                x: FourierSeries {
                    a0: 0.0,
                    cos: vec![semi_x * (ca - 1.0)],
                    sin: vec![-semi_y * sa],
                },
                y: FourierSeries {
                    a0: 0.0,
                    cos: vec![semi_x * sa],
                    sin: vec![semi_y * (ca - 1.0)],
                },
            },
            BoundaryCurve::RadialFourier { .. } => {
                unimplemented!("rigid rotation displacement is provided for circles and ellipses")
            }
        }
    }
}

/// Perturbation `phi` of the reference inner boundary: `phi(y(theta)) =
/// y(theta) + displacement(theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeMap {
    pub reference: BoundaryCurve,
    pub displacement: FourierDisplacement,
}

impl ShapeMap {
    pub fn identity(reference: BoundaryCurve) -> Self {
        Self { reference, displacement: FourierDisplacement::zero() }
    }

    pub fn new(reference: BoundaryCurve, displacement: FourierDisplacement) -> Self {
        Self { reference, displacement }
    }

    pub fn is_identity(&self) -> bool {
        self.displacement.is_zero()
    }

    /// `phi + eps * h` in the displacement parameters.
    pub fn perturbed(&self, direction: &FourierDisplacement, eps: f64) -> Self {
        Self {
            reference: self.reference.clone(),
            displacement: self.displacement.add(&direction.scaled(eps)),
        }
    }

    /// Image point `phi(y(theta))`.
    pub fn point(&self, theta: f64) -> Point {
        let p = self.reference.point(theta);
        let d = self.displacement.eval(theta);
        [p[0] + d[0], p[1] + d[1]]
    }

    /// Tangent of the image curve, `d/dtheta phi(y(theta))`.
    pub fn tangent(&self, theta: f64) -> Point {
        let t = self.reference.tangent(theta);
        let d = self.displacement.deriv(theta);
        [t[0] + d[0], t[1] + d[1]]
    }

    pub fn image_speed(&self, theta: f64) -> f64 {
        norm(self.tangent(theta))
    }

    /// Pulled-back outward unit normal `nu_{omega[phi]}(phi(y(theta)))`.
    pub fn pullback_normal(&self, theta: f64) -> Result<Point> {
        let t = self.tangent(theta);
        let len = norm(t);
        if len < 1e-14 {
            return Err(Error::DegenerateTangent { theta });
        }
        let n = rotate_minus_90(t);
        Ok([n[0] / len, n[1] / len])
    }

    /// Arc-length change-of-variables density: ratio of the image arc-length
    /// element to the reference arc-length element. Strictly positive on
    /// admissible maps.
    pub fn jacobian_sigma(&self, theta: f64) -> Result<f64> {
        let ref_speed = self.reference.speed(theta);
        if ref_speed < 1e-14 {
            return Err(Error::DegenerateTangent { theta });
        }
        let img = self.image_speed(theta);
        if img < 1e-14 {
            return Err(Error::DegenerateTangent { theta });
        }
        Ok(img / ref_speed)
    }

    /// Total arc length of the image curve.
    pub fn image_arc_length(&self) -> f64 {
        let m = 4096;
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        (0..m).map(|j| self.image_speed(j as f64 * dtheta)).sum::<f64>() * dtheta
    }

    /// Discrete admissibility gate for membership in the class of shape maps
    /// whose image hole stays inside `outer` with clearance `delta_geo`.
    ///
    /// All checks run on `m_nodes` parameter samples; the continuous class is
    /// not decidable exactly and this report is the documented approximation.
    pub fn check_admissible(
        &self,
        outer: &BoundaryCurve,
        delta_geo: f64,
        m_nodes: usize,
    ) -> AdmissibilityReport {
        let m = m_nodes.max(16);
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        let pts: Vec<Point> = (0..m).map(|j| self.point(j as f64 * dtheta)).collect();

        // Injective differential: image tangent bounded away from zero.
        let mut min_speed = f64::INFINITY;
        for j in 0..m {
            min_speed = min_speed.min(self.image_speed(j as f64 * dtheta));
        }
        let differential_ok = min_speed > 1e-10 * self.reference.diameter();

        // Injectivity on the node polygon: no pair of non-adjacent segments
        // intersects, and nodes are pairwise distinct.
        let injective = polygon_is_simple(&pts);

        // Orientation: the image polygon stays counterclockwise.
        let orientation_ok = polygon_signed_area(&pts) > 0.0;

        // Containment with margin: winding number one and clearance from the
        // outer curve for every image node.
        let dense = 4 * m.max(128);
        let mut contained = true;
        let mut min_clearance = f64::INFINITY;
        for p in &pts {
            if outer.winding_number(*p, dense) != 1 {
                contained = false;
            }
            min_clearance = min_clearance.min(outer.distance_to(*p, dense));
        }
        let clearance_ok = min_clearance >= delta_geo;

        AdmissibilityReport {
            injective,
            differential_ok,
            contained,
            clearance_ok,
            orientation_ok,
            min_clearance,
            min_image_speed: min_speed,
            delta_geo,
        }
    }

    /// Admissibility with the default clearance `0.05 * diam(outer)`.
    pub fn check_admissible_default(
        &self,
        outer: &BoundaryCurve,
        m_nodes: usize,
    ) -> AdmissibilityReport {
        self.check_admissible(outer, 0.05 * outer.diameter(), m_nodes)
    }

    /// Discrete Hoelder seminorm of the image tangent field, reported as a
    /// C^{1,alpha} regularity diagnostic only.
    pub fn tangent_hoelder_diagnostic(&self, alpha: f64, m_nodes: usize) -> f64 {
        let m = m_nodes.max(16);
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        let tangents: Vec<Point> = (0..m).map(|j| self.tangent(j as f64 * dtheta)).collect();
        let mut sup: f64 = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let raw = (j - i) as f64 * dtheta;
                let dist = raw.min(2.0 * std::f64::consts::PI - raw);
                let diff = norm([tangents[i][0] - tangents[j][0], tangents[i][1] - tangents[j][1]]);
                sup = sup.max(diff / dist.powf(alpha));
            }
        }
        sup
    }
}

/// Per-invariant admissibility outcome, usable as a gate before solving.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub injective: bool,
    pub differential_ok: bool,
    pub contained: bool,
    pub clearance_ok: bool,
    pub orientation_ok: bool,
    pub min_clearance: f64,
    pub min_image_speed: f64,
    pub delta_geo: f64,
}

impl AdmissibilityReport {
    pub fn pass(&self) -> bool {
        self.injective
            && self.differential_ok
            && self.contained
            && self.clearance_ok
            && self.orientation_ok
    }

    pub fn failure_reason(&self) -> String {
        let mut reasons = Vec::new();
        if !self.injective {
            reasons.push("node polygon self-intersects".to_string());
        }
        if !self.differential_ok {
            reasons.push(format!("degenerate differential (min speed {:.3e})", self.min_image_speed));
        }
        if !self.contained {
            reasons.push("image not contained in outer domain".to_string());
        }
        if !self.clearance_ok {
            reasons.push(format!(
                "clearance {:.4} below margin {:.4}",
                self.min_clearance, self.delta_geo
            ));
        }
        if !self.orientation_ok {
            reasons.push("image polygon not counterclockwise".to_string());
        }
        reasons.join("; ")
    }
}

fn polygon_signed_area(pts: &[Point]) -> f64 {
    let m = pts.len();
    let mut area = 0.0;
    for i in 0..m {
        let a = pts[i];
        let b = pts[(i + 1) % m];
        area += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * area
}

/// Brute-force pairwise segment test over the closed node polygon.
fn polygon_is_simple(pts: &[Point]) -> bool {
    let m = pts.len();
    if m < 3 {
        return false;
    }
    for i in 0..m {
        for j in (i + 1)..m {
            // Skip adjacent segments (they share an endpoint).
            if j == i || (j + 1) % m == i || (i + 1) % m == j {
                continue;
            }
            let (a, b) = (pts[i], pts[(i + 1) % m]);
            let (c, d) = (pts[j], pts[(j + 1) % m]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    fn orient(p: Point, q: Point, r: Point) -> f64 {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    }
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_normals_are_radial() {
        let c = BoundaryCurve::circle([0.0, 0.0], 1.0);
        let n = c.normal_at(0.0).unwrap();
        assert_relative_eq!(n[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(n[1], 0.0, epsilon = 1e-14);

        let c = BoundaryCurve::circle([1.0, 0.0], 2.0);
        let n = c.normal_at(std::f64::consts::PI).unwrap();
        assert_relative_eq!(n[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(n[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn ellipse_normal_at_axis_point() {
        let e = BoundaryCurve::ellipse([0.0, 0.0], 2.0, 1.0);
        let n = e.normal_at(std::f64::consts::FRAC_PI_2).unwrap();
        assert_relative_eq!(n[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(n[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pullback_normal_reduces_to_normal_for_identity_and_scaling() {
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0);
        let idm = ShapeMap::identity(circle.clone());
        let n = idm.pullback_normal(0.0).unwrap();
        assert_relative_eq!(n[0], 1.0, epsilon = 1e-14);

        let scaled = ShapeMap::new(circle.clone(), FourierDisplacement::circle_scaling(1.0, 0.5));
        for &theta in &[0.0, 0.7, 2.1, 4.4] {
            let a = scaled.pullback_normal(theta).unwrap();
            let b = idm.pullback_normal(theta).unwrap();
            assert_relative_eq!(a[0], b[0], epsilon = 1e-13);
            assert_relative_eq!(a[1], b[1], epsilon = 1e-13);
        }
    }

    #[test]
    fn pullback_normal_of_rotated_ellipse_matches_rotated_normal() {
        // Independent route: evaluate normal_at on the rotated curve itself.
        let ellipse = BoundaryCurve::ellipse([0.0, 0.0], 2.0, 1.0);
        let angle = std::f64::consts::FRAC_PI_2;
        let rotated = ShapeMap::new(
            ellipse.clone(),
            FourierDisplacement::rigid_rotation(&ellipse, angle),
        );
        // The rotated ellipse is an ellipse with swapped semi-axes, but the
        // parameter shifts: phi(y(theta)) = R y(theta), so compare against
        // R applied to the unrotated normal.
        for &theta in &[0.0, 0.5, 1.3, 3.9] {
            let n0 = ellipse.normal_at(theta).unwrap();
            let expected = [-n0[1], n0[0]];
            let n = rotated.pullback_normal(theta).unwrap();
            assert_relative_eq!(n[0], expected[0], epsilon = 1e-12);
            assert_relative_eq!(n[1], expected[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_sigma_identity_and_scaling() {
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0);
        let idm = ShapeMap::identity(circle.clone());
        for &theta in &[0.0, 1.0, 2.5, 5.0] {
            assert_relative_eq!(idm.jacobian_sigma(theta).unwrap(), 1.0, epsilon = 1e-14);
        }
        let c = 0.7;
        let scaled = ShapeMap::new(circle, FourierDisplacement::circle_scaling(1.0, c));
        for &theta in &[0.0, 0.9, 3.3] {
            assert_relative_eq!(scaled.jacobian_sigma(theta).unwrap(), c, epsilon = 1e-13);
        }
    }

    #[test]
    fn jacobian_sigma_matches_finite_difference_arc_length_oracle() {
        // Fourier bump r = 1 + 0.1 cos(3 theta); oracle differentiates the
        // parametrizations directly with step 1e-6.
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0);
        let bump = ShapeMap::new(circle, FourierDisplacement::circle_radial_bump(0.1, 3));
        let h = 1e-6;
        for j in 0..24 {
            let theta = j as f64 * std::f64::consts::PI / 12.0;
            let img_p = bump.point(theta + h);
            let img_m = bump.point(theta - h);
            let img_speed = ((img_p[0] - img_m[0]).powi(2) + (img_p[1] - img_m[1]).powi(2)).sqrt()
                / (2.0 * h);
            let ref_p = bump.reference.point(theta + h);
            let ref_m = bump.reference.point(theta - h);
            let ref_speed = ((ref_p[0] - ref_m[0]).powi(2) + (ref_p[1] - ref_m[1]).powi(2)).sqrt()
                / (2.0 * h);
            let oracle = img_speed / ref_speed;
            let sigma = bump.jacobian_sigma(theta).unwrap();
            assert!(
                (sigma - oracle).abs() / oracle < 1e-5,
                "theta={theta}: {sigma} vs {oracle}"
            );
        }
    }

    #[test]
    fn sigma_integral_recovers_image_arc_length() {
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0);
        // Closed form for scalings: length = 2 pi c.
        let c = 1.3;
        let scaled = ShapeMap::new(circle.clone(), FourierDisplacement::circle_scaling(1.0, c));
        let m = 512;
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        let quad: f64 = (0..m)
            .map(|j| {
                let theta = j as f64 * dtheta;
                scaled.jacobian_sigma(theta).unwrap() * scaled.reference.speed(theta)
            })
            .sum::<f64>()
            * dtheta;
        assert_relative_eq!(quad, 2.0 * std::f64::consts::PI * c, epsilon = 1e-8);

        let bump = ShapeMap::new(circle, FourierDisplacement::circle_radial_bump(0.1, 3));
        let quad: f64 = (0..m)
            .map(|j| {
                let theta = j as f64 * dtheta;
                bump.jacobian_sigma(theta).unwrap() * bump.reference.speed(theta)
            })
            .sum::<f64>()
            * dtheta;
        assert_relative_eq!(quad, bump.image_arc_length(), epsilon = 1e-8);
    }

    #[test]
    fn admissibility_gate_cases() {
        let outer = BoundaryCurve::circle([0.0, 0.0], 3.0);
        let unit = BoundaryCurve::circle([0.0, 0.0], 1.0);

        let idm = ShapeMap::identity(unit.clone());
        assert!(idm.check_admissible(&outer, 0.1, 64).pass());

        let too_big = ShapeMap::new(unit.clone(), FourierDisplacement::circle_scaling(1.0, 4.0));
        let report = too_big.check_admissible(&outer, 0.1, 64);
        assert!(!report.contained || !report.clearance_ok);
        assert!(!report.pass());

        // Limacon-type map r(theta) = 0.3 + 0.7 cos(theta): self-intersecting.
        let limacon = BoundaryCurve::radial_fourier(
            [0.0, 0.0],
            FourierSeries { a0: 0.3, cos: vec![0.7], sin: vec![] },
        );
        let self_x = ShapeMap::identity(limacon);
        let report = self_x.check_admissible(&outer, 0.1, 128);
        assert!(!report.injective, "limacon should fail the injectivity test");
    }

    #[test]
    fn rigid_motion_preserves_sigma_and_normals() {
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0);
        let angle = 0.6;
        let rot = ShapeMap::new(circle.clone(), FourierDisplacement::rigid_rotation(&circle, angle));
        let (ca, sa) = (angle.cos(), angle.sin());
        for j in 0..16 {
            let theta = j as f64 * std::f64::consts::PI / 8.0;
            assert_relative_eq!(rot.jacobian_sigma(theta).unwrap(), 1.0, epsilon = 1e-13);
            let n0 = circle.normal_at(theta).unwrap();
            let expected = [ca * n0[0] - sa * n0[1], sa * n0[0] + ca * n0[1]];
            let n = rot.pullback_normal(theta).unwrap();
            assert_relative_eq!(n[0], expected[0], epsilon = 1e-13);
            assert_relative_eq!(n[1], expected[1], epsilon = 1e-13);
        }
        // Translations too.
        let tr = ShapeMap::new(circle.clone(), FourierDisplacement::translation([0.4, -0.2]));
        for j in 0..8 {
            let theta = j as f64 * std::f64::consts::PI / 4.0;
            assert_relative_eq!(tr.jacobian_sigma(theta).unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn tangent_hoelder_diagnostic_behaves() {
        // Finite, positive, absolutely homogeneous under displacement
        // scaling of the oscillatory part.
        let circle = BoundaryCurve::circle([0.0, 0.0], 1.0);
        let idm = ShapeMap::identity(circle.clone());
        let base = idm.tangent_hoelder_diagnostic(0.5, 64);
        assert!(base.is_finite() && base > 0.0);
        // A wigglier shape has a larger diagnostic.
        let bump = ShapeMap::new(circle, FourierDisplacement::circle_radial_bump(0.1, 5));
        let wiggly = bump.tangent_hoelder_diagnostic(0.5, 64);
        assert!(wiggly > base);
    }

    proptest::proptest! {
        /// Pulled-back normals are unit vectors for random mild Fourier shapes.
        #[test]
        fn pullback_normal_unit_length(
            a1 in -0.15f64..0.15,
            b2 in -0.1f64..0.1,
            a3 in -0.08f64..0.08,
            theta in 0.0f64..6.28,
        ) {
            let circle = BoundaryCurve::circle([0.0, 0.0], 1.0);
            let disp = FourierDisplacement {
                x: FourierSeries { a0: 0.0, cos: vec![a1, 0.0, a3], sin: vec![] },
                y: FourierSeries { a0: 0.0, cos: vec![], sin: vec![0.0, b2] },
            };
            let shape = ShapeMap::new(circle, disp);
            let n = shape.pullback_normal(theta).unwrap();
            proptest::prop_assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
        }
    }
}
