//! Obstacle geometry: signed distance, nearest-point projection, boundary
//! normals, and the second fundamental form of the obstacle boundary.
//!
//! The obstacle is a compact set in the target space; maps must take values
//! in its closed complement. Sign convention: the signed distance `rho` is
//! positive outside the obstacle, negative inside, zero on the boundary, and
//! the unit normal `nu` points away from the obstacle.

mod ellipsoid;
mod polyline;

pub use polyline::PlanarCurveData;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum ObstacleKind {
    /// Origin-centered ball of radius `radius` in R^m.
    Ball { radius: f64 },
    /// Origin-centered axis-aligned ellipsoid with the given semi-axes.
    Ellipsoid { semi_axes: Vec<f64> },
    /// Closed simple polyline in R^2 enclosing the obstacle region.
    PlanarCurve(PlanarCurveData),
}

#[derive(Debug, Clone)]
pub struct ObstacleGeometry {
    kind: ObstacleKind,
    m: usize,
    tubular_radius: f64,
}

/// Tolerance for "on the boundary" queries, relative to the obstacle size.
const BOUNDARY_TOL: f64 = 1e-7;

impl ObstacleGeometry {
    pub fn ball(radius: f64, m: usize) -> Self {
        assert!(radius > 0.0 && m >= 1);
        ObstacleGeometry {
            kind: ObstacleKind::Ball { radius },
            m,
            // projection is single-valued up to the center
            tubular_radius: radius,
        }
    }

    pub fn ellipsoid(semi_axes: Vec<f64>) -> Self {
        assert!(semi_axes.len() >= 2 && semi_axes.iter().all(|&s| s > 0.0));
        let m = semi_axes.len();
        let s_max = semi_axes.iter().cloned().fold(0.0, f64::max);
        let s_min = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
        // smallest radius of curvature bounds the inside reach
        let tubular_radius = s_min * s_min / s_max;
        ObstacleGeometry {
            kind: ObstacleKind::Ellipsoid { semi_axes },
            m,
            tubular_radius,
        }
    }

    /// Closed simple polyline; orientation is normalized internally.
    /// `tubular_radius` overrides the curvature-based reach estimate.
    pub fn planar_curve(vertices: Vec<[f64; 2]>, tubular_radius: Option<f64>) -> Result<Self> {
        let data = PlanarCurveData::new(vertices)?;
        let reach = data.reach_estimate();
        Ok(ObstacleGeometry {
            kind: ObstacleKind::PlanarCurve(data),
            m: 2,
            tubular_radius: tubular_radius.unwrap_or(reach),
        })
    }

    /// C-shaped obstacle: an annular wall `r_inner <= r <= r_outer` with an
    /// opening of half-angle `gap_half_angle` (radians) around the positive
    /// x-axis. Normal rays from the inner arc re-enter the wall on the far
    /// side, so this obstacle violates the outward-ray condition.
    pub fn c_obstacle(r_inner: f64, r_outer: f64, gap_half_angle: f64, arc_points: usize) -> Self {
        assert!(0.0 < r_inner && r_inner < r_outer);
        assert!(gap_half_angle > 0.0 && gap_half_angle < std::f64::consts::PI / 2.0);
        let k = arc_points.max(32);
        let a0 = gap_half_angle;
        let a1 = 2.0 * std::f64::consts::PI - gap_half_angle;
        let mut vertices: Vec<[f64; 2]> = Vec::new();
        // outer arc, counterclockwise
        for i in 0..=k {
            let th = a0 + (a1 - a0) * i as f64 / k as f64;
            vertices.push([r_outer * th.cos(), r_outer * th.sin()]);
        }
        // cap at the far gap lip, walking inward
        let caps = (k / 16).max(2);
        for i in 1..caps {
            let r = r_outer + (r_inner - r_outer) * i as f64 / caps as f64;
            vertices.push([r * a1.cos(), r * a1.sin()]);
        }
        // inner arc, clockwise (keeps the wall on the left of travel)
        for i in 0..=k {
            let th = a1 + (a0 - a1) * i as f64 / k as f64;
            vertices.push([r_inner * th.cos(), r_inner * th.sin()]);
        }
        // cap at the near gap lip, walking back outward
        for i in 1..caps {
            let r = r_inner + (r_outer - r_inner) * i as f64 / caps as f64;
            vertices.push([r * a0.cos(), r * a0.sin()]);
        }
        ObstacleGeometry::planar_curve(vertices, None)
            .expect("built-in C obstacle polyline is simple and closed")
    }

    pub fn kind(&self) -> &ObstacleKind {
        &self.kind
    }

    /// Target space dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Radius of the tubular neighborhood of the boundary within which the
    /// nearest-point projection is taken to be single-valued.
    pub fn tubular_radius(&self) -> f64 {
        self.tubular_radius
    }

    pub fn is_convex(&self) -> bool {
        match &self.kind {
            ObstacleKind::Ball { .. } | ObstacleKind::Ellipsoid { .. } => true,
            ObstacleKind::PlanarCurve(data) => data.is_convex(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            ObstacleKind::Ball { radius } => 2.0 * radius,
            ObstacleKind::Ellipsoid { semi_axes } => {
                2.0 * semi_axes.iter().cloned().fold(0.0, f64::max)
            }
            ObstacleKind::PlanarCurve(data) => data.bbox_diagonal(),
        }
    }

    /// Center and radius of a circle/sphere enclosing the obstacle.
    pub fn enclosing_ball(&self) -> (Vec<f64>, f64) {
        match &self.kind {
            ObstacleKind::Ball { radius } => (vec![0.0; self.m], *radius),
            ObstacleKind::Ellipsoid { semi_axes } => (
                vec![0.0; self.m],
                semi_axes.iter().cloned().fold(0.0, f64::max),
            ),
            ObstacleKind::PlanarCurve(data) => {
                let (c, r) = data.enclosing_circle();
                (c.to_vec(), r)
            }
        }
    }

    /// Signed distance to the obstacle boundary. Exact for balls; for
    /// ellipsoids and polylines accurate to the geometric root-finding and
    /// segment-resolution tolerance.
    pub fn signed_distance(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.m);
        match &self.kind {
            ObstacleKind::Ball { radius } => norm(y) - radius,
            ObstacleKind::Ellipsoid { semi_axes } => ellipsoid::signed_distance(semi_axes, y),
            ObstacleKind::PlanarCurve(data) => data.signed_distance([y[0], y[1]]),
        }
    }

    /// Nearest boundary point and the outward unit normal there.
    ///
    /// Returns `NonUniqueProjection` when `y` lies at or beyond the medial
    /// axis inside the obstacle (for example the center of a ball).
    pub fn project_to_boundary(&self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        debug_assert_eq!(y.len(), self.m);
        let scale = self.diameter();
        match &self.kind {
            ObstacleKind::Ball { radius } => {
                let r = norm(y);
                if r <= 1e-12 * scale {
                    return Err(Error::NonUniqueProjection { point: y.to_vec() });
                }
                let nu: Vec<f64> = y.iter().map(|v| v / r).collect();
                let pi: Vec<f64> = nu.iter().map(|v| v * radius).collect();
                Ok((pi, nu))
            }
            ObstacleKind::Ellipsoid { semi_axes } => {
                let rho = ellipsoid::signed_distance(semi_axes, y);
                if rho < 0.0 && -rho >= self.tubular_radius {
                    return Err(Error::NonUniqueProjection { point: y.to_vec() });
                }
                let pi = ellipsoid::nearest_boundary_point(semi_axes, y);
                let nu = ellipsoid::outward_normal(semi_axes, &pi);
                Ok((pi, nu))
            }
            ObstacleKind::PlanarCurve(data) => {
                let rho = data.signed_distance([y[0], y[1]]);
                if rho < 0.0 && -rho >= self.tubular_radius {
                    return Err(Error::NonUniqueProjection { point: y.to_vec() });
                }
                let (pi, nu) = data.project([y[0], y[1]]);
                Ok((pi.to_vec(), nu.to_vec()))
            }
        }
    }

    /// Second fundamental form `A_y(xi, xi)` of the boundary at `y`, valued
    /// in the normal direction. Normalized so that on a sphere of radius `a`
    /// it equals `-(|xi|^2 / a^2) y`. Non-tangential components of `xi` are
    /// projected off before evaluation.
    pub fn second_fundamental_form(&self, y: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(y.len(), self.m);
        debug_assert_eq!(xi.len(), self.m);
        let tol = BOUNDARY_TOL * self.diameter();
        let rho = self.signed_distance(y);
        if rho.abs() > tol {
            return Err(Error::NotOnBoundary {
                point: y.to_vec(),
                rho,
            });
        }
        match &self.kind {
            ObstacleKind::Ball { radius } => {
                let nu: Vec<f64> = {
                    let r = norm(y);
                    y.iter().map(|v| v / r).collect()
                };
                let xi_t = project_off(xi, &nu);
                let q = dot(&xi_t, &xi_t) / (radius * radius);
                Ok(y.iter().map(|v| -q * v).collect())
            }
            ObstacleKind::Ellipsoid { semi_axes } => {
                let nu = ellipsoid::outward_normal(semi_axes, y);
                let xi_t = project_off(xi, &nu);
                // For a level set F = 1 with outward normal grad F / |grad F|
                // the normal curvature in direction xi is xi' H(F) xi / |grad F|.
                let hess_quad: f64 = xi_t
                    .iter()
                    .zip(semi_axes)
                    .map(|(x, s)| 2.0 * x * x / (s * s))
                    .sum();
                let grad_norm = ellipsoid::gradient_norm(semi_axes, y);
                let q = hess_quad / grad_norm;
                Ok(nu.iter().map(|v| -q * v).collect())
            }
            ObstacleKind::PlanarCurve(data) => {
                let (pi, nu) = data.project([y[0], y[1]]);
                let kappa = data.curvature_at(pi);
                let xi_t = project_off(xi, &nu);
                let q = kappa * dot(&xi_t, &xi_t);
                Ok(vec![-q * nu[0], -q * nu[1]])
            }
        }
    }

    /// Uniform boundary sample with outward normals.
    pub fn sample_boundary(&self, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        match &self.kind {
            ObstacleKind::Ball { radius } => directions(self.m, count)
                .into_iter()
                .map(|d| (d.iter().map(|v| v * radius).collect(), d))
                .collect(),
            ObstacleKind::Ellipsoid { semi_axes } => directions(self.m, count)
                .into_iter()
                .map(|d| {
                    let p: Vec<f64> = d.iter().zip(semi_axes).map(|(v, s)| v * s).collect();
                    let nu = ellipsoid::outward_normal(semi_axes, &p);
                    (p, nu)
                })
                .collect(),
            ObstacleKind::PlanarCurve(data) => data
                .sample_by_arclength(count)
                .into_iter()
                .map(|(p, n)| (p.to_vec(), n.to_vec()))
                .collect(),
        }
    }

    /// Checks whether every outward normal ray leaves the obstacle for good.
    ///
    /// Each ray `y + t nu(y)` is marched over `(0, t_max]` with the signed
    /// distance as a safe step bound (the distance function is 1-Lipschitz,
    /// so stepping by `|rho|` cannot jump across the boundary). A small step
    /// floor guarantees termination; re-entry deeper than the floor cannot
    /// be missed.
    pub fn ray_condition_check(&self, boundary_samples: usize, t_max: f64) -> RayConditionReport {
        assert!(boundary_samples >= 16, "need at least 16 boundary samples");
        assert!(
            t_max >= self.diameter(),
            "t_max must be at least the obstacle diameter"
        );
        let floor = 1e-4 * t_max;
        let enter_tol = -1e-7 * self.diameter();
        let mut violations = Vec::new();
        for (y, nu) in self.sample_boundary(boundary_samples) {
            let mut t = floor;
            let mut probe = vec![0.0; self.m];
            while t <= t_max {
                for i in 0..self.m {
                    probe[i] = y[i] + t * nu[i];
                }
                let d = self.signed_distance(&probe);
                if d < enter_tol {
                    violations.push((y.clone(), t));
                    break;
                }
                t += d.max(floor);
            }
        }
        RayConditionReport {
            holds: violations.is_empty(),
            violations,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RayConditionReport {
    pub holds: bool,
    /// Witnesses `(y, t)` where the ray from `y` re-entered the obstacle.
    pub violations: Vec<(Vec<f64>, f64)>,
}

/// Deterministic quasi-uniform unit directions (angles in 2-D, a Fibonacci
/// sphere in 3-D).
fn directions(m: usize, count: usize) -> Vec<Vec<f64>> {
    match m {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => (0..count)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
        _ => {
            // axis directions plus diagonals; adequate for smoke checks in high m
            let mut dirs = Vec::new();
            for i in 0..m {
                for sign in [-1.0, 1.0] {
                    let mut d = vec![0.0; m];
                    d[i] = sign;
                    dirs.push(d);
                }
            }
            dirs
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_off(xi: &[f64], nu: &[f64]) -> Vec<f64> {
    let c = dot(xi, nu);
    xi.iter().zip(nu).map(|(x, n)| x - c * n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_signed_distance() {
        let obs = ObstacleGeometry::ball(0.5, 2);
        assert_relative_eq!(obs.signed_distance(&[1.0, 0.0]), 0.5);
        assert_relative_eq!(obs.signed_distance(&[0.25, 0.0]), -0.25);
    }

    #[test]
    fn ellipsoid_on_axis_distance() {
        let obs = ObstacleGeometry::ellipsoid(vec![1.0, 2.0]);
        assert_relative_eq!(obs.signed_distance(&[0.0, 3.0]), 1.0, epsilon = 1e-10);
        assert_relative_eq!(obs.signed_distance(&[3.0, 0.0]), 2.0, epsilon = 1e-10);
        // inside point: the nearest boundary point of (0, 1) is not the pole
        // but (±sqrt(5)/3, 4/3), at distance sqrt(2/3)
        assert_relative_eq!(
            obs.signed_distance(&[0.0, 1.0]),
            -(2.0f64 / 3.0).sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn ball_projection() {
        let obs = ObstacleGeometry::ball(0.5, 2);
        let (pi, nu) = obs.project_to_boundary(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(pi[0], 0.5);
        assert_relative_eq!(nu[0], 1.0);
        let (pi, nu) = obs.project_to_boundary(&[0.25, 0.0]).unwrap();
        assert_relative_eq!(pi[0], 0.5);
        assert_relative_eq!(nu[0], 1.0);
        assert!(matches!(
            obs.project_to_boundary(&[0.0, 0.0]),
            Err(Error::NonUniqueProjection { .. })
        ));
    }

    #[test]
    fn sphere_second_fundamental_form() {
        let obs = ObstacleGeometry::ball(0.5, 3);
        let a = obs
            .second_fundamental_form(&[0.5, 0.0, 0.0], &[0.0, 1.0, 0.0])
            .unwrap();
        assert_relative_eq!(a[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(a[1], 0.0);
        let a = obs
            .second_fundamental_form(&[0.5, 0.0, 0.0], &[0.0, 0.0, 2.0])
            .unwrap();
        assert_relative_eq!(a[0], -8.0, epsilon = 1e-12);
        assert!(matches!(
            obs.second_fundamental_form(&[0.7, 0.0, 0.0], &[0.0, 1.0, 0.0]),
            Err(Error::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn ellipse_second_fundamental_form_matches_vertex_curvature() {
        let obs = ObstacleGeometry::ellipsoid(vec![1.0, 2.0]);
        let a = obs
            .second_fundamental_form(&[1.0, 0.0], &[0.0, 1.0])
            .unwrap();
        // curvature of x^2 + y^2/4 = 1 at (1, 0) is s1/s2^2 = 1/4
        assert_relative_eq!(a[0], -0.25, epsilon = 1e-10);
        assert_relative_eq!(a[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ellipse_sff_against_finite_difference_curvature() {
        // independent check: curvature from finite differences of a dense
        // boundary parametrization theta -> (cos theta, 2 sin theta)
        let obs = ObstacleGeometry::ellipsoid(vec![1.0, 2.0]);
        let n = 20_000usize;
        let dt = 2.0 * std::f64::consts::PI / n as f64;
        for &theta in &[0.0, 0.7, 1.3, std::f64::consts::FRAC_PI_2, 2.9] {
            let p = [theta.cos(), 2.0 * theta.sin()];
            let pm = [(theta - dt).cos(), 2.0 * (theta - dt).sin()];
            let pp = [(theta + dt).cos(), 2.0 * (theta + dt).sin()];
            // kappa = |x' x y''  - y' x x''| / |(x', y')|^3
            let d1 = [(pp[0] - pm[0]) / (2.0 * dt), (pp[1] - pm[1]) / (2.0 * dt)];
            let d2 = [
                (pp[0] - 2.0 * p[0] + pm[0]) / (dt * dt),
                (pp[1] - 2.0 * p[1] + pm[1]) / (dt * dt),
            ];
            let speed = (d1[0] * d1[0] + d1[1] * d1[1]).sqrt();
            let kappa_fd = (d1[0] * d2[1] - d1[1] * d2[0]).abs() / speed.powi(3);
            let tangent = [d1[0] / speed, d1[1] / speed];
            let a = obs.second_fundamental_form(&p, &tangent).unwrap();
            assert_relative_eq!(norm(&a), kappa_fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn second_fundamental_form_is_quadratic_and_normal() {
        let obs = ObstacleGeometry::ellipsoid(vec![1.0, 2.0, 1.5]);
        let y = {
            let d = [0.4, -0.5, 0.7];
            let t = ellipsoid_param(&[1.0, 2.0, 1.5], &d);
            t
        };
        let xi = [0.3, 0.1, -0.2];
        let a1 = obs.second_fundamental_form(&y, &xi).unwrap();
        let xi2: Vec<f64> = xi.iter().map(|v| 2.0 * v).collect();
        let a2 = obs.second_fundamental_form(&y, &xi2).unwrap();
        for i in 0..3 {
            assert_relative_eq!(a2[i], 4.0 * a1[i], epsilon = 1e-12);
        }
        // purely normal: projecting onto the tangent plane leaves nothing
        let nu = ellipsoid::outward_normal(&[1.0, 2.0, 1.5], &y);
        let tangential = project_off(&a1, &nu);
        assert!(norm(&tangential) < 1e-10);
    }

    fn ellipsoid_param(s: &[f64], d: &[f64]) -> Vec<f64> {
        // scale a direction onto the ellipsoid surface
        let q: f64 = d.iter().zip(s).map(|(v, s)| (v / s) * (v / s)).sum();
        let t = 1.0 / q.sqrt();
        d.iter().map(|v| v * t).collect()
    }

    #[test]
    fn projection_round_trip_random_points() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let obstacles = [
            ObstacleGeometry::ball(0.5, 2),
            ObstacleGeometry::ellipsoid(vec![1.0, 2.0]),
            ObstacleGeometry::c_obstacle(0.5, 1.0, 50f64.to_radians(), 256),
        ];
        for obs in &obstacles {
            let tube = obs.tubular_radius();
            let mut tested = 0;
            while tested < 200 {
                let y = [rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5)];
                let rho = obs.signed_distance(&y);
                if rho <= 1e-3 || rho >= tube {
                    continue;
                }
                tested += 1;
                let (pi, nu) = obs.project_to_boundary(&y).unwrap();
                assert!(obs.signed_distance(&pi).abs() < 2e-5, "pi not on boundary");
                assert_relative_eq!(norm(&nu), 1.0, epsilon = 1e-9);
                // y = pi + rho * nu
                for i in 0..2 {
                    assert_relative_eq!(y[i], pi[i] + rho * nu[i], epsilon = 3e-5);
                }
                // walking out along nu reproduces the distance
                let t = 0.5 * tube;
                let probe = [pi[0] + t * nu[0], pi[1] + t * nu[1]];
                assert_relative_eq!(obs.signed_distance(&probe), t, epsilon = 3e-4);
            }
        }
    }

    #[test]
    fn signed_distance_gradient_is_normal() {
        let obs = ObstacleGeometry::ellipsoid(vec![1.0, 2.0]);
        let y = [1.7, 0.9];
        let (pi, nu) = obs.project_to_boundary(&y).unwrap();
        let _ = pi;
        let step = 1e-5;
        for i in 0..2 {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[i] += step;
            ym[i] -= step;
            let g = (obs.signed_distance(&yp) - obs.signed_distance(&ym)) / (2.0 * step);
            assert_relative_eq!(g, nu[i], epsilon = 1e-5);
        }
    }

    #[test]
    fn ray_condition_convex_obstacles_hold() {
        let ball = ObstacleGeometry::ball(0.5, 2);
        assert!(ball.ray_condition_check(256, 2.0).holds);
        let ell = ObstacleGeometry::ellipsoid(vec![1.0, 2.0]);
        assert!(ell.ray_condition_check(256, 8.0).holds);
    }

    #[test]
    fn ray_condition_fails_for_c_obstacle_on_inner_lip() {
        let c = ObstacleGeometry::c_obstacle(0.5, 1.0, 50f64.to_radians(), 256);
        let report = c.ray_condition_check(256, 4.0);
        assert!(!report.holds);
        // at least one witness starts on the inner arc
        assert!(report
            .violations
            .iter()
            .any(|(y, _)| (norm(y) - 0.5).abs() < 1e-2));
    }

    #[test]
    fn c_obstacle_basic_geometry() {
        let c = ObstacleGeometry::c_obstacle(0.5, 1.0, 50f64.to_radians(), 256);
        assert!(!c.is_convex());
        // inside the wall on the negative x-axis
        assert!(c.signed_distance(&[-0.75, 0.0]) < -0.2);
        // the hole and the gap are outside the obstacle
        assert!(c.signed_distance(&[0.0, 0.0]) > 0.4);
        assert!(c.signed_distance(&[0.75, 0.0]) > 0.1);
        // reach estimate is limited by the inner arc curvature
        assert!(c.tubular_radius() > 0.3 && c.tubular_radius() <= 0.5);
    }
}
