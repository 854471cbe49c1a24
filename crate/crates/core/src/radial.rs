//! One-dimensional radial reduction of equivariant maps around a ball
//! obstacle: the closed-form critical profile, a numeric 1-D constrained
//! minimizer valid in any dimension, the sharp radial Hardy inequality
//! checker, and the ellipsoid equator-map threshold.
//!
//! The profile `w` describes the equivariant map `u(x) = w(|x|) x/|x|` with
//! `w(r) = a` on the coincidence interval `[0, r_a]` and
//! `w(r) = t_a r + (1 - t_a) r^(1-n)` outside. Eliminating `t_a` from the
//! two free-boundary conditions `w(r_a) = a`, `w'(r_a) = 0` leaves a single
//! polynomial root: `a r^n - n r + a (n - 1) = 0`.

use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{spg_minimize, SolverConfig};

#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub n: usize,
    pub a: f64,
    pub r_nodes: Vec<f64>,
    pub w: Vec<f64>,
    pub t_a: f64,
    pub r_a: f64,
    /// true when `w` carries the closed form exactly (contact derivative 0)
    pub analytic: bool,
}

/// Residuals of the two free-boundary conditions, in the polynomial forms
/// `a r^n - n r + a(n-1)` and `t r^n - (n-1)(1-t)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FreeBoundaryResiduals {
    pub polynomial: f64,
    pub slope_condition: f64,
}

impl RadialProfile {
    pub fn residuals(&self) -> FreeBoundaryResiduals {
        let n = self.n as f64;
        FreeBoundaryResiduals {
            polynomial: self.a * self.r_a.powf(n) - n * self.r_a + self.a * (n - 1.0),
            slope_condition: self.t_a * self.r_a.powf(n) - (n - 1.0) * (1.0 - self.t_a),
        }
    }

    /// Closed-form profile value (only meaningful for analytic profiles).
    pub fn w_closed(&self, r: f64) -> f64 {
        if r <= self.r_a {
            self.a
        } else {
            self.t_a * r + (1.0 - self.t_a) * r.powi(1 - self.n as i32)
        }
    }

    /// Profile slope: analytic for closed forms, central differences for
    /// numeric profiles.
    pub fn slope(&self, k: usize) -> f64 {
        if self.analytic {
            let r = self.r_nodes[k];
            if r <= self.r_a {
                0.0
            } else {
                self.t_a + (1.0 - self.t_a) * (1.0 - self.n as f64) * r.powi(-(self.n as i32))
            }
        } else {
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(self.r_nodes.len() - 1);
            (self.w[hi] - self.w[lo]) / (self.r_nodes[hi] - self.r_nodes[lo])
        }
    }

    /// Two-column CSV dump `r,w`, written atomically.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("csv.tmp");
        {
            let mut file = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            writeln!(file, "r,w")?;
            for (r, w) in self.r_nodes.iter().zip(&self.w) {
                writeln!(file, "{r:.17e},{w:.17e}")?;
            }
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Uniform grid on [0, 1] with the given spacing (last node exactly 1).
pub fn uniform_grid(spacing: f64) -> Vec<f64> {
    let count = (1.0 / spacing).round() as usize;
    (0..=count).map(|i| i as f64 / count as f64).collect()
}

/// Closed-form radial critical profile for obstacle radius `a` in (0,1).
///
/// The free-boundary radius is the unique root of
/// `a r^n - n r + a(n-1) = 0` in `(a/n, 1)`; the slope parameter follows as
/// `t_a = a (n-1) / (n r_a)`.
pub fn closed_form_radial(n: usize, a: f64, r_nodes: &[f64]) -> RadialProfile {
    assert!(n >= 2, "radial reduction needs n >= 2");
    assert!(a > 0.0 && a < 1.0, "obstacle radius must lie in (0,1)");
    let nf = n as f64;
    let f = |r: f64| a * r.powf(nf) - nf * r + a * (nf - 1.0);
    // f(a/n) > 0, f(1) = n (a - 1) < 0, and f is strictly decreasing
    let mut lo = a / nf;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let r_a = 0.5 * (lo + hi);
    debug_assert!(f(r_a).abs() < 1e-12);
    let t_a = a * (nf - 1.0) / (nf * r_a);

    let mut profile = RadialProfile {
        n,
        a,
        r_nodes: r_nodes.to_vec(),
        w: Vec::with_capacity(r_nodes.len()),
        t_a,
        r_a,
        analytic: true,
    };
    profile.w = r_nodes.iter().map(|&r| profile.w_closed(r)).collect();
    profile
}

/// Deviation of `|Du|^2 = w'^2 + (n-1) w^2/r^2` from the coincidence-set
/// identity `(n-1) a^2 / r^2`, as a max relative error over nodes in
/// `(0, r_a]`.
pub fn gradient_identity_check(profile: &RadialProfile) -> f64 {
    let nf = profile.n as f64;
    let mut worst: f64 = 0.0;
    for (k, (&r, &w)) in profile.r_nodes.iter().zip(&profile.w).enumerate() {
        if r <= 0.0 || r > profile.r_a {
            continue;
        }
        let wp = profile.slope(k);
        let du2 = wp * wp + (nf - 1.0) * w * w / (r * r);
        let exact = (nf - 1.0) * profile.a * profile.a / (r * r);
        worst = worst.max((du2 - exact).abs() / exact);
    }
    worst
}

/// Projected descent on the discrete radial energy
/// `sum_segments (w'^2 + (n-1) wbar^2/rbar^2) rbar^(n-1) dr` with the
/// constraint `w >= a` and the boundary value `w(1) = 1`.
///
/// Midpoint weights keep the `r = 0` node harmless; the origin value is
/// free (natural condition).
pub fn radial_minimize(
    n: usize,
    a: f64,
    r_nodes: &[f64],
    config: &SolverConfig,
) -> Result<RadialProfile> {
    assert!(n >= 2 && a > 0.0 && a < 1.0);
    let grid = r_nodes.to_vec();
    let count = grid.len();
    assert!(count >= 8, "radial grid too coarse");
    let nf = n as f64;

    // segment midpoints and weights
    let mut seg_mid = Vec::with_capacity(count - 1);
    let mut seg_dr = Vec::with_capacity(count - 1);
    for k in 0..count - 1 {
        seg_mid.push(0.5 * (grid[k] + grid[k + 1]));
        seg_dr.push(grid[k + 1] - grid[k]);
    }

    // The r^(n-1) weights spread the Hessian diagonal over many orders of
    // magnitude; working in the diagonally scaled variable z = sqrt(d) w
    // equalizes it while keeping the constraint a simple per-node bound.
    let mut diag = vec![0.0f64; count];
    for k in 0..count - 1 {
        let dr = seg_dr[k];
        let rm = seg_mid[k];
        let weight = rm.powf(nf - 1.0);
        let contribution = 2.0 * weight / dr + 0.5 * (nf - 1.0) * weight / (rm * rm) * dr;
        diag[k] += contribution;
        diag[k + 1] += contribution;
    }
    let scale: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();

    let energy = {
        let seg_mid = seg_mid.clone();
        let seg_dr = seg_dr.clone();
        let scale = scale.clone();
        move |z: &[f64]| -> f64 {
            let mut e = 0.0;
            for k in 0..z.len() - 1 {
                let dr = seg_dr[k];
                let rm = seg_mid[k];
                let w0 = z[k] / scale[k];
                let w1 = z[k + 1] / scale[k + 1];
                let slope = (w1 - w0) / dr;
                let wbar = 0.5 * (w0 + w1);
                e += (slope * slope + (nf - 1.0) * wbar * wbar / (rm * rm))
                    * rm.powf(nf - 1.0)
                    * dr;
            }
            e
        }
    };
    let gradient = {
        let seg_mid = seg_mid.clone();
        let seg_dr = seg_dr.clone();
        let scale = scale.clone();
        move |z: &[f64], g: &mut Vec<f64>| {
            g.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..z.len() - 1 {
                let dr = seg_dr[k];
                let rm = seg_mid[k];
                let weight = rm.powf(nf - 1.0);
                let w0 = z[k] / scale[k];
                let w1 = z[k + 1] / scale[k + 1];
                let slope = (w1 - w0) / dr;
                let wbar = 0.5 * (w0 + w1);
                let d_slope = 2.0 * slope * weight;
                let d_mass = (nf - 1.0) * wbar / (rm * rm) * weight * dr;
                g[k] += (-d_slope + d_mass) / scale[k];
                g[k + 1] += (d_slope + d_mass) / scale[k + 1];
            }
            // Dirichlet condition at r = 1
            let last = z.len() - 1;
            g[last] = 0.0;
        }
    };
    let project = {
        let scale = scale.clone();
        move |z: &mut Vec<f64>| -> Result<()> {
            let last = z.len() - 1;
            for (k, v) in z.iter_mut().enumerate() {
                let bound = a * scale[k];
                if k != last && *v < bound {
                    *v = bound;
                }
            }
            Ok(())
        }
    };

    // feasible start: the straight ramp clipped at the obstacle
    let mut z0: Vec<f64> = grid
        .iter()
        .zip(&scale)
        .map(|(&r, &s)| r.max(a) * s)
        .collect();
    let last = count - 1;
    z0[last] = scale[last];

    let outcome = spg_minimize(
        z0,
        energy,
        gradient,
        project,
        config.step0.unwrap_or(0.25),
        config.max_iters,
        config.armijo_c,
        config.armijo_shrink,
        config.grad_tol,
    )?;

    let w: Vec<f64> = outcome.x.iter().zip(&scale).map(|(z, s)| z / s).collect();
    // Contact set edge: the largest radius whose node still sits on the
    // obstacle within a tolerance at the solver's feasibility scale. The
    // profile detaches quadratically, so a band at O(spacing) height would
    // misplace the edge by O(sqrt(spacing)).
    let spacing = seg_dr.iter().cloned().fold(f64::INFINITY, f64::min);
    let contact_tol = (spacing * spacing).max(4.0 * config.constraint_tol);
    let r_hat = grid
        .iter()
        .zip(&w)
        .filter(|(_, &wv)| wv <= a + contact_tol)
        .map(|(&r, _)| r)
        .fold(0.0, f64::max);
    let t_hat = a * (nf - 1.0) / (nf * r_hat.max(spacing));

    Ok(RadialProfile {
        n,
        a,
        r_nodes: grid,
        w,
        t_a: t_hat,
        r_a: r_hat,
        analytic: false,
    })
}

/// Volume of the unit ball in R^n.
fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Radial Hardy inequality data: returns
/// `lhs = (n-2)^2/4 * n omega_n * int phi^2 r^(n-3) dr` and
/// `rhs = n omega_n * int phi'^2 r^(n-1) dr` by trapezoid quadrature on the
/// given nodes. For every admissible sample, `lhs <= rhs` up to quadrature
/// tolerance.
pub fn hardy_check(n: usize, r_nodes: &[f64], phi: &[f64]) -> Result<(f64, f64)> {
    if n <= 2 {
        return Err(Error::DivergentIntegrand { n });
    }
    assert_eq!(r_nodes.len(), phi.len());
    assert!(
        phi.last().map(|v| v.abs() < 1e-9).unwrap_or(false),
        "phi must vanish at r = 1"
    );
    let nf = n as f64;
    let sphere_area = nf * unit_ball_volume(n);

    // trapezoid for the weighted mass, open-ended at r = 0 when the weight
    // is singular there
    let weight_mass = |r: f64, v: f64| -> f64 {
        if r == 0.0 && n == 3 {
            v * v
        } else {
            v * v * r.powf(nf - 3.0)
        }
    };
    let mut lhs_integral = 0.0;
    let mut rhs_integral = 0.0;
    for k in 0..r_nodes.len() - 1 {
        let dr = r_nodes[k + 1] - r_nodes[k];
        lhs_integral +=
            0.5 * dr * (weight_mass(r_nodes[k], phi[k]) + weight_mass(r_nodes[k + 1], phi[k + 1]));
        let slope = (phi[k + 1] - phi[k]) / dr;
        rhs_integral += 0.5
            * dr
            * slope
            * slope
            * (r_nodes[k].powf(nf - 1.0) + r_nodes[k + 1].powf(nf - 1.0));
    }
    let lhs = 0.25 * (nf - 2.0) * (nf - 2.0) * sphere_area * lhs_integral;
    let rhs = sphere_area * rhs_integral;
    Ok((lhs, rhs))
}

/// Smallest aspect ratio `lambda` for which the equator map into the
/// ellipsoid complement is certified minimal: `2 sqrt(n-1) / (n-2)`.
pub fn ellipsoid_lambda_min(n: usize) -> Result<f64> {
    if n <= 2 {
        return Err(Error::InvalidDimension { n });
    }
    let nf = n as f64;
    Ok(2.0 * (nf - 1.0).sqrt() / (nf - 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_boundary_value_is_one() {
        for &n in &[2usize, 3, 5, 7, 11] {
            for &a in &[0.1, 0.3, 0.5, 0.7, 0.9] {
                let p = closed_form_radial(n, a, &uniform_grid(1e-2));
                // w(1) = t_a + (1 - t_a) = 1 exactly
                assert_eq!(*p.w.last().unwrap(), 1.0);
                let res = p.residuals();
                assert!(res.polynomial.abs() < 1e-10);
                assert!(res.slope_condition.abs() < 1e-10);
                assert!(p.r_a > 0.0 && p.r_a < 1.0);
                assert!(p.t_a > 0.0 && p.t_a < 1.0);
            }
        }
    }

    #[test]
    fn closed_form_known_values_n3() {
        let p = closed_form_radial(3, 0.5, &uniform_grid(1e-3));
        assert_relative_eq!(p.r_a, 0.3399, epsilon = 1e-3);
        assert_relative_eq!(p.t_a, 0.9807, epsilon = 1e-3);
        // substitute back into the defining conditions
        assert!((p.w_closed(p.r_a) - 0.5).abs() < 1e-9);
        let eps = 1e-7;
        let slope = (p.w_closed(p.r_a + eps) - p.w_closed(p.r_a)) / eps;
        assert!(slope.abs() < 1e-5);
    }

    #[test]
    fn closed_form_residual_certified_n7() {
        let p = closed_form_radial(7, 0.5, &uniform_grid(1e-3));
        assert!((0.5 * p.r_a.powi(7) - 7.0 * p.r_a + 3.0).abs() <= 1e-10);
        assert!((p.t_a - 3.0 / (7.0 * p.r_a)).abs() <= 1e-12);
    }

    #[test]
    fn contact_radius_is_monotone_in_obstacle_size() {
        let grid = uniform_grid(1e-3);
        let mut prev = 0.0;
        for k in 1..=9 {
            let a = k as f64 / 10.0;
            let p = closed_form_radial(3, a, &grid);
            assert!(p.r_a > prev, "r_a must grow with a");
            prev = p.r_a;
        }
    }

    #[test]
    fn gradient_identity_exact_for_closed_form() {
        let p = closed_form_radial(3, 0.5, &uniform_grid(1e-3));
        assert_eq!(gradient_identity_check(&p), 0.0);
    }

    #[test]
    fn gradient_identity_flags_perturbation() {
        let mut p = closed_form_radial(3, 0.5, &uniform_grid(1e-3));
        for w in p.w.iter_mut() {
            *w += 0.01;
        }
        // first order: 2 * 0.01 / a = 0.04
        let err = gradient_identity_check(&p);
        assert_relative_eq!(err, 0.04, max_relative = 0.15);
    }

    #[test]
    fn radial_minimize_matches_closed_form() {
        let grid = uniform_grid(1e-3);
        for &(n, a) in &[(3usize, 0.5f64), (7, 0.5)] {
            let oracle = closed_form_radial(n, a, &grid);
            let config = SolverConfig {
                grad_tol: 1e-10,
                max_iters: 200_000,
                ..SolverConfig::default()
            };
            let numeric = radial_minimize(n, a, &grid, &config).unwrap();
            let sup = numeric
                .w
                .iter()
                .zip(&oracle.w)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(sup <= 5e-3, "n={n} a={a}: sup error {sup}");
            assert!(
                (numeric.r_a - oracle.r_a).abs() <= 5e-3,
                "n={n} a={a}: free boundary error {}",
                (numeric.r_a - oracle.r_a).abs()
            );
        }
    }

    #[test]
    fn radial_minimize_nearly_inactive_obstacle() {
        let grid = uniform_grid(1e-3);
        let config = SolverConfig {
            grad_tol: 1e-10,
            max_iters: 200_000,
            ..SolverConfig::default()
        };
        let p = radial_minimize(3, 0.01, &grid, &config).unwrap();
        assert!(p.r_a < 0.02);
        // profile is close to the identity ramp away from the origin
        for (r, w) in p.r_nodes.iter().zip(&p.w) {
            if *r >= 0.1 {
                assert!((w - r).abs() < 1e-2, "r={r} w={w}");
            }
        }
    }

    #[test]
    fn hardy_ratio_for_linear_cutoff() {
        // n = 7, phi = 1 - r: lhs/rhs = (25/4)(1/105)/(1/7) = 5/12
        let grid = uniform_grid(1e-3);
        let phi: Vec<f64> = grid.iter().map(|r| 1.0 - r).collect();
        let (lhs, rhs) = hardy_check(7, &grid, &phi).unwrap();
        assert_relative_eq!(lhs / rhs, 5.0 / 12.0, epsilon = 1e-3);
    }

    #[test]
    fn hardy_zero_function() {
        let grid = uniform_grid(1e-2);
        let phi = vec![0.0; grid.len()];
        let (lhs, rhs) = hardy_check(5, &grid, &phi).unwrap();
        assert_eq!((lhs, rhs), (0.0, 0.0));
    }

    #[test]
    fn hardy_rejects_low_dimension() {
        let grid = uniform_grid(1e-2);
        let phi: Vec<f64> = grid.iter().map(|r| 1.0 - r).collect();
        assert!(matches!(
            hardy_check(2, &grid, &phi),
            Err(Error::DivergentIntegrand { n: 2 })
        ));
    }

    #[test]
    fn hardy_inequality_on_random_piecewise_linear_functions() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let grid = uniform_grid(1.0 / 128.0);
        for _ in 0..20 {
            let mut phi: Vec<f64> = grid
                .iter()
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            *phi.last_mut().unwrap() = 0.0;
            let (lhs, rhs) = hardy_check(7, &grid, &phi).unwrap();
            assert!(
                lhs <= rhs * (1.0 + 1e-9),
                "hardy inequality violated: {lhs} > {rhs}"
            );
        }
    }

    #[test]
    fn lambda_min_values() {
        assert_relative_eq!(
            ellipsoid_lambda_min(7).unwrap(),
            0.97980,
            epsilon = 1e-5
        );
        assert_relative_eq!(
            ellipsoid_lambda_min(3).unwrap(),
            2.0 * 2f64.sqrt(),
            epsilon = 1e-12
        );
        assert!(matches!(
            ellipsoid_lambda_min(2),
            Err(Error::InvalidDimension { n: 2 })
        ));
    }

    #[test]
    fn lifted_closed_form_is_feasible_for_ellipsoid_complement() {
        // the equator lift (u, 0) stays outside the ellipsoid
        // {|y|^2 + lambda^-2 xi^2 < a^2} for any lambda
        use crate::geometry::ObstacleGeometry;
        let a = 0.5;
        let p = closed_form_radial(3, a, &uniform_grid(1e-2));
        for &lambda in &[0.5, 1.0, 2.0] {
            let obs = ObstacleGeometry::ellipsoid(vec![a, a, a, lambda * a]);
            for (&r, &w) in p.r_nodes.iter().zip(&p.w) {
                if r == 0.0 {
                    continue;
                }
                // equivariant point on the first axis, lifted by zero
                let y = [w, 0.0, 0.0, 0.0];
                assert!(obs.signed_distance(&y) >= -1e-12);
            }
        }
    }
}
