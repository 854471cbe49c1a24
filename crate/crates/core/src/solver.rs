//! Projected gradient descent for the constrained Dirichlet energy, and the
//! Euler-Lagrange residual of the constrained system.
//!
//! The iteration is `u_{k+1} = P(u_k - t_k grad E(u_k))` where `P` projects
//! infeasible values onto the obstacle boundary. Steps are seeded with a
//! spectral (Barzilai-Borwein) estimate and backtracked until the Armijo
//! sufficient-decrease condition holds, so the energy trace is
//! non-increasing by construction.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::ObstacleGeometry;
use crate::grid::{
    dirichlet_energy, energy_gradient, project_in_place, GridDomain, MapField,
};

#[derive(Debug, Clone)]
pub enum InitStrategy {
    /// Solve the unconstrained discrete Laplace problem for the boundary
    /// data (by conjugate gradients), then project.
    BoundaryHarmonic,
    /// Equivariant ramp `max(a, |x| s) x/|x|` matched to the boundary data
    /// magnitude; requires a ball obstacle.
    RadialSymmetric,
    /// Caller-supplied start field (projected once before iterating).
    Custom(MapField),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Initial step; `None` picks the inverse of a Lipschitz estimate.
    pub step0: Option<f64>,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    /// Backtracking shrink factor.
    pub armijo_shrink: f64,
    /// Stopping threshold on the projected-gradient norm (max norm of
    /// `(P(u - t g) - u)/t` at the reference step).
    pub grad_tol: f64,
    /// Feasibility tolerance on the signed distance of node values.
    pub constraint_tol: f64,
    /// Coincidence-set detection band for the Euler-Lagrange residual;
    /// `None` derives `2 h max|Du|` from the field.
    pub coincidence_tol: Option<f64>,
    pub init: InitStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 50_000,
            step0: None,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            grad_tol: 1e-8,
            constraint_tol: 1e-9,
            coincidence_tol: None,
            init: InitStrategy::BoundaryHarmonic,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub field: MapField,
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    pub step_trace: Vec<f64>,
    pub pgnorm_trace: Vec<f64>,
    pub converged: bool,
    pub final_projected_grad_norm: f64,
}

/// Outcome of one run of the generic driver.
pub(crate) struct SpgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    pub step_trace: Vec<f64>,
    pub pgnorm_trace: Vec<f64>,
    pub converged: bool,
    pub final_pgnorm: f64,
}

/// Spectral projected gradient with monotone Armijo backtracking.
///
/// `project` must clamp the full vector onto the feasible set, returning an
/// error only when a point is beyond the reliable projection region; such
/// errors shrink the step. The projection must leave fixed (Dirichlet)
/// entries untouched and `gradient` must vanish there.
pub(crate) fn spg_minimize(
    x0: Vec<f64>,
    mut energy: impl FnMut(&[f64]) -> f64,
    mut gradient: impl FnMut(&[f64], &mut Vec<f64>),
    mut project: impl FnMut(&mut Vec<f64>) -> Result<()>,
    step0: f64,
    max_iters: usize,
    armijo_c: f64,
    armijo_shrink: f64,
    grad_tol: f64,
) -> Result<SpgOutcome> {
    let dim = x0.len();
    let mut x = x0;
    project(&mut x)?;
    let mut g = vec![0.0; dim];
    gradient(&x, &mut g);
    let mut e = energy(&x);

    let mut energy_trace = vec![e];
    let mut step_trace = Vec::new();
    let mut pgnorm_trace = Vec::new();
    let mut t_seed = step0;
    let mut converged = false;
    let mut pgnorm = f64::INFINITY;
    let mut iterations = 0;

    let mut trial = vec![0.0; dim];
    for k in 0..max_iters {
        // stationarity measure at the reference step
        trial.copy_from_slice(&x);
        for i in 0..dim {
            trial[i] -= step0 * g[i];
        }
        if project(&mut trial).is_ok() {
            pgnorm = x
                .iter()
                .zip(&trial)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / step0;
        }
        pgnorm_trace.push(pgnorm);
        if pgnorm <= grad_tol {
            converged = true;
            iterations = k;
            break;
        }

        // Armijo backtracking from the spectral seed
        let mut t = t_seed.clamp(1e-8 * step0, 1e8 * step0);
        let mut accepted = None;
        while t >= 1e-16 * step0 {
            trial.copy_from_slice(&x);
            for i in 0..dim {
                trial[i] -= t * g[i];
            }
            if project(&mut trial).is_err() {
                t *= armijo_shrink;
                continue;
            }
            let e_trial = energy(&trial);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(&x))
                .map(|(gi, (ti, xi))| gi * (ti - xi))
                .sum();
            // once the required decrease is below rounding resolution,
            // any non-increase keeps the monotone guarantee
            let unresolvable = (armijo_c * decrease).abs() < 8.0 * f64::EPSILON * e.abs();
            if e_trial <= e + armijo_c * decrease || (unresolvable && e_trial <= e) {
                accepted = Some(e_trial);
                break;
            }
            t *= armijo_shrink;
        }
        let Some(e_accepted) = accepted else {
            return Err(Error::StepCollapse { iteration: k });
        };

        // spectral step from the accepted displacement
        let mut s_dot_s = 0.0;
        let mut s_dot_y = 0.0;
        let mut g_new = vec![0.0; dim];
        gradient(&trial, &mut g_new);
        for i in 0..dim {
            let s = trial[i] - x[i];
            let y = g_new[i] - g[i];
            s_dot_s += s * s;
            s_dot_y += s * y;
        }
        if s_dot_s == 0.0 {
            // the iterate cannot move at floating-point resolution
            iterations = k + 1;
            break;
        }
        t_seed = if s_dot_y > 1e-300 {
            s_dot_s / s_dot_y
        } else {
            2.0 * t
        };

        x.copy_from_slice(&trial);
        g = g_new;
        e = e_accepted;
        energy_trace.push(e);
        step_trace.push(t);
        iterations = k + 1;
    }

    Ok(SpgOutcome {
        x,
        iterations,
        energy_trace,
        step_trace,
        pgnorm_trace,
        converged,
        final_pgnorm: pgnorm,
    })
}

/// Minimizes the discrete Dirichlet energy over fields with the given
/// boundary data, constrained to the obstacle complement.
pub fn minimize(
    domain: Arc<GridDomain>,
    obstacle: &ObstacleGeometry,
    m: usize,
    boundary: &dyn Fn(&[f64]) -> Vec<f64>,
    config: &SolverConfig,
) -> Result<SolveResult> {
    // boundary data must be feasible before any iteration
    for i in domain.boundary_nodes() {
        let v = boundary(domain.coord(i));
        let rho = obstacle.signed_distance(&v);
        if rho < -config.constraint_tol {
            return Err(Error::InfeasibleBoundaryData { node: i, rho });
        }
    }

    let mut field = build_init(&domain, obstacle, m, boundary, config)?;
    project_in_place(&mut field, obstacle)?;

    let n = domain.n();
    let h = domain.h();
    // Lipschitz bound of the energy Hessian: 8 n h^(n-2)
    let step0 = config
        .step0
        .unwrap_or(1.0 / (8.0 * n as f64 * h.powi(n as i32 - 2)));

    let mut e_scratch = field.clone();
    let energy = move |x: &[f64]| {
        e_scratch.values_mut().copy_from_slice(x);
        dirichlet_energy(&e_scratch)
    };
    let mut g_scratch = field.clone();
    let grad = move |x: &[f64], out: &mut Vec<f64>| {
        g_scratch.values_mut().copy_from_slice(x);
        let g = energy_gradient(&g_scratch);
        out.copy_from_slice(g.values());
    };
    let mut p_scratch = field.clone();
    let project = move |x: &mut Vec<f64>| -> Result<()> {
        p_scratch.values_mut().copy_from_slice(x);
        project_in_place(&mut p_scratch, obstacle)?;
        x.copy_from_slice(p_scratch.values());
        Ok(())
    };

    let outcome = spg_minimize(
        field.values().to_vec(),
        energy,
        grad,
        project,
        step0,
        config.max_iters,
        config.armijo_c,
        config.armijo_shrink,
        config.grad_tol,
    )?;

    field.values_mut().copy_from_slice(&outcome.x);
    Ok(SolveResult {
        field,
        iterations: outcome.iterations,
        energy_trace: outcome.energy_trace,
        step_trace: outcome.step_trace,
        pgnorm_trace: outcome.pgnorm_trace,
        converged: outcome.converged,
        final_projected_grad_norm: outcome.final_pgnorm,
    })
}

fn build_init(
    domain: &Arc<GridDomain>,
    obstacle: &ObstacleGeometry,
    m: usize,
    boundary: &dyn Fn(&[f64]) -> Vec<f64>,
    config: &SolverConfig,
) -> Result<MapField> {
    match &config.init {
        InitStrategy::Custom(field) => {
            assert_eq!(field.m(), m);
            Ok(field.clone())
        }
        InitStrategy::BoundaryHarmonic => {
            let field = harmonic_extension(domain.clone(), m, boundary);
            Ok(field)
        }
        InitStrategy::RadialSymmetric => {
            let a = match obstacle.kind() {
                crate::geometry::ObstacleKind::Ball { radius } => *radius,
                _ => {
                    return Err(Error::config(
                        "solver.init",
                        "radial-symmetric initialization requires a ball obstacle",
                    ))
                }
            };
            // boundary magnitude per domain radius fixes the 1-D boundary value
            let mut sum = 0.0;
            let mut r_sum = 0.0;
            let mut r_max: f64 = 0.0;
            for i in domain.boundary_nodes() {
                let v = boundary(domain.coord(i));
                sum += crate::geometry::norm(&v);
                let r = crate::geometry::norm(domain.coord(i));
                r_sum += r;
                r_max = r_max.max(r);
            }
            let slope = if r_sum > 0.0 { sum / r_sum } else { 1.0 };
            let b = slope * r_max; // boundary magnitude at the domain rim

            // Equivariant lift of the 1-D radial profile. Rescaling by the
            // boundary value reduces to the unit problem with obstacle a/b.
            let profile = if b > 0.0 && a / b < 1.0 {
                let grid = crate::radial::uniform_grid(1e-3);
                let cfg = SolverConfig {
                    grad_tol: 1e-9,
                    max_iters: 50_000,
                    ..SolverConfig::default()
                };
                crate::radial::radial_minimize(domain.n(), a / b, &grid, &cfg).ok()
            } else {
                None
            };
            let w_of_r = |r: f64| -> f64 {
                match &profile {
                    Some(p) => {
                        let s = (r / r_max).clamp(0.0, 1.0);
                        let grid = &p.r_nodes;
                        let k = grid.partition_point(|&g| g < s).min(grid.len() - 1);
                        let w = if k == 0 {
                            p.w[0]
                        } else {
                            let t = (s - grid[k - 1]) / (grid[k] - grid[k - 1]);
                            (1.0 - t) * p.w[k - 1] + t * p.w[k]
                        };
                        (w * b).max(a)
                    }
                    None => (r * slope).max(a * (1.0 + 1e-12)),
                }
            };
            let mut field = MapField::from_fn(domain.clone(), m, |x| {
                let r = crate::geometry::norm(x);
                let w = w_of_r(r);
                let mut v = vec![0.0; m];
                if r < 1e-14 {
                    v[0] = w;
                } else {
                    for c in 0..m.min(x.len()) {
                        v[c] = w * x[c] / r;
                    }
                }
                v
            });
            apply_boundary(&mut field, boundary);
            Ok(field)
        }
    }
}

fn apply_boundary(field: &mut MapField, boundary: &dyn Fn(&[f64]) -> Vec<f64>) {
    let ids: Vec<usize> = field.domain().boundary_nodes().collect();
    for i in ids {
        let v = boundary(field.domain().coord(i));
        field.value_mut(i).copy_from_slice(&v);
    }
}

/// Unconstrained discrete harmonic extension of the boundary data, by
/// conjugate gradients on the free-node system of the energy gradient.
///
/// All CG vectors carry zero boundary entries (the gradient operator zeroes
/// Dirichlet rows), so the loop needs no explicit masking.
pub fn harmonic_extension(
    domain: Arc<GridDomain>,
    m: usize,
    boundary: &dyn Fn(&[f64]) -> Vec<f64>,
) -> MapField {
    let mut base = MapField::from_fn(domain.clone(), m, |_| vec![0.0; m]);
    apply_boundary(&mut base, boundary);

    let mut scratch = base.clone();
    let mut apply = move |x: &[f64]| -> Vec<f64> {
        scratch.values_mut().copy_from_slice(x);
        energy_gradient(&scratch).values().to_vec()
    };

    let dim = base.values().len();
    // residual of the zero-interior start: r = -g(u_bc)
    let mut r = apply(base.values());
    for v in r.iter_mut() {
        *v = -*v;
    }
    let mut v = vec![0.0; dim];
    let mut p = r.clone();
    let mut rs_old: f64 = r.iter().map(|x| x * x).sum();
    let rhs_scale = rs_old.max(1e-300);
    for _ in 0..50_000 {
        if rs_old <= 1e-28 * rhs_scale {
            break;
        }
        let ap = apply(&p);
        let p_ap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if p_ap.abs() < 1e-300 {
            break;
        }
        let alpha = rs_old / p_ap;
        for i in 0..dim {
            v[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|x| x * x).sum();
        let beta = rs_new / rs_old;
        for i in 0..dim {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }
    for (u, vi) in base.values_mut().iter_mut().zip(&v) {
        *u += vi;
    }
    base
}

/// Euler-Lagrange residual `lap_h u - chi A_u(Du, Du)` at interior nodes and
/// its h^n-weighted l2 norm. The second fundamental form is summed over the
/// tangential parts of the axis derivatives.
pub fn el_residual(
    field: &MapField,
    obstacle: &ObstacleGeometry,
    coincidence_tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let domain = field.domain();
    let n = domain.n();
    let m = field.m();
    let h = domain.h();
    let feas_tol = 1e-9 * obstacle.diameter();

    let mut residual = vec![0.0; domain.node_count() * m];
    let mut norm2 = 0.0;
    for i in 0..domain.node_count() {
        let rho = obstacle.signed_distance(field.value(i));
        if rho < -feas_tol {
            return Err(Error::InfeasibleField { node: i, rho });
        }
        if !domain.is_interior(i) {
            continue;
        }
        let mut res = field.discrete_laplacian(i);
        if rho.abs() <= coincidence_tol {
            let (pi, nu) = obstacle
                .project_to_boundary(field.value(i))
                .map_err(|_| Error::InfeasibleField { node: i, rho })?;
            let grad = field.central_gradient(i);
            for a in 0..n {
                let xi = &grad[a * m..(a + 1) * m];
                let c: f64 = xi.iter().zip(&nu).map(|(x, v)| x * v).sum();
                let xi_t: Vec<f64> = xi.iter().zip(&nu).map(|(x, v)| x - c * v).collect();
                let a_term = obstacle.second_fundamental_form(&pi, &xi_t)?;
                for (r, t) in res.iter_mut().zip(&a_term) {
                    *r -= t;
                }
            }
        }
        let r2: f64 = res.iter().map(|v| v * v).sum();
        norm2 += r2 * h.powi(n as i32);
        residual[i * m..(i + 1) * m].copy_from_slice(&res);
    }
    Ok((residual, norm2.sqrt()))
}

/// Default coincidence band: two grid steps of value change.
pub fn default_coincidence_tol(field: &MapField) -> f64 {
    let domain = field.domain();
    let mut max_du: f64 = 0.0;
    for i in 0..domain.node_count() {
        if !domain.is_interior(i) {
            continue;
        }
        let g = field.central_gradient(i);
        let norm2: f64 = g.iter().map(|v| v * v).sum();
        max_du = max_du.max(norm2.sqrt());
    }
    2.0 * domain.h() * max_du
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainShape;
    use approx::assert_relative_eq;

    fn far_obstacle() -> ObstacleGeometry {
        // a small square far from any data used in these tests
        ObstacleGeometry::planar_curve(
            vec![[50.0, 50.0], [51.0, 50.0], [51.0, 51.0], [50.0, 51.0]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn harmonic_extension_matches_dense_solve() {
        use nalgebra::{DMatrix, DVector};
        let h = 1.0 / 16.0;
        let domain = GridDomain::new(2, DomainShape::Ball { radius: 1.0 }, h);
        let boundary = |x: &[f64]| vec![x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]];
        let field = harmonic_extension(domain.clone(), 2, &boundary);

        // dense oracle: assemble the free-node system for each component
        let free: Vec<usize> = (0..domain.node_count())
            .filter(|&i| !domain.is_boundary(i))
            .collect();
        let index: std::collections::HashMap<usize, usize> =
            free.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let nf = free.len();
        for comp in 0..2 {
            let mut a = DMatrix::<f64>::zeros(nf, nf);
            let mut b = DVector::<f64>::zeros(nf);
            for (k, &i) in free.iter().enumerate() {
                let mut diag = 0.0;
                for axis in 0..2 {
                    for dir in [-1i64, 1] {
                        let Some(j) = domain.neighbor(i, axis, dir) else {
                            continue;
                        };
                        diag += 1.0;
                        if let Some(&kj) = index.get(&j) {
                            a[(k, kj)] -= 1.0;
                        } else {
                            b[k] += boundary(domain.coord(j))[comp];
                        }
                    }
                }
                a[(k, k)] = diag;
            }
            let lu = a.lu();
            let sol = lu.solve(&b).expect("dense solve");
            let max_err = free
                .iter()
                .enumerate()
                .map(|(k, &i)| (field.value(i)[comp] - sol[k]).abs())
                .fold(0.0, f64::max);
            assert!(max_err < 1e-8, "component {comp}: max err {max_err}");
        }
    }

    #[test]
    fn minimize_without_contact_matches_harmonic_oracle() {
        let h = 1.0 / 16.0;
        let domain = GridDomain::new(2, DomainShape::Ball { radius: 1.0 }, h);
        let boundary = |x: &[f64]| vec![x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]];
        let obstacle = far_obstacle();
        let config = SolverConfig {
            grad_tol: 1e-12,
            ..SolverConfig::default()
        };
        let result = minimize(domain.clone(), &obstacle, 2, &boundary, &config).unwrap();
        assert!(result.converged);
        let oracle = harmonic_extension(domain, 2, &boundary);
        let max_err = result
            .field
            .values()
            .iter()
            .zip(oracle.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 1e-6, "max err {max_err}");
    }

    #[test]
    fn constant_boundary_data_converges_immediately() {
        let domain = GridDomain::new(2, DomainShape::Ball { radius: 1.0 }, 1.0 / 8.0);
        let obstacle = ObstacleGeometry::ball(0.5, 2);
        let boundary = |_: &[f64]| vec![2.0, 0.0];
        let result = minimize(domain, &obstacle, 2, &boundary, &SolverConfig::default()).unwrap();
        assert!(result.converged);
        assert!(result.iterations <= 2);
        assert!(dirichlet_energy(&result.field) <= 1e-20);
    }

    #[test]
    fn infeasible_boundary_data_is_rejected() {
        let domain = GridDomain::new(2, DomainShape::Ball { radius: 1.0 }, 1.0 / 8.0);
        let obstacle = ObstacleGeometry::ball(0.5, 2);
        let boundary = |_: &[f64]| vec![0.25, 0.0];
        assert!(matches!(
            minimize(domain, &obstacle, 2, &boundary, &SolverConfig::default()),
            Err(Error::InfeasibleBoundaryData { .. })
        ));
    }

    #[test]
    fn energy_trace_is_monotone() {
        let domain = GridDomain::new(2, DomainShape::Ball { radius: 1.0 }, 1.0 / 32.0);
        let obstacle = ObstacleGeometry::ball(0.5, 2);
        let boundary = |x: &[f64]| x.to_vec();
        let config = SolverConfig {
            init: InitStrategy::RadialSymmetric,
            grad_tol: 1e-6,
            ..SolverConfig::default()
        };
        let result = minimize(domain, &obstacle, 2, &boundary, &config).unwrap();
        for w in result.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        // feasibility of the final iterate
        assert!(result.field.max_penetration(&obstacle) <= 1e-9);
    }

    #[test]
    fn el_residual_of_affine_map_vanishes() {
        let domain = GridDomain::new(2, DomainShape::Ball { radius: 1.0 }, 1.0 / 16.0);
        let obstacle = ObstacleGeometry::ball(0.5, 2);
        // values stay well outside the obstacle
        let field = MapField::from_fn(domain, 2, |x| {
            vec![2.0 + 0.3 * x[0] - 0.1 * x[1], 2.0 + 0.5 * x[1]]
        });
        let (res, norm) = el_residual(&field, &obstacle, 1e-9).unwrap();
        assert!(norm < 1e-12, "norm = {norm}");
        assert!(res.iter().all(|&v| v.abs() < 1e-10));
    }

    #[test]
    fn el_residual_rejects_infeasible_fields() {
        let domain = GridDomain::new(2, DomainShape::Ball { radius: 1.0 }, 1.0 / 16.0);
        let obstacle = ObstacleGeometry::ball(0.5, 2);
        let field = MapField::from_fn(domain, 2, |_| vec![0.25, 0.0]);
        assert!(matches!(
            el_residual(&field, &obstacle, 1e-9),
            Err(Error::InfeasibleField { .. })
        ));
    }

    #[test]
    fn symmetry_is_preserved_under_quarter_turns() {
        let domain = GridDomain::new(2, DomainShape::Ball { radius: 1.0 }, 1.0 / 32.0);
        let obstacle = ObstacleGeometry::ball(0.5, 2);
        let boundary = |x: &[f64]| x.to_vec();
        let config = SolverConfig {
            init: InitStrategy::RadialSymmetric,
            grad_tol: 1e-8,
            ..SolverConfig::default()
        };
        let result = minimize(domain.clone(), &obstacle, 2, &boundary, &config).unwrap();
        let field = &result.field;
        // rotate node coordinates by 90 degrees and compare rotated values
        let mut max_err: f64 = 0.0;
        for i in 0..domain.node_count() {
            let x = domain.coord(i);
            let rotated = [-x[1], x[0]];
            let j = (0..domain.node_count())
                .find(|&j| {
                    let y = domain.coord(j);
                    (y[0] - rotated[0]).abs() < 1e-12 && (y[1] - rotated[1]).abs() < 1e-12
                })
                .expect("grid is closed under quarter turns");
            let u = field.value(i);
            let v = field.value(j);
            // value at the rotated node should be the rotated value
            max_err = max_err.max((v[0] + u[1]).abs()).max((v[1] - u[0]).abs());
        }
        assert!(max_err < 1e-10, "symmetry defect {max_err}");
    }
}
