//! Nearest-point queries on axis-aligned ellipsoids.
//!
//! The nearest boundary point of `y` has the form
//! `x_i = s_i^2 y_i / (s_i^2 + t)` where `t` solves
//! `sum_i (s_i y_i)^2 / (s_i^2 + t)^2 = 1`. The left side is strictly
//! decreasing in `t` on `(-s_min^2, inf)`, so the root is found by bisection
//! with a certified bracket.

/// Residual of the boundary constraint for the projection parameter `t`.
fn constraint(semi_axes: &[f64], y: &[f64], t: f64) -> f64 {
    let mut sum = 0.0;
    for (yi, si) in y.iter().zip(semi_axes) {
        let d = si * si + t;
        let v = si * yi / d;
        sum += v * v;
    }
    sum - 1.0
}

pub fn nearest_boundary_point(semi_axes: &[f64], y: &[f64]) -> Vec<f64> {
    let m = semi_axes.len();
    let zeros: Vec<usize> = (0..m)
        .filter(|&i| y[i].abs() <= 1e-9 * semi_axes[i])
        .collect();
    if zeros.is_empty() {
        return solve_all_nonzero(semi_axes, y);
    }

    // Vanishing components make the query degenerate: the nearest point may
    // keep x_i = 0 (solve the reduced problem) or pop out along a zero axis
    // at the parameter pole t = -s_j^2. Compare all admissible candidates.
    let nonzero: Vec<usize> = (0..m).filter(|i| !zeros.contains(i)).collect();
    let mut candidates: Vec<Vec<f64>> = Vec::new();

    if nonzero.is_empty() {
        // center of the obstacle: every smallest-axis pole is nearest
        let j = (0..m)
            .min_by(|&a, &b| semi_axes[a].total_cmp(&semi_axes[b]))
            .unwrap();
        let mut x = vec![0.0; m];
        x[j] = semi_axes[j];
        return x;
    }

    // pinned candidate: zero coordinates stay zero
    let sub_s: Vec<f64> = nonzero.iter().map(|&i| semi_axes[i]).collect();
    let sub_y: Vec<f64> = nonzero.iter().map(|&i| y[i]).collect();
    let sub_x = solve_all_nonzero(&sub_s, &sub_y);
    let mut pinned = vec![0.0; m];
    for (k, &i) in nonzero.iter().enumerate() {
        pinned[i] = sub_x[k];
    }
    candidates.push(pinned);

    // popped candidates: x_j leaves the equator along a zero axis
    for &j in &zeros {
        let t = -semi_axes[j] * semi_axes[j];
        let mut x = vec![0.0; m];
        let mut q = 1.0;
        let mut valid = true;
        for &i in &nonzero {
            let den = semi_axes[i] * semi_axes[i] + t;
            if den <= 0.0 {
                valid = false;
                break;
            }
            x[i] = semi_axes[i] * semi_axes[i] * y[i] / den;
            q -= (x[i] / semi_axes[i]) * (x[i] / semi_axes[i]);
        }
        if valid && q >= 0.0 {
            x[j] = semi_axes[j] * q.sqrt();
            candidates.push(x);
        }
    }

    candidates
        .into_iter()
        .min_by(|a, b| dist2(a, y).total_cmp(&dist2(b, y)))
        .unwrap()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn solve_all_nonzero(semi_axes: &[f64], y: &[f64]) -> Vec<f64> {
    let s_min2 = semi_axes
        .iter()
        .map(|s| s * s)
        .fold(f64::INFINITY, f64::min);
    let s_max = semi_axes.iter().cloned().fold(0.0, f64::max);

    // bracket: G is +inf near -s_min^2 and negative for large t
    let mut lo = -s_min2 + f64::EPSILON * s_min2;
    let mut hi = s_max * (s_max + crate::geometry::norm(y)) + 1.0;
    while constraint(semi_axes, y, hi) > 0.0 {
        hi *= 2.0;
    }
    // bisection is robust against the pole at the left bracket edge
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if constraint(semi_axes, y, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 * (1.0 + hi.abs()) {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    y.iter()
        .zip(semi_axes)
        .map(|(yi, si)| si * si * yi / (si * si + t))
        .collect()
}

pub fn signed_distance(semi_axes: &[f64], y: &[f64]) -> f64 {
    let x = nearest_boundary_point(semi_axes, y);
    let dist = y
        .iter()
        .zip(&x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let level: f64 = y.iter().zip(semi_axes).map(|(v, s)| (v / s) * (v / s)).sum();
    if level >= 1.0 {
        dist
    } else {
        -dist
    }
}

/// Outward unit normal at a boundary point (gradient direction of the level
/// function `sum x_i^2 / s_i^2`).
pub fn outward_normal(semi_axes: &[f64], x: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = x
        .iter()
        .zip(semi_axes)
        .map(|(v, s)| 2.0 * v / (s * s))
        .collect();
    let n = crate::geometry::norm(&g);
    g.into_iter().map(|v| v / n).collect()
}

pub fn gradient_norm(semi_axes: &[f64], x: &[f64]) -> f64 {
    let g: Vec<f64> = x
        .iter()
        .zip(semi_axes)
        .map(|(v, s)| 2.0 * v / (s * s))
        .collect();
    crate::geometry::norm(&g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_reduces_to_radial_projection() {
        let s = vec![0.5, 0.5, 0.5];
        let y = [1.0, 1.0, 1.0];
        let x = nearest_boundary_point(&s, &y);
        let r: f64 = 3f64.sqrt();
        for xi in &x {
            assert_relative_eq!(*xi, 0.5 / r, epsilon = 1e-12);
        }
        assert_relative_eq!(signed_distance(&s, &y), r - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn projection_satisfies_stationarity() {
        // y - x must be parallel to the normal at x
        let s = vec![1.0, 2.0];
        let y = [1.3, 1.1];
        let x = nearest_boundary_point(&s, &y);
        let nu = outward_normal(&s, &x);
        let d = [y[0] - x[0], y[1] - x[1]];
        let cross = d[0] * nu[1] - d[1] * nu[0];
        assert!(cross.abs() < 1e-10);
        let level = (x[0] / s[0]).powi(2) + (x[1] / s[1]).powi(2);
        assert_relative_eq!(level, 1.0, epsilon = 1e-12);
    }
}
