//! Clipped-cell quadrature: volume fraction of an axis-aligned box inside a
//! ball, shared by every ball integral in the crate so that all diagnostics
//! use the same constants.

/// Fraction of the box `[lo, lo + size]^n` lying inside the ball
/// `B_r(center)`, via recursive subdivision with a half-space cut at the
/// leaves. In 2-D the leaf cut is exact (polygon clipping); in other
/// dimensions the cut uses the projected-width approximation.
pub fn box_ball_fraction(lo: &[f64], size: f64, center: &[f64], r: f64, depth: u32) -> f64 {
    let n = lo.len();
    let half = 0.5 * size;
    let half_diag = half * (n as f64).sqrt();
    let mut dist2 = 0.0;
    for i in 0..n {
        let c = lo[i] + half - center[i];
        dist2 += c * c;
    }
    let dist = dist2.sqrt();
    if dist + half_diag <= r {
        return 1.0;
    }
    if dist - half_diag >= r {
        return 0.0;
    }
    if depth == 0 {
        return leaf_fraction(lo, size, center, r, dist);
    }
    // subdivide into 2^n children
    let mut sum = 0.0;
    let children = 1usize << n;
    let mut child_lo = vec![0.0; n];
    for mask in 0..children {
        for i in 0..n {
            child_lo[i] = lo[i] + if mask >> i & 1 == 1 { half } else { 0.0 };
        }
        sum += box_ball_fraction(&child_lo, half, center, r, depth - 1);
    }
    sum / children as f64
}

fn leaf_fraction(lo: &[f64], size: f64, center: &[f64], r: f64, dist: f64) -> f64 {
    let n = lo.len();
    if dist < 1e-300 {
        return 1.0; // degenerate: cell centered on the ball center, r ~ 0 handled above
    }
    if n == 2 {
        // exact area of the square under the tangent line of the circle at
        // the nearest point, which is second-order accurate in the leaf size
        let nx = (lo[0] + 0.5 * size - center[0]) / dist;
        let ny = (lo[1] + 0.5 * size - center[1]) / dist;
        return halfspace_square_fraction(lo, size, center, r, [nx, ny]);
    }
    // interval cut along the radial direction
    let mut width = 0.0;
    for i in 0..n {
        let c = (lo[i] + 0.5 * size - center[i]) / dist;
        width += c.abs();
    }
    let halfwidth = 0.5 * size * width.max(1e-300);
    ((r - dist + halfwidth) / (2.0 * halfwidth)).clamp(0.0, 1.0)
}

/// Exact fraction of the square `[lo, lo+size]^2` in the half-plane
/// `normal . (x - center) <= r`, by clipping the square against the line.
fn halfspace_square_fraction(
    lo: &[f64],
    size: f64,
    center: &[f64],
    r: f64,
    normal: [f64; 2],
) -> f64 {
    let corners = [
        [lo[0], lo[1]],
        [lo[0] + size, lo[1]],
        [lo[0] + size, lo[1] + size],
        [lo[0], lo[1] + size],
    ];
    let level = |p: [f64; 2]| normal[0] * (p[0] - center[0]) + normal[1] * (p[1] - center[1]) - r;
    let mut poly: Vec<[f64; 2]> = Vec::with_capacity(8);
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let la = level(a);
        let lb = level(b);
        if la <= 0.0 {
            poly.push(a);
        }
        if (la < 0.0) != (lb < 0.0) {
            let t = la / (la - lb);
            poly.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    if poly.len() < 3 {
        return 0.0;
    }
    let mut area2 = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        area2 += p[0] * q[1] - q[0] * p[1];
    }
    (0.5 * area2.abs() / (size * size)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn full_and_empty_boxes() {
        assert_relative_eq!(
            box_ball_fraction(&[0.0, 0.0], 0.1, &[0.0, 0.0], 1.0, 3),
            1.0
        );
        assert_relative_eq!(
            box_ball_fraction(&[2.0, 2.0], 0.1, &[0.0, 0.0], 1.0, 3),
            0.0
        );
    }

    #[test]
    fn disk_area_from_clipped_cells() {
        // tile [-2,2]^2 with cells of size h and sum clipped fractions
        let r = 1.3;
        let h = 1.0 / 32.0;
        let k = (4.0 / h) as i64;
        let mut area = 0.0;
        for i in 0..k {
            for j in 0..k {
                let lo = [-2.0 + i as f64 * h, -2.0 + j as f64 * h];
                area += h * h * box_ball_fraction(&lo, h, &[0.0, 0.0], r, 3);
            }
        }
        assert_relative_eq!(area, std::f64::consts::PI * r * r, max_relative = 1e-5);
    }

    #[test]
    fn ball_volume_from_clipped_cells_3d() {
        let r = 0.8;
        let h = 1.0 / 16.0;
        let k = (2.0 / h) as i64;
        let mut vol = 0.0;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let lo = [
                        -1.0 + i as f64 * h,
                        -1.0 + j as f64 * h,
                        -1.0 + l as f64 * h,
                    ];
                    vol += h * h * h * box_ball_fraction(&lo, h, &[0.0, 0.0, 0.0], r, 3);
                }
            }
        }
        let exact = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
        assert_relative_eq!(vol, exact, max_relative = 1e-3);
    }
}
