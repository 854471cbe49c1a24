//! Closed planar polylines bounding an obstacle region.
//!
//! Orientation is normalized to counterclockwise, so the enclosed obstacle
//! lies on the left of travel and the outward normal (pointing away from
//! the obstacle) is the tangent rotated by -90 degrees.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PlanarCurveData {
    vertices: Vec<[f64; 2]>,
    /// unit tangents per edge i -> i+1
    tangents: Vec<[f64; 2]>,
    edge_lengths: Vec<f64>,
    /// outward unit normal per edge
    edge_normals: Vec<[f64; 2]>,
    /// outward unit normal per vertex (bisector of adjacent edge normals)
    vertex_normals: Vec<[f64; 2]>,
    /// signed discrete curvature per vertex (turning angle / mean edge length)
    vertex_curvatures: Vec<f64>,
    cumulative_length: Vec<f64>,
    total_length: f64,
}

impl PlanarCurveData {
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() >= 2 {
            let first = vertices[0];
            let last = *vertices.last().unwrap();
            if (first[0] - last[0]).abs() < 1e-14 && (first[1] - last[1]).abs() < 1e-14 {
                vertices.pop();
            }
        }
        if vertices.len() < 3 {
            return Err(Error::config(
                "obstacle.vertices",
                "a closed polyline needs at least 3 distinct vertices",
            ));
        }
        // shoelace area; normalize to counterclockwise
        let mut area2 = 0.0;
        for i in 0..vertices.len() {
            let a = vertices[i];
            let b = vertices[(i + 1) % vertices.len()];
            area2 += a[0] * b[1] - b[0] * a[1];
        }
        if area2.abs() < 1e-14 {
            return Err(Error::config(
                "obstacle.vertices",
                "polyline encloses no area",
            ));
        }
        if area2 < 0.0 {
            vertices.reverse();
        }

        let n = vertices.len();
        let mut tangents = Vec::with_capacity(n);
        let mut edge_lengths = Vec::with_capacity(n);
        let mut edge_normals = Vec::with_capacity(n);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let e = [b[0] - a[0], b[1] - a[1]];
            let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
            if len < 1e-14 {
                return Err(Error::config(
                    "obstacle.vertices",
                    format!("zero-length edge at vertex {i}"),
                ));
            }
            let t = [e[0] / len, e[1] / len];
            tangents.push(t);
            edge_lengths.push(len);
            edge_normals.push([t[1], -t[0]]);
        }

        let mut vertex_normals = Vec::with_capacity(n);
        let mut vertex_curvatures = Vec::with_capacity(n);
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let np = edge_normals[prev];
            let nc = edge_normals[i];
            let mut nv = [np[0] + nc[0], np[1] + nc[1]];
            let norm = (nv[0] * nv[0] + nv[1] * nv[1]).sqrt();
            if norm < 1e-12 {
                nv = nc;
            } else {
                nv = [nv[0] / norm, nv[1] / norm];
            }
            vertex_normals.push(nv);
            let tp = tangents[prev];
            let tc = tangents[i];
            let turn = (tp[0] * tc[1] - tp[1] * tc[0]).atan2(tp[0] * tc[0] + tp[1] * tc[1]);
            let mean_len = 0.5 * (edge_lengths[prev] + edge_lengths[i]);
            vertex_curvatures.push(turn / mean_len);
        }

        let mut cumulative_length = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cumulative_length.push(0.0);
        for len in &edge_lengths {
            acc += len;
            cumulative_length.push(acc);
        }

        Ok(PlanarCurveData {
            vertices,
            tangents,
            edge_lengths,
            edge_normals,
            vertex_normals,
            vertex_curvatures,
            cumulative_length,
            total_length: acc,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn is_convex(&self) -> bool {
        self.vertex_curvatures.iter().all(|&k| k >= -1e-9)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for i in 0..2 {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        (lo, hi)
    }

    pub fn enclosing_circle(&self) -> ([f64; 2], f64) {
        let (lo, hi) = self.bbox();
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let r = self
            .vertices
            .iter()
            .map(|v| ((v[0] - c[0]).powi(2) + (v[1] - c[1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        (c, r)
    }

    /// Reach estimate from discrete curvature, ignoring sharp corners
    /// (projection near a convex corner is single-valued inside its normal
    /// fan, so corners do not limit the reach).
    pub fn reach_estimate(&self) -> f64 {
        let corner_turn = 45f64.to_radians();
        let mut kappa_max: f64 = 0.0;
        for (i, &k) in self.vertex_curvatures.iter().enumerate() {
            let prev = (i + self.vertices.len() - 1) % self.vertices.len();
            let mean_len = 0.5 * (self.edge_lengths[prev] + self.edge_lengths[i]);
            let turn = k * mean_len;
            if turn.abs() < corner_turn {
                kappa_max = kappa_max.max(k.abs());
            }
        }
        if kappa_max < 1e-12 {
            0.25 * self.bbox_diagonal()
        } else {
            0.9 / kappa_max
        }
    }

    fn nearest_on_segment(&self, i: usize, y: [f64; 2]) -> ([f64; 2], f64, f64) {
        let a = self.vertices[i];
        let t = self.tangents[i];
        let len = self.edge_lengths[i];
        let proj = ((y[0] - a[0]) * t[0] + (y[1] - a[1]) * t[1]).clamp(0.0, len);
        let p = [a[0] + proj * t[0], a[1] + proj * t[1]];
        let d = ((y[0] - p[0]).powi(2) + (y[1] - p[1]).powi(2)).sqrt();
        (p, d, proj / len)
    }

    /// Index of the nearest segment, the foot point, its distance and the
    /// parameter along the segment.
    fn nearest(&self, y: [f64; 2]) -> (usize, [f64; 2], f64, f64) {
        let mut best = (0usize, [0.0; 2], f64::INFINITY, 0.0);
        for i in 0..self.vertices.len() {
            let (p, d, s) = self.nearest_on_segment(i, y);
            if d < best.2 {
                best = (i, p, d, s);
            }
        }
        best
    }

    fn contains(&self, y: [f64; 2]) -> bool {
        // even-odd crossing number
        let mut inside = false;
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a[1] > y[1]) != (b[1] > y[1]) {
                let x_cross = a[0] + (y[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if y[0] < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn signed_distance(&self, y: [f64; 2]) -> f64 {
        let (_, _, d, _) = self.nearest(y);
        if self.contains(y) {
            -d
        } else {
            d
        }
    }

    /// Nearest boundary point and outward unit normal.
    pub fn project(&self, y: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let (i, p, d, s) = self.nearest(y);
        let scale = self.bbox_diagonal();
        if d > 1e-9 * scale {
            let sign = if self.contains(y) { -d } else { d };
            let nu = [(y[0] - p[0]) / sign, (y[1] - p[1]) / sign];
            (p, nu)
        } else {
            let nu = if s < 1e-9 {
                self.vertex_normals[i]
            } else if s > 1.0 - 1e-9 {
                self.vertex_normals[(i + 1) % self.vertices.len()]
            } else {
                self.edge_normals[i]
            };
            (p, nu)
        }
    }

    /// Discrete curvature near a boundary point, interpolated between the
    /// adjacent vertex values.
    pub fn curvature_at(&self, p: [f64; 2]) -> f64 {
        let (i, _, _, s) = self.nearest(p);
        let k0 = self.vertex_curvatures[i];
        let k1 = self.vertex_curvatures[(i + 1) % self.vertices.len()];
        (1.0 - s) * k0 + s * k1
    }

    pub fn sample_by_arclength(&self, count: usize) -> Vec<([f64; 2], [f64; 2])> {
        let mut out = Vec::with_capacity(count);
        let n = self.vertices.len();
        let mut edge = 0usize;
        for k in 0..count {
            let target = self.total_length * k as f64 / count as f64;
            while edge + 1 < n && self.cumulative_length[edge + 1] <= target {
                edge += 1;
            }
            let local = target - self.cumulative_length[edge];
            let t = self.tangents[edge];
            let a = self.vertices[edge];
            let p = [a[0] + local * t[0], a[1] + local * t[1]];
            out.push((p, self.edge_normals[edge]));
        }
        out
    }
}
