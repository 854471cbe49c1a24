//! Uniform lattice domains and discrete map fields.
//!
//! Nodes sit at half-offset lattice positions `(k + 1/2) h`, so the domain
//! center is never a node. The discrete Dirichlet energy is a sum of convex
//! per-cell terms built from forward differences, and `energy_gradient` is
//! its exact adjoint with Dirichlet rows zeroed.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ObstacleGeometry;
use crate::quad;

/// Subdivision depth for clipped-cell ball quadrature.
const CLIP_DEPTH: u32 = 3;

/// Chunk size for deterministic parallel reductions. Fixed chunking makes
/// the summation tree independent of the thread count.
const PAR_CHUNK: usize = 8192;

#[derive(Debug, Clone)]
pub enum DomainShape {
    Ball { radius: f64 },
    Box { half_widths: Vec<f64> },
}

impl DomainShape {
    fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainShape::Ball { radius } => {
                x.iter().map(|v| v * v).sum::<f64>() < radius * radius
            }
            DomainShape::Box { half_widths } => {
                x.iter().zip(half_widths).all(|(v, w)| v.abs() < *w)
            }
        }
    }

    pub fn contains_ball(&self, center: &[f64], r: f64) -> bool {
        match self {
            DomainShape::Ball { radius } => {
                let c = center.iter().map(|v| v * v).sum::<f64>().sqrt();
                c + r <= *radius
            }
            DomainShape::Box { half_widths } => center
                .iter()
                .zip(half_widths)
                .all(|(v, w)| v.abs() + r <= *w),
        }
    }
}

#[derive(Debug)]
pub struct GridDomain {
    n: usize,
    shape: DomainShape,
    h: f64,
    /// node coordinates, flat with stride `n`
    coords: Vec<f64>,
    /// per-node neighbors `[ax0-, ax0+, ax1-, ax1+, ...]`, -1 when absent
    neighbors: Vec<i64>,
    boundary_mask: Vec<bool>,
    /// all 2n axis neighbors present
    interior_mask: Vec<bool>,
    /// all n forward neighbors present: the node anchors an energy cell
    anchor_mask: Vec<bool>,
    lattice_index: HashMap<[i64; 3], usize>,
}

impl GridDomain {
    pub fn new(n: usize, shape: DomainShape, h: f64) -> Arc<GridDomain> {
        assert!((1..=3).contains(&n), "full grids support n in 1..=3");
        assert!(h > 0.0);
        let extent: Vec<f64> = match &shape {
            DomainShape::Ball { radius } => vec![*radius; n],
            DomainShape::Box { half_widths } => {
                assert_eq!(half_widths.len(), n);
                half_widths.clone()
            }
        };
        let k_max: Vec<i64> = extent.iter().map(|w| (w / h).ceil() as i64 + 1).collect();

        // lexicographic walk over the bounding lattice; nodes sit at (k + 1/2) h
        let mut coords = Vec::new();
        let mut lattice: Vec<[i64; 3]> = Vec::new();
        let mut lattice_index = HashMap::new();
        let mut k = vec![0i64; n];
        let mut x = vec![0.0; n];
        fn walk(
            axis: usize,
            n: usize,
            k_max: &[i64],
            k: &mut Vec<i64>,
            x: &mut Vec<f64>,
            h: f64,
            shape: &DomainShape,
            coords: &mut Vec<f64>,
            lattice: &mut Vec<[i64; 3]>,
            index: &mut HashMap<[i64; 3], usize>,
        ) {
            if axis == n {
                if shape.contains(x) {
                    let mut key = [0i64; 3];
                    key[..n].copy_from_slice(k);
                    index.insert(key, coords.len() / n);
                    coords.extend_from_slice(x);
                    lattice.push(key);
                }
                return;
            }
            for ki in -k_max[axis]..k_max[axis] {
                k[axis] = ki;
                x[axis] = (ki as f64 + 0.5) * h;
                walk(axis + 1, n, k_max, k, x, h, shape, coords, lattice, index);
            }
        }
        walk(
            0,
            n,
            &k_max,
            &mut k,
            &mut x,
            h,
            &shape,
            &mut coords,
            &mut lattice,
            &mut lattice_index,
        );

        let count = coords.len() / n;
        let mut neighbors = vec![-1i64; count * 2 * n];
        let mut boundary_mask = vec![false; count];
        let mut interior_mask = vec![true; count];
        let mut anchor_mask = vec![true; count];
        for i in 0..count {
            let key = lattice[i];
            for a in 0..n {
                for (slot, dir) in [(2 * a, -1i64), (2 * a + 1, 1i64)] {
                    let mut nb = key;
                    nb[a] += dir;
                    match lattice_index.get(&nb) {
                        Some(&j) => neighbors[i * 2 * n + slot] = j as i64,
                        None => {
                            boundary_mask[i] = true;
                            interior_mask[i] = false;
                            if dir == 1 {
                                anchor_mask[i] = false;
                            }
                        }
                    }
                }
            }
        }

        Arc::new(GridDomain {
            n,
            shape,
            h,
            coords,
            neighbors,
            boundary_mask,
            interior_mask,
            anchor_mask,
            lattice_index,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn node_count(&self) -> usize {
        self.coords.len() / self.n
    }

    pub fn coord(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary_mask[i]
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior_mask[i]
    }

    pub fn is_cell_anchor(&self, i: usize) -> bool {
        self.anchor_mask[i]
    }

    /// Neighbor along `axis` in direction `dir` (-1 or +1), if present.
    pub fn neighbor(&self, i: usize, axis: usize, dir: i64) -> Option<usize> {
        let slot = 2 * axis + if dir > 0 { 1 } else { 0 };
        let j = self.neighbors[i * 2 * self.n + slot];
        (j >= 0).then_some(j as usize)
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&i| self.boundary_mask[i])
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&i| self.interior_mask[i])
    }

    fn node_at(&self, key: [i64; 3]) -> Option<usize> {
        self.lattice_index.get(&key).copied()
    }
}

#[derive(Debug, Clone)]
pub struct MapField {
    domain: Arc<GridDomain>,
    m: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GradientField {
    domain: Arc<GridDomain>,
    m: usize,
    values: Vec<f64>,
}

impl MapField {
    pub fn from_fn(
        domain: Arc<GridDomain>,
        m: usize,
        mut f: impl FnMut(&[f64]) -> Vec<f64>,
    ) -> MapField {
        let mut values = Vec::with_capacity(domain.node_count() * m);
        for i in 0..domain.node_count() {
            let v = f(domain.coord(i));
            assert_eq!(v.len(), m);
            values.extend_from_slice(&v);
        }
        MapField { domain, m, values }
    }

    pub fn constant(domain: Arc<GridDomain>, value: &[f64]) -> MapField {
        let m = value.len();
        let count = domain.node_count();
        MapField {
            domain,
            m,
            values: value.iter().cloned().cycle().take(count * m).collect(),
        }
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Central-difference gradient matrix (n x m, row-major by axis) at an
    /// interior node.
    pub fn central_gradient(&self, i: usize) -> Vec<f64> {
        let n = self.domain.n();
        let mut g = vec![0.0; n * self.m];
        for a in 0..n {
            let p = self.domain.neighbor(i, a, 1).expect("interior node");
            let q = self.domain.neighbor(i, a, -1).expect("interior node");
            let up = self.value(p);
            let uq = self.value(q);
            for c in 0..self.m {
                g[a * self.m + c] = (up[c] - uq[c]) / (2.0 * self.domain.h());
            }
        }
        g
    }

    /// 2n-point discrete Laplacian at an interior node.
    pub fn discrete_laplacian(&self, i: usize) -> Vec<f64> {
        let n = self.domain.n();
        let h2 = self.domain.h() * self.domain.h();
        let mut lap = vec![0.0; self.m];
        let ui = self.value(i).to_vec();
        for a in 0..n {
            for dir in [-1i64, 1] {
                let j = self.domain.neighbor(i, a, dir).expect("interior node");
                let uj = self.value(j);
                for c in 0..self.m {
                    lap[c] += (uj[c] - ui[c]) / h2;
                }
            }
        }
        lap
    }

    /// Largest constraint violation `-min(rho(u_i), 0)` over all nodes.
    pub fn max_penetration(&self, obstacle: &ObstacleGeometry) -> f64 {
        (0..self.domain.node_count())
            .map(|i| -obstacle.signed_distance(self.value(i)).min(0.0))
            .fold(0.0, f64::max)
    }

    /// Atomic CSV dump: `node,x1..xn,u1..um,rho`.
    pub fn write_csv(&self, path: &Path, obstacle: Option<&ObstacleGeometry>) -> Result<()> {
        let tmp = path.with_extension("csv.tmp");
        {
            let mut file = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            let n = self.domain.n();
            let mut header = String::from("node");
            for a in 0..n {
                header.push_str(&format!(",x{}", a + 1));
            }
            for c in 0..self.m {
                header.push_str(&format!(",u{}", c + 1));
            }
            header.push_str(",rho");
            writeln!(file, "{header}")?;
            for i in 0..self.domain.node_count() {
                let mut row = format!("{i}");
                for v in self.domain.coord(i) {
                    row.push_str(&format!(",{v:.17e}"));
                }
                for v in self.value(i) {
                    row.push_str(&format!(",{v:.17e}"));
                }
                let rho = obstacle
                    .map(|o| o.signed_distance(self.value(i)))
                    .unwrap_or(f64::NAN);
                row.push_str(&format!(",{rho:.17e}"));
                writeln!(file, "{row}")?;
            }
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads a field dump back onto a matching domain.
    pub fn read_csv(domain: Arc<GridDomain>, m: usize, path: &Path) -> Result<MapField> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let n = domain.n();
        let mut values = vec![0.0; domain.node_count() * m];
        let mut seen = 0usize;
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let parse = |idx: usize| -> Result<f64> {
                record
                    .get(idx)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse {
                        path: path.display().to_string(),
                        message: format!("bad numeric field {idx}"),
                    })
            };
            let node = parse(0)? as usize;
            if node >= domain.node_count() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    message: format!("node index {node} out of range"),
                });
            }
            for a in 0..n {
                let x = parse(1 + a)?;
                if (x - domain.coord(node)[a]).abs() > 1e-9 {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        message: format!("node {node} coordinate mismatch"),
                    });
                }
            }
            for c in 0..m {
                values[node * m + c] = parse(1 + n + c)?;
            }
            seen += 1;
        }
        if seen != domain.node_count() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                message: format!(
                    "expected {} rows, found {seen}",
                    domain.node_count()
                ),
            });
        }
        Ok(MapField { domain, m, values })
    }

    /// Multilinear interpolation at an arbitrary point; `None` when the
    /// surrounding cell is not fully inside the domain.
    pub fn interpolate(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = self.domain.n();
        let h = self.domain.h();
        let mut base = [0i64; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..n {
            // node coordinates are (k + 1/2) h
            let t = x[a] / h - 0.5;
            let k = t.floor();
            base[a] = k as i64;
            frac[a] = t - k;
        }
        let mut out = vec![0.0; self.m];
        for corner in 0..(1usize << n) {
            let mut key = [0i64; 3];
            let mut w = 1.0;
            for a in 0..n {
                let bit = corner >> a & 1;
                key[a] = base[a] + bit as i64;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            let node = self.domain.node_at(key)?;
            let v = self.value(node);
            for c in 0..self.m {
                out[c] += w * v[c];
            }
        }
        Some(out)
    }
}

impl GradientField {
    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Per-cell energy: forward differences along every existing forward edge,
/// `sum_axes |u(i+e_a) - u(i)|^2 h^(n-2)`. Counting edges rather than
/// complete stencils keeps the energy invariant under grid rotations.
fn cell_energy(field: &MapField, i: usize) -> f64 {
    let domain = field.domain();
    let n = domain.n();
    let m = field.m();
    let scale = domain.h().powi(n as i32 - 2);
    let ui = field.value(i);
    let mut e = 0.0;
    for a in 0..n {
        let Some(j) = domain.neighbor(i, a, 1) else {
            continue;
        };
        let uj = field.value(j);
        for c in 0..m {
            let d = uj[c] - ui[c];
            e += d * d;
        }
    }
    e * scale
}

/// Total discrete Dirichlet energy. The reduction is a fixed-chunk tree, so
/// the result is identical for any thread count.
pub fn dirichlet_energy(field: &MapField) -> f64 {
    let domain = field.domain();
    let ids: Vec<usize> = (0..domain.node_count()).collect();
    let partials: Vec<f64> = ids
        .par_chunks(PAR_CHUNK)
        .map(|chunk| chunk.iter().map(|&i| cell_energy(field, i)).sum::<f64>())
        .collect();
    partials.iter().sum()
}

/// Energy restricted to a cell subset; used by additivity checks.
pub fn dirichlet_energy_where(field: &MapField, keep: impl Fn(usize) -> bool) -> f64 {
    let domain = field.domain();
    (0..domain.node_count())
        .filter(|&i| keep(i))
        .map(|i| cell_energy(field, i))
        .sum()
}

/// Scaled local energy `r^(2-n) * integral over B_r(x0) of |Du|^2`, with
/// partial cells weighted by their clipped volume fraction.
pub fn scaled_energy(field: &MapField, x0: &[f64], r: f64) -> Result<f64> {
    let domain = field.domain();
    let n = domain.n();
    let h = domain.h();
    if !domain.shape().contains_ball(x0, r) {
        return Err(Error::BallOutsideDomain {
            center: x0.to_vec(),
            r,
        });
    }
    let ids: Vec<usize> = (0..domain.node_count()).collect();
    let partials: Vec<f64> = ids
        .par_chunks(PAR_CHUNK)
        .map(|chunk| {
            let mut acc = 0.0;
            for &i in chunk {
                let lo = domain.coord(i);
                // quick reject on the cell bounding sphere
                let mut d2 = 0.0;
                for a in 0..n {
                    let c = lo[a] + 0.5 * h - x0[a];
                    d2 += c * c;
                }
                let reach = r + h * (n as f64).sqrt();
                if d2 > reach * reach {
                    continue;
                }
                let frac = quad::box_ball_fraction(lo, h, x0, r, CLIP_DEPTH);
                if frac == 0.0 {
                    continue;
                }
                // cell_energy already carries the full-cell volume factor
                acc += cell_energy(field, i) * frac;
            }
            acc
        })
        .collect();
    let integral: f64 = partials.iter().sum();
    Ok(r.powi(2 - n as i32) * integral)
}

/// Ball integral of a per-node sample, each node carrying a cell of volume
/// h^n centered at the node. Returns `(integral, covered volume)`.
pub fn ball_integral_nodes(
    domain: &GridDomain,
    sample: &[f64],
    x0: &[f64],
    r: f64,
) -> (f64, f64) {
    let n = domain.n();
    let h = domain.h();
    let hn = h.powi(n as i32);
    let mut integral = 0.0;
    let mut volume = 0.0;
    let mut lo = vec![0.0; n];
    for i in 0..domain.node_count() {
        let x = domain.coord(i);
        let mut d2 = 0.0;
        for a in 0..n {
            let c = x[a] - x0[a];
            d2 += c * c;
        }
        let reach = r + h * (n as f64).sqrt();
        if d2 > reach * reach {
            continue;
        }
        for a in 0..n {
            lo[a] = x[a] - 0.5 * h;
        }
        let frac = quad::box_ball_fraction(&lo, h, x0, r, CLIP_DEPTH);
        if frac > 0.0 {
            integral += sample[i] * frac * hn;
            volume += frac * hn;
        }
    }
    (integral, volume)
}

/// Exact variational gradient of `dirichlet_energy` with respect to the node
/// values; zero on boundary nodes (Dirichlet data is fixed). At interior
/// stencil-complete nodes this equals `-2 h^n` times the discrete Laplacian.
///
/// Per-axis differences are paired before the cross-axis sum, so the gather
/// commutes bitwise with grid rotations (IEEE addition is commutative).
pub fn energy_gradient(field: &MapField) -> GradientField {
    let domain = field.domain().clone();
    let n = domain.n();
    let m = field.m();
    let scale = 2.0 * domain.h().powi(n as i32 - 2);
    let mut values = vec![0.0; domain.node_count() * m];
    values
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(i, g)| {
            if domain.is_boundary(i) {
                return;
            }
            let ui = field.value(i);
            for c in 0..m {
                let mut acc = 0.0;
                for a in 0..n {
                    let mut axis = 0.0;
                    if let Some(j) = domain.neighbor(i, a, 1) {
                        axis += ui[c] - field.value(j)[c];
                    }
                    if let Some(j) = domain.neighbor(i, a, -1) {
                        axis += ui[c] - field.value(j)[c];
                    }
                    acc += axis;
                }
                g[c] = scale * acc;
            }
        });
    GradientField { domain, m, values }
}

/// Replaces infeasible node values by their nearest boundary point. Feasible
/// and Dirichlet-boundary nodes are untouched.
pub fn project_field(field: &MapField, obstacle: &ObstacleGeometry) -> Result<MapField> {
    let mut out = field.clone();
    project_in_place(&mut out, obstacle)?;
    Ok(out)
}

pub(crate) fn project_in_place(field: &mut MapField, obstacle: &ObstacleGeometry) -> Result<()> {
    // Dead band at rounding scale keeps the projection bitwise idempotent:
    // values already snapped onto the boundary must not be touched again.
    let eps = 1e-13 * obstacle.diameter();
    let count = field.domain().node_count();
    let boundary: Vec<bool> = (0..count).map(|i| field.domain().is_boundary(i)).collect();
    for i in 0..count {
        if boundary[i] {
            continue;
        }
        let rho = obstacle.signed_distance(field.value(i));
        if rho < -eps {
            let (pi, _) = obstacle
                .project_to_boundary(field.value(i))
                .map_err(|_| Error::DeepPenetration { node: i, rho })?;
            field.value_mut(i).copy_from_slice(&pi);
        }
    }
    Ok(())
}
