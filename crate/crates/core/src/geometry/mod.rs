//! Discrete domains: kNN point clouds and Cartesian grids with wide or ring stencils.

mod knn;
pub mod probe;
mod stencil;

pub use stencil::{Corner, Stencil, StencilKind};

use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::shape::Shape;

/// How boundary nodes (where Dirichlet data is imposed) are chosen.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum BoundarySpec {
    /// No extra boundary nodes beyond those a grid stencil forces.
    #[default]
    None,
    /// Explicit per-node flags.
    Mask(Vec<bool>),
    /// Nodes outside `domain` or within `eps` of its boundary. `eps` defaults to `2h`.
    Band { domain: Shape, eps: Option<f64> },
}

impl BoundarySpec {
    /// Band around the boundary of `[0,1]^d`.
    pub fn unit_cube_band(dim: usize, eps: Option<f64>) -> BoundarySpec {
        BoundarySpec::Band {
            domain: Shape::Box {
                lo: vec![0.0; dim],
                hi: vec![1.0; dim],
            },
            eps,
        }
    }
}

/// Construction knobs that do not change the discretization itself.
#[derive(Clone, Debug, Default)]
pub struct CloudOptions {
    /// Probe count for dθ when `d >= 3`; the default depends on the dimension.
    pub dtheta_probes: Option<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct Graph {
    k: usize,
    neighbors: Vec<usize>,
    disp: Vec<f64>,
    norms: Vec<f64>,
    masks: Vec<u64>,
}

#[derive(Clone, Debug)]
pub(crate) struct Grid {
    dims: Vec<usize>,
    spacing: f64,
    stencil: Stencil,
    disp: Vec<f64>,
    norms: Vec<f64>,
    taps: Vec<Vec<(isize, f64)>>,
    masks: Vec<u64>,
}

#[derive(Clone, Debug)]
pub(crate) enum Topology {
    Graph(Graph),
    Grid(Grid),
}

/// The discrete domain: nodes, boundary flags, per-node displacement sets, and the
/// resolutions `h`, `δ`, `R`, `dθ`. Immutable once built.
#[derive(Clone, Debug)]
pub struct PointCloud {
    dim: usize,
    points: Vec<f64>,
    boundary: Vec<bool>,
    h: f64,
    delta: f64,
    radius: f64,
    dtheta_local: Vec<f64>,
    dtheta: f64,
    words: usize,
    topo: Topology,
}

/// Angle in `[0, π]` between two nonzero vectors.
pub fn angle(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let np = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nq = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    if np == 0.0 || nq == 0.0 {
        return Err(invalid("angle of a zero vector"));
    }
    Ok(angle_unchecked(p, q, np, nq))
}

pub(crate) fn angle_unchecked(p: &[f64], q: &[f64], np: f64, nq: f64) -> f64 {
    let c: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / (np * nq);
    c.clamp(-1.0, 1.0).acos()
}

/// Exact planar directional resolution: half the widest angular gap between directions.
pub(crate) fn dtheta_planar(disp: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut th: Vec<f64> = disp.map(|(x, y)| y.atan2(x)).collect();
    if th.is_empty() {
        return PI;
    }
    th.sort_by(f64::total_cmp);
    let mut gap = th[0] + 2.0 * PI - th[th.len() - 1];
    for w in th.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    0.5 * gap
}

/// Probed directional resolution: `max_p min_q w(p, q)` over the given unit probes.
pub(crate) fn dtheta_probed(dim: usize, disp: &[f64], probes: &[f64]) -> f64 {
    let unit: Vec<f64> = disp
        .chunks(dim)
        .flat_map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(move |x| x / n)
        })
        .collect();
    let mut worst = 1.0f64;
    for p in probes.chunks(dim) {
        let mut best = -1.0f64;
        for q in unit.chunks(dim) {
            let c: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
            best = best.max(c);
        }
        worst = worst.min(best);
    }
    worst.clamp(-1.0, 1.0).acos()
}

fn local_dtheta(dim: usize, disp: &[f64], probes: &[f64]) -> f64 {
    if dim == 2 {
        dtheta_planar(disp.chunks(2).map(|v| (v[0], v[1])))
    } else {
        dtheta_probed(dim, disp, probes)
    }
}

fn mask_words(k: usize) -> usize {
    k.div_ceil(64).max(1)
}

fn flat_points(points: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
    let dim = points.first().map(|p| p.len()).unwrap_or(0);
    if dim == 0 {
        return Err(invalid("point set is empty or zero-dimensional"));
    }
    let mut flat = Vec::with_capacity(points.len() * dim);
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        flat.extend_from_slice(p);
    }
    Ok((dim, flat))
}

fn apply_boundary(spec: &BoundarySpec, points: &[f64], dim: usize, h: f64, mask: &mut [bool]) -> Result<()> {
    match spec {
        BoundarySpec::None => {}
        BoundarySpec::Mask(m) => {
            if m.len() != mask.len() {
                return Err(Error::LengthMismatch {
                    expected: mask.len(),
                    got: m.len(),
                });
            }
            for (a, b) in mask.iter_mut().zip(m) {
                *a |= *b;
            }
        }
        BoundarySpec::Band { domain, eps } => {
            if domain.dim() != dim {
                return Err(invalid(format!(
                    "boundary domain is {}-dimensional, cloud is {dim}-dimensional",
                    domain.dim()
                )));
            }
            domain.validate()?;
            let eps = eps.unwrap_or(2.0 * h);
            if !(eps >= 0.0) {
                return Err(invalid("boundary band width must be nonnegative"));
            }
            for (i, m) in mask.iter_mut().enumerate() {
                let y = &points[i * dim..(i + 1) * dim];
                if !domain.contains(y) || domain.distance_to_boundary(y) < eps {
                    *m = true;
                }
            }
        }
    }
    Ok(())
}

/// kNN graph on the given points (self excluded). No symmetrization is performed.
pub fn build_knn_cloud(points: &[Vec<f64>], k: usize, boundary: BoundarySpec) -> Result<PointCloud> {
    build_knn_cloud_with(points, k, boundary, &CloudOptions::default())
}

pub fn build_knn_cloud_with(
    points: &[Vec<f64>],
    k: usize,
    boundary: BoundarySpec,
    options: &CloudOptions,
) -> Result<PointCloud> {
    let (dim, flat) = flat_points(points)?;
    let n = points.len();
    if k == 0 || k >= n {
        return Err(invalid(format!("need 1 <= k < n, got k={k}, n={n}")));
    }
    let (neighbors, dists) = knn::knn(&flat, dim, k)?;
    let mut disp = vec![0.0; n * k * dim];
    for i in 0..n {
        for j in 0..k {
            let w = neighbors[i * k + j];
            for a in 0..dim {
                disp[(i * k + j) * dim + a] = flat[w * dim + a] - flat[i * dim + a];
            }
        }
    }
    let norms = dists;
    let h = (0..n).map(|i| norms[i * k]).fold(0.0, f64::max);
    let delta = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let radius = norms.iter().cloned().fold(0.0, f64::max);

    let words = mask_words(k);
    let mut masks = vec![0u64; n * k * words];
    masks
        .par_chunks_mut(k * words)
        .enumerate()
        .for_each(|(i, row)| {
            let d = &disp[i * k * dim..(i + 1) * k * dim];
            fill_masks(d, dim, k, words, row, |a, b| {
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() > 0.0
            });
        });

    let mut mask = vec![false; n];
    apply_boundary(&boundary, &flat, dim, h, &mut mask)?;

    let probes = probe::sphere_directions(dim, options.dtheta_probes.unwrap_or(probe::default_probe_count(dim)));
    let dtheta_local: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| local_dtheta(dim, &disp[i * k * dim..(i + 1) * k * dim], &probes))
        .collect();
    let dtheta = global_dtheta(&dtheta_local, &mask);

    Ok(PointCloud {
        dim,
        points: flat,
        boundary: mask,
        h,
        delta,
        radius,
        dtheta_local,
        dtheta,
        words,
        topo: Topology::Graph(Graph {
            k,
            neighbors,
            disp,
            norms,
            masks,
        }),
    })
}

fn fill_masks(disp: &[f64], dim: usize, k: usize, words: usize, out: &mut [u64], positive: impl Fn(&[f64], &[f64]) -> bool) {
    for j in 0..k {
        let vj = &disp[j * dim..(j + 1) * dim];
        for w in 0..k {
            if positive(vj, &disp[w * dim..(w + 1) * dim]) {
                out[j * words + w / 64] |= 1u64 << (w % 64);
            }
        }
    }
}

fn global_dtheta(local: &[f64], boundary: &[bool]) -> f64 {
    let interior = local
        .iter()
        .zip(boundary)
        .filter(|(_, b)| !**b)
        .map(|(d, _)| *d)
        .fold(f64::NEG_INFINITY, f64::max);
    if interior.is_finite() {
        interior
    } else {
        local.iter().cloned().fold(0.0, f64::max)
    }
}

/// Lattice `[0,1]^d` with `dims[a]` nodes per axis (all equal), axis 0 varying fastest.
/// Nodes whose stencil leaves the grid are boundary nodes; `boundary` adds more.
pub fn build_grid_cloud(dims: &[usize], stencil: &Stencil, boundary: BoundarySpec) -> Result<PointCloud> {
    build_grid_cloud_with(dims, stencil, boundary, &CloudOptions::default())
}

pub fn build_grid_cloud_with(
    dims: &[usize],
    stencil: &Stencil,
    boundary: BoundarySpec,
    options: &CloudOptions,
) -> Result<PointCloud> {
    let dim = dims.len();
    if dim == 0 || dim != stencil.dim() {
        return Err(invalid(format!(
            "grid has {dim} axes but the stencil is {}-dimensional",
            stencil.dim()
        )));
    }
    if dims.iter().any(|&n| n < 3) {
        return Err(invalid("grids need at least 3 nodes per axis"));
    }
    if dims.iter().any(|&n| n != dims[0]) {
        return Err(invalid("grids must have the same node count on every axis"));
    }
    let side = dims[0];
    let reach = stencil.reach();
    if side < 2 * reach + 1 {
        return Err(invalid(format!(
            "stencil reach {reach} is too wide for a grid with {side} nodes per axis"
        )));
    }
    let spacing = 1.0 / (side - 1) as f64;
    let n = side.pow(dim as u32);
    let mut strides = vec![1usize; dim];
    for a in 1..dim {
        strides[a] = strides[a - 1] * side;
    }

    let mut points = Vec::with_capacity(n * dim);
    let mut mask = vec![false; n];
    for i in 0..n {
        let mut rem = i;
        let mut edge = false;
        for _ in 0..dim {
            let c = rem % side;
            rem /= side;
            points.push(c as f64 * spacing);
            edge |= c < reach || c + reach >= side;
        }
        mask[i] = edge;
    }

    let k = stencil.len();
    let mut disp = Vec::with_capacity(k * dim);
    let mut norms = Vec::with_capacity(k);
    let mut taps = Vec::with_capacity(k);
    for j in 0..k {
        let o = stencil.offset(j);
        disp.extend(o.iter().map(|x| x * spacing));
        norms.push(o.iter().map(|x| x * x).sum::<f64>().sqrt() * spacing);
        taps.push(
            stencil
                .interp_weights(j)
                .iter()
                .map(|c| {
                    let lin: isize = c
                        .offset
                        .iter()
                        .zip(&strides)
                        .map(|(o, s)| *o as isize * *s as isize)
                        .sum();
                    (lin, c.weight)
                })
                .collect(),
        );
    }
    let words = mask_words(k);
    let mut masks = vec![0u64; k * words];
    for j in 0..k {
        let nj = stencil.numerator(j);
        for w in 0..k {
            let nw = stencil.numerator(w);
            let dot: i64 = nj.iter().zip(nw).map(|(a, b)| a * b).sum();
            if dot > 0 {
                masks[j * words + w / 64] |= 1u64 << (w % 64);
            }
        }
    }

    apply_boundary(&boundary, &points, dim, spacing, &mut mask)?;
    let probes = if dim == 2 {
        Vec::new()
    } else {
        probe::sphere_directions(dim, options.dtheta_probes.unwrap_or(probe::default_probe_count(dim)))
    };
    let dt = local_dtheta(dim, &disp, &probes);
    let delta = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let radius = norms.iter().cloned().fold(0.0, f64::max);

    Ok(PointCloud {
        dim,
        points,
        boundary: mask,
        h: spacing,
        delta,
        radius,
        dtheta_local: vec![dt; n],
        dtheta: dt,
        words,
        topo: Topology::Grid(Grid {
            dims: dims.to_vec(),
            spacing,
            stencil: stencil.clone(),
            disp,
            norms,
            taps,
            masks,
        }),
    })
}

/// `max_p min_{q ∈ V_h(x)} w(p, q)` over `n_probe` deterministic quasi-uniform probes.
pub fn directional_resolution(cloud: &PointCloud, node: usize, n_probe: usize) -> Result<f64> {
    cloud.check_node(node)?;
    if n_probe == 0 {
        return Err(invalid("need at least one probe direction"));
    }
    let k = cloud.degree(node);
    if k == 0 {
        return Err(invalid("node has no displacements"));
    }
    let mut disp = Vec::with_capacity(k * cloud.dim);
    for j in 0..k {
        disp.extend_from_slice(cloud.displacement(node, j));
    }
    let probes = probe::sphere_directions(cloud.dim, n_probe);
    Ok(dtheta_probed(cloud.dim, &disp, &probes))
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Coordinates flattened row-major (`n * d`).
    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_count(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }

    /// Spatial resolution: largest nearest-neighbor distance (the spacing on grids).
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Smallest displacement norm.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Largest displacement norm.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dtheta_local(&self) -> &[f64] {
        &self.dtheta_local
    }

    /// Largest local directional resolution over interior nodes.
    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.topo, Topology::Grid(_))
    }

    pub fn grid_dims(&self) -> Option<&[usize]> {
        match &self.topo {
            Topology::Grid(g) => Some(&g.dims),
            Topology::Graph(_) => None,
        }
    }

    pub fn spacing(&self) -> Option<f64> {
        match &self.topo {
            Topology::Grid(g) => Some(g.spacing),
            Topology::Graph(_) => None,
        }
    }

    pub fn stencil(&self) -> Option<&Stencil> {
        match &self.topo {
            Topology::Grid(g) => Some(&g.stencil),
            Topology::Graph(_) => None,
        }
    }

    /// kNN neighbor count, if this is a graph.
    pub fn knn_k(&self) -> Option<usize> {
        match &self.topo {
            Topology::Graph(g) => Some(g.k),
            Topology::Grid(_) => None,
        }
    }

    pub(crate) fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.len() {
            return Err(invalid(format!("node {node} out of range for {} nodes", self.len())));
        }
        Ok(())
    }

    /// Number of displacements at node `i`.
    pub fn degree(&self, _i: usize) -> usize {
        match &self.topo {
            Topology::Graph(g) => g.k,
            Topology::Grid(g) => g.norms.len(),
        }
    }

    /// `V_h(x_i)[j]` in domain units.
    pub fn displacement(&self, i: usize, j: usize) -> &[f64] {
        let d = self.dim;
        match &self.topo {
            Topology::Graph(g) => &g.disp[(i * g.k + j) * d..(i * g.k + j + 1) * d],
            Topology::Grid(g) => &g.disp[j * d..(j + 1) * d],
        }
    }

    pub fn displacement_norm(&self, i: usize, j: usize) -> f64 {
        match &self.topo {
            Topology::Graph(g) => g.norms[i * g.k + j],
            Topology::Grid(g) => g.norms[j],
        }
    }

    pub(crate) fn norms_at(&self, i: usize) -> &[f64] {
        match &self.topo {
            Topology::Graph(g) => &g.norms[i * g.k..(i + 1) * g.k],
            Topology::Grid(g) => &g.norms,
        }
    }

    /// Node index of neighbor `j` when it is an actual node (always on graphs and
    /// wide stencils, only for on-lattice points of ring stencils).
    pub fn neighbor_node(&self, i: usize, j: usize) -> Option<usize> {
        match &self.topo {
            Topology::Graph(g) => Some(g.neighbors[i * g.k + j]),
            Topology::Grid(g) => {
                if g.taps[j].len() != 1 || !self.taps_inside(g, i, j) {
                    return None;
                }
                Some((i as isize + g.taps[j][0].0) as usize)
            }
        }
    }

    fn taps_inside(&self, g: &Grid, i: usize, j: usize) -> bool {
        let side = g.dims[0] as i64;
        g.stencil.interp_weights(j).iter().all(|c| {
            let mut rem = i as i64;
            c.offset.iter().all(|o| {
                let coord = rem % side + o;
                rem /= side;
                (0..side).contains(&coord)
            })
        })
    }

    /// Words per subdifferential bitmask.
    pub(crate) fn mask_words(&self) -> usize {
        self.words
    }

    /// Bitmask of the neighbors `w` with `v_j . v_w > 0`.
    pub(crate) fn positive_mask(&self, i: usize, j: usize) -> &[u64] {
        let w = self.words;
        match &self.topo {
            Topology::Graph(g) => &g.masks[(i * g.k + j) * w..(i * g.k + j + 1) * w],
            Topology::Grid(g) => &g.masks[j * w..(j + 1) * w],
        }
    }

    /// Field values at the neighbors of an interior node (interpolated on ring stencils).
    #[inline]
    pub(crate) fn gather(&self, field: &[f64], i: usize, out: &mut [f64]) {
        match &self.topo {
            Topology::Graph(g) => {
                for (o, &w) in out.iter_mut().zip(&g.neighbors[i * g.k..(i + 1) * g.k]) {
                    *o = field[w];
                }
            }
            Topology::Grid(g) => {
                for (o, taps) in out.iter_mut().zip(&g.taps) {
                    *o = taps
                        .iter()
                        .map(|&(lin, wt)| wt * field[(i as isize + lin) as usize])
                        .sum();
                }
            }
        }
    }

    /// Field values at every displacement of node `i`; errors if a grid stencil leaves the grid.
    pub fn neighbor_values(&self, field: &[f64], i: usize) -> Result<Vec<f64>> {
        self.check_node(i)?;
        if field.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: field.len(),
            });
        }
        if let Topology::Grid(g) = &self.topo {
            if (0..g.taps.len()).any(|j| !self.taps_inside(g, i, j)) {
                return Err(Error::BoundaryNode(i));
            }
        }
        let mut out = vec![0.0; self.degree(i)];
        self.gather(field, i, &mut out);
        Ok(out)
    }

    /// Index `j` with `V_h(x_i)[j] = v` (to round-off), if present.
    pub fn find_displacement(&self, i: usize, v: &[f64]) -> Option<usize> {
        let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
        (0..self.degree(i)).find(|&j| {
            self.displacement(i, j)
                .iter()
                .zip(v)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * scale)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_corners() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let c = build_knn_cloud(&pts, 2, BoundarySpec::None).unwrap();
        assert_eq!(c.h(), 1.0);
        for i in 0..4 {
            let mut nb: Vec<usize> = (0..2).map(|j| c.neighbor_node(i, j).unwrap()).collect();
            nb.sort();
            let want: Vec<usize> = match i {
                0 => vec![1, 2],
                1 => vec![0, 3],
                2 => vec![0, 3],
                _ => vec![1, 2],
            };
            assert_eq!(nb, want);
        }
    }

    #[test]
    fn collinear_h() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![0.3 * i as f64, 0.0]).collect();
        let c = build_knn_cloud(&pts, 2, BoundarySpec::None).unwrap();
        assert!((c.h() - 0.3).abs() < 1e-15);
        assert!(build_knn_cloud(&pts, 5, BoundarySpec::None).is_err());
    }

    #[test]
    fn tiny_grid() {
        let s = Stencil::grid_wide(2, 3, false).unwrap();
        let c = build_grid_cloud(&[3, 3], &s, BoundarySpec::None).unwrap();
        assert_eq!(c.interior_count(), 1);
        assert!(!c.is_boundary(4));
        assert_eq!(c.degree(4), 8);
        assert!(build_grid_cloud(&[3, 3], &Stencil::grid_wide(2, 5, false).unwrap(), BoundarySpec::None).is_err());
    }

    #[test]
    fn grid_displacements_match_points() {
        let s = Stencil::grid_wide(2, 7, false).unwrap();
        let c = build_grid_cloud(&[16, 16], &s, BoundarySpec::None).unwrap();
        let i = 7 + 7 * 16;
        for j in 0..c.degree(i) {
            let w = c.neighbor_node(i, j).unwrap();
            for a in 0..2 {
                assert!((c.point(w)[a] - c.point(i)[a] - c.displacement(i, j)[a]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ring_dtheta_shrinks() {
        let mut last = f64::INFINITY;
        for k in [8, 16, 32, 64] {
            let s = Stencil::interp_ring(k).unwrap();
            let c = build_grid_cloud(&[9, 9], &s, BoundarySpec::None).unwrap();
            assert!(c.dtheta() <= last);
            assert!(c.dtheta() >= PI / k as f64 - 1e-12);
            last = c.dtheta();
        }
    }

    #[test]
    fn axis_directions_resolution() {
        let s = Stencil::grid_wide(2, 3, true).unwrap();
        let c = build_grid_cloud(&[5, 5], &s, BoundarySpec::None).unwrap();
        // The 3x3 primitive stencil has 8 directions 45 degrees apart.
        assert!((c.dtheta() - PI / 8.0).abs() < 1e-12);
        let probed = directional_resolution(&c, 12, 1 << 12).unwrap();
        assert!(probed <= PI / 8.0 + 1e-12 && probed > PI / 8.0 - 1e-2);
    }

    #[test]
    fn angle_contract() {
        assert!((angle(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((angle(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - PI).abs() < 1e-15);
        let a = angle(&[1.0, 1e-9], &[1.0, 1e-9]).unwrap();
        assert!(a.is_finite() && a < 1e-7);
        assert!(angle(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }
}
