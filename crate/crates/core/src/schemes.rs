//! The generic monotone scheme `S_h(u, t, x) = max_{p ∈ P_h^-(u,t,x)} F_h(p, u, t, x)`
//! and its catalog of Hamiltonians.

use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

use crate::calculus::{orthonormal_pairs_3d, perp_in_stencil, thresholds};
use crate::density::{
    density_at, derive_seed, grid_density_values, has_analytic, hyperplane_integral_analytic,
    hyperplane_integral_mc, lattice_line_sum, DensityModel,
};
use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;
use crate::geometry::{PointCloud, StencilKind};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Speed function of a g-flow `|∇u| g(κ / |∇u|) = f`.
#[derive(Clone)]
pub enum GFunction {
    /// `g(s) = s^α`.
    Power(f64),
    /// `g(s) = 1 / log(1/s + e)`.
    InvLog,
    /// User-supplied `g` together with `c ↦ lim_{s→0+} s g(c/s)`.
    Custom {
        name: String,
        g: ScalarFn,
        limit: ScalarFn,
    },
}

impl fmt::Debug for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GFunction::Power(a) => write!(f, "Power({a})"),
            GFunction::InvLog => write!(f, "InvLog"),
            GFunction::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl GFunction {
    pub fn custom(
        name: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        limit: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> GFunction {
        GFunction::Custom {
            name: name.into(),
            g: Arc::new(g),
            limit: Arc::new(limit),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            GFunction::Power(a) => s.max(0.0).powf(*a),
            GFunction::InvLog => {
                if s <= 0.0 {
                    0.0
                } else {
                    1.0 / (1.0 / s + std::f64::consts::E).ln()
                }
            }
            GFunction::Custom { g, .. } => g(s),
        }
    }

    /// `lim_{s→0+} s g(c/s)`: the g-flow term when the gradient vanishes.
    pub fn limit(&self, c: f64) -> f64 {
        match self {
            GFunction::Power(a) => {
                if *a >= 1.0 {
                    c.max(0.0)
                } else {
                    0.0
                }
            }
            GFunction::InvLog => 0.0,
            GFunction::Custom { limit, .. } => limit(c),
        }
    }

    /// Checks that `g` is increasing, `g(0) >= 0`, and `g'(s) <= g(s)/s` on `s = 2^k`,
    /// `-20 <= k <= 10` (central differences, relative tolerance 1e-6).
    pub fn check_admissible(&self) -> Result<()> {
        if !(self.eval(0.0) >= 0.0) {
            return Err(invalid(format!("g-flow function {self:?} has g(0) < 0")));
        }
        let mut prev = self.eval(0.0);
        for k in -20..=10 {
            let s = 2f64.powi(k);
            let gs = self.eval(s);
            if !gs.is_finite() || gs < prev {
                return Err(invalid(format!("g-flow function {self:?} is not increasing near s={s:e}")));
            }
            prev = gs;
            let e = s * 1e-5;
            let deriv = (self.eval(s + e) - self.eval(s - e)) / (2.0 * e);
            if deriv > gs / s * (1.0 + 1e-6) + 1e-12 {
                return Err(invalid(format!(
                    "g-flow function {self:?} violates g'(s) <= g(s)/s at s={s:e}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Hamiltonian {
    Eikonal,
    Tukey,
    Mc2d,
    AlphaFlow { alpha: f64 },
    GFlow(GFunction),
    Mc3d,
    Gauss3d,
}

impl Hamiltonian {
    pub fn name(&self) -> &'static str {
        match self {
            Hamiltonian::Eikonal => "eikonal",
            Hamiltonian::Tukey => "tukey",
            Hamiltonian::Mc2d => "mc2d",
            Hamiltonian::AlphaFlow { .. } => "alpha_flow",
            Hamiltonian::GFlow(_) => "g_flow",
            Hamiltonian::Mc3d => "mc3d",
            Hamiltonian::Gauss3d => "gauss3d",
        }
    }

    pub fn is_first_order(&self) -> bool {
        matches!(self, Hamiltonian::Eikonal | Hamiltonian::Tukey)
    }
}

/// Right-hand side `f` (or the density `ρ` for the Tukey Hamiltonian).
#[derive(Clone, Debug)]
pub enum Rhs {
    Constant(f64),
    Field(ScalarField),
    /// Density values at the nodes (`f = ρ(x)`), or the Tukey density.
    Density(DensityModel),
}

/// How the Tukey hyperplane integral is estimated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Estimator {
    /// Grid line sums on 2D grids; analytic sections when available in `d <= 3`; else Monte Carlo.
    #[default]
    Auto,
    GridLineSum,
    Analytic,
    MonteCarlo { seed: u64 },
}

#[derive(Clone, Debug)]
pub struct SchemeSpec {
    pub hamiltonian: Hamiltonian,
    pub rhs: Rhs,
    pub estimator: Estimator,
}

impl SchemeSpec {
    pub fn new(hamiltonian: Hamiltonian, rhs: Rhs) -> Result<SchemeSpec> {
        let spec = SchemeSpec {
            hamiltonian,
            rhs,
            estimator: Estimator::Auto,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> SchemeSpec {
        self.estimator = estimator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.hamiltonian {
            Hamiltonian::AlphaFlow { alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
                }
            }
            Hamiltonian::GFlow(g) => g.check_admissible()?,
            Hamiltonian::Tukey => match &self.rhs {
                Rhs::Density(_) => {}
                Rhs::Constant(c) if *c == 0.0 => {}
                _ => return Err(invalid("the Tukey Hamiltonian needs a density right-hand side")),
            },
            _ => {}
        }
        if let Rhs::Constant(c) = &self.rhs {
            if !c.is_finite() {
                return Err(invalid("right-hand side must be finite"));
            }
        }
        Ok(())
    }

    /// Exponent used to size the bisection bracket.
    pub(crate) fn bracket_exponent(&self) -> f64 {
        match &self.hamiltonian {
            Hamiltonian::AlphaFlow { alpha } => 1.0 / alpha,
            _ => 1.0,
        }
    }
}

// Shared kernels: every Hamiltonian is assembled from these monotone pieces.

/// `∇_p u = (t - u(x-p)) / |p|`.
#[inline]
fn grad(t: f64, back: f64, norm: f64) -> f64 {
    (t - back) / norm
}

/// `-Δ_qq u = (2t - u(x+q) - u(x-q)) / |q|^2`.
#[inline]
fn neg_lap(t: f64, sum: f64, norm2: f64) -> f64 {
    (2.0 * t - sum) / norm2
}

#[inline]
fn alpha_kernel(g: f64, k: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        k.max(0.0)
    } else {
        g.max(0.0).powf(1.0 - alpha) * k.max(0.0).powf(alpha)
    }
}

#[inline]
fn g_kernel(g: f64, k: f64, gf: &GFunction) -> f64 {
    let (g, k) = (g.max(0.0), k.max(0.0));
    if g > 0.0 {
        g * gf.eval(k / g)
    } else {
        gf.limit(k)
    }
}

#[derive(Clone, Debug)]
struct CurvatureTables {
    /// `perp[j]`, `neg[j]`: stencil indices of `v_j⊥` and `-v_j⊥` (2D only).
    perp: Vec<usize>,
    neg: Vec<usize>,
    /// 3D: per candidate, `(a, -a, |a|^2, b, -b, |b|^2)` index/norm tuples, best pair first.
    pairs: Vec<Vec<(usize, usize, f64, usize, usize, f64)>>,
}

/// A scheme bound to a cloud with per-node data (right-hand side, Tukey integrals,
/// curvature index tables) precomputed.
pub struct Scheme<'a> {
    spec: &'a SchemeSpec,
    cloud: &'a PointCloud,
    f: Vec<f64>,
    tukey: Vec<f64>,
    curv: Option<CurvatureTables>,
    fmax: f64,
}

impl fmt::Debug for Scheme<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scheme")
            .field("hamiltonian", &self.spec.hamiltonian)
            .field("nodes", &self.cloud.len())
            .finish()
    }
}

/// Resolved Tukey estimator for a cloud.
fn resolve_estimator(est: Estimator, model: &DensityModel, cloud: &PointCloud) -> Result<Estimator> {
    Ok(match est {
        Estimator::Auto => {
            if cloud.is_grid() && cloud.dim() == 2 {
                Estimator::GridLineSum
            } else if cloud.dim() <= 3 && has_analytic(model, cloud.dim()) {
                Estimator::Analytic
            } else {
                Estimator::MonteCarlo { seed: 0 }
            }
        }
        Estimator::GridLineSum => {
            if !(cloud.is_grid() && cloud.dim() == 2) {
                return Err(Error::Unsupported("grid line sums on this cloud".into()));
            }
            est
        }
        other => other,
    })
}

impl<'a> Scheme<'a> {
    /// Prepares the scheme for every interior node.
    pub fn new(spec: &'a SchemeSpec, cloud: &'a PointCloud) -> Result<Scheme<'a>> {
        let nodes: Vec<usize> = (0..cloud.len()).filter(|&i| !cloud.is_boundary(i)).collect();
        Scheme::for_nodes(spec, cloud, &nodes)
    }

    /// Prepares the scheme for the listed interior nodes only.
    pub fn for_nodes(spec: &'a SchemeSpec, cloud: &'a PointCloud, nodes: &[usize]) -> Result<Scheme<'a>> {
        spec.validate()?;
        for &i in nodes {
            cloud.check_node(i)?;
            if cloud.is_boundary(i) {
                return Err(Error::BoundaryNode(i));
            }
        }
        let d = cloud.dim();
        let n = cloud.len();
        let stencil_kind = cloud.stencil().map(|s| s.kind());
        let curv = match &spec.hamiltonian {
            Hamiltonian::Eikonal | Hamiltonian::Tukey => None,
            Hamiltonian::Mc2d | Hamiltonian::AlphaFlow { .. } | Hamiltonian::GFlow(_) => {
                if d != 2 || stencil_kind != Some(StencilKind::GridWide) {
                    return Err(Error::StencilUnavailable(format!(
                        "{} needs a 2D grid with a symmetric wide stencil",
                        spec.hamiltonian.name()
                    )));
                }
                Some(planar_tables(cloud, nodes.first().copied())?)
            }
            Hamiltonian::Mc3d | Hamiltonian::Gauss3d => {
                if d != 3 || stencil_kind != Some(StencilKind::GridWide) {
                    return Err(Error::StencilUnavailable(format!(
                        "{} needs a 3D grid with a symmetric wide stencil",
                        spec.hamiltonian.name()
                    )));
                }
                Some(spatial_tables(cloud)?)
            }
        };

        let mut f = vec![0.0; n];
        let mut tukey = Vec::new();
        if let Hamiltonian::Tukey = spec.hamiltonian {
            tukey = vec![f64::NAN; n * cloud.degree(0)];
            if let Rhs::Density(model) = &spec.rhs {
                fill_tukey(&mut tukey, model, spec.estimator, cloud, nodes)?;
            } else {
                for &i in nodes {
                    let k = cloud.degree(i);
                    tukey[i * k..(i + 1) * k].iter_mut().for_each(|c| *c = 0.0);
                }
            }
        } else {
            match &spec.rhs {
                Rhs::Constant(c) => f.iter_mut().for_each(|v| *v = *c),
                Rhs::Field(field) => {
                    field.check_len(n)?;
                    f.copy_from_slice(field);
                }
                Rhs::Density(model) => {
                    for (i, v) in f.iter_mut().enumerate() {
                        *v = density_at(model, cloud.point(i));
                    }
                }
            }
        }
        let fmax = if tukey.is_empty() {
            nodes.iter().map(|&i| f[i].abs()).fold(0.0, f64::max)
        } else {
            tukey.iter().filter(|v| !v.is_nan()).map(|v| v.abs()).fold(0.0, f64::max)
        };
        Ok(Scheme {
            spec,
            cloud,
            f,
            tukey,
            curv,
            fmax,
        })
    }

    pub fn spec(&self) -> &SchemeSpec {
        self.spec
    }

    pub fn cloud(&self) -> &PointCloud {
        self.cloud
    }

    /// `f(x_i)`; zero for the Tukey Hamiltonian.
    pub fn rhs_at(&self, i: usize) -> f64 {
        self.f[i]
    }

    /// Tukey hyperplane integral for candidate `j` at node `i`.
    pub fn tukey_integral(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.cloud.degree(i);
        self.tukey.get(i * k + j).copied().filter(|v| !v.is_nan())
    }

    /// Largest `|f|` (or Tukey integral) over prepared nodes.
    pub fn rhs_max(&self) -> f64 {
        self.fmax
    }

    /// Whether candidate `j` can ever be used (3D curvature candidates need an orthogonal pair).
    #[inline]
    fn usable(&self, j: usize) -> bool {
        match &self.curv {
            Some(c) if !c.pairs.is_empty() => !c.pairs[j].is_empty(),
            _ => true,
        }
    }

    /// `F_h` for candidate `j` (i.e. `p = -V_h(x_i)[j]`) with neighbor values `vals`.
    #[inline]
    pub(crate) fn candidate(&self, i: usize, j: usize, t: f64, vals: &[f64], norms: &[f64]) -> f64 {
        let f = self.f[i];
        match &self.spec.hamiltonian {
            Hamiltonian::Eikonal => grad(t, vals[j], norms[j]) - f,
            Hamiltonian::Tukey => {
                let k = norms.len();
                grad(t, vals[j], norms[j]) - self.tukey[i * k + j]
            }
            Hamiltonian::Mc2d => {
                let c = self.curv.as_ref().expect("curvature tables");
                let q = c.perp[j];
                neg_lap(t, vals[q] + vals[c.neg[j]], norms[q] * norms[q]) - f
            }
            Hamiltonian::AlphaFlow { alpha } => {
                let c = self.curv.as_ref().expect("curvature tables");
                let q = c.perp[j];
                let k = neg_lap(t, vals[q] + vals[c.neg[j]], norms[q] * norms[q]);
                alpha_kernel(grad(t, vals[j], norms[j]), k, *alpha) - f
            }
            Hamiltonian::GFlow(gf) => {
                let c = self.curv.as_ref().expect("curvature tables");
                let q = c.perp[j];
                let k = neg_lap(t, vals[q] + vals[c.neg[j]], norms[q] * norms[q]);
                g_kernel(grad(t, vals[j], norms[j]), k, gf) - f
            }
            Hamiltonian::Mc3d => {
                let c = self.curv.as_ref().expect("curvature tables");
                let (a, na, a2, b, nb, b2) = c.pairs[j][0];
                neg_lap(t, vals[a] + vals[na], a2) + neg_lap(t, vals[b] + vals[nb], b2) - f
            }
            Hamiltonian::Gauss3d => {
                let c = self.curv.as_ref().expect("curvature tables");
                let mut m = f64::INFINITY;
                for &(a, na, a2, b, nb, b2) in &c.pairs[j] {
                    let ka = neg_lap(t, vals[a] + vals[na], a2).max(0.0);
                    let kb = neg_lap(t, vals[b] + vals[nb], b2).max(0.0);
                    m = m.min((ka * kb).sqrt().sqrt());
                }
                grad(t, vals[j], norms[j]).max(0.0).sqrt() * m - f
            }
        }
    }

    /// `S_h(u, t, x_i)` given gathered neighbor values and membership thresholds.
    #[inline]
    pub(crate) fn eval_with(&self, i: usize, t: f64, vals: &[f64], th: &[f64]) -> f64 {
        let norms = self.cloud.norms_at(i);
        let mut best = f64::NEG_INFINITY;
        for (j, &m) in th.iter().enumerate() {
            if m <= t && self.usable(j) {
                let v = self.candidate(i, j, t, vals, norms);
                if v > best {
                    best = v;
                }
            }
        }
        best
    }

    /// Smallest threshold among usable candidates: `S_h = -∞` strictly below it.
    pub(crate) fn lowest_threshold(&self, th: &[f64]) -> f64 {
        th.iter()
            .enumerate()
            .filter(|(j, _)| self.usable(*j))
            .map(|(_, m)| *m)
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn is_prepared(&self, i: usize) -> bool {
        if self.tukey.is_empty() {
            return true;
        }
        let k = self.cloud.degree(i);
        !self.tukey[i * k].is_nan()
    }

    /// `S_h(u, t, x)`; `-∞` when the subdifferential is empty.
    pub fn value(&self, field: &[f64], t: f64, node: usize) -> Result<f64> {
        self.cloud.check_node(node)?;
        if field.len() != self.cloud.len() {
            return Err(Error::LengthMismatch {
                expected: self.cloud.len(),
                got: field.len(),
            });
        }
        if self.cloud.is_boundary(node) {
            return Err(Error::BoundaryNode(node));
        }
        if !self.is_prepared(node) {
            return Err(invalid(format!("scheme was not prepared for node {node}")));
        }
        let k = self.cloud.degree(node);
        let mut vals = vec![0.0; k];
        let mut th = vec![0.0; k];
        self.cloud.gather(field, node, &mut vals);
        thresholds(self.cloud, node, &vals, &mut th);
        Ok(self.eval_with(node, t, &vals, &th))
    }

    /// `F_h(p, u, t, x)` for a single direction `p` (which must be `-v` for a displacement `v`).
    pub fn candidate_value(&self, field: &[f64], t: f64, node: usize, p: &[f64]) -> Result<f64> {
        let back: Vec<f64> = p.iter().map(|x| -x).collect();
        let j = self
            .cloud
            .find_displacement(node, &back)
            .ok_or_else(|| Error::StencilUnavailable(format!("direction {p:?} at node {node}")))?;
        if !self.usable(j) {
            return Err(Error::StencilUnavailable(format!(
                "an orthogonal offset pair for direction {p:?}"
            )));
        }
        let vals = self.cloud.neighbor_values(field, node)?;
        if !self.is_prepared(node) {
            return Err(invalid(format!("scheme was not prepared for node {node}")));
        }
        Ok(self.candidate(node, j, t, &vals, self.cloud.norms_at(node)))
    }
}

fn planar_tables(cloud: &PointCloud, node: Option<usize>) -> Result<CurvatureTables> {
    let node = node.unwrap_or(0);
    let k = cloud.degree(node);
    let mut perp = Vec::with_capacity(k);
    let mut neg = Vec::with_capacity(k);
    for j in 0..k {
        let q = perp_in_stencil(cloud, node, j)?;
        let v = cloud.displacement(node, q);
        let back = [-v[0], -v[1]];
        let nq = cloud
            .find_displacement(node, &back)
            .ok_or_else(|| Error::StencilUnavailable("a symmetric stencil".into()))?;
        perp.push(q);
        neg.push(nq);
    }
    Ok(CurvatureTables {
        perp,
        neg,
        pairs: Vec::new(),
    })
}

fn canonical(v: &[f64]) -> bool {
    v.iter().find(|x| **x != 0.0).map(|x| *x > 0.0).unwrap_or(false)
}

fn spatial_tables(cloud: &PointCloud) -> Result<CurvatureTables> {
    let stencil = cloud.stencil().expect("grid cloud");
    let h = cloud.spacing().expect("grid cloud");
    let k = stencil.len();
    let mut pairs = Vec::with_capacity(k);
    for j in 0..k {
        let p: Vec<f64> = stencil.offset(j).iter().map(|x| -x).collect();
        let mut list = Vec::new();
        for pr in orthonormal_pairs_3d(&p, stencil)? {
            // ±v give identical second differences; keep one sign of each.
            if !canonical(&pr.v1) || !canonical(&pr.v2) {
                continue;
            }
            let neg = |v: &[f64]| -> Result<usize> {
                let back: Vec<f64> = v.iter().map(|x| -x).collect();
                stencil
                    .find(&back)
                    .ok_or_else(|| Error::StencilUnavailable("a symmetric stencil".into()))
            };
            let a2 = (pr.norm1 * h).powi(2);
            let b2 = (pr.norm2 * h).powi(2);
            list.push((pr.first, neg(&pr.v1)?, a2, pr.second, neg(&pr.v2)?, b2));
        }
        // Shortest pair first (ties keep lexicographic order).
        list.sort_by(|x, y| (x.2 + x.5).total_cmp(&(y.2 + y.5)));
        pairs.push(list);
    }
    if pairs.iter().all(|l| l.is_empty()) {
        return Err(Error::StencilUnavailable(
            "orthogonal offset pairs for any stencil direction".into(),
        ));
    }
    Ok(CurvatureTables {
        perp: Vec::new(),
        neg: Vec::new(),
        pairs,
    })
}

fn fill_tukey(table: &mut [f64], model: &DensityModel, est: Estimator, cloud: &PointCloud, nodes: &[usize]) -> Result<()> {
    let est = resolve_estimator(est, model, cloud)?;
    let k = cloud.degree(0);
    let grid_values = match est {
        Estimator::GridLineSum => Some(grid_density_values(model, cloud)),
        _ => None,
    };
    let rows: Vec<Result<Vec<f64>>> = nodes
        .par_iter()
        .map(|&i| {
            let x = cloud.point(i);
            (0..k)
                .map(|j| {
                    let v = cloud.displacement(i, j);
                    let p: Vec<f64> = v.iter().map(|c| -c).collect();
                    match est {
                        Estimator::GridLineSum => {
                            let stencil = cloud.stencil().expect("grid cloud");
                            let dir = stencil.direction(j);
                            // The hyperplane normal to p is the lattice line along p⊥.
                            let line = [-dir[1], dir[0]];
                            Ok(lattice_line_sum(
                                grid_values.as_ref().expect("grid values"),
                                cloud.grid_dims().expect("grid")[0],
                                cloud.spacing().expect("grid"),
                                i,
                                &line,
                            ))
                        }
                        Estimator::Analytic => hyperplane_integral_analytic(model, x, &p),
                        Estimator::MonteCarlo { seed } => hyperplane_integral_mc(model, x, &p, derive_seed(seed, i, j)),
                        Estimator::Auto => unreachable!("estimator resolved above"),
                    }
                })
                .collect()
        })
        .collect();
    for (&i, row) in nodes.iter().zip(rows) {
        table[i * k..(i + 1) * k].copy_from_slice(&row?);
    }
    Ok(())
}

/// `S_h(u, t, x)` for one node (prepares the scheme for that node only).
pub fn scheme_value(spec: &SchemeSpec, field: &ScalarField, t: f64, node: usize, cloud: &PointCloud) -> Result<f64> {
    field.check_len(cloud.len())?;
    let scheme = Scheme::for_nodes(spec, cloud, &[node])?;
    scheme.value(field, t, node)
}

fn neighbor_index(cloud: &PointCloud, node: usize, p: &[f64]) -> Result<usize> {
    let back: Vec<f64> = p.iter().map(|x| -x).collect();
    cloud
        .find_displacement(node, &back)
        .ok_or_else(|| Error::StencilUnavailable(format!("direction {p:?} at node {node}")))
}

/// `∇_p u - f(x)`.
pub fn f_eikonal(field: &ScalarField, t: f64, node: usize, p: &[f64], f: f64, cloud: &PointCloud) -> Result<f64> {
    let j = neighbor_index(cloud, node, p)?;
    let vals = cloud.neighbor_values(field, node)?;
    Ok(grad(t, vals[j], cloud.displacement_norm(node, j)) - f)
}

/// `∇_p u - ∫_{(y-x)·p=0} ρ dS` with the given estimator.
pub fn f_tukey(
    field: &ScalarField,
    t: f64,
    node: usize,
    p: &[f64],
    density: &DensityModel,
    estimator: Estimator,
    cloud: &PointCloud,
) -> Result<f64> {
    let j = neighbor_index(cloud, node, p)?;
    let vals = cloud.neighbor_values(field, node)?;
    let mut table = vec![f64::NAN; cloud.len() * cloud.degree(node)];
    fill_tukey(&mut table, density, estimator, cloud, &[node])?;
    let k = cloud.degree(node);
    Ok(grad(t, vals[j], cloud.displacement_norm(node, j)) - table[node * k + j])
}

fn perp_pair(cloud: &PointCloud, node: usize, p: &[f64]) -> Result<(usize, usize)> {
    if cloud.dim() != 2 {
        return Err(Error::StencilUnavailable("a planar stencil".into()));
    }
    let q = [-p[1], p[0]];
    let a = cloud
        .find_displacement(node, &q)
        .ok_or_else(|| Error::StencilUnavailable(format!("perpendicular of {p:?}")))?;
    let b = cloud
        .find_displacement(node, &[-q[0], -q[1]])
        .ok_or_else(|| Error::StencilUnavailable(format!("perpendicular of {p:?}")))?;
    Ok((a, b))
}

fn planar_parts(field: &ScalarField, t: f64, node: usize, p: &[f64], cloud: &PointCloud) -> Result<(f64, f64)> {
    let j = neighbor_index(cloud, node, p)?;
    let (a, b) = perp_pair(cloud, node, p)?;
    let vals = cloud.neighbor_values(field, node)?;
    let na = cloud.displacement_norm(node, a);
    Ok((
        grad(t, vals[j], cloud.displacement_norm(node, j)),
        neg_lap(t, vals[a] + vals[b], na * na),
    ))
}

/// `-Δ_{p⊥p⊥} u - f(x)`.
pub fn f_mc2d(field: &ScalarField, t: f64, node: usize, p: &[f64], f: f64, cloud: &PointCloud) -> Result<f64> {
    let (_, k) = planar_parts(field, t, node, p, cloud)?;
    Ok(k - f)
}

/// `(∇_p u)_+^{1-α} (-Δ_{p⊥p⊥} u)_+^α - f(x)`.
pub fn f_alpha(field: &ScalarField, t: f64, node: usize, p: &[f64], alpha: f64, f: f64, cloud: &PointCloud) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let (g, k) = planar_parts(field, t, node, p, cloud)?;
    Ok(alpha_kernel(g, k, alpha) - f)
}

/// `|∇_p u| g((-Δ_{p⊥p⊥} u)_+ / |∇_p u|) - f(x)`, with the limit of `s g(c/s)` at zero gradient.
pub fn f_g(field: &ScalarField, t: f64, node: usize, p: &[f64], g: &GFunction, f: f64, cloud: &PointCloud) -> Result<f64> {
    let (gr, k) = planar_parts(field, t, node, p, cloud)?;
    Ok(g_kernel(gr, k, g) - f)
}

fn spatial_parts(field: &ScalarField, t: f64, node: usize, p: &[f64], cloud: &PointCloud) -> Result<(f64, Vec<(f64, f64)>)> {
    let stencil = cloud
        .stencil()
        .filter(|s| s.dim() == 3)
        .ok_or_else(|| Error::StencilUnavailable("a 3D grid stencil".into()))?;
    let j = neighbor_index(cloud, node, p)?;
    let vals = cloud.neighbor_values(field, node)?;
    let h = cloud.spacing().expect("grid");
    let pairs = orthonormal_pairs_3d(stencil.offset(j), stencil)?;
    if pairs.is_empty() {
        return Err(Error::StencilUnavailable(format!("an orthogonal offset pair for {p:?}")));
    }
    let mut terms = Vec::with_capacity(pairs.len());
    for pr in &pairs {
        let na = stencil.find(&pr.v1.iter().map(|x| -x).collect::<Vec<_>>()).expect("symmetric");
        let nb = stencil.find(&pr.v2.iter().map(|x| -x).collect::<Vec<_>>()).expect("symmetric");
        terms.push((
            neg_lap(t, vals[pr.first] + vals[na], (pr.norm1 * h).powi(2)),
            neg_lap(t, vals[pr.second] + vals[nb], (pr.norm2 * h).powi(2)),
        ));
    }
    Ok((grad(t, vals[j], cloud.displacement_norm(node, j)), terms))
}

/// `-Δ_{v₁v₁} u - Δ_{v₂v₂} u - f(x)` for the shortest orthogonal pair `v₁, v₂ ⊥ p`.
pub fn f_mc3d(field: &ScalarField, t: f64, node: usize, p: &[f64], f: f64, cloud: &PointCloud) -> Result<f64> {
    let (_, terms) = spatial_parts(field, t, node, p, cloud)?;
    let stencil = cloud.stencil().expect("grid");
    let j = neighbor_index(cloud, node, p)?;
    let pairs = orthonormal_pairs_3d(stencil.offset(j), stencil)?;
    let best = (0..pairs.len())
        .filter(|&a| canonical(&pairs[a].v1) && canonical(&pairs[a].v2))
        .min_by(|&a, &b| {
            (pairs[a].norm1.powi(2) + pairs[a].norm2.powi(2)).total_cmp(&(pairs[b].norm1.powi(2) + pairs[b].norm2.powi(2)))
        })
        .expect("nonempty");
    Ok(terms[best].0 + terms[best].1 - f)
}

/// `(∇_p u)_+^{1/2} min_{v₁,v₂} (-Δ_{v₁v₁} u)_+^{1/4} (-Δ_{v₂v₂} u)_+^{1/4} - f(x)`.
pub fn f_gauss3d(field: &ScalarField, t: f64, node: usize, p: &[f64], f: f64, cloud: &PointCloud) -> Result<f64> {
    let (g, terms) = spatial_parts(field, t, node, p, cloud)?;
    let m = terms
        .iter()
        .map(|(a, b)| (a.max(0.0) * b.max(0.0)).sqrt().sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(g.max(0.0).sqrt() * m - f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid_cloud, BoundarySpec, Stencil};

    fn grid2(width: usize, side: usize) -> PointCloud {
        build_grid_cloud(&[side, side], &Stencil::grid_wide(2, width, false).unwrap(), BoundarySpec::None).unwrap()
    }

    #[test]
    fn eikonal_constant_neighbors() {
        let c = grid2(3, 5);
        let h = c.h();
        let spec = SchemeSpec::new(Hamiltonian::Eikonal, Rhs::Constant(1.0)).unwrap();
        let u = ScalarField::constant(c.len(), 0.2);
        let node = 12;
        let s = Scheme::new(&spec, &c).unwrap();
        // Members with |p| = h give (t - a)/h - 1 = 0 at t = a + h; diagonal members give less.
        assert!(s.value(&u, 0.2 + h, node).unwrap().abs() < 1e-12);
        assert_eq!(s.value(&u, 0.1, node).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn mc2d_quadratic() {
        let c = grid2(3, 9);
        let u = ScalarField::from_fn(&c, |y| -0.5 * (y[0] * y[0] + y[1] * y[1])).unwrap();
        let node = 40;
        let h = c.h();
        let v = f_mc2d(&u, u[node], node, &[h, 0.0], 1.0, &c).unwrap();
        assert!(v.abs() < 1e-9);
        let lin = ScalarField::from_fn(&c, |y| y[0] - 2.0 * y[1]).unwrap();
        assert!(f_mc2d(&lin, lin[node], node, &[h, h], 0.0, &c).unwrap().abs() < 1e-9);
    }

    #[test]
    fn g_power_matches_alpha() {
        let c = grid2(5, 11);
        let u = ScalarField::from_fn(&c, |y| 1.0 - (y[0] - 0.4).powi(2) - 2.0 * (y[1] - 0.55).powi(2)).unwrap();
        let node = 60;
        let g = GFunction::Power(1.0 / 3.0);
        let h = c.h();
        for p in [[h, 0.0], [h, 2.0 * h], [-2.0 * h, h]] {
            for t in [u[node], u[node] + 0.01] {
                let a = f_alpha(&u, t, node, &p, 1.0 / 3.0, 0.3, &c).unwrap();
                let b = f_g(&u, t, node, &p, &g, 0.3, &c).unwrap();
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
                let one = f_g(&u, t, node, &p, &GFunction::Power(1.0), 0.3, &c).unwrap();
                let mc = f_mc2d(&u, t, node, &p, 0.3, &c).unwrap();
                assert!((one - (mc + 0.3).max(0.0) + 0.3).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn g_admissibility() {
        assert!(GFunction::Power(0.5).check_admissible().is_ok());
        assert!(GFunction::InvLog.check_admissible().is_ok());
        assert_eq!(GFunction::InvLog.eval(0.0), 0.0);
        assert_eq!(GFunction::InvLog.limit(2.0), 0.0);
        assert!(GFunction::Power(2.0).check_admissible().is_err());
        assert!(GFunction::custom("decreasing", |s| 1.0 / (1.0 + s), |_| 0.0)
            .check_admissible()
            .is_err());
        let spec = SchemeSpec::new(Hamiltonian::AlphaFlow { alpha: 1.5 }, Rhs::Constant(1.0));
        assert!(spec.is_err());
    }

    #[test]
    fn tukey_unit_square_center() {
        let c = build_grid_cloud(&[33, 33], &Stencil::interp_ring(16).unwrap(), BoundarySpec::None).unwrap();
        let model = DensityModel::preset("unit_square", 2).unwrap();
        let u = ScalarField::zeros(c.len());
        let node = 16 + 16 * 33;
        let h = c.h();
        let v = f_tukey(&u, 0.0, node, &[h, 0.0], &model, Estimator::GridLineSum, &c).unwrap();
        assert!((v + 1.0).abs() <= 2.0 * h);
        let disk = DensityModel::indicator(crate::shape::Shape::Ball {
            center: vec![0.5, 0.5],
            radius: 0.5,
        })
        .unwrap();
        let v = f_tukey(&u, 0.0, node, &[h, h / 2.0], &disk, Estimator::Analytic, &c).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spatial_quadratic() {
        let s = Stencil::grid_wide(3, 3, false).unwrap();
        let c = build_grid_cloud(&[7, 7, 7], &s, BoundarySpec::None).unwrap();
        let u = ScalarField::from_fn(&c, |y| -0.5 * y.iter().map(|x| x * x).sum::<f64>()).unwrap();
        let node = 3 + 3 * 7 + 3 * 49;
        let h = c.h();
        let v = f_mc3d(&u, u[node], node, &[0.0, 0.0, h], 2.0, &c).unwrap();
        assert!(v.abs() < 1e-9);
        // Along p = -h e₁ the upwind gradient is 0.5 + h/2 and every curvature factor is 1.
        let g = f_gauss3d(&u, u[node], node, &[-h, 0.0, 0.0], 0.0, &c).unwrap();
        assert!((g - (0.5 + h / 2.0).sqrt()).abs() < 1e-9);
        // A cylinder has zero Gauss curvature.
        let cyl = ScalarField::from_fn(&c, |y| -0.5 * (y[0] * y[0] + y[1] * y[1])).unwrap();
        let g = f_gauss3d(&cyl, cyl[node], node, &[-h, 0.0, 0.0], 0.0, &c).unwrap();
        assert_eq!(g, 0.0);
    }
}
