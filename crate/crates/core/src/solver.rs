//! Jacobi sweeps with per-node bisection on `t ↦ S_h(u^n, t, x)`.

use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

use crate::calculus::thresholds;
use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;
use crate::geometry::PointCloud;
use crate::schemes::{Scheme, SchemeSpec};

/// Why the iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxSweeps,
    Stagnated,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Stop once the largest nodewise change stays below `stagnation_tol`
    /// for `stagnation_sweeps` consecutive sweeps.
    pub stagnation_tol: f64,
    pub stagnation_sweeps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 3e-3,
            max_sweeps: 10_000,
            stagnation_tol: 1e-14,
            stagnation_sweeps: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Sweeps applied to the field.
    pub iterations: usize,
    /// Residual of the initial field, then of the field after each sweep.
    pub residual_history: Vec<f64>,
    pub wall_time: f64,
    pub h: f64,
    pub dtheta: f64,
    pub dtheta_lt_h: bool,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Nodes whose bracket never found a nonnegative scheme value in the last sweep.
    pub flagged_nodes: Vec<usize>,
    /// Nodes where `S_h(u, u(x), x) = -∞` in the last residual evaluation.
    pub empty_nodes: usize,
    pub final_field: ScalarField,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Outcome of one node update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeUpdate {
    pub value: f64,
    /// The scheme stayed negative (or `-∞`) over the whole expanded bracket;
    /// `value` is then the previous value.
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug)]
struct NodeResult {
    value: f64,
    residual: f64,
    flagged: bool,
    empty: bool,
}

/// Scratch buffers reused across nodes.
struct Scratch {
    vals: Vec<f64>,
    th: Vec<f64>,
}

impl Scratch {
    fn new(k: usize) -> Scratch {
        Scratch {
            vals: vec![0.0; k],
            th: vec![0.0; k],
        }
    }
}

const MAX_DOUBLINGS: usize = 60;

fn bracket_pad(scheme: &Scheme<'_>) -> f64 {
    let r = scheme.cloud().radius();
    let f = 1.0 + scheme.rhs_max();
    if scheme.spec().hamiltonian.is_first_order() {
        r * f
    } else {
        r * r * f.powf(scheme.spec().bracket_exponent())
    }
}

/// Root of `t ↦ S_h(u, t, x_i)` plus the residual `|S_h(u, u(x_i), x_i)|` of the current field.
fn update_node(scheme: &Scheme<'_>, field: &[f64], i: usize, pad: f64, s: &mut Scratch) -> NodeResult {
    let cloud = scheme.cloud();
    let k = cloud.degree(i);
    s.vals.resize(k, 0.0);
    s.th.resize(k, 0.0);
    cloud.gather(field, i, &mut s.vals);
    thresholds(cloud, i, &s.vals, &mut s.th);
    let current = field[i];
    let lo0 = scheme.lowest_threshold(&s.th);
    if !lo0.is_finite() {
        return NodeResult {
            value: current,
            residual: 0.0,
            flagged: true,
            empty: true,
        };
    }
    let s_lo = scheme.eval_with(i, lo0, &s.vals, &s.th);
    let (residual, empty) = if current >= lo0 {
        (scheme.eval_with(i, current, &s.vals, &s.th).abs(), false)
    } else {
        (s_lo.abs(), true)
    };
    if s_lo >= 0.0 {
        return NodeResult {
            value: lo0,
            residual,
            flagged: false,
            empty,
        };
    }
    let mut width = pad;
    let mut hi = lo0 + width;
    let mut doublings = 0;
    while scheme.eval_with(i, hi, &s.vals, &s.th) < 0.0 {
        if doublings == MAX_DOUBLINGS {
            return NodeResult {
                value: current,
                residual,
                flagged: true,
                empty,
            };
        }
        width *= 2.0;
        hi = lo0 + width;
        doublings += 1;
    }
    // Bisect down to adjacent doubles and keep the upper end: the update is then the
    // smallest double with S >= 0, an exactly order-preserving function of the neighbors.
    let mut lo = lo0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if scheme.eval_with(i, mid, &s.vals, &s.th) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    NodeResult {
        value: hi,
        residual,
        flagged: false,
        empty,
    }
}

fn interior_nodes(cloud: &PointCloud) -> Vec<usize> {
    (0..cloud.len()).filter(|&i| !cloud.is_boundary(i)).collect()
}

fn sweep(scheme: &Scheme<'_>, field: &[f64], nodes: &[usize], pad: f64) -> Vec<NodeResult> {
    let k = scheme.cloud().degree(0);
    nodes
        .par_iter()
        .map_init(|| Scratch::new(k), |s, &i| update_node(scheme, field, i, pad, s))
        .collect()
}

/// Solves `S_h(u, u(x), x) = 0` at interior nodes with `u = dirichlet` on boundary nodes.
pub fn solve(
    spec: &SchemeSpec,
    cloud: &PointCloud,
    dirichlet: &ScalarField,
    init: &ScalarField,
    tol: f64,
    max_sweeps: usize,
) -> Result<SolveReport> {
    let scheme = Scheme::new(spec, cloud)?;
    let options = SolveOptions {
        tol,
        max_sweeps,
        ..SolveOptions::default()
    };
    solve_prepared(&scheme, dirichlet, init, &options)
}

/// [`solve`] with a prepared scheme and full options.
pub fn solve_prepared(
    scheme: &Scheme<'_>,
    dirichlet: &ScalarField,
    init: &ScalarField,
    options: &SolveOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    let cloud = scheme.cloud();
    let n = cloud.len();
    dirichlet.check_len(n)?;
    init.check_len(n)?;
    if !(options.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let nodes = interior_nodes(cloud);
    if let Some(&i) = nodes.iter().find(|&&i| !scheme.is_prepared(i)) {
        return Err(invalid(format!("scheme was not prepared for node {i}")));
    }
    let mut field: Vec<f64> = init.to_vec();
    for i in 0..n {
        if cloud.is_boundary(i) {
            field[i] = dirichlet[i];
        }
    }
    let pad = bracket_pad(scheme);
    let denom = nodes.len().max(1) as f64;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut calm = 0;
    let mut flagged = Vec::new();
    let mut empty_nodes;
    let stop_reason;
    loop {
        let results = sweep(scheme, &field, &nodes, pad);
        let residual = results.iter().map(|r| r.residual).sum::<f64>() / denom;
        empty_nodes = results.iter().filter(|r| r.empty).count();
        if !residual.is_finite() {
            let bad = nodes
                .iter()
                .zip(&results)
                .find(|(_, r)| !r.residual.is_finite())
                .map(|(i, _)| *i)
                .unwrap_or(0);
            return Err(Error::NonFinite(bad));
        }
        history.push(residual);
        if residual <= options.tol {
            stop_reason = StopReason::Converged;
            break;
        }
        if iterations == options.max_sweeps {
            stop_reason = StopReason::MaxSweeps;
            break;
        }
        if calm >= options.stagnation_sweeps {
            stop_reason = StopReason::Stagnated;
            break;
        }
        let mut change = 0.0f64;
        flagged.clear();
        for (&i, r) in nodes.iter().zip(&results) {
            if !r.value.is_finite() {
                return Err(Error::NonFinite(i));
            }
            change = change.max((r.value - field[i]).abs());
            if r.flagged {
                flagged.push(i);
            }
        }
        for (&i, r) in nodes.iter().zip(&results) {
            field[i] = r.value;
        }
        iterations += 1;
        if change < options.stagnation_tol {
            calm += 1;
        } else {
            calm = 0;
        }
    }
    Ok(SolveReport {
        iterations,
        residual_history: history,
        wall_time: start.elapsed().as_secs_f64(),
        h: cloud.h(),
        dtheta: cloud.dtheta(),
        dtheta_lt_h: cloud.dtheta() < cloud.h(),
        converged: stop_reason == StopReason::Converged,
        stop_reason,
        flagged_nodes: flagged,
        empty_nodes,
        final_field: ScalarField::from_vec_unchecked(field),
    })
}

/// One bisection update at `node` with neighbors frozen at `field_prev`.
pub fn node_update(spec: &SchemeSpec, field_prev: &ScalarField, node: usize, cloud: &PointCloud) -> Result<NodeUpdate> {
    field_prev.check_len(cloud.len())?;
    let scheme = Scheme::for_nodes(spec, cloud, &[node])?;
    node_update_prepared(&scheme, field_prev, node)
}

pub fn node_update_prepared(scheme: &Scheme<'_>, field_prev: &[f64], node: usize) -> Result<NodeUpdate> {
    let cloud = scheme.cloud();
    cloud.check_node(node)?;
    if cloud.is_boundary(node) {
        return Err(Error::BoundaryNode(node));
    }
    if !scheme.is_prepared(node) {
        return Err(invalid(format!("scheme was not prepared for node {node}")));
    }
    if field_prev.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            expected: cloud.len(),
            got: field_prev.len(),
        });
    }
    let r = update_node(scheme, field_prev, node, bracket_pad(scheme), &mut Scratch::new(cloud.degree(node)));
    if !r.value.is_finite() {
        return Err(Error::NonFinite(node));
    }
    Ok(NodeUpdate {
        value: r.value,
        flagged: r.flagged,
    })
}

/// Mean over interior nodes of `|S_h(u, u(x), x)|`; a node with an empty subdifferential
/// contributes `|S_h|` at the smallest `t` where its subdifferential is nonempty.
pub fn residual(spec: &SchemeSpec, field: &ScalarField, cloud: &PointCloud) -> Result<f64> {
    let scheme = Scheme::new(spec, cloud)?;
    residual_prepared(&scheme, field)
}

pub fn residual_prepared(scheme: &Scheme<'_>, field: &[f64]) -> Result<f64> {
    let cloud = scheme.cloud();
    if field.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            expected: cloud.len(),
            got: field.len(),
        });
    }
    let nodes = interior_nodes(cloud);
    let results = sweep(scheme, field, &nodes, bracket_pad(scheme));
    Ok(results.iter().map(|r| r.residual).sum::<f64>() / nodes.len().max(1) as f64)
}

/// Initial guess on `fine` from a solution on `coarse`: multilinear interpolation between
/// grids, nearest coarse node otherwise. Boundary nodes of `fine` take `dirichlet`.
pub fn coarse_to_fine(
    coarse: &PointCloud,
    fine: &PointCloud,
    coarse_solution: &ScalarField,
    dirichlet: &ScalarField,
) -> Result<ScalarField> {
    coarse_solution.check_len(coarse.len())?;
    dirichlet.check_len(fine.len())?;
    if coarse.dim() != fine.dim() {
        return Err(invalid("coarse and fine clouds differ in dimension"));
    }
    let d = fine.dim();
    let mut out: Vec<f64> = match (coarse.grid_dims(), coarse.spacing()) {
        (Some(dims), Some(hc)) => {
            let side = dims[0];
            (0..fine.len())
                .into_par_iter()
                .map(|i| multilinear(coarse_solution, side, hc, fine.point(i)))
                .collect()
        }
        _ => (0..fine.len())
            .into_par_iter()
            .map(|i| {
                let y = fine.point(i);
                let mut best = (f64::INFINITY, 0usize);
                for c in 0..coarse.len() {
                    let x = coarse.point(c);
                    let d2: f64 = (0..d).map(|a| (x[a] - y[a]).powi(2)).sum();
                    if d2 < best.0 {
                        best = (d2, c);
                    }
                }
                coarse_solution[best.1]
            })
            .collect(),
    };
    for (i, v) in out.iter_mut().enumerate() {
        if fine.is_boundary(i) {
            *v = dirichlet[i];
        }
    }
    ScalarField::new(out)
}

pub(crate) fn multilinear(values: &[f64], side: usize, spacing: f64, y: &[f64]) -> f64 {
    let d = y.len();
    let mut base = vec![0usize; d];
    let mut frac = vec![0.0; d];
    for a in 0..d {
        let s = (y[a] / spacing).clamp(0.0, (side - 1) as f64);
        let b = (s.floor() as usize).min(side - 2);
        base[a] = b;
        frac[a] = s - b as f64;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut idx = 0;
        let mut stride = 1;
        for a in 0..d {
            let bit = (corner >> a) & 1;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            idx += (base[a] + bit) * stride;
            stride *= side;
        }
        if w != 0.0 {
            acc += w * values[idx];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid_cloud, build_knn_cloud, BoundarySpec, Stencil};
    use crate::schemes::{Hamiltonian, Rhs};

    #[test]
    fn three_node_chain() {
        let h = 0.25;
        let pts = vec![vec![0.0, 0.0], vec![h, 0.0], vec![2.0 * h, 0.0]];
        let cloud = build_knn_cloud(&pts, 2, BoundarySpec::Mask(vec![true, false, true])).unwrap();
        let spec = SchemeSpec::new(Hamiltonian::Eikonal, Rhs::Constant(1.0)).unwrap();
        let zero = ScalarField::zeros(3);
        let up = node_update(&spec, &zero, 1, &cloud).unwrap();
        assert!((up.value - h).abs() < 1e-12);
        let rep = solve(&spec, &cloud, &zero, &zero, 1e-10, 10).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!((rep.final_field[1] - h).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_is_kept() {
        let s = Stencil::grid_wide(2, 3, false).unwrap();
        let c = build_grid_cloud(&[5, 5], &s, BoundarySpec::None).unwrap();
        let spec = SchemeSpec::new(Hamiltonian::Eikonal, Rhs::Constant(0.0)).unwrap();
        let u = ScalarField::constant(c.len(), 0.7);
        let up = node_update(&spec, &u, 12, &c).unwrap();
        assert_eq!(up.value, 0.7);
        assert_eq!(residual(&spec, &u, &c).unwrap(), 0.0);
    }

    #[test]
    fn zero_field_residual_is_f() {
        let s = Stencil::grid_wide(2, 3, false).unwrap();
        let c = build_grid_cloud(&[6, 6], &s, BoundarySpec::None).unwrap();
        let spec = SchemeSpec::new(Hamiltonian::Eikonal, Rhs::Constant(1.0)).unwrap();
        let u = ScalarField::zeros(c.len());
        assert!((residual(&spec, &u, &c).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn multilinear_reproduces_linears() {
        let s = Stencil::grid_wide(2, 3, false).unwrap();
        let coarse = build_grid_cloud(&[9, 9], &s, BoundarySpec::None).unwrap();
        let fine = build_grid_cloud(&[17, 17], &s, BoundarySpec::None).unwrap();
        let lin = |y: &[f64]| 0.3 + 2.0 * y[0] - y[1];
        let cs = ScalarField::from_fn(&coarse, lin).unwrap();
        let dir = ScalarField::from_fn(&fine, lin).unwrap();
        let out = coarse_to_fine(&coarse, &fine, &cs, &dir).unwrap();
        for i in 0..fine.len() {
            assert!((out[i] - lin(fine.point(i))).abs() < 1e-12);
        }
    }
}
