//! Monotone difference primitives and the discrete subdifferential `P_h^-(u, t, x)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;
use crate::geometry::{PointCloud, Stencil};

/// A subdifferential member: `p = -V_h(x)[neighbor]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub neighbor: usize,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubdifferentialSet {
    pub node: usize,
    pub members: Vec<Member>,
}

impl SubdifferentialSet {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Neighbor indices of the members, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.neighbor).collect()
    }
}

/// For each candidate `j`, the largest neighbor value among `w` with `v_j . v_w > 0`.
///
/// Candidate `j` belongs to `P_h^-(u, t, x)` exactly when its threshold is `<= t`.
#[inline]
pub(crate) fn thresholds(cloud: &PointCloud, node: usize, vals: &[f64], out: &mut [f64]) {
    let words = cloud.mask_words();
    for (j, o) in out.iter_mut().enumerate() {
        let mask = cloud.positive_mask(node, j);
        let mut m = f64::NEG_INFINITY;
        for (wi, &word) in mask.iter().enumerate().take(words) {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let v = vals[wi * 64 + b];
                if v > m {
                    m = v;
                }
            }
        }
        *o = m;
    }
}

fn interior_values(field: &ScalarField, node: usize, cloud: &PointCloud) -> Result<Vec<f64>> {
    field.check_len(cloud.len())?;
    cloud.check_node(node)?;
    if cloud.is_boundary(node) {
        return Err(Error::BoundaryNode(node));
    }
    cloud.neighbor_values(field, node)
}

/// `P_h^-(u, t, x)`: candidates `p = -v` such that every neighbor `y` with
/// `p . (y - x) < 0` has `u(y) <= t`. Dot-product signs use no tolerance.
pub fn subdifferential(field: &ScalarField, t: f64, node: usize, cloud: &PointCloud) -> Result<SubdifferentialSet> {
    let vals = interior_values(field, node, cloud)?;
    let mut th = vec![0.0; vals.len()];
    thresholds(cloud, node, &vals, &mut th);
    let members = th
        .iter()
        .enumerate()
        .filter(|(_, m)| **m <= t)
        .map(|(j, _)| Member {
            neighbor: j,
            p: cloud.displacement(node, j).iter().map(|x| -x).collect(),
        })
        .collect();
    Ok(SubdifferentialSet { node, members })
}

fn locate(cloud: &PointCloud, node: usize, v: &[f64], what: &str) -> Result<usize> {
    if v.len() != cloud.dim() {
        return Err(Error::LengthMismatch {
            expected: cloud.dim(),
            got: v.len(),
        });
    }
    cloud
        .find_displacement(node, v)
        .ok_or_else(|| Error::StencilUnavailable(format!("{what} {v:?} at node {node}")))
}

/// Upwind difference `(t - u(x - p)) / |p|`.
pub fn directional_gradient(field: &ScalarField, t: f64, node: usize, p: &[f64], cloud: &PointCloud) -> Result<f64> {
    let back: Vec<f64> = p.iter().map(|x| -x).collect();
    let j = locate(cloud, node, &back, "displacement")?;
    let vals = interior_values(field, node, cloud)?;
    Ok((t - vals[j]) / cloud.displacement_norm(node, j))
}

/// `(u(x + q) - 2t + u(x - q)) / |q|^2`.
pub fn second_difference(field: &ScalarField, t: f64, node: usize, q: &[f64], cloud: &PointCloud) -> Result<f64> {
    let a = locate(cloud, node, q, "displacement")?;
    let neg: Vec<f64> = q.iter().map(|x| -x).collect();
    let b = locate(cloud, node, &neg, "displacement")?;
    let vals = interior_values(field, node, cloud)?;
    let n = cloud.displacement_norm(node, a);
    Ok((vals[a] - 2.0 * t + vals[b]) / (n * n))
}

/// `p⊥ = (-p₂, p₁)`.
pub fn perp_2d(p: &[f64]) -> Result<[f64; 2]> {
    if p.len() != 2 {
        return Err(Error::LengthMismatch {
            expected: 2,
            got: p.len(),
        });
    }
    Ok([-p[1], p[0]])
}

/// Index of the displacement equal to `perp(V_h(x)[j])`.
pub fn perp_in_stencil(cloud: &PointCloud, node: usize, j: usize) -> Result<usize> {
    let v = cloud.displacement(node, j);
    let q = perp_2d(v)?;
    locate(cloud, node, &q, "perpendicular displacement")
}

/// Two mutually orthogonal stencil offsets, both orthogonal to a direction.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoPair {
    pub first: usize,
    pub second: usize,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub norm1: f64,
    pub norm2: f64,
}

/// Every unordered pair of offsets `(v1, v2)` with `v1 ⊥ v2`, `v1 ⊥ p`, `v2 ⊥ p`,
/// tested on normalized vectors with tolerance 1e-12, in lexicographic index order.
pub fn orthonormal_pairs_3d(p: &[f64], stencil: &Stencil) -> Result<Vec<OrthoPair>> {
    if p.len() != 3 || stencil.dim() != 3 {
        return Err(invalid("orthonormal pairs need three-dimensional inputs"));
    }
    let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    if pn == 0.0 {
        return Err(invalid("direction must be nonzero"));
    }
    let unit: Vec<(Vec<f64>, f64)> = stencil
        .offsets()
        .iter()
        .map(|o| {
            let n = o.iter().map(|x| x * x).sum::<f64>().sqrt();
            (o.iter().map(|x| x / n).collect(), n)
        })
        .collect();
    let dotp = |u: &[f64]| (u[0] * p[0] + u[1] * p[1] + u[2] * p[2]) / pn;
    let ortho: Vec<usize> = (0..unit.len()).filter(|&a| dotp(&unit[a].0).abs() <= 1e-12).collect();
    let mut out = Vec::new();
    for (ia, &a) in ortho.iter().enumerate() {
        for &b in &ortho[ia + 1..] {
            let d: f64 = unit[a].0.iter().zip(&unit[b].0).map(|(x, y)| x * y).sum();
            if d.abs() <= 1e-12 {
                out.push(OrthoPair {
                    first: a,
                    second: b,
                    v1: stencil.offset(a).to_vec(),
                    v2: stencil.offset(b).to_vec(),
                    norm1: unit[a].1,
                    norm2: unit[b].1,
                });
            }
        }
    }
    Ok(out)
}

/// Orthonormal basis of `p⊥` as the columns of a `d x (d-1)` matrix.
pub(crate) fn complement_basis(p: &[f64]) -> DMatrix<f64> {
    let d = p.len();
    let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_iterator(d, p.iter().map(|x| x / pn))];
    // Gram-Schmidt over the coordinate axes, least aligned with p first.
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs()));
    for a in axes {
        if basis.len() == d {
            break;
        }
        let mut e = DVector::zeros(d);
        e[a] = 1.0;
        for b in &basis {
            let c = b.dot(&e);
            e -= b * c;
        }
        let n = e.norm();
        if n > 1e-8 {
            basis.push(e / n);
        }
    }
    DMatrix::from_columns(&basis[1..])
}

/// `L(X, p) = sup{ q . X q : |q| = 1, q ⊥ p }`, the top eigenvalue of `X` restricted to `p⊥`.
pub fn quasiconcavity_gap(hessian: &[Vec<f64>], p: &[f64]) -> Result<f64> {
    let d = p.len();
    if hessian.len() != d || hessian.iter().any(|r| r.len() != d) {
        return Err(invalid(format!("hessian must be {d}x{d}")));
    }
    if p.iter().all(|x| *x == 0.0) {
        return Err(invalid("direction must be nonzero"));
    }
    if d == 1 {
        return Ok(f64::NEG_INFINITY);
    }
    let x = DMatrix::from_fn(d, d, |r, c| 0.5 * (hessian[r][c] + hessian[c][r]));
    let b = complement_basis(p);
    let restricted = b.transpose() * x * &b;
    let eig = SymmetricEigen::new(restricted);
    Ok(eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}
