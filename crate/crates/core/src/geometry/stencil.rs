use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilKind {
    GridWide,
    InterpRing,
}

/// One interpolation corner of a stencil offset: an integer grid offset and its weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Corner {
    pub offset: Vec<i64>,
    pub weight: f64,
}

/// Reusable displacement set for Cartesian grids, in grid-index units.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    dim: usize,
    kind: StencilKind,
    offsets: Vec<Vec<f64>>,
    /// Offsets are `numerators / denominator` exactly.
    numerators: Vec<Vec<i64>>,
    denominator: i64,
    /// Primitive integer vector parallel to each offset.
    directions: Vec<Vec<i64>>,
    interp: Vec<Vec<Corner>>,
    reach: usize,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn primitive(v: &[i64]) -> Vec<i64> {
    let g = v.iter().fold(0, |g, &c| gcd(g, c));
    v.iter().map(|c| c / g).collect()
}

impl Stencil {
    /// All nonzero integer vectors in `[-r, r]^d` with `r = (width - 1) / 2`, in
    /// lexicographic order. With `primitive_only`, multiples of shorter vectors are dropped.
    pub fn grid_wide(dim: usize, width: usize, primitive_only: bool) -> Result<Stencil> {
        if dim == 0 {
            return Err(invalid("stencil dimension must be positive"));
        }
        if width < 3 || width % 2 == 0 {
            return Err(invalid(format!("stencil width must be odd and >= 3, got {width}")));
        }
        let r = ((width - 1) / 2) as i64;
        let side = width as i64;
        let total = side.pow(dim as u32);
        let mut offsets = Vec::new();
        let mut numerators = Vec::new();
        let mut directions = Vec::new();
        let mut interp = Vec::new();
        for code in 0..total {
            // Lexicographic: the first coordinate varies slowest.
            let mut v = vec![0i64; dim];
            let mut c = code;
            for a in (0..dim).rev() {
                v[a] = c % side - r;
                c /= side;
            }
            if v.iter().all(|&x| x == 0) {
                continue;
            }
            let dir = primitive(&v);
            if primitive_only && dir != v {
                continue;
            }
            offsets.push(v.iter().map(|&x| x as f64).collect());
            interp.push(vec![Corner {
                offset: v.clone(),
                weight: 1.0,
            }]);
            numerators.push(v);
            directions.push(dir);
        }
        Ok(Stencil {
            dim,
            kind: StencilKind::GridWide,
            offsets,
            numerators,
            denominator: 1,
            directions,
            interp,
            reach: r as usize,
        })
    }

    /// `k` points on the boundary of the 3x3 cell around a node, spaced uniformly in
    /// arc length starting from `(1, 0)` and closed under 90 degree rotations. Each point
    /// is a linear interpolation of at most two grid neighbors.
    pub fn interp_ring(k: usize) -> Result<Stencil> {
        if k < 8 || k % 8 != 0 {
            return Err(invalid(format!("ring size must be a positive multiple of 8, got {k}")));
        }
        let m = (k / 8) as i64;
        // Numerators over m for one quarter turn.
        let mut quarter: Vec<[i64; 2]> = Vec::with_capacity(2 * m as usize);
        for j in 0..m {
            quarter.push([m, j]);
        }
        for j in 0..m {
            quarter.push([m - j, m]);
        }
        let mut nums: Vec<[i64; 2]> = Vec::with_capacity(k);
        for turn in 0..4 {
            for q in &quarter {
                let mut v = *q;
                for _ in 0..turn {
                    v = [-v[1], v[0]];
                }
                nums.push(v);
            }
        }
        let mut offsets = Vec::with_capacity(k);
        let mut numerators = Vec::with_capacity(k);
        let mut directions = Vec::with_capacity(k);
        let mut interp = Vec::with_capacity(k);
        for v in nums {
            offsets.push(vec![v[0] as f64 / m as f64, v[1] as f64 / m as f64]);
            directions.push(primitive(&v));
            interp.push(ring_corners(v, m));
            numerators.push(v.to_vec());
        }
        Ok(Stencil {
            dim: 2,
            kind: StencilKind::InterpRing,
            offsets,
            numerators,
            denominator: m,
            directions,
            interp,
            reach: 1,
        })
    }

    /// Parses `"WxW"`-style widths (`"7"`, `"7x7"`, `"wide:7"`) and `"ring:K"`.
    pub fn parse(text: &str, dim: usize) -> Result<Stencil> {
        let t = text.trim();
        if let Some(k) = t.strip_prefix("ring:") {
            if dim != 2 {
                return Err(invalid("ring stencils are two-dimensional"));
            }
            let k = k
                .parse()
                .map_err(|_| invalid(format!("bad ring size in '{text}'")))?;
            return Stencil::interp_ring(k);
        }
        let body = t.strip_prefix("wide:").unwrap_or(t);
        let first = body.split('x').next().unwrap_or(body);
        let w: usize = first
            .parse()
            .map_err(|_| invalid(format!("bad stencil '{text}'")))?;
        if body.split('x').any(|p| p != first) {
            return Err(invalid(format!("stencil widths must agree on every axis: '{text}'")));
        }
        Stencil::grid_wide(dim, w, false)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> StencilKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[Vec<f64>] {
        &self.offsets
    }

    pub fn offset(&self, j: usize) -> &[f64] {
        &self.offsets[j]
    }

    /// Exact integer numerator of offset `j`; see [`Stencil::denominator`].
    pub fn numerator(&self, j: usize) -> &[i64] {
        &self.numerators[j]
    }

    pub fn denominator(&self) -> i64 {
        self.denominator
    }

    /// Primitive integer direction parallel to offset `j`.
    pub fn direction(&self, j: usize) -> &[i64] {
        &self.directions[j]
    }

    pub fn interp_weights(&self, j: usize) -> &[Corner] {
        &self.interp[j]
    }

    /// Number of grid layers the stencil reaches in each axis.
    pub fn reach(&self) -> usize {
        self.reach
    }

    /// Index of the offset equal to `v`, if any.
    pub fn find(&self, v: &[f64]) -> Option<usize> {
        self.offsets
            .iter()
            .position(|o| o.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-12))
    }
}

fn ring_corners(v: [i64; 2], m: i64) -> Vec<Corner> {
    // On the cell boundary exactly one coordinate has magnitude m (or both at corners).
    let (a, b) = (v[0], v[1]);
    let mut out = Vec::with_capacity(2);
    let mut push = |offset: Vec<i64>, weight: f64| {
        if weight > 0.0 {
            out.push(Corner { offset, weight });
        }
    };
    if a.abs() == m {
        let s = a.signum();
        let lo = b.div_euclid(m);
        let frac = b.rem_euclid(m) as f64 / m as f64;
        push(vec![s, lo], 1.0 - frac);
        push(vec![s, lo + 1], frac);
    } else {
        let s = b.signum();
        let lo = a.div_euclid(m);
        let frac = a.rem_euclid(m) as f64 / m as f64;
        push(vec![lo, s], 1.0 - frac);
        push(vec![lo + 1, s], frac);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_sizes() {
        assert_eq!(Stencil::grid_wide(2, 3, false).unwrap().len(), 8);
        assert_eq!(Stencil::grid_wide(2, 5, false).unwrap().len(), 24);
        assert_eq!(Stencil::grid_wide(2, 7, false).unwrap().len(), 48);
        assert_eq!(Stencil::grid_wide(3, 3, false).unwrap().len(), 26);
        // 5x5 minus the 8 non-primitive multiples (+-2,0),(0,+-2),(+-2,+-2).
        assert_eq!(Stencil::grid_wide(2, 5, true).unwrap().len(), 16);
    }

    #[test]
    fn wide_is_symmetric_with_perps() {
        let s = Stencil::grid_wide(2, 7, false).unwrap();
        for o in s.offsets() {
            assert!(s.find(&[-o[0], -o[1]]).is_some());
            assert!(s.find(&[-o[1], o[0]]).is_some());
        }
    }

    #[test]
    fn ring_points_and_weights() {
        for k in [8, 16, 32, 48] {
            let s = Stencil::interp_ring(k).unwrap();
            assert_eq!(s.len(), k);
            for j in 0..k {
                let o = s.offset(j);
                assert!((o[0].abs().max(o[1].abs()) - 1.0).abs() < 1e-15);
                assert!(s.find(&[-o[0], -o[1]]).is_some());
                let w = s.interp_weights(j);
                assert!(w.len() <= 2);
                let total: f64 = w.iter().map(|c| c.weight).sum();
                assert!((total - 1.0).abs() < 1e-15);
                let mut pos = [0.0, 0.0];
                for c in w {
                    assert!(c.weight >= 0.0);
                    pos[0] += c.weight * c.offset[0] as f64;
                    pos[1] += c.weight * c.offset[1] as f64;
                }
                assert!((pos[0] - o[0]).abs() < 1e-15 && (pos[1] - o[1]).abs() < 1e-15);
                let d = s.direction(j);
                assert!((d[0] as f64 * o[1] - d[1] as f64 * o[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parse_forms() {
        assert_eq!(Stencil::parse("7x7", 2).unwrap().len(), 48);
        assert_eq!(Stencil::parse("ring:16", 2).unwrap().len(), 16);
        assert!(Stencil::parse("ring:12", 2).is_err());
        assert!(Stencil::parse("5x7", 2).is_err());
    }
}
