//! Reference solutions and error metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{DensityKind, DensityModel};
use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;
use crate::geometry::probe::sphere_directions;
use crate::geometry::PointCloud;
use crate::shape::Shape;
use crate::solver::multilinear;

/// Direction count used for reference Tukey depth fields.
pub const CANONICAL_DIRECTIONS: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    BruteTukey,
    ExactDistance,
    RadialProfile,
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub values: ScalarField,
    pub method: OracleMethod,
    /// Direction count or quadrature size.
    pub resolution: usize,
}

/// Minimum over `n_dirs` quasi-uniform directions `v` of the mass of `{y : (y - x)·v >= 0}`.
///
/// Directions are prefix-stable, so raising `n_dirs` never raises the value.
pub fn brute_tukey_depth(model: &DensityModel, x: &[f64], n_dirs: usize) -> Result<f64> {
    if n_dirs == 0 {
        return Err(invalid("need at least one direction"));
    }
    let d = x.len();
    let dirs = sphere_directions(d, n_dirs);
    depth_with(model, x, &dirs)
}

fn depth_with(model: &DensityModel, x: &[f64], dirs: &[f64]) -> Result<f64> {
    let d = x.len();
    let mut best = f64::INFINITY;
    match &model.kind {
        DensityKind::Indicator(shape) => {
            if shape.dim() != d {
                return Err(Error::LengthMismatch {
                    expected: shape.dim(),
                    got: d,
                });
            }
            for v in dirs.chunks(d) {
                best = best.min(shape.halfspace_mass(x, v)?);
            }
        }
        DensityKind::Kde {
            samples,
            dim,
            bandwidth,
        } => {
            if *dim != d {
                return Err(Error::LengthMismatch { expected: *dim, got: d });
            }
            let m = (samples.len() / d) as f64;
            let scale = 1.0 / (bandwidth * std::f64::consts::SQRT_2);
            for v in dirs.chunks(d) {
                // P(N(s, r²)·v >= x·v) averaged over samples s.
                let mut acc = 0.0;
                for s in samples.chunks(d) {
                    let off: f64 = s.iter().zip(x).zip(v).map(|((a, b), c)| (a - b) * c).sum();
                    acc += 0.5 * libm::erfc(-off * scale);
                }
                best = best.min(acc / m);
            }
        }
        DensityKind::Constant(_) => {
            return Err(Error::Unsupported("Tukey depth of a constant density".into()));
        }
    }
    Ok(best)
}

/// [`brute_tukey_depth`] at every node.
pub fn brute_tukey_field(model: &DensityModel, cloud: &PointCloud, n_dirs: usize) -> Result<OracleResult> {
    if n_dirs == 0 {
        return Err(invalid("need at least one direction"));
    }
    let dirs = sphere_directions(cloud.dim(), n_dirs);
    let values = (0..cloud.len())
        .into_par_iter()
        .map(|i| depth_with(model, cloud.point(i), &dirs))
        .collect::<Result<Vec<f64>>>()?;
    Ok(OracleResult {
        values: ScalarField::new(values)?,
        method: OracleMethod::BruteTukey,
        resolution: n_dirs,
    })
}

/// Distance to the boundary of `domain`, zero outside it.
pub fn exact_distance_field(domain: &Shape, cloud: &PointCloud) -> Result<OracleResult> {
    domain.validate()?;
    if domain.dim() != cloud.dim() {
        return Err(Error::LengthMismatch {
            expected: domain.dim(),
            got: cloud.dim(),
        });
    }
    let values: Vec<f64> = (0..cloud.len())
        .into_par_iter()
        .map(|i| domain.inner_distance(cloud.point(i)))
        .collect();
    Ok(OracleResult {
        values: ScalarField::new(values)?,
        method: OracleMethod::ExactDistance,
        resolution: 0,
    })
}

/// `(1/n) Σ |a_i - b_i|`.
pub fn l1_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// `max_i |a_i - b_i|`.
pub fn linf_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Tabulated radial solution `u(r)` of `|∇u|^{1-α} (|∇u| κ)^α = f` on a disk of radius `r0`
/// with `u(r0) = 0`, where `α = 1` is mean curvature motion.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub r0: f64,
    pub f: f64,
    pub alpha: f64,
    values: Vec<f64>,
}

impl RadialProfile {
    /// Linear interpolation in the table; zero outside the disk.
    pub fn eval(&self, r: f64) -> f64 {
        if r >= self.r0 {
            return 0.0;
        }
        let n = self.values.len() - 1;
        let s = (r.max(0.0) / self.r0) * n as f64;
        let i = (s.floor() as usize).min(n - 1);
        let w = s - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    /// `f (r0^{1+α} - r^{1+α}) / (1+α)`.
    pub fn closed_form(&self, r: f64) -> f64 {
        if r >= self.r0 {
            return 0.0;
        }
        let e = 1.0 + self.alpha;
        self.f * (self.r0.powf(e) - r.max(0.0).powf(e)) / e
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// With `u = ψ(r)` level sets are circles, `|∇u| = -ψ'` and `κ = 1/r`, so
/// `-ψ'(r) = f r^α`; integrated inward from `r0` by the trapezoid rule on `10⁶` cells.
pub fn radial_mcm_profile(r0: f64, f: f64, alpha: f64) -> Result<RadialProfile> {
    if !(r0 > 0.0) || !(f > 0.0) || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("radial profile needs r0 > 0, f > 0, 0 < alpha <= 1"));
    }
    let n = 1_000_000usize;
    let dr = r0 / n as f64;
    let g = |r: f64| f * r.powf(alpha);
    let mut values = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let (a, b) = (i as f64 * dr, (i + 1) as f64 * dr);
        values[i] = values[i + 1] + 0.5 * dr * (g(a) + g(b));
    }
    Ok(RadialProfile {
        r0,
        f,
        alpha,
        values,
    })
}

/// Result of the random segment test `u(λx + (1-λ)y) >= min(u(x), u(y)) - tol`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentTest {
    pub trials: usize,
    pub violations: usize,
    /// Largest `min(u(x), u(y)) - u(z)` observed.
    pub worst: f64,
}

/// Samples `trials` triples `(x, y, λ)` with `x, y` inside `domain` and reads `u` by
/// multilinear interpolation on a grid cloud.
pub fn segment_quasiconcavity(
    cloud: &PointCloud,
    u: &[f64],
    domain: &Shape,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<SegmentTest> {
    let (side, spacing) = match (cloud.grid_dims(), cloud.spacing()) {
        (Some(dims), Some(s)) => (dims[0], s),
        _ => return Err(Error::Unsupported("segment test on a non-grid cloud".into())),
    };
    if u.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            expected: cloud.len(),
            got: u.len(),
        });
    }
    let d = cloud.dim();
    let (lo, hi) = domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let y: Vec<f64> = (0..d).map(|a| rng.random_range(lo[a]..hi[a])).collect();
            if domain.contains(&y) {
                return y;
            }
        }
    };
    let mut out = SegmentTest {
        trials,
        violations: 0,
        worst: f64::NEG_INFINITY,
    };
    for _ in 0..trials {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let lam: f64 = rng.random();
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let ux = multilinear(u, side, spacing, &x);
        let uy = multilinear(u, side, spacing, &y);
        let uz = multilinear(u, side, spacing, &z);
        let gap = ux.min(uy) - uz;
        out.worst = out.worst.max(gap);
        if gap > tol {
            out.violations += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_depths() {
        let sq = DensityModel::preset("unit_square", 2).unwrap();
        assert!((brute_tukey_depth(&sq, &[0.5, 0.5], 64).unwrap() - 0.5).abs() < 1e-12);
        let disk = DensityModel::preset("circle", 2).unwrap();
        let half = 0.5 * std::f64::consts::PI * 0.0625;
        assert!((brute_tukey_depth(&disk, &[0.5, 0.5], 64).unwrap() - half).abs() < 1e-12);
    }

    #[test]
    fn vertical_cut_bounds_square_depth() {
        let sq = DensityModel::preset("unit_square", 2).unwrap();
        let t = brute_tukey_depth(&sq, &[0.1, 0.5], 4096).unwrap();
        assert!(t <= 0.1 + 1e-12 && t > 0.09);
    }

    #[test]
    fn refinement_never_increases() {
        let m = DensityModel::preset("donut", 2).unwrap();
        let x = [0.41, 0.63];
        let mut prev = f64::INFINITY;
        for n in [8, 16, 32, 64, 128, 256] {
            let t = brute_tukey_depth(&m, &x, n).unwrap();
            assert!(t <= prev);
            prev = t;
        }
    }

    #[test]
    fn kde_depth_of_single_sample_is_half_at_center() {
        let m = DensityModel::kde(&[vec![0.5, 0.5]], 0.1).unwrap();
        assert!((brute_tukey_depth(&m, &[0.5, 0.5], 32).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn profile_matches_closed_form() {
        for alpha in [1.0, 1.0 / 3.0] {
            let p = radial_mcm_profile(0.4, 2.0, alpha).unwrap();
            assert_eq!(p.eval(0.4), 0.0);
            for r in [0.0, 0.05, 0.2, 0.37] {
                assert!((p.eval(r) - p.closed_form(r)).abs() < 1e-7, "{alpha} {r}");
            }
            assert!(p.eval(0.0) > p.eval(0.2));
        }
    }

    #[test]
    fn l1_of_constant_shift() {
        let a = [0.0, 1.0, 2.0];
        let b = [0.25, 1.25, 2.25];
        assert!((l1_error(&a, &b).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(l1_error(&a, &a).unwrap(), 0.0);
        assert!(l1_error(&a, &b[..2]).is_err());
    }
}
