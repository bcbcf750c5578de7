//! Densities `ρ` and estimators of `∫_{(y-x)·p=0} ρ(y) dS(y)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::geometry::PointCloud;
use crate::shape::Shape;

#[derive(Clone, Debug, PartialEq)]
pub enum DensityKind {
    /// `ρ = 1` on the shape, 0 elsewhere.
    Indicator(Shape),
    /// Isotropic Gaussian KDE with standard deviation `bandwidth`; `samples` is `m * dim` row-major.
    Kde {
        samples: Vec<f64>,
        dim: usize,
        bandwidth: f64,
    },
    /// `ρ ≡ c` everywhere.
    Constant(f64),
}

/// Monte Carlo hyperplane-integral settings.
#[derive(Clone, Debug, PartialEq)]
pub struct McParams {
    /// Hyperplane samples per integral.
    pub samples: usize,
    /// Standard deviation of the Gaussian weight on the hyperplane.
    pub sigma: f64,
    /// KDE points used per density evaluation (all of them when `None`).
    pub kde_points: Option<usize>,
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            samples: 2000,
            sigma: 0.1,
            kde_points: None,
        }
    }
}

impl McParams {
    /// `σ = 3 ×` median nearest-neighbor distance of the cloud.
    pub fn calibrated(cloud: &PointCloud) -> McParams {
        let nn: Vec<f64> = (0..cloud.len()).map(|i| cloud.displacement_norm(i, 0)).collect();
        McParams {
            sigma: 3.0 * median(nn),
            ..McParams::default()
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityModel {
    pub kind: DensityKind,
    pub mc: McParams,
}

impl DensityModel {
    pub fn indicator(shape: Shape) -> Result<DensityModel> {
        shape.validate()?;
        Ok(DensityModel {
            kind: DensityKind::Indicator(shape),
            mc: McParams::default(),
        })
    }

    pub fn preset(name: &str, dim: usize) -> Result<DensityModel> {
        DensityModel::indicator(Shape::preset(name, dim)?)
    }

    pub fn constant(c: f64) -> DensityModel {
        DensityModel {
            kind: DensityKind::Constant(c),
            mc: McParams::default(),
        }
    }

    pub fn kde(samples: &[Vec<f64>], bandwidth: f64) -> Result<DensityModel> {
        let dim = samples.first().map(|s| s.len()).unwrap_or(0);
        if samples.is_empty() || dim == 0 {
            return Err(invalid("KDE needs at least one sample"));
        }
        if !(bandwidth > 0.0) {
            return Err(invalid("KDE bandwidth must be positive"));
        }
        let mut flat = Vec::with_capacity(samples.len() * dim);
        for s in samples {
            if s.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    got: s.len(),
                });
            }
            flat.extend_from_slice(s);
        }
        Ok(DensityModel {
            kind: DensityKind::Kde {
                samples: flat,
                dim,
                bandwidth,
            },
            mc: McParams::default(),
        })
    }

    /// KDE over the cloud's own nodes with bandwidth = median k-th neighbor distance and
    /// Monte Carlo width from [`McParams::calibrated`].
    pub fn kde_calibrated(cloud: &PointCloud) -> Result<DensityModel> {
        let k = cloud.degree(0);
        let kth: Vec<f64> = (0..cloud.len()).map(|i| cloud.displacement_norm(i, k - 1)).collect();
        let pts: Vec<Vec<f64>> = (0..cloud.len()).map(|i| cloud.point(i).to_vec()).collect();
        let mut model = DensityModel::kde(&pts, median(kth))?;
        model.mc = McParams::calibrated(cloud);
        Ok(model)
    }

    pub fn with_mc(mut self, mc: McParams) -> DensityModel {
        self.mc = mc;
        self
    }

    pub fn shape(&self) -> Option<&Shape> {
        match &self.kind {
            DensityKind::Indicator(s) => Some(s),
            _ => None,
        }
    }

    /// Largest value of the density (used to size bisection brackets).
    pub fn sup(&self) -> f64 {
        match &self.kind {
            DensityKind::Indicator(_) => 1.0,
            DensityKind::Constant(c) => c.abs(),
            DensityKind::Kde { dim, bandwidth, .. } => {
                (2.0 * std::f64::consts::PI * bandwidth * bandwidth).powf(-(*dim as f64) / 2.0)
            }
        }
    }
}

/// `ρ(y)`.
pub fn density_at(model: &DensityModel, y: &[f64]) -> f64 {
    match &model.kind {
        DensityKind::Indicator(s) => {
            if s.contains(y) {
                1.0
            } else {
                0.0
            }
        }
        DensityKind::Constant(c) => *c,
        DensityKind::Kde {
            samples,
            dim,
            bandwidth,
        } => kde_eval(samples, *dim, *bandwidth, y, samples.len() / dim),
    }
}

/// KDE over `m` evenly strided samples, evaluated in log space.
fn kde_eval(samples: &[f64], dim: usize, r: f64, y: &[f64], m: usize) -> f64 {
    let stride = (samples.len() / dim / m).max(1);
    let inv = 1.0 / (2.0 * r * r);
    let mut best = f64::NEG_INFINITY;
    let mut expo = Vec::with_capacity(m);
    for s in samples.chunks(dim).step_by(stride).take(m) {
        let d2: f64 = s.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let e = -d2 * inv;
        best = best.max(e);
        expo.push(e);
    }
    let acc: f64 = expo.iter().map(|e| (e - best).exp()).sum();
    let log_norm = -(dim as f64) / 2.0 * (2.0 * std::f64::consts::PI * r * r).ln();
    (log_norm + best + acc.ln() - (m as f64).ln()).exp()
}

/// Converts a domain-unit grid direction to a primitive integer lattice direction.
pub(crate) fn lattice_direction(p: &[f64], spacing: f64) -> Result<Vec<i64>> {
    let mut v = Vec::with_capacity(p.len());
    for x in p {
        let r = x / spacing;
        let n = r.round();
        if (r - n).abs() > 1e-9 * r.abs().max(1.0) {
            return Err(invalid(format!("{p:?} is not a lattice direction")));
        }
        v.push(n as i64);
    }
    let g = v.iter().fold(0i64, |g, &c| gcd(g, c));
    if g == 0 {
        return Err(invalid("direction must be nonzero"));
    }
    Ok(v.iter().map(|c| c / g).collect())
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Sum of node values along the lattice line `x₀ + k·dir`, times the lattice step length.
pub(crate) fn lattice_line_sum(values: &[f64], side: usize, spacing: f64, node: usize, dir: &[i64]) -> f64 {
    let (i0, j0) = ((node % side) as i64, (node / side) as i64);
    let s = side as i64;
    let mut acc = values[node];
    for sign in [1i64, -1] {
        let (mut i, mut j) = (i0 + sign * dir[0], j0 + sign * dir[1]);
        while (0..s).contains(&i) && (0..s).contains(&j) {
            acc += values[(i + j * s) as usize];
            i += sign * dir[0];
            j += sign * dir[1];
        }
    }
    let step = ((dir[0] * dir[0] + dir[1] * dir[1]) as f64).sqrt() * spacing;
    acc * step
}

/// Line sum `|p| Σ_{x_j ∈ I(x₀, p)} ρ(x_j)` over grid nodes on the line through `x₀` along `p`
/// (`p` in domain units, parallel to a lattice vector; `|p|` is the lattice step along it).
pub fn line_integral_grid(model: &DensityModel, cloud: &PointCloud, node: usize, p: &[f64]) -> Result<f64> {
    let (dims, spacing) = match (cloud.grid_dims(), cloud.spacing()) {
        (Some(d), Some(s)) => (d, s),
        _ => return Err(Error::Unsupported("line sums on a non-grid cloud".into())),
    };
    if dims.len() != 2 {
        return Err(Error::Unsupported(format!("line sums on a {}D grid", dims.len())));
    }
    cloud.check_node(node)?;
    let dir = lattice_direction(p, spacing)?;
    let values = grid_density_values(model, cloud);
    Ok(lattice_line_sum(&values, dims[0], spacing, node, &dir))
}

pub(crate) fn grid_density_values(model: &DensityModel, cloud: &PointCloud) -> Vec<f64> {
    (0..cloud.len()).map(|i| density_at(model, cloud.point(i))).collect()
}

/// Exact `(d-1)`-measure of `{(y - x)·p = 0} ∩ E` for indicator densities.
pub fn hyperplane_integral_analytic(model: &DensityModel, x: &[f64], p: &[f64]) -> Result<f64> {
    match &model.kind {
        DensityKind::Indicator(s) => s.hyperplane_measure(x, p),
        DensityKind::Constant(c) if *c == 0.0 => Ok(0.0),
        _ => Err(Error::Unsupported("closed-form hyperplane integrals of this density".into())),
    }
}

/// Whether [`hyperplane_integral_analytic`] has a closed form for this model in `dim` dimensions.
pub fn has_analytic(model: &DensityModel, dim: usize) -> bool {
    let probe_x = vec![0.5; dim];
    let mut probe_p = vec![0.0; dim];
    probe_p[0] = 1.0;
    hyperplane_integral_analytic(model, &probe_x, &probe_p).is_ok()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the estimate at `(node, candidate)` derived from a base seed.
pub fn derive_seed(base: u64, node: usize, candidate: usize) -> u64 {
    splitmix(splitmix(base ^ splitmix(node as u64)) ^ candidate as u64)
}

/// `(1/N) Σ ρ(y_i)` with `y_i` Gaussian (std `σ`) on the hyperplane through `x` normal to `p`.
pub fn hyperplane_integral_mc(model: &DensityModel, x: &[f64], p: &[f64], seed: u64) -> Result<f64> {
    let d = x.len();
    if p.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            got: p.len(),
        });
    }
    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if pn < 1e-14 {
        return Err(invalid("hyperplane normal is too small"));
    }
    let mc = &model.mc;
    if mc.samples == 0 || !(mc.sigma > 0.0) {
        return Err(invalid("Monte Carlo needs samples > 0 and sigma > 0"));
    }
    let phat: Vec<f64> = p.iter().map(|v| v / pn).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    for _ in 0..mc.samples {
        for c in y.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *c = mc.sigma * z;
        }
        let along: f64 = y.iter().zip(&phat).map(|(a, b)| a * b).sum();
        for ((c, ph), xi) in y.iter_mut().zip(&phat).zip(x) {
            *c += xi - along * ph;
        }
        acc += match (&model.kind, mc.kde_points) {
            (
                DensityKind::Kde {
                    samples,
                    dim,
                    bandwidth,
                },
                Some(m),
            ) => kde_eval(samples, *dim, *bandwidth, &y, m.min(samples.len() / dim).max(1)),
            _ => density_at(model, &y),
        };
    }
    Ok(acc / mc.samples as f64)
}

/// `n` i.i.d. uniform samples on an indicator shape by rejection from its bounding box.
pub fn sample_density(model: &DensityModel, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let shape = model
        .shape()
        .ok_or_else(|| Error::Unsupported("sampling from a non-indicator density".into()))?;
    let (lo, hi) = shape.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut tries: u64 = 0;
    let mut y = vec![0.0; lo.len()];
    while out.len() < n {
        tries += 1;
        for ((c, a), b) in y.iter_mut().zip(&lo).zip(&hi) {
            *c = rng.random_range(*a..*b);
        }
        if shape.contains(&y) {
            out.push(y.clone());
        }
        if tries >= 100_000 {
            let rate = out.len() as f64 / tries as f64;
            if rate < 1e-4 {
                return Err(Error::DegenerateShape(rate));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid_cloud, BoundarySpec, Stencil};

    #[test]
    fn indicator_values() {
        let c = DensityModel::preset("circle", 2).unwrap();
        assert_eq!(density_at(&c, &[0.5, 0.5]), 1.0);
        let d = DensityModel::preset("donut", 2).unwrap();
        assert_eq!(density_at(&d, &[0.5, 0.5]), 0.0);
    }

    #[test]
    fn kde_peak() {
        let r = 0.2;
        let m = DensityModel::kde(&[vec![0.1, 0.2, 0.3]], r).unwrap();
        let want = (2.0 * std::f64::consts::PI * r * r).powf(-1.5);
        assert!((density_at(&m, &[0.1, 0.2, 0.3]) - want).abs() < 1e-12 * want);
        // Far from the sample the log-space evaluation stays finite and positive.
        assert!(density_at(&m, &[2.0, 2.0, 2.0]) > 0.0);
    }

    #[test]
    fn grid_line_sums() {
        let s = Stencil::interp_ring(16).unwrap();
        let c = build_grid_cloud(&[65, 65], &s, BoundarySpec::None).unwrap();
        let one = DensityModel::preset("unit_square", 2).unwrap();
        let h = c.h();
        let center = 32 + 32 * 65;
        let axis = line_integral_grid(&one, &c, center, &[h, 0.0]).unwrap();
        let diag = line_integral_grid(&one, &c, center, &[h, h]).unwrap();
        assert!((axis - 1.0).abs() <= 2.0 * h);
        assert!((diag - 2f64.sqrt()).abs() <= 3.0 * h);
        let zero = DensityModel::constant(0.0);
        assert_eq!(line_integral_grid(&zero, &c, center, &[h, 2.0 * h]).unwrap(), 0.0);
    }

    #[test]
    fn analytic_examples() {
        let disk = DensityModel::indicator(Shape::Ball {
            center: vec![0.0, 0.0],
            radius: 0.5,
        })
        .unwrap();
        assert!((hyperplane_integral_analytic(&disk, &[0.0, 0.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(hyperplane_integral_analytic(&disk, &[0.5, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        let two = DensityModel::preset("two_balls", 2).unwrap();
        // Vertical line x = 0.3 meets only the first ball, through its center.
        let v = hyperplane_integral_analytic(&two, &[0.3, 0.9], &[1.0, 0.0]).unwrap();
        assert!((v - 0.3).abs() < 1e-14);
    }

    #[test]
    fn mc_constant_and_zero() {
        let one = DensityModel::constant(1.0);
        assert_eq!(hyperplane_integral_mc(&one, &[0.0; 4], &[1.0, 0.0, 2.0, 0.0], 3).unwrap(), 1.0);
        let zero = DensityModel::constant(0.0);
        assert_eq!(hyperplane_integral_mc(&zero, &[0.0; 2], &[1.0, 0.0], 3).unwrap(), 0.0);
        assert!(hyperplane_integral_mc(&one, &[0.0; 2], &[0.0, 0.0], 3).is_err());
    }

    #[test]
    fn sampling_stays_inside() {
        let two = DensityModel::preset("two_balls", 2).unwrap();
        let pts = sample_density(&two, 500, 11).unwrap();
        let Some(Shape::TwoBalls { first, second, radius }) = two.shape().cloned() else {
            unreachable!()
        };
        for p in &pts {
            let a = crate::shape::dist(p, &first) <= radius;
            let b = crate::shape::dist(p, &second) <= radius;
            assert!(a ^ b);
        }
        assert_eq!(pts, sample_density(&two, 500, 11).unwrap());
    }
}
