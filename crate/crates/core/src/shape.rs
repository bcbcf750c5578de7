//! Closed-form geometry of the indicator sets used as densities, right-hand
//! sides and Dirichlet domains.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Axis-aligned box `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// Annulus in 2D, spherical shell in 3D.
    Shell {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
    /// Two disjoint balls of equal radius.
    TwoBalls {
        first: Vec<f64>,
        second: Vec<f64>,
        radius: f64,
    },
    /// Planar ellipse with semi-axes `(a, b)` rotated counterclockwise by `angle` radians.
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        angle: f64,
    },
    /// Spheroid in 3D with semi-axis `axial` along `(cos angle, sin angle, 0)` and
    /// `equatorial` in the orthogonal plane.
    Spheroid {
        center: [f64; 3],
        axial: f64,
        equatorial: f64,
        angle: f64,
    },
}

/// Names accepted by [`Shape::preset`].
pub const PRESET_NAMES: &[&str] = &[
    "square",
    "circle",
    "donut",
    "two_balls",
    "ellipse",
    "unit_cube",
];

impl Shape {
    /// The default experiment shapes inside `[0,1]^d`.
    pub fn preset(name: &str, dim: usize) -> Result<Shape> {
        if dim < 2 {
            return Err(invalid("preset shapes need dim >= 2"));
        }
        let mid = vec![0.5; dim];
        let shape = match name {
            "square" | "box" => Shape::Box {
                lo: vec![0.25; dim],
                hi: vec![0.75; dim],
            },
            "unit_cube" | "unit_square" => Shape::Box {
                lo: vec![0.0; dim],
                hi: vec![1.0; dim],
            },
            "circle" | "ball" => Shape::Ball {
                center: mid,
                radius: 0.25,
            },
            "donut" | "shell" => Shape::Shell {
                center: mid,
                inner: 0.125,
                outer: 0.25,
            },
            "two_balls" => {
                let radius = if dim == 2 { 0.15 } else { 0.3 };
                Shape::TwoBalls {
                    first: vec![0.3; dim],
                    second: vec![0.7; dim],
                    radius,
                }
            }
            "ellipse" => match dim {
                2 => Shape::Ellipse {
                    center: [0.5, 0.5],
                    semi_axes: [0.3, 0.15],
                    angle: PI / 6.0,
                },
                3 => Shape::Spheroid {
                    center: [0.5; 3],
                    axial: 0.3,
                    equatorial: 0.15,
                    angle: PI / 6.0,
                },
                _ => return Err(Error::Unsupported(format!("ellipse in {dim}D"))),
            },
            other => return Err(invalid(format!("unknown shape preset '{other}'"))),
        };
        Ok(shape)
    }

    pub fn dim(&self) -> usize {
        match self {
            Shape::Box { lo, .. } => lo.len(),
            Shape::Ball { center, .. } | Shape::Shell { center, .. } => center.len(),
            Shape::TwoBalls { first, .. } => first.len(),
            Shape::Ellipse { .. } => 2,
            Shape::Spheroid { .. } => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Shape::Box { lo, hi } => lo.len() == hi.len() && lo.iter().zip(hi).all(|(a, b)| a < b),
            Shape::Ball { radius, .. } => *radius > 0.0,
            Shape::Shell { inner, outer, .. } => *inner > 0.0 && inner < outer,
            Shape::TwoBalls {
                first,
                second,
                radius,
            } => *radius > 0.0 && first.len() == second.len() && dist(first, second) > 2.0 * radius,
            Shape::Ellipse { semi_axes, .. } => semi_axes[0] > 0.0 && semi_axes[1] > 0.0,
            Shape::Spheroid { axial, equatorial, .. } => *axial > 0.0 && *equatorial > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("malformed shape {self:?}")))
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            Shape::Box { lo, hi } => y
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b),
            Shape::Ball { center, radius } => dist2(y, center) <= radius * radius,
            Shape::Shell {
                center,
                inner,
                outer,
            } => {
                let r2 = dist2(y, center);
                r2 >= inner * inner && r2 <= outer * outer
            }
            Shape::TwoBalls {
                first,
                second,
                radius,
            } => {
                let r2 = radius * radius;
                dist2(y, first) <= r2 || dist2(y, second) <= r2
            }
            Shape::Ellipse { .. } => {
                let z = self.ellipse_local(y);
                z[0] * z[0] + z[1] * z[1] <= 1.0
            }
            Shape::Spheroid { axial, equatorial, .. } => {
                let (z, r) = self.spheroid_frame(y);
                (z / axial).powi(2) + (r / equatorial).powi(2) <= 1.0
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Shape::Box { lo, hi } => (lo.clone(), hi.clone()),
            Shape::Ball { center, radius }
            | Shape::Shell {
                center,
                outer: radius,
                ..
            } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Shape::TwoBalls {
                first,
                second,
                radius,
            } => (
                first
                    .iter()
                    .zip(second)
                    .map(|(a, b)| a.min(*b) - radius)
                    .collect(),
                first
                    .iter()
                    .zip(second)
                    .map(|(a, b)| a.max(*b) + radius)
                    .collect(),
            ),
            Shape::Ellipse {
                center,
                semi_axes: [a, b],
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let ex = ((a * c).powi(2) + (b * s).powi(2)).sqrt();
                let ey = ((a * s).powi(2) + (b * c).powi(2)).sqrt();
                (
                    vec![center[0] - ex, center[1] - ey],
                    vec![center[0] + ex, center[1] + ey],
                )
            }
            Shape::Spheroid {
                center,
                axial,
                equatorial,
                angle,
            } => {
                // Support function along each coordinate axis.
                let (s, c) = angle.sin_cos();
                let axis = [c, s, 0.0];
                let ext: Vec<f64> = (0..3)
                    .map(|k| ((axial * axis[k]).powi(2) + equatorial.powi(2) * (1.0 - axis[k] * axis[k])).sqrt())
                    .collect();
                (
                    (0..3).map(|k| center[k] - ext[k]).collect(),
                    (0..3).map(|k| center[k] + ext[k]).collect(),
                )
            }
        }
    }

    /// Lebesgue measure of the set.
    pub fn measure(&self) -> f64 {
        match self {
            Shape::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Shape::Ball { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
            Shape::Shell {
                center,
                inner,
                outer,
            } => {
                let d = center.len() as i32;
                unit_ball_volume(center.len()) * (outer.powi(d) - inner.powi(d))
            }
            Shape::TwoBalls { first, radius, .. } => {
                2.0 * unit_ball_volume(first.len()) * radius.powi(first.len() as i32)
            }
            Shape::Ellipse { semi_axes, .. } => PI * semi_axes[0] * semi_axes[1],
            Shape::Spheroid { axial, equatorial, .. } => 4.0 / 3.0 * PI * axial * equatorial * equatorial,
        }
    }

    /// Unsigned Euclidean distance from `y` to the boundary of the set.
    pub fn distance_to_boundary(&self, y: &[f64]) -> f64 {
        match self {
            Shape::Box { lo, hi } => {
                if self.contains(y) {
                    y.iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(v, (a, b))| (v - a).min(b - v))
                        .fold(f64::INFINITY, f64::min)
                } else {
                    y.iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(v, (a, b))| {
                            let e = (a - v).max(v - b).max(0.0);
                            e * e
                        })
                        .sum::<f64>()
                        .sqrt()
                }
            }
            Shape::Ball { center, radius } => (dist(y, center) - radius).abs(),
            Shape::Shell {
                center,
                inner,
                outer,
            } => {
                let r = dist(y, center);
                (r - inner).abs().min((r - outer).abs())
            }
            Shape::TwoBalls {
                first,
                second,
                radius,
            } => (dist(y, first) - radius)
                .abs()
                .min((dist(y, second) - radius).abs()),
            Shape::Ellipse { semi_axes, .. } => {
                let z = self.ellipse_frame(y);
                distance_point_ellipse(semi_axes[0], semi_axes[1], z[0], z[1])
            }
            // Rotational symmetry reduces to a meridian ellipse.
            Shape::Spheroid { axial, equatorial, .. } => {
                let (z, r) = self.spheroid_frame(y);
                distance_point_ellipse(*axial, *equatorial, z, r)
            }
        }
    }

    /// Distance to the boundary for points of the set, zero outside.
    pub fn inner_distance(&self, y: &[f64]) -> f64 {
        if self.contains(y) {
            self.distance_to_boundary(y)
        } else {
            0.0
        }
    }

    /// (d-1)-dimensional measure of `{y : (y - x) . p = 0}` intersected with the set.
    pub fn hyperplane_measure(&self, x: &[f64], p: &[f64]) -> Result<f64> {
        let d = self.dim();
        check_dims(d, x, p)?;
        let pn = norm(p);
        match self {
            Shape::Ball { center, radius } => Ok(ball_section(d, center, *radius, x, p, pn)),
            Shape::Shell {
                center,
                inner,
                outer,
            } => Ok(ball_section(d, center, *outer, x, p, pn) - ball_section(d, center, *inner, x, p, pn)),
            Shape::TwoBalls {
                first,
                second,
                radius,
            } => Ok(ball_section(d, first, *radius, x, p, pn) + ball_section(d, second, *radius, x, p, pn)),
            Shape::Box { lo, hi } => match d {
                2 => {
                    let e = [-p[1] / pn, p[0] / pn];
                    Ok(box_chord(lo, hi, x, &e))
                }
                3 => Ok(box_section_3d(lo, hi, x, p)),
                _ => Err(Error::Unsupported(format!("box hyperplane sections in {d}D"))),
            },
            Shape::Ellipse { .. } => {
                let e = [-p[1] / pn, p[0] / pn];
                let z0 = self.ellipse_local(x);
                let dz = self.ellipse_local_dir(&e);
                let a = dz[0] * dz[0] + dz[1] * dz[1];
                let b = z0[0] * dz[0] + z0[1] * dz[1];
                let c = z0[0] * z0[0] + z0[1] * z0[1] - 1.0;
                let disc = b * b - a * c;
                Ok(if disc > 0.0 { 2.0 * disc.sqrt() / a } else { 0.0 })
            }
            Shape::Spheroid { axial, equatorial, .. } => {
                // Unit-ball section at offset s, scaled by det M |p| / |M^T p|.
                let (s, mtp) = self.spheroid_offset(x, p);
                let det = axial * equatorial * equatorial;
                Ok(PI * (1.0 - s * s).max(0.0) * det * pn / mtp)
            }
        }
    }

    /// Measure of the closed halfspace `{y : (y - x) . v >= 0}` intersected with the set.
    pub fn halfspace_mass(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let d = self.dim();
        check_dims(d, x, v)?;
        let vn = norm(v);
        let vhat: Vec<f64> = v.iter().map(|c| c / vn).collect();
        match self {
            Shape::Ball { center, radius } => ball_cap(d, center, *radius, x, &vhat),
            Shape::Shell {
                center,
                inner,
                outer,
            } => Ok(ball_cap(d, center, *outer, x, &vhat)? - ball_cap(d, center, *inner, x, &vhat)?),
            Shape::TwoBalls {
                first,
                second,
                radius,
            } => Ok(ball_cap(d, first, *radius, x, &vhat)? + ball_cap(d, second, *radius, x, &vhat)?),
            Shape::Box { lo, hi } => {
                if d != 2 {
                    return Err(Error::Unsupported(format!("box halfspace mass in {d}D")));
                }
                let poly = vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
                let clipped = clip_halfplane(&poly, x, &vhat);
                Ok(polygon_area(&clipped))
            }
            Shape::Ellipse {
                center,
                semi_axes: [a, b],
                ..
            } => {
                // y = c + M z maps the unit disk onto the ellipse; det M = ab.
                let w = self.ellipse_transpose_apply(&vhat);
                let wn = (w[0] * w[0] + w[1] * w[1]).sqrt();
                let offset = ((x[0] - center[0]) * vhat[0] + (x[1] - center[1]) * vhat[1]) / wn;
                Ok(a * b * disk_cap(1.0, offset))
            }
            Shape::Spheroid { axial, equatorial, .. } => {
                let (s, _) = self.spheroid_offset(x, &vhat);
                Ok(axial * equatorial * equatorial * ball_cap(3, &[0.0; 3], 1.0, &[s, 0.0, 0.0], &[1.0, 0.0, 0.0])?)
            }
        }
    }

    fn ellipse_params(&self) -> ([f64; 2], f64, f64, f64) {
        match self {
            Shape::Ellipse {
                center,
                semi_axes,
                angle,
            } => (*center, semi_axes[0], semi_axes[1], *angle),
            _ => unreachable!("ellipse helper on non-ellipse"),
        }
    }

    /// Coordinates in the ellipse's rotated frame (not scaled).
    fn ellipse_frame(&self, y: &[f64]) -> [f64; 2] {
        let (c, _, _, angle) = self.ellipse_params();
        let (s, co) = angle.sin_cos();
        let dx = y[0] - c[0];
        let dy = y[1] - c[1];
        [co * dx + s * dy, -s * dx + co * dy]
    }

    /// `M^{-1}(y - c)`: coordinates in which the ellipse is the unit disk.
    fn ellipse_local(&self, y: &[f64]) -> [f64; 2] {
        let (_, a, b, _) = self.ellipse_params();
        let f = self.ellipse_frame(y);
        [f[0] / a, f[1] / b]
    }

    fn ellipse_local_dir(&self, e: &[f64; 2]) -> [f64; 2] {
        let (_, a, b, angle) = self.ellipse_params();
        let (s, co) = angle.sin_cos();
        [(co * e[0] + s * e[1]) / a, (-s * e[0] + co * e[1]) / b]
    }

    /// Axial coordinate and distance from the axis.
    fn spheroid_frame(&self, y: &[f64]) -> (f64, f64) {
        let Shape::Spheroid { center, angle, .. } = self else {
            unreachable!("spheroid helper on another shape")
        };
        let (s, c) = angle.sin_cos();
        let d = [y[0] - center[0], y[1] - center[1], y[2] - center[2]];
        let z = c * d[0] + s * d[1];
        let r2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - z * z).max(0.0);
        (z, r2.sqrt())
    }

    /// For the plane `(y - x)·p = 0`: its offset from the origin in unit-ball coordinates
    /// and `|M^T p|`, where `y = c + M z` maps the unit ball onto the spheroid.
    fn spheroid_offset(&self, x: &[f64], p: &[f64]) -> (f64, f64) {
        let Shape::Spheroid {
            center,
            axial,
            equatorial,
            angle,
        } = self
        else {
            unreachable!("spheroid helper on another shape")
        };
        let (s, c) = angle.sin_cos();
        let pa = c * p[0] + s * p[1];
        let pp = p.iter().map(|v| v * v).sum::<f64>();
        let mtp = ((axial * pa).powi(2) + equatorial * equatorial * (pp - pa * pa).max(0.0)).sqrt();
        let off: f64 = (0..3).map(|k| (x[k] - center[k]) * p[k]).sum();
        (off / mtp, mtp)
    }

    /// `M^T v` with `M = R(angle) diag(a, b)`.
    fn ellipse_transpose_apply(&self, v: &[f64]) -> [f64; 2] {
        let (_, a, b, angle) = self.ellipse_params();
        let (s, co) = angle.sin_cos();
        [a * (co * v[0] + s * v[1]), b * (-s * v[0] + co * v[1])]
    }
}

fn check_dims(d: usize, x: &[f64], p: &[f64]) -> Result<()> {
    if x.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if p.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            got: p.len(),
        });
    }
    if !(norm(p) > 1e-300) {
        return Err(invalid("direction vector must be nonzero"));
    }
    Ok(())
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

fn ball_section(d: usize, center: &[f64], radius: f64, x: &[f64], p: &[f64], pn: f64) -> f64 {
    let s: f64 = center
        .iter()
        .zip(x)
        .zip(p)
        .map(|((c, xi), pi)| (c - xi) * pi)
        .sum::<f64>()
        / pn;
    let r2 = radius * radius - s * s;
    if r2 <= 0.0 {
        return 0.0;
    }
    unit_ball_volume(d - 1) * r2.powf((d as f64 - 1.0) / 2.0)
}

/// Area of `{z : z . n >= a} ∩ B(0, r)` in the plane.
pub(crate) fn disk_cap(r: f64, a: f64) -> f64 {
    if a >= r {
        0.0
    } else if a <= -r {
        PI * r * r
    } else {
        r * r * (a / r).acos() - a * (r * r - a * a).sqrt()
    }
}

fn ball_cap(d: usize, center: &[f64], radius: f64, x: &[f64], vhat: &[f64]) -> Result<f64> {
    // Halfspace (y - c) . v >= (x - c) . v.
    let a: f64 = x.iter().zip(center).zip(vhat).map(|((xi, c), v)| (xi - c) * v).sum();
    match d {
        2 => Ok(disk_cap(radius, a)),
        3 => {
            let r = radius;
            Ok(if a >= r {
                0.0
            } else if a <= -r {
                4.0 / 3.0 * PI * r * r * r
            } else {
                PI * (r - a).powi(2) * (2.0 * r + a) / 3.0
            })
        }
        _ => Err(Error::Unsupported(format!("ball halfspace mass in {d}D"))),
    }
}

/// Length of `{x + s e}` inside the box (Liang-Barsky clipping).
fn box_chord(lo: &[f64], hi: &[f64], x: &[f64], e: &[f64]) -> f64 {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for k in 0..lo.len() {
        if e[k].abs() < 1e-15 {
            if x[k] < lo[k] || x[k] > hi[k] {
                return 0.0;
            }
            continue;
        }
        let a = (lo[k] - x[k]) / e[k];
        let b = (hi[k] - x[k]) / e[k];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t1 - t0).max(0.0) * norm(e)
}

/// Area of the polygon cut from a 3D box by the plane `(y - x) . p = 0`.
fn box_section_3d(lo: &[f64], hi: &[f64], x: &[f64], p: &[f64]) -> f64 {
    let corner = |m: usize| -> [f64; 3] {
        [
            if m & 1 == 0 { lo[0] } else { hi[0] },
            if m & 2 == 0 { lo[1] } else { hi[1] },
            if m & 4 == 0 { lo[2] } else { hi[2] },
        ]
    };
    let level = |y: &[f64; 3]| (y[0] - x[0]) * p[0] + (y[1] - x[1]) * p[1] + (y[2] - x[2]) * p[2];
    let mut pts: Vec<[f64; 3]> = Vec::new();
    for a in 0..8usize {
        for bit in [1usize, 2, 4] {
            if a & bit != 0 {
                continue;
            }
            let b = a | bit;
            let (ya, yb) = (corner(a), corner(b));
            let (fa, fb) = (level(&ya), level(&yb));
            if (fa <= 0.0 && fb >= 0.0) || (fa >= 0.0 && fb <= 0.0) {
                if fa == fb {
                    continue;
                }
                let s = fa / (fa - fb);
                pts.push([
                    ya[0] + s * (yb[0] - ya[0]),
                    ya[1] + s * (yb[1] - ya[1]),
                    ya[2] + s * (yb[2] - ya[2]),
                ]);
            }
        }
    }
    if pts.len() < 3 {
        return 0.0;
    }
    let n = norm(p);
    let nh = [p[0] / n, p[1] / n, p[2] / n];
    let helper = if nh[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = normalize3(cross(&nh, &helper));
    let w = cross(&nh, &u);
    let cen = pts.iter().fold([0.0; 3], |acc, q| [acc[0] + q[0], acc[1] + q[1], acc[2] + q[2]]);
    let cen = [cen[0] / pts.len() as f64, cen[1] / pts.len() as f64, cen[2] / pts.len() as f64];
    let mut planar: Vec<[f64; 2]> = pts
        .iter()
        .map(|q| {
            let r = [q[0] - cen[0], q[1] - cen[1], q[2] - cen[2]];
            [r[0] * u[0] + r[1] * u[1] + r[2] * u[2], r[0] * w[0] + r[1] * w[1] + r[2] * w[2]]
        })
        .collect();
    planar.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));
    polygon_area(&planar)
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize3(a: [f64; 3]) -> [f64; 3] {
    let n = norm(&a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Sutherland-Hodgman clip of a convex polygon to `(y - x) . v >= 0`.
fn clip_halfplane(poly: &[[f64; 2]], x: &[f64], v: &[f64]) -> Vec<[f64; 2]> {
    let side = |q: &[f64; 2]| (q[0] - x[0]) * v[0] + (q[1] - x[1]) * v[1];
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (sa, sb) = (side(&a), side(&b));
        if sa >= 0.0 {
            out.push(a);
        }
        if (sa >= 0.0) != (sb >= 0.0) {
            let s = sa / (sa - sb);
            out.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    out
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * acc.abs()
}

/// Distance from `(y0, y1)` to the ellipse `x^2/a^2 + y^2/b^2 = 1`, both inside and outside.
fn distance_point_ellipse(a: f64, b: f64, y0: f64, y1: f64) -> f64 {
    // Reduce to the first quadrant with the major axis first.
    let (e0, e1, z0, z1) = if a >= b {
        (a, b, y0.abs(), y1.abs())
    } else {
        (b, a, y1.abs(), y0.abs())
    };
    if z1 > 0.0 {
        if z0 > 0.0 {
            let r0 = (e0 / e1).powi(2);
            let t = ellipse_root(r0, z0 / e0, z1 / e1, (z0 / e0).powi(2) + (z1 / e1).powi(2) - 1.0);
            let x0 = r0 * z0 / (t + r0);
            let x1 = z1 / (t + 1.0);
            ((x0 - z0).powi(2) + (x1 - z1).powi(2)).sqrt()
        } else {
            (z1 - e1).abs()
        }
    } else {
        let numer = e0 * z0;
        let denom = e0 * e0 - e1 * e1;
        if numer < denom {
            let xde0 = numer / denom;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).max(0.0).sqrt();
            ((x0 - z0).powi(2) + x1 * x1).sqrt()
        } else {
            (z0 - e0).abs()
        }
    }
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { (n0 * n0 + z1 * z1).sqrt() - 1.0 };
    let mut s = 0.0;
    for _ in 0..200 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if gs > 0.0 {
            s0 = s;
        } else if gs < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_chord_through_center_is_diameter() {
        let s = Shape::Ball {
            center: vec![0.5, 0.5],
            radius: 0.5,
        };
        let c = s.hyperplane_measure(&[0.5, 0.5], &[0.3, -1.0]).unwrap();
        assert!((c - 1.0).abs() < 1e-14);
        let tangent = s.hyperplane_measure(&[0.5, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(tangent, 0.0);
    }

    #[test]
    fn ball_section_3d_is_disk_area() {
        let s = Shape::Ball {
            center: vec![0.0; 3],
            radius: 1.0,
        };
        let a = s.hyperplane_measure(&[0.0, 0.0, 0.5], &[0.0, 0.0, 2.0]).unwrap();
        assert!((a - PI * 0.75).abs() < 1e-12);
    }

    #[test]
    fn unit_square_chords() {
        let s = Shape::preset("unit_square", 2).unwrap();
        let axis = s.hyperplane_measure(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        let diag = s.hyperplane_measure(&[0.5, 0.5], &[1.0, 1.0]).unwrap();
        assert!((axis - 1.0).abs() < 1e-14);
        assert!((diag - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cube_section_matches_known_areas() {
        let s = Shape::preset("unit_cube", 3).unwrap();
        let mid = s.hyperplane_measure(&[0.5; 3], &[0.0, 0.0, 1.0]).unwrap();
        assert!((mid - 1.0).abs() < 1e-12);
        // Regular hexagon through the center, side sqrt(2)/2.
        let hex = s.hyperplane_measure(&[0.5; 3], &[1.0, 1.0, 1.0]).unwrap();
        let side: f64 = 2f64.sqrt() / 2.0;
        assert!((hex - 1.5 * 3f64.sqrt() * side * side).abs() < 1e-12);
    }

    #[test]
    fn ellipse_chord_matches_sampling() {
        let s = Shape::preset("ellipse", 2).unwrap();
        let x = [0.55, 0.45];
        let p = [0.2, 1.0];
        let exact = s.hyperplane_measure(&x, &p).unwrap();
        let n = norm(&p);
        let e = [-p[1] / n, p[0] / n];
        let m = 200_000;
        let ds = 2.0 / m as f64;
        let mut acc = 0.0;
        for i in 0..m {
            let t = -1.0 + (i as f64 + 0.5) * ds;
            if s.contains(&[x[0] + t * e[0], x[1] + t * e[1]]) {
                acc += ds;
            }
        }
        assert!((exact - acc).abs() < 1e-4, "{exact} vs {acc}");
    }

    #[test]
    fn halfspace_masses_at_centers_are_half() {
        for name in ["square", "circle", "donut", "ellipse"] {
            let s = Shape::preset(name, 2).unwrap();
            let m = s.halfspace_mass(&[0.5, 0.5], &[0.3, 0.7]).unwrap();
            assert!((m - 0.5 * s.measure()).abs() < 1e-12, "{name}");
        }
        let ball = Shape::preset("circle", 3).unwrap();
        let m = ball.halfspace_mass(&[0.5; 3], &[1.0, 2.0, 3.0]).unwrap();
        assert!((m - 0.5 * ball.measure()).abs() < 1e-12);
    }

    #[test]
    fn spheroid_against_sampling() {
        let s = Shape::preset("ellipse", 3).unwrap();
        assert!(s.contains(&[0.5 + 0.29 * (PI / 6.0).cos(), 0.5 + 0.29 * (PI / 6.0).sin(), 0.5]));
        assert!(!s.contains(&[0.5, 0.5, 0.66]));
        assert!((s.distance_to_boundary(&[0.5, 0.5, 0.5]) - 0.15).abs() < 1e-12);
        // Halfspace mass at the center is half; hyperplane sections integrate to the volume.
        let m = s.halfspace_mass(&[0.5; 3], &[0.3, -1.0, 0.2]).unwrap();
        assert!((m - 0.5 * s.measure()).abs() < 1e-12);
        let p = [0.6, 0.5, -0.2];
        let pn = norm(&p);
        let (lo, hi) = (-0.6, 0.6);
        let n = 20_000;
        let ds = (hi - lo) / n as f64;
        let mut vol = 0.0;
        for i in 0..n {
            let t = lo + (i as f64 + 0.5) * ds;
            let x: Vec<f64> = (0..3).map(|k| 0.5 + t * p[k] / pn).collect();
            vol += s.hyperplane_measure(&x, &p).unwrap() * ds;
        }
        assert!((vol - s.measure()).abs() < 1e-6 * s.measure());
        let (blo, bhi) = s.bounding_box();
        for k in 0..3 {
            assert!(blo[k] > 0.0 && bhi[k] < 1.0);
        }
    }

    #[test]
    fn ellipse_distance_inside_and_outside() {
        let s = Shape::Ellipse {
            center: [0.0, 0.0],
            semi_axes: [2.0, 1.0],
            angle: 0.0,
        };
        assert!((s.distance_to_boundary(&[0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((s.distance_to_boundary(&[3.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((s.distance_to_boundary(&[0.0, 0.5]) - 0.5).abs() < 1e-12);
        // Brute force over boundary samples.
        let q = [0.7, 0.3];
        let mut best = f64::INFINITY;
        for i in 0..200_000 {
            let th = i as f64 / 200_000.0 * 2.0 * PI;
            best = best.min(dist(&q, &[2.0 * th.cos(), th.sin()]));
        }
        assert!((s.distance_to_boundary(&q) - best).abs() < 1e-6, "{} {best}", s.distance_to_boundary(&q));
    }
}
