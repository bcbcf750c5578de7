//! Deterministic quasi-uniform unit directions.
//!
//! Every sequence here is prefix-stable: the first `n` directions of a request for
//! `2n` are the directions returned for `n`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

/// Radical inverse of `i` in the given base.
pub fn van_der_corput(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// `n` unit vectors in `R^d`, flattened row-major.
///
/// 2D uses van der Corput angles (so `n = 2^m` gives the exact equispaced set),
/// 3D uses a Halton area-preserving map, higher dimensions use seeded Gaussian draws.
pub fn sphere_directions(dim: usize, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * dim);
    match dim {
        1 => {
            for i in 0..n {
                out.push(if i % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
        2 => {
            for i in 0..n {
                let th = 2.0 * PI * van_der_corput(i as u64, 2);
                out.push(th.cos());
                out.push(th.sin());
            }
        }
        3 => {
            for i in 0..n {
                let z = 1.0 - 2.0 * van_der_corput(i as u64 + 1, 2);
                let phi = 2.0 * PI * van_der_corput(i as u64 + 1, 3);
                let s = (1.0 - z * z).max(0.0).sqrt();
                out.push(s * phi.cos());
                out.push(s * phi.sin());
                out.push(z);
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1e5);
            let mut v = vec![0.0; dim];
            let mut produced = 0;
            while produced < n {
                for c in v.iter_mut() {
                    *c = StandardNormal.sample(&mut rng);
                }
                let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm < 1e-12 {
                    continue;
                }
                out.extend(v.iter().map(|c| c / norm));
                produced += 1;
            }
        }
    }
    out
}

/// Default probe count for directional resolution.
pub fn default_probe_count(dim: usize) -> usize {
    if dim <= 3 {
        1 << 12
    } else {
        1 << 14
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_stable_and_unit() {
        for d in [2, 3, 5] {
            let a = sphere_directions(d, 64);
            let b = sphere_directions(d, 128);
            assert_eq!(a[..], b[..64 * d]);
            for row in b.chunks(d) {
                let n: f64 = row.iter().map(|c| c * c).sum();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn planar_power_of_two_is_equispaced() {
        let dirs = sphere_directions(2, 8);
        let mut angles: Vec<f64> = dirs
            .chunks(2)
            .map(|r| r[1].atan2(r[0]).rem_euclid(2.0 * PI))
            .collect();
        angles.sort_by(f64::total_cmp);
        for (i, a) in angles.iter().enumerate() {
            assert!((a - i as f64 * PI / 4.0).abs() < 1e-12);
        }
    }
}
