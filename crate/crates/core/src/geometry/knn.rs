use rayon::prelude::*;

use crate::error::{Error, Result};

/// Exact k-nearest neighbors by brute force. Returns per-node neighbor lists
/// (`n * k`, nearest first, ties broken by index) and the distance to each.
pub fn knn(points: &[f64], dim: usize, k: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = points.len() / dim;
    let rows: Vec<Result<Vec<(f64, usize)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &points[i * dim..(i + 1) * dim];
            let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let xj = &points[j * dim..(j + 1) * dim];
                let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 == 0.0 {
                    return Err(Error::DuplicatePoints(i.min(j), i.max(j)));
                }
                cand.push((d2, j));
            }
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_by(cmp);
            Ok(cand)
        })
        .collect();
    let mut idx = Vec::with_capacity(n * k);
    let mut dist = Vec::with_capacity(n * k);
    for row in rows {
        for (d2, j) in row? {
            idx.push(j);
            dist.push(d2.sqrt());
        }
    }
    Ok((idx, dist))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_full_sort() {
        let pts: Vec<f64> = (0..60)
            .map(|i| ((i * 7919) % 101) as f64 / 101.0 + i as f64 * 1e-4)
            .collect();
        let (idx, _) = knn(&pts, 2, 5).unwrap();
        for i in 0..30 {
            let mut all: Vec<(f64, usize)> = (0..30)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = (pts[2 * i] - pts[2 * j]).powi(2) + (pts[2 * i + 1] - pts[2 * j + 1]).powi(2);
                    (d, j)
                })
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let want: Vec<usize> = all[..5].iter().map(|p| p.1).collect();
            assert_eq!(&idx[i * 5..i * 5 + 5], &want[..]);
        }
    }

    #[test]
    fn duplicates_rejected() {
        let pts = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        assert!(matches!(knn(&pts, 2, 1), Err(Error::DuplicatePoints(0, 2))));
    }
}
