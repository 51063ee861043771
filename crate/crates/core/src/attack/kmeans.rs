//! Lloyd's k-means with k-means++ seeding.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tensor::Matrix;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    /// Within-cluster sum of squares after each iteration.
    pub inertia: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    (0..centroids.rows())
        .map(|c| (c, sq_dist(point, centroids.row(c))))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

/// Clusters the rows of `points` into `k` groups.
///
/// Iterates until assignments stop changing or [`MAX_ITERATIONS`] is hit.
/// A cluster that loses all its points keeps its previous centroid.
pub fn kmeans(points: &Matrix, k: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let mut distinct: Vec<&[f64]> = (0..n).map(|r| points.row(r)).collect();
    distinct.sort_by(|a, b| {
        a.iter()
            .zip(*b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::Degenerate(format!(
            "{} distinct points cannot form {k} clusters",
            distinct.len()
        )));
    }

    let mut rng = rng_from_seed(seed);
    let d = points.cols();
    let mut centroids = Matrix::zeros(k, d);
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|r| sq_dist(points.row(r), centroids.row(0)))
        .collect();
    for c in 1..k {
        let pick = WeightedIndex::new(&d2)
            .map_err(|e| Error::Degenerate(format!("k-means++ seeding: {e}")))?
            .sample(&mut rng);
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (r, best) in d2.iter_mut().enumerate() {
            *best = best.min(sq_dist(points.row(r), centroids.row(c)));
        }
    }

    let mut assignments = vec![usize::MAX; n];
    let mut inertia = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        for (r, slot) in assignments.iter_mut().enumerate() {
            let (c, _) = nearest(points.row(r), &centroids);
            if *slot != c {
                *slot = c;
                changed = true;
            }
        }
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (r, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(points.row(r)) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / count as f64;
                }
            }
        }
        inertia.push(
            assignments
                .iter()
                .enumerate()
                .map(|(r, &c)| sq_dist(points.row(r), centroids.row(c)))
                .sum(),
        );
        if !changed {
            break;
        }
    }
    Ok(KMeansResult {
        assignments,
        centroids,
        inertia,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::Normal;

    fn column(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn separated_pairs() {
        let r = kmeans(&column(&[0.0, 0.1, 10.0, 10.1]), 2, 1).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
    }

    #[test]
    fn single_cluster_is_mean() {
        let r = kmeans(&column(&[1.0, 2.0, 6.0]), 1, 0).unwrap();
        assert!((r.centroids[(0, 0)] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_distinct_points() {
        assert!(kmeans(&column(&[1.0, 1.0, 1.0]), 2, 0).is_err());
    }

    #[test]
    fn planted_gaussians_recovered() {
        let mut rng = rng_from_seed(11);
        let (a, b) = (
            Normal::new(0.0, 0.5).unwrap(),
            Normal::new(5.0, 0.5).unwrap(),
        );
        let mut vals = Vec::new();
        let mut truth = Vec::new();
        for i in 0..200 {
            let first = i % 2 == 0;
            vals.push(if first {
                a.sample(&mut rng)
            } else {
                b.sample(&mut rng)
            });
            truth.push(usize::from(!first));
        }
        let r = kmeans(&column(&vals), 2, 3).unwrap();
        let agree = r
            .assignments
            .iter()
            .zip(&truth)
            .filter(|(x, y)| x == y)
            .count();
        let agree = agree.max(200 - agree);
        assert!(agree as f64 / 200.0 >= 0.99, "{agree}");
    }

    #[test]
    fn inertia_never_increases() {
        let mut rng = rng_from_seed(5);
        let data: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..10.0)).collect();
        let pts = Matrix::from_vec(100, 3, data).unwrap();
        let r = kmeans(&pts, 4, 2).unwrap();
        for w in r.inertia.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }
}
