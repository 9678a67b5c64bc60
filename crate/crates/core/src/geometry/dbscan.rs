//! Density-based clustering.
//!
//! Core points have at least `min_pts` points (themselves included) within
//! `eps`. Clusters are the connected components of core points under the
//! `eps` relation; a border point joins the cluster of its nearest core
//! neighbor (lowest index on ties), which keeps labels independent of input
//! order up to renaming.

use std::collections::VecDeque;

use super::{dist2, knn_indices, Point3};

pub const NOISE: i32 = -1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    /// Cluster id per point, or [`NOISE`].
    pub labels: Vec<i32>,
    pub cluster_count: usize,
}

pub fn dbscan(points: &[Point3], eps: f64, min_pts: usize) -> Clustering {
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors: Vec<Vec<usize>> = points
        .iter()
        .map(|p| (0..n).filter(|&j| dist2(p, &points[j]) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts.max(1)).collect();

    let mut labels = vec![NOISE; n];
    let mut clusters = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        let id = clusters as i32;
        clusters += 1;
        labels[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for &j in &neighbors[i] {
                if core[j] && labels[j] == NOISE {
                    labels[j] = id;
                    queue.push_back(j);
                }
            }
        }
    }

    for i in 0..n {
        if core[i] {
            continue;
        }
        let nearest_core = neighbors[i]
            .iter()
            .filter(|&&j| core[j])
            .min_by(|&&a, &&b| dist2(&points[i], &points[a]).total_cmp(&dist2(&points[i], &points[b])).then(a.cmp(&b)));
        if let Some(&j) = nearest_core {
            labels[i] = labels[j];
        }
    }

    Clustering {
        labels,
        cluster_count: clusters,
    }
}

/// Mean distance from each point to its nearest other point; 0 for fewer
/// than two points.
pub fn mean_nn_spacing(points: &[Point3]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let idx = knn_indices(points, points, 2).expect("at least two points");
    let total: f64 = (0..points.len())
        .map(|q| {
            let nb = idx.neighbors(q);
            // with duplicates the query may appear second
            let other = if nb[0] == q { nb[1] } else { nb[0] };
            dist2(&points[q], &points[other]).sqrt()
        })
        .sum();
    total / points.len() as f64
}
