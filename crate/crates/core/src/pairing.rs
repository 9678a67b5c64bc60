//! Adjacent patch-pair construction.
//!
//! At inference time every patch is paired with the neighbor, among its few
//! nearest patches, whose overlap with it splits into the most density
//! clusters. At training time pairs are drawn at random subject to a minimum
//! number of shared points.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    dbscan, dist, dist2, extract_patch, farthest_point_sample, knn_indices, mean_nn_spacing, normalize_pair, Patch,
    Point3, Transform,
};

/// Patches covering one source cloud plus the adjacency radius used to
/// define their overlaps (object units).
#[derive(Debug, Clone)]
pub struct PatchSet {
    pub patches: Vec<Patch>,
    pub radius: f64,
}

impl PatchSet {
    pub fn new(patches: Vec<Patch>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid(format!("adjacency radius must be positive, got {radius}")));
        }
        Ok(Self { patches, radius })
    }

    /// Seeds `ceil(2N/n)` patches by farthest-point sampling, then adds
    /// patches at any uncovered point until every point belongs to one. The
    /// radius is the largest patch extent, so each patch lies inside its own
    /// ball.
    pub fn cover(cloud: &[Point3], n: usize) -> Result<Self> {
        if n == 0 || n > cloud.len() {
            return Err(Error::invalid(format!(
                "patch size {n} must be in 1..={}",
                cloud.len()
            )));
        }
        let count = (2 * cloud.len()).div_ceil(n).min(cloud.len());
        let seeds = farthest_point_sample(cloud, count, 0)?;
        let mut patches = seeds
            .iter()
            .map(|&s| extract_patch(cloud, s, n))
            .collect::<Result<Vec<_>>>()?;
        let mut covered = vec![false; cloud.len()];
        for p in &patches {
            for &i in &p.source_indices {
                covered[i] = true;
            }
        }
        while let Some(i) = covered.iter().position(|c| !c) {
            let p = extract_patch(cloud, i, n)?;
            for &j in &p.source_indices {
                covered[j] = true;
            }
            patches.push(p);
        }
        let radius = patches.iter().map(|p| p.transform.scale).fold(0.0, f64::max);
        Self::new(patches, radius)
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

/// Points of `A ∪ B` lying within the radius of both patch centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapRegion {
    pub points: Vec<Point3>,
    /// How many region points came from A (resp. B); shared points count
    /// for both.
    pub from_a: usize,
    pub from_b: usize,
}

impl OverlapRegion {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn overlap_region(a: &Patch, b: &Patch, radius: f64) -> OverlapRegion {
    let (ca, cb) = (a.center(), b.center());
    let inside = |p: &Point3| dist(p, &ca) <= radius && dist(p, &cb) <= radius;
    let in_a: HashSet<usize> = a.source_indices.iter().copied().collect();
    let in_b: HashSet<usize> = b.source_indices.iter().copied().collect();

    let mut region = OverlapRegion {
        points: Vec::new(),
        from_a: 0,
        from_b: 0,
    };
    for (p, src) in a.object_points().iter().zip(&a.source_indices) {
        if inside(p) {
            region.points.push(*p);
            region.from_a += 1;
            region.from_b += in_b.contains(src) as usize;
        }
    }
    for (p, src) in b.object_points().iter().zip(&b.source_indices) {
        if !in_a.contains(src) && inside(p) {
            region.points.push(*p);
            region.from_b += 1;
        }
    }
    region
}

/// A primary patch with its adjacent patch, both in the primary's
/// normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPair {
    pub primary: Vec<Point3>,
    pub adjacent: Vec<Point3>,
    pub transform: Transform,
    pub primary_seed: usize,
    pub adjacent_seed: usize,
    /// Source points the two patches share.
    pub overlap_count: usize,
}

impl PatchPair {
    pub fn from_patches(primary: &Patch, adjacent: &Patch) -> Result<Self> {
        let pair = normalize_pair(&primary.object_points(), &adjacent.object_points())?;
        Ok(Self {
            primary: pair.primary,
            adjacent: pair.adjacent,
            transform: pair.transform,
            primary_seed: primary.seed_index,
            adjacent_seed: adjacent.seed_index,
            overlap_count: shared_count(&primary.source_indices, &adjacent.source_indices),
        })
    }
}

fn shared_count(a: &[usize], b: &[usize]) -> usize {
    let set: HashSet<usize> = a.iter().copied().collect();
    b.iter().filter(|i| set.contains(i)).count()
}

/// Density-clustering parameters for scoring overlap regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    /// Fixed neighborhood radius; `None` uses twice the region's mean
    /// nearest-neighbor spacing.
    pub eps: Option<f64>,
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { eps: None, min_pts: 4 }
    }
}

impl ClusterParams {
    pub fn eps_for(&self, region: &[Point3]) -> f64 {
        self.eps.unwrap_or_else(|| 2.0 * mean_nn_spacing(region))
    }

    pub fn cluster_count(&self, region: &[Point3]) -> usize {
        if region.is_empty() {
            return 0;
        }
        dbscan(region, self.eps_for(region), self.min_pts).cluster_count
    }
}

/// Outcome of the adjacent-patch search for one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedPair {
    pub primary: usize,
    pub partner: usize,
    pub cluster_count: usize,
    pub region_size: usize,
    /// No candidate overlapped; the nearest patch was taken.
    pub degenerate: bool,
    pub pair: PatchPair,
}

/// Pairs every patch with the candidate (among its `candidates` nearest by
/// centroid distance) whose overlap region has the most clusters. Ties go to
/// the nearer candidate, then the lower index.
pub fn select_adjacent_pairs(set: &PatchSet, candidates: usize, clustering: ClusterParams) -> Result<Vec<SelectedPair>> {
    if set.len() < 2 {
        return Err(Error::invalid("pair selection needs at least two patches"));
    }
    if candidates == 0 {
        return Err(Error::invalid("candidate count must be at least 1"));
    }
    let centers: Vec<Point3> = set.patches.iter().map(Patch::center).collect();
    let mut out = Vec::with_capacity(set.len());
    for (m, patch) in set.patches.iter().enumerate() {
        let mut order: Vec<usize> = (0..set.len()).filter(|&j| j != m).collect();
        order.sort_by(|&a, &b| {
            dist2(&centers[m], &centers[a])
                .total_cmp(&dist2(&centers[m], &centers[b]))
                .then(a.cmp(&b))
        });
        order.truncate(candidates);

        let mut best: Option<(usize, usize, usize)> = None; // (candidate, clusters, region size)
        for &c in &order {
            let region = overlap_region(patch, &set.patches[c], set.radius);
            if region.is_empty() {
                continue;
            }
            let clusters = clustering.cluster_count(&region.points);
            if best.is_none_or(|(_, bc, _)| clusters > bc) {
                best = Some((c, clusters, region.len()));
            }
        }
        let (partner, cluster_count, region_size, degenerate) = match best {
            Some((c, k, size)) => (c, k, size, false),
            None => (order[0], 0, 0, true),
        };
        out.push(SelectedPair {
            primary: m,
            partner,
            cluster_count,
            region_size,
            degenerate,
            pair: PatchPair::from_patches(patch, &set.patches[partner])?,
        });
    }
    Ok(out)
}

/// A training input pair with its dense ground truth in the same frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub pair: PatchPair,
    pub ground_truth: Vec<Point3>,
    /// Sparse-cloud indices of the primary and adjacent rows.
    pub primary_sources: Vec<usize>,
    pub adjacent_sources: Vec<usize>,
}

/// Draws `pair_count` pairs with distinct primary seeds from `sparse`.
///
/// The adjacent seed is uniform among sparse points whose patch shares at
/// least `n/8` (and fewer than `n`) points with the primary. Ground truth is
/// the `r*n` points of `dense` nearest the primary seed.
pub fn sample_training_pairs(
    sparse: &[Point3],
    dense: &[Point3],
    pair_count: usize,
    n: usize,
    r: usize,
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    if pair_count == 0 {
        return Ok(Vec::new());
    }
    if n == 0 || n > sparse.len() {
        return Err(Error::invalid(format!("patch size {n} must be in 1..={}", sparse.len())));
    }
    if r == 0 || r * n > dense.len() {
        return Err(Error::invalid(format!(
            "ground truth needs {} dense points, cloud has {}",
            r * n,
            dense.len()
        )));
    }
    if pair_count > sparse.len() {
        return Err(Error::invalid(format!(
            "cannot draw {pair_count} distinct seeds from {} points",
            sparse.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = sample(&mut rng, sparse.len(), pair_count).into_vec();
    let mut out = Vec::with_capacity(pair_count);
    for s in seeds {
        let primary = extract_patch(sparse, s, n)?;
        let reach = 2.0
            * primary
                .source_indices
                .iter()
                .map(|&i| dist(&sparse[i], &sparse[s]))
                .fold(0.0, f64::max);
        let own: HashSet<usize> = primary.source_indices.iter().copied().collect();
        let mut candidates = Vec::new();
        for t in 0..sparse.len() {
            if t == s || dist(&sparse[t], &sparse[s]) > reach {
                continue;
            }
            let nb = knn_indices(sparse, &[sparse[t]], n)?;
            let shared = nb.neighbors(0).iter().filter(|i| own.contains(i)).count();
            if shared * 8 >= n && shared < n {
                candidates.push(t);
            }
        }
        if candidates.is_empty() {
            return Err(Error::NoOverlap { seed: s });
        }
        let t = candidates[rng.random_range(0..candidates.len())];
        let adjacent = extract_patch(sparse, t, n)?;
        let pair = PatchPair::from_patches(&primary, &adjacent)?;
        let gt_idx = knn_indices(dense, &[sparse[s]], r * n)?;
        let ground_truth = gt_idx
            .neighbors(0)
            .iter()
            .map(|&i| pair.transform.normalize(&dense[i]))
            .collect();
        out.push(TrainingPair {
            pair,
            ground_truth,
            primary_sources: primary.source_indices,
            adjacent_sources: adjacent.source_indices,
        });
    }
    Ok(out)
}
