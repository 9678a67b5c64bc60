use std::cmp::Ordering;

use super::{dist2, Point3};
use crate::error::{Error, Result};

/// Exact k-nearest-neighbor table, one row of `k` source indices per query.
///
/// Rows are sorted by ascending distance; equal distances list the lower
/// source index first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodIndex {
    k: usize,
    indices: Vec<usize>,
}

impl NeighborhoodIndex {
    /// Table from explicit query-major rows of `k` entries each.
    pub fn from_flat(k: usize, indices: Vec<usize>) -> Result<Self> {
        if k == 0 || !indices.len().is_multiple_of(k) {
            return Err(Error::invalid(format!(
                "neighbor table of {} entries is not a multiple of k = {k}",
                indices.len()
            )));
        }
        Ok(Self { k, indices })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn query_count(&self) -> usize {
        self.indices.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn neighbors(&self, query: usize) -> &[usize] {
        &self.indices[query * self.k..(query + 1) * self.k]
    }

    /// All rows concatenated (query-major).
    pub fn flat(&self) -> &[usize] {
        &self.indices
    }

    /// Row index of each flat entry, i.e. `[0 x k, 1 x k, ...]`.
    pub fn query_of_each(&self) -> Vec<usize> {
        (0..self.query_count())
            .flat_map(|q| std::iter::repeat_n(q, self.k))
            .collect()
    }
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Brute-force exact KNN of every query among `source`.
pub fn knn_indices(source: &[Point3], queries: &[Point3], k: usize) -> Result<NeighborhoodIndex> {
    if k == 0 || k > source.len() {
        return Err(Error::invalid(format!(
            "knn: k = {k} must be in 1..={}",
            source.len()
        )));
    }
    let mut indices = Vec::with_capacity(queries.len() * k);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(source.len());
    for q in queries {
        scratch.clear();
        scratch.extend(source.iter().enumerate().map(|(i, s)| (dist2(q, s), i)));
        if k < scratch.len() {
            scratch.select_nth_unstable_by(k - 1, by_distance_then_index);
        }
        let head = &mut scratch[..k];
        head.sort_unstable_by(by_distance_then_index);
        indices.extend(head.iter().map(|&(_, i)| i));
    }
    Ok(NeighborhoodIndex { k, indices })
}
