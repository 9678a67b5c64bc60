use std::collections::HashSet;

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::{dist, sub, NeighborhoodIndex, Point3};

pub const SPNE_WIDTH: usize = 20;
pub const LSE_WIDTH: usize = 10;

/// Per-(query, neighbor) geometric code, stored query-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionCode {
    queries: usize,
    k: usize,
    width: usize,
    data: Vec<f64>,
}

impl PositionCode {
    fn from_rows(queries: usize, k: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), queries * k * width);
        Self { queries, k, width, data }
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Code of query `i`, neighbor `k`.
    pub fn entry(&self, i: usize, k: usize) -> &[f64] {
        let start = (i * self.k + k) * self.width;
        &self.data[start..start + self.width]
    }

    /// `(queries * k) x width` tensor, rows ordered like [`NeighborhoodIndex::flat`].
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.queries * self.k, self.width], self.data.clone())
            .expect("position code dimensions are consistent")
    }
}

fn check_rows(index: &NeighborhoodIndex, queries: usize, source: usize, what: &str) -> Result<()> {
    if index.query_count() != queries {
        return Err(Error::invalid(format!(
            "{what}: index has {} rows for {queries} queries",
            index.query_count()
        )));
    }
    if let Some(&bad) = index.flat().iter().find(|&&j| j >= source) {
        return Err(Error::IndexOutOfRange { op: "position code", index: bad, len: source });
    }
    Ok(())
}

/// Cross-patch code: for query `p` with `k`-th neighbor `a` in the primary
/// patch and `b` in the union cloud,
/// `[p, a, p-a, |p-a|, b-a+p, b, p-b, |p-b|]`.
pub fn spne_encode(
    primary: &[Point3],
    within: &NeighborhoodIndex,
    union: &[Point3],
    across: &NeighborhoodIndex,
) -> Result<PositionCode> {
    if within.k() != across.k() {
        return Err(Error::invalid(format!(
            "spne: neighbor counts differ ({} vs {})",
            within.k(),
            across.k()
        )));
    }
    check_rows(within, primary.len(), primary.len(), "spne")?;
    check_rows(across, primary.len(), union.len(), "spne")?;
    let k = within.k();
    let mut data = Vec::with_capacity(primary.len() * k * SPNE_WIDTH);
    for (i, p) in primary.iter().enumerate() {
        for (&ai, &bi) in within.neighbors(i).iter().zip(across.neighbors(i)) {
            let (a, b) = (primary[ai], union[bi]);
            data.extend_from_slice(p);
            data.extend_from_slice(&a);
            data.extend_from_slice(&sub(p, &a));
            data.push(dist(p, &a));
            data.extend((0..3).map(|c| b[c] - a[c] + p[c]));
            data.extend_from_slice(&b);
            data.extend_from_slice(&sub(p, &b));
            data.push(dist(p, &b));
        }
    }
    Ok(PositionCode::from_rows(primary.len(), k, SPNE_WIDTH, data))
}

/// Single-cloud code `[p, a, p-a, |p-a|]` for each query `p` and neighbor `a`.
pub fn lse_encode(points: &[Point3], index: &NeighborhoodIndex) -> Result<PositionCode> {
    check_rows(index, points.len(), points.len(), "lse")?;
    let k = index.k();
    let mut data = Vec::with_capacity(points.len() * k * LSE_WIDTH);
    for (i, p) in points.iter().enumerate() {
        for &ai in index.neighbors(i) {
            let a = points[ai];
            data.extend_from_slice(p);
            data.extend_from_slice(&a);
            data.extend_from_slice(&sub(p, &a));
            data.push(dist(p, &a));
        }
    }
    Ok(PositionCode::from_rows(points.len(), k, LSE_WIDTH, data))
}

/// Bare neighbor coordinates, the code used by the raw-coordinate ablation.
pub fn neighbor_coordinates(source: &[Point3], index: &NeighborhoodIndex) -> Result<PositionCode> {
    check_rows(index, index.query_count(), source.len(), "raw code")?;
    let data = index.flat().iter().flat_map(|&j| source[j]).collect();
    Ok(PositionCode::from_rows(index.query_count(), index.k(), 3, data))
}

/// [`lse_encode`] on a graph variable, so gradients reach the coordinates.
pub fn lse_encode_var(g: &mut Graph, points: Var, index: &NeighborhoodIndex) -> Result<Var> {
    let centers = g.gather_rows(points, index.query_of_each())?;
    let neighbors = g.gather_rows(points, index.flat().to_vec())?;
    let diff = g.sub(centers, neighbors)?;
    let length = g.norm_last(diff)?;
    g.concat(&[centers, neighbors, diff, length], 1)
}

/// Primary points followed by the adjacent points that do not coincide
/// exactly with a primary point.
pub fn union_cloud(primary: &[Point3], adjacent: &[Point3]) -> Vec<Point3> {
    let key = |p: &Point3| p.map(f64::to_bits);
    let seen: HashSet<[u64; 3]> = primary.iter().map(key).collect();
    let mut union = primary.to_vec();
    union.extend(adjacent.iter().filter(|p| !seen.contains(&key(p))));
    union
}
