use super::{centroid, dist, farthest_point_sample, knn_indices, Point3};
use crate::error::{Error, Result};

/// Similarity map between an object frame and a patch's normalized frame:
/// `normalized = (object - centroid) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub centroid: Point3,
    pub scale: f64,
}

impl Transform {
    /// Zero-centroid, unit max-radius frame of `points`.
    pub fn fit(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("cannot normalize an empty point set"));
        }
        let c = centroid(points);
        let scale = points.iter().map(|p| dist(p, &c)).fold(0.0, f64::max);
        if !(scale > 0.0) {
            return Err(Error::Degenerate("all points coincide (zero scale)".into()));
        }
        Ok(Self { centroid: c, scale })
    }

    pub fn normalize(&self, p: &Point3) -> Point3 {
        [0, 1, 2].map(|d| (p[d] - self.centroid[d]) / self.scale)
    }

    pub fn denormalize(&self, p: &Point3) -> Point3 {
        [0, 1, 2].map(|d| p[d] * self.scale + self.centroid[d])
    }

    pub fn normalize_all(&self, points: &[Point3]) -> Vec<Point3> {
        points.iter().map(|p| self.normalize(p)).collect()
    }

    pub fn denormalize_all(&self, points: &[Point3]) -> Vec<Point3> {
        points.iter().map(|p| self.denormalize(p)).collect()
    }
}

/// The `n` points nearest a seed, in their own normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub points: Vec<Point3>,
    pub transform: Transform,
    pub seed_index: usize,
    /// Index of each row of `points` in the parent cloud.
    pub source_indices: Vec<usize>,
    /// The same rows in the object frame, exactly as read from the cloud.
    pub object: Vec<Point3>,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Object-frame rows; points shared by two patches compare equal.
    pub fn object_points(&self) -> Vec<Point3> {
        self.object.clone()
    }

    /// Centroid in the object frame.
    pub fn center(&self) -> Point3 {
        self.transform.centroid
    }
}

pub fn extract_patch(cloud: &[Point3], seed_index: usize, n: usize) -> Result<Patch> {
    if seed_index >= cloud.len() {
        return Err(Error::IndexOutOfRange {
            op: "extract_patch",
            index: seed_index,
            len: cloud.len(),
        });
    }
    if n == 0 || n > cloud.len() {
        return Err(Error::invalid(format!(
            "patch size {n} must be in 1..={}",
            cloud.len()
        )));
    }
    let nearest = knn_indices(cloud, &[cloud[seed_index]], n)?;
    let source_indices = nearest.neighbors(0).to_vec();
    let raw: Vec<Point3> = source_indices.iter().map(|&i| cloud[i]).collect();
    let transform = Transform::fit(&raw)?;
    Ok(Patch {
        points: transform.normalize_all(&raw),
        transform,
        seed_index,
        source_indices,
        object: raw,
    })
}

/// Primary and adjacent patch expressed in the primary's normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPair {
    pub primary: Vec<Point3>,
    pub adjacent: Vec<Point3>,
    pub transform: Transform,
}

/// Normalizes both sets with the frame fitted to `primary` alone, so their
/// relative placement survives.
pub fn normalize_pair(primary: &[Point3], adjacent: &[Point3]) -> Result<NormalizedPair> {
    if adjacent.is_empty() {
        return Err(Error::invalid("adjacent patch is empty"));
    }
    let transform = Transform::fit(primary)?;
    Ok(NormalizedPair {
        primary: transform.normalize_all(primary),
        adjacent: transform.normalize_all(adjacent),
        transform,
    })
}

/// Concatenates object-frame patches and decimates to `target` points by
/// farthest-point sampling from the first point.
pub fn merge_patches(patches: &[Vec<Point3>], target: usize) -> Result<Vec<Point3>> {
    let all: Vec<Point3> = patches.iter().flatten().copied().collect();
    if target == 0 || all.len() < target {
        return Err(Error::invalid(format!(
            "cannot merge {} points down to {target}",
            all.len()
        )));
    }
    let keep = farthest_point_sample(&all, target, 0)?;
    Ok(keep.into_iter().map(|i| all[i]).collect())
}
