use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{AugmentConfig, DataConfig};
use crate::error::{Error, Result};
use crate::geometry::{AnalyticShape, Point3};
use crate::pairing::{sample_training_pairs, TrainingPair};

/// One supervised example with the surface it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub shape: AnalyticShape,
    pub shape_index: usize,
    pub pair: TrainingPair,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

/// Sparse input cloud and dense reference cloud of one surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSource {
    pub shape: AnalyticShape,
    pub sparse: Vec<Point3>,
    pub dense: Vec<Point3>,
}

impl ShapeSource {
    /// Independent area-uniform samples: `sparse_points` for the input and
    /// `r` times as many for the reference.
    pub fn sample(shape: AnalyticShape, sparse_points: usize, r: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s1, s2) = (rng.random(), rng.random());
        Self {
            shape,
            sparse: shape.sample(sparse_points, s1),
            dense: shape.sample(sparse_points * r, s2),
        }
    }
}

/// Draws `pairs_per_shape` pairs from every source and holds out
/// `round(val_fraction * pairs_per_shape)` of each shape's pairs, chosen by a
/// seeded shuffle. Primary seeds are distinct within a shape, so held-out
/// pairs never share a primary seed with training pairs.
pub fn build_dataset(
    sources: &[ShapeSource],
    pairs_per_shape: usize,
    val_fraction: f64,
    n: usize,
    r: usize,
    seed: u64,
) -> Result<Dataset> {
    if sources.is_empty() {
        return Err(Error::invalid("dataset needs at least one shape"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dataset = Dataset::default();
    for (shape_index, source) in sources.iter().enumerate() {
        let pairs = sample_training_pairs(&source.sparse, &source.dense, pairs_per_shape, n, r, rng.random())?;
        let mut samples: Vec<Sample> = pairs
            .into_iter()
            .map(|pair| Sample { shape: source.shape, shape_index, pair })
            .collect();
        samples.shuffle(&mut rng);
        let val_count = ((val_fraction * samples.len() as f64).round() as usize).min(samples.len());
        dataset.train.extend(samples.split_off(val_count));
        dataset.val.extend(samples);
    }
    Ok(dataset)
}

/// Samples every configured shape and assembles the split.
pub fn build_toy_dataset(data: &DataConfig, n: usize, r: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources: Vec<ShapeSource> = data
        .shapes
        .iter()
        .map(|&shape| ShapeSource::sample(shape, data.sparse_points, r, rng.random()))
        .collect();
    build_dataset(&sources, data.pairs_per_shape, data.val_fraction, n, r, rng.random())
}

/// Gaussian offset per source index, so a raw point present in both patches
/// moves identically in both.
pub(crate) fn per_source_offsets(sources: &[&[usize]], sigma: f64, seed: u64) -> Result<BTreeMap<usize, Point3>> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets = BTreeMap::new();
    for &s in sources.iter().flat_map(|s| s.iter()) {
        offsets.entry(s).or_insert(());
    }
    Ok(offsets
        .into_keys()
        .map(|s| (s, [normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)]))
        .collect())
}

/// Network input and target after augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub primary: Vec<Point3>,
    pub adjacent: Vec<Point3>,
    pub ground_truth: Vec<Point3>,
}

impl AugmentedSample {
    pub fn unchanged(pair: &TrainingPair) -> Self {
        Self {
            primary: pair.pair.primary.clone(),
            adjacent: pair.pair.adjacent.clone(),
            ground_truth: pair.ground_truth.clone(),
        }
    }
}

/// Rotation matrix of a unit quaternion drawn from four normals, which is
/// uniform over rotations.
fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / norm);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// Applies one rotation and one scale jointly to both patches and the
/// ground truth, then jitters the input points (never the target). Shared
/// raw points receive the same jitter in both patches.
pub fn augment_pair(pair: &TrainingPair, config: &AugmentConfig, seed: u64) -> Result<AugmentedSample> {
    if !config.enabled {
        return Ok(AugmentedSample::unchanged(pair));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = config.rotate.then(|| random_rotation(&mut rng));
    let scale = if config.scale_max > config.scale_min {
        rng.random_range(config.scale_min..=config.scale_max)
    } else {
        config.scale_min
    };
    let similarity = |p: &Point3| -> Point3 {
        let p = match &rotation {
            Some(m) => std::array::from_fn(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2]),
            None => *p,
        };
        p.map(|v| v * scale)
    };
    let mut out = AugmentedSample {
        primary: pair.pair.primary.iter().map(similarity).collect(),
        adjacent: pair.pair.adjacent.iter().map(similarity).collect(),
        ground_truth: pair.ground_truth.iter().map(similarity).collect(),
    };
    if config.jitter > 0.0 {
        let offsets = per_source_offsets(&[&pair.primary_sources, &pair.adjacent_sources], config.jitter, rng.random())?;
        let shift = |points: &mut [Point3], sources: &[usize]| {
            for (p, s) in points.iter_mut().zip(sources) {
                let d = offsets[s];
                *p = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
            }
        };
        shift(&mut out.primary, &pair.primary_sources);
        shift(&mut out.adjacent, &pair.adjacent_sources);
    }
    Ok(out)
}
