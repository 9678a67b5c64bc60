//! Point-set kernels: neighbor search, sampling, patches, noise and
//! density clustering.

mod cloud;
mod dbscan;
mod knn;
mod noise;
mod patch;
mod sampling;
mod shapes;

pub use cloud::{bounding_box, centroid, dist, dist2, sub, Point3, PointCloud};
pub use dbscan::{dbscan, mean_nn_spacing, Clustering, NOISE};
pub use knn::{knn_indices, NeighborhoodIndex};
pub use noise::add_gaussian_noise;
pub use patch::{extract_patch, merge_patches, normalize_pair, NormalizedPair, Patch, Transform};
pub use sampling::farthest_point_sample;
pub use shapes::AnalyticShape;
