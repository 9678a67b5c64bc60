use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Point3;
use crate::error::{Error, Result};

/// Adds independent zero-mean Gaussian noise with standard deviation `level`
/// to every coordinate. `level` is a fraction of the unit bounding radius, so
/// callers normalize first.
pub fn add_gaussian_noise(points: &[Point3], level: f64, seed: u64) -> Result<Vec<Point3>> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::invalid(format!("noise level must be a finite value >= 0, got {level}")));
    }
    if level == 0.0 {
        return Ok(points.to_vec());
    }
    let normal = Normal::new(0.0, level).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(points
        .iter()
        .map(|p| p.map(|v| v + normal.sample(&mut rng)))
        .collect())
}
