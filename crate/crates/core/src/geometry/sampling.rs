use super::{dist2, Point3};
use crate::error::{Error, Result};

/// Greedy max-min subset of `m` indices starting from `start`. The farthest
/// candidate with the lowest index wins ties.
pub fn farthest_point_sample(points: &[Point3], m: usize, start: usize) -> Result<Vec<usize>> {
    if m == 0 || m > points.len() {
        return Err(Error::invalid(format!(
            "farthest point sampling: m = {m} must be in 1..={}",
            points.len()
        )));
    }
    if start >= points.len() {
        return Err(Error::IndexOutOfRange {
            op: "farthest point sampling",
            index: start,
            len: points.len(),
        });
    }
    let mut chosen = Vec::with_capacity(m);
    let mut nearest = vec![f64::INFINITY; points.len()];
    let mut current = start;
    loop {
        chosen.push(current);
        if chosen.len() == m {
            break;
        }
        let anchor = points[current];
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, p) in points.iter().enumerate() {
            let d = nearest[i].min(dist2(p, &anchor));
            nearest[i] = d;
            if d > best.0 {
                best = (d, i);
            }
        }
        current = best.1;
    }
    Ok(chosen)
}
