//! Square linear assignment over Euclidean point distances.

use crate::error::{Error, Result};
use crate::geometry::{dist, Point3};

fn check_sizes(a: &[Point3], b: &[Point3]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "EMD needs equal cardinalities, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Optimal bijection `a[i] -> b[assignment[i]]` minimizing total Euclidean
/// distance, by shortest augmenting paths with dual potentials (O(m^3)).
pub fn optimal_assignment(a: &[Point3], b: &[Point3]) -> Result<Vec<usize>> {
    check_sizes(a, b)?;
    let m = a.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let cost: Vec<f64> = a.iter().flat_map(|p| b.iter().map(move |q| dist(p, q))).collect();
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Degenerate("EMD distances overflow".into()));
    }

    // 1-based rows/columns; column 0 is a virtual root.
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut min_slack = vec![0.0; m + 1];
    let mut used = vec![false; m + 1];
    for row in 1..=m {
        owner[0] = row;
        let mut j0 = 0;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row_cost = &cost[(i0 - 1) * m..i0 * m];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let slack = row_cost[j - 1] - u[i0] - v[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; m];
    for j in 1..=m {
        assignment[owner[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// Near-optimal assignment by forward auction with epsilon scaling.
///
/// Each of the `phases` rounds divides epsilon by 4 starting from a quarter
/// of the largest distance, so the final total cost exceeds the optimum by at
/// most `m * max_dist / 4^phases`. Bidders are served in ascending index
/// order, which makes the result deterministic.
pub fn auction_assignment(a: &[Point3], b: &[Point3], phases: usize) -> Result<Vec<usize>> {
    check_sizes(a, b)?;
    let m = a.len();
    if m <= 1 {
        return Ok((0..m).collect());
    }
    let max_cost = a
        .iter()
        .flat_map(|p| b.iter().map(move |q| dist(p, q)))
        .fold(0.0, f64::max);
    if !max_cost.is_finite() {
        return Err(Error::Degenerate("EMD distances overflow".into()));
    }
    if max_cost == 0.0 {
        return Ok((0..m).collect());
    }
    let mut price = vec![0.0; m];
    let mut owner: Vec<Option<usize>> = vec![None; m];
    let mut assigned: Vec<Option<usize>> = vec![None; m];
    let mut eps = max_cost / 4.0;
    for _ in 0..phases.max(1) {
        owner.fill(None);
        assigned.fill(None);
        let mut queue: std::collections::VecDeque<usize> = (0..m).collect();
        while let Some(i) = queue.pop_front() {
            let (mut best, mut best_value, mut second_value) = (0, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (j, q) in b.iter().enumerate() {
                let value = -dist(&a[i], q) - price[j];
                if value > best_value {
                    second_value = best_value;
                    best_value = value;
                    best = j;
                } else if value > second_value {
                    second_value = value;
                }
            }
            price[best] += best_value - second_value + eps;
            if let Some(prev) = owner[best].replace(i) {
                assigned[prev] = None;
                queue.push_back(prev);
            }
            assigned[i] = Some(best);
        }
        eps /= 4.0;
    }
    Ok(assigned.into_iter().map(|j| j.expect("auction terminates with a full assignment")).collect())
}

/// Total distance of an assignment.
pub fn assignment_cost(a: &[Point3], b: &[Point3], assignment: &[usize]) -> f64 {
    a.iter().zip(assignment).map(|(p, &j)| dist(p, &b[j])).sum()
}
