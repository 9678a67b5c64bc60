//! Earth Mover's Distance, the two-stage reconstruction loss and the
//! evaluation metrics.

mod assignment;
mod metrics;

pub use assignment::{assignment_cost, auction_assignment, optimal_assignment};
pub use metrics::{chamfer, hausdorff, nearest_distances, p2f_analytic, MetricReport, EXACT_EMD_LIMIT};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Mean optimal-assignment distance between equal-size sets.
pub fn emd_exact(a: &[Point3], b: &[Point3]) -> Result<f64> {
    let assignment = optimal_assignment(a, b)?;
    Ok(assignment_cost(a, b, &assignment) / a.len().max(1) as f64)
}

/// Auction-based upper bound on [`emd_exact`]; see [`auction_assignment`].
pub fn emd_approx(a: &[Point3], b: &[Point3], phases: usize) -> Result<f64> {
    let assignment = auction_assignment(a, b, phases)?;
    Ok(assignment_cost(a, b, &assignment) / a.len().max(1) as f64)
}

/// Whether an EMD term is averaged over points or summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmdReduction {
    #[default]
    Mean,
    Sum,
}

/// Linear ramp of the refined-stage weight across training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSchedule {
    pub start: f64,
    pub end: f64,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self { start: 0.01, end: 1.0 }
    }
}

impl LambdaSchedule {
    /// Weight at `epoch` of `total`; epochs past the end hold the end value.
    pub fn at(&self, epoch: usize, total: usize) -> f64 {
        if total == 0 || epoch >= total {
            return self.end;
        }
        self.start + (self.end - self.start) * epoch as f64 / total as f64
    }
}

pub fn lambda_schedule(epoch: usize, total: usize) -> f64 {
    LambdaSchedule::default().at(epoch, total)
}

/// Differentiable EMD between a predicted cloud (`m x 3` variable) and a
/// fixed target. The matching is solved on the current values and held
/// constant; gradients flow through the matched distances.
pub fn emd_term(g: &mut Graph, pred: Var, target: &[Point3], reduction: EmdReduction) -> Result<Var> {
    let points = g.value(pred).to_points()?;
    if points.len() != target.len() {
        return Err(Error::ShapeMismatch {
            op: "emd",
            lhs: vec![points.len(), 3],
            rhs: vec![target.len(), 3],
        });
    }
    let assignment = optimal_assignment(&points, target)?;
    let matched: Vec<Point3> = assignment.iter().map(|&j| target[j]).collect();
    let matched = g.constant(Tensor::from_points(&matched));
    let diff = g.sub(pred, matched)?;
    let lengths = g.norm_last(diff)?;
    let total = g.sum_all(lengths)?;
    match reduction {
        EmdReduction::Mean => g.scale(total, 1.0 / points.len().max(1) as f64),
        EmdReduction::Sum => Ok(total),
    }
}

/// `EMD(coarse, gt) + lambda * EMD(refined, gt)`.
pub fn reconstruction_loss(
    g: &mut Graph,
    coarse: Var,
    refined: Var,
    gt: &[Point3],
    lambda: f64,
    reduction: EmdReduction,
) -> Result<Var> {
    let first = emd_term(g, coarse, gt, reduction)?;
    let second = emd_term(g, refined, gt, reduction)?;
    let weighted = g.scale(second, lambda)?;
    g.add(first, weighted)
}

#[cfg(test)]
mod tests;
