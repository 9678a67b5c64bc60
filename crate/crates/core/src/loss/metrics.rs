use std::fmt;

use super::{emd_approx, emd_exact};
use crate::error::{Error, Result};
use crate::geometry::{dist2, AnalyticShape, Point3};

fn check_nonempty(a: &[Point3], b: &[Point3]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("distance between point sets requires non-empty sets"));
    }
    Ok(())
}

/// Distance from each point of `from` to its nearest point of `to`.
pub fn nearest_distances(from: &[Point3], to: &[Point3]) -> Vec<f64> {
    from.iter()
        .map(|p| to.iter().map(|q| dist2(p, q)).fold(f64::INFINITY, f64::min).sqrt())
        .collect()
}

/// Symmetric Chamfer distance: mean nearest-neighbor distance (not squared)
/// in each direction, summed.
pub fn chamfer(a: &[Point3], b: &[Point3]) -> Result<f64> {
    check_nonempty(a, b)?;
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    Ok(mean(nearest_distances(a, b)) + mean(nearest_distances(b, a)))
}

/// Larger of the two directed Hausdorff distances.
pub fn hausdorff(a: &[Point3], b: &[Point3]) -> Result<f64> {
    check_nonempty(a, b)?;
    let directed = |x, y| nearest_distances(x, y).into_iter().fold(0.0, f64::max);
    Ok(f64::max(directed(a, b), directed(b, a)))
}

/// Mean and population standard deviation of point-to-surface distances.
pub fn p2f_analytic(points: &[Point3], shape: &AnalyticShape) -> (f64, f64) {
    if points.is_empty() {
        return (0.0, 0.0);
    }
    let d: Vec<f64> = points.iter().map(|p| shape.distance(p)).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Largest cloud size for which [`MetricReport::compute`] uses the exact
/// assignment solver; larger clouds fall back to the auction.
pub const EXACT_EMD_LIMIT: usize = 1024;

/// Evaluation metrics for one prediction, in raw units. Use
/// [`MetricReport::scaled`] for the x1000 reporting convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub cd: f64,
    pub hd: f64,
    pub p2f_mean: Option<f64>,
    pub p2f_std: Option<f64>,
    /// Absent when the clouds differ in size.
    pub emd: Option<f64>,
}

impl MetricReport {
    pub const REPORT_SCALE: f64 = 1e3;

    pub fn compute(pred: &[Point3], gt: &[Point3], shape: Option<&AnalyticShape>) -> Result<Self> {
        let emd = if pred.len() == gt.len() {
            Some(if pred.len() <= EXACT_EMD_LIMIT {
                emd_exact(pred, gt)?
            } else {
                emd_approx(pred, gt, 8)?
            })
        } else {
            None
        };
        let (p2f_mean, p2f_std) = match shape {
            Some(s) => {
                let (m, sd) = p2f_analytic(pred, s);
                (Some(m), Some(sd))
            }
            None => (None, None),
        };
        Ok(Self {
            cd: chamfer(pred, gt)?,
            hd: hausdorff(pred, gt)?,
            p2f_mean,
            p2f_std,
            emd,
        })
    }

    /// Every value multiplied by [`Self::REPORT_SCALE`].
    pub fn scaled(&self) -> Self {
        let s = Self::REPORT_SCALE;
        Self {
            cd: self.cd * s,
            hd: self.hd * s,
            p2f_mean: self.p2f_mean.map(|v| v * s),
            p2f_std: self.p2f_std.map(|v| v * s),
            emd: self.emd.map(|v| v * s),
        }
    }

    /// `(name, value)` rows for the values present, in reporting order.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        let mut rows = vec![("cd", self.cd), ("hd", self.hd)];
        if let Some(v) = self.emd {
            rows.push(("emd", v));
        }
        if let Some(v) = self.p2f_mean {
            rows.push(("p2f_mean", v));
        }
        if let Some(v) = self.p2f_std {
            rows.push(("p2f_std", v));
        }
        rows
    }

    /// Mean of several reports; optional fields are kept only when present
    /// in all of them.
    pub fn average(reports: &[MetricReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let avg_opt = |f: fn(&MetricReport) -> Option<f64>| {
            reports
                .iter()
                .map(f)
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / n)
        };
        Some(Self {
            cd: avg(|r| r.cd),
            hd: avg(|r| r.hd),
            p2f_mean: avg_opt(|r| r.p2f_mean),
            p2f_std: avg_opt(|r| r.p2f_std),
            emd: avg_opt(|r| r.emd),
        })
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = self.rows();
        for (i, (name, value)) in rows.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{name}={value:.4}")?;
        }
        Ok(())
    }
}
