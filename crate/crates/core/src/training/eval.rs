use std::fmt;

use super::dataset::{per_source_offsets, Sample};
use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::geometry::{normalize_pair, Point3};
use crate::loss::{chamfer, MetricReport};
use crate::model::{upsample_points, UpsamplerConfig};

/// Which output a metric row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    /// Every input point repeated `r` times: the no-learning baseline.
    Replicate,
    Coarse,
    Refined,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Replicate, Stage::Coarse, Stage::Refined];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Replicate => "replicate",
            Stage::Coarse => "coarse",
            Stage::Refined => "refined",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mean metrics over the evaluated samples, multiplied by 1000.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub noise: f64,
    pub stage: Stage,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
}

impl EvalTable {
    pub fn get(&self, noise: f64, stage: Stage) -> Option<&MetricReport> {
        self.rows
            .iter()
            .find(|r| r.noise == noise && r.stage == stage)
            .map(|r| &r.report)
    }

    /// CSV with header `noise,stage,cd,hd,emd,p2f_mean,p2f_std`; absent
    /// values are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("noise,stage,cd,hd,emd,p2f_mean,p2f_std\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for row in &self.rows {
            let r = &row.report;
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{},{},{}\n",
                row.noise,
                row.stage,
                r.cd,
                r.hd,
                opt(r.emd),
                opt(r.p2f_mean),
                opt(r.p2f_std)
            ));
        }
        out
    }
}

/// Object-frame clouds for one sample at one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub input: Vec<Point3>,
    pub coarse: Vec<Point3>,
    pub refined: Vec<Point3>,
    pub ground_truth: Vec<Point3>,
}

impl Prediction {
    pub fn replicated_input(&self, r: usize) -> Vec<Point3> {
        self.input.iter().flat_map(|p| std::iter::repeat_n(*p, r)).collect()
    }

    fn stage(&self, stage: Stage, r: usize) -> Vec<Point3> {
        match stage {
            Stage::Replicate => self.replicated_input(r),
            Stage::Coarse => self.coarse.clone(),
            Stage::Refined => self.refined.clone(),
        }
    }
}

/// Upsamples one sample in its original frame. Noise with standard
/// deviation `noise` is added per raw point (shared points move together),
/// and the pair is renormalized from the noisy primary patch.
pub fn predict(
    sample: &Sample,
    params: &ParamStore,
    config: &UpsamplerConfig,
    noise: f64,
    seed: u64,
) -> Result<Prediction> {
    let tp = &sample.pair;
    let t = &tp.pair.transform;
    let mut primary = t.denormalize_all(&tp.pair.primary);
    let mut adjacent = t.denormalize_all(&tp.pair.adjacent);
    if noise > 0.0 {
        let offsets = per_source_offsets(&[&tp.primary_sources, &tp.adjacent_sources], noise, seed)?;
        let shift = |points: &mut [Point3], sources: &[usize]| {
            for (p, s) in points.iter_mut().zip(sources) {
                let d = offsets[s];
                *p = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
            }
        };
        shift(&mut primary, &tp.primary_sources);
        shift(&mut adjacent, &tp.adjacent_sources);
    }
    let normalized = normalize_pair(&primary, &adjacent)?;
    let out = upsample_points(&normalized.primary, &normalized.adjacent, params, config)?;
    Ok(Prediction {
        input: primary,
        coarse: normalized.transform.denormalize_all(&out.coarse),
        refined: normalized.transform.denormalize_all(&out.refined),
        ground_truth: t.denormalize_all(&tp.ground_truth),
    })
}

fn sample_seed(seed: u64, level_index: usize, sample_index: usize) -> u64 {
    seed ^ ((level_index as u64) << 48) ^ (sample_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Metrics for every `(noise level, stage)` combination, averaged over
/// `samples`, in the order noise-major then [`Stage::ALL`].
pub fn evaluate(
    params: &ParamStore,
    config: &UpsamplerConfig,
    samples: &[Sample],
    noise_levels: &[f64],
    seed: u64,
) -> Result<EvalTable> {
    if samples.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let mut table = EvalTable::default();
    for (li, &noise) in noise_levels.iter().enumerate() {
        let mut reports: Vec<Vec<MetricReport>> = vec![Vec::new(); Stage::ALL.len()];
        for (si, sample) in samples.iter().enumerate() {
            let pred = predict(sample, params, config, noise, sample_seed(seed, li, si))?;
            for (slot, stage) in Stage::ALL.iter().enumerate() {
                let points = pred.stage(*stage, config.r);
                reports[slot].push(MetricReport::compute(&points, &pred.ground_truth, Some(&sample.shape))?);
            }
        }
        for (stage, reports) in Stage::ALL.into_iter().zip(reports) {
            let report = MetricReport::average(&reports).expect("samples are non-empty").scaled();
            table.rows.push(EvalRow { noise, stage, report });
        }
    }
    Ok(table)
}

/// Noise-free refined Chamfer distance (x1000, object frame): the model
/// selection criterion. Matches the `(0, Refined)` row of [`evaluate`].
pub fn validation_cd(params: &ParamStore, config: &UpsamplerConfig, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("nothing to validate on"));
    }
    let mut total = 0.0;
    for sample in samples {
        let pred = predict(sample, params, config, 0.0, 0)?;
        total += chamfer(&pred.refined, &pred.ground_truth)?;
    }
    Ok(total / samples.len() as f64 * MetricReport::REPORT_SCALE)
}
