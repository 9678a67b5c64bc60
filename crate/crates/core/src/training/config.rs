use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::AnalyticShape;
use crate::loss::{EmdReduction, LambdaSchedule};
use crate::model::UpsamplerConfig;

/// Step decay `base * factor^floor(epoch / every)`, never below `floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub factor: f64,
    pub every: usize,
    pub floor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { base: 1e-3, factor: 0.1, every: 20, floor: 1e-6 }
    }
}

impl LrSchedule {
    /// Values within rounding of the floor snap to it, so the default
    /// schedule sits exactly at 1e-6 from epoch 60 on.
    pub fn at(&self, epoch: usize) -> f64 {
        let drops = (epoch / self.every.max(1)).min(i32::MAX as usize) as i32;
        let lr = self.base * self.factor.powi(drops);
        if lr <= self.floor * (1.0 + 1e-9) {
            self.floor
        } else {
            lr
        }
    }
}

pub fn lr_schedule(epoch: usize) -> f64 {
    LrSchedule::default().at(epoch)
}

/// Random similarity transform plus input jitter applied to training samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub rotate: bool,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Standard deviation of the jitter added to input points only.
    pub jitter: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { enabled: true, rotate: true, scale_min: 0.8, scale_max: 1.2, jitter: 0.005 }
    }
}

impl AugmentConfig {
    /// Leaves samples untouched.
    pub fn identity() -> Self {
        Self { enabled: true, rotate: false, scale_min: 1.0, scale_max: 1.0, jitter: 0.0 }
    }
}

/// Shapes and sizes for the synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub shapes: Vec<AnalyticShape>,
    pub pairs_per_shape: usize,
    /// Points in each sparse input cloud.
    pub sparse_points: usize,
    pub val_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            shapes: vec![AnalyticShape::Sphere { radius: 1.0 }, AnalyticShape::Torus { major: 0.7, minor: 0.3 }],
            pairs_per_shape: 36,
            sparse_points: 512,
            val_fraction: 0.1,
        }
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: UpsamplerConfig,
    pub data: DataConfig,
    /// Full shuffled passes over the training split.
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub lambda: LambdaSchedule,
    pub emd_reduction: EmdReduction,
    pub augment: AugmentConfig,
    /// Noise levels reported by evaluation, as fractions of the unit radius.
    pub eval_noise: Vec<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk scale: two shapes, 64 training pairs in batches of 8 for 25
    /// epochs, i.e. 200 optimizer steps.
    fn default() -> Self {
        Self {
            model: UpsamplerConfig::default(),
            data: DataConfig::default(),
            epochs: 25,
            batch_size: 8,
            lr: LrSchedule::default(),
            lambda: LambdaSchedule::default(),
            emd_reduction: EmdReduction::Mean,
            augment: AugmentConfig::default(),
            eval_noise: vec![0.0, 0.005, 0.01],
            seed: 0,
        }
    }
}

/// Documentation of every config key: `(key, description)`. Defaults come
/// from [`TrainConfig::default`] via [`TrainConfig::to_kv`].
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("n", "points per input patch"),
    ("r", "upsampling rate"),
    ("k", "neighbors in every KNN grouping"),
    ("c", "feature width after extraction"),
    ("c_up", "feature width per expanded point"),
    ("extractor_depth", "dense edge-convolution blocks"),
    ("head_hidden", "hidden width of the coordinate and offset heads"),
    ("coarse_skip", "predict coarse points as displacements of the input points"),
    ("no_pacm_pairs", "use each patch as its own adjacent patch"),
    ("no_pocm", "skip offset refinement"),
    ("raw_coordinate_codes", "replace position codes by neighbor coordinates"),
    ("shapes", "space-separated shapes: sphere[:R] torus[:R,r] disk[:R]"),
    ("pairs_per_shape", "training pairs drawn per shape"),
    ("sparse_points", "points per sparse input cloud"),
    ("val_fraction", "share of each shape's pairs held out"),
    ("epochs", "passes over the training split"),
    ("batch_size", "pairs per optimizer step"),
    ("lr", "initial learning rate"),
    ("lr_decay", "learning-rate multiplier per decay period"),
    ("lr_decay_every", "epochs per decay period"),
    ("lr_floor", "lowest learning rate"),
    ("lambda_start", "refined-loss weight in the first epoch"),
    ("lambda_end", "refined-loss weight in the last epoch"),
    ("emd_reduction", "mean or sum over points"),
    ("augment", "enable augmentation"),
    ("augment_rotate", "random rotations"),
    ("augment_scale_min", "smallest random scale"),
    ("augment_scale_max", "largest random scale"),
    ("augment_jitter", "input jitter standard deviation"),
    ("eval_noise", "space-separated evaluation noise levels"),
    ("seed", "random seed"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("key `{key}`: cannot parse `{value}`: {e}")))
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

impl TrainConfig {
    /// Full-scale preset: 256-point patches, batches of 32 for 400 epochs.
    pub fn full_scale() -> Self {
        let mut c = Self::default();
        c.model.n = 256;
        c.data.sparse_points = 2048;
        c.data.pairs_per_shape = 100;
        c.epochs = 400;
        c.batch_size = 32;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.model.k > self.model.output_points() {
            return Err(Error::Config("k exceeds the upsampled point count".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if self.data.shapes.is_empty() || self.data.pairs_per_shape == 0 {
            return Err(Error::Config("the dataset needs at least one shape and one pair".into()));
        }
        if self.data.sparse_points < self.model.n {
            return Err(Error::Config("sparse_points must be at least n".into()));
        }
        if !(0.0..1.0).contains(&self.data.val_fraction) {
            return Err(Error::Config("val_fraction must lie in [0, 1)".into()));
        }
        let lr = &self.lr;
        if !(lr.base > 0.0 && lr.floor > 0.0 && lr.floor <= lr.base && lr.factor > 0.0 && lr.every > 0) {
            return Err(Error::Config("learning-rate schedule needs 0 < lr_floor <= lr, lr_decay > 0".into()));
        }
        let aug = &self.augment;
        if !(aug.scale_min > 0.0 && aug.scale_min <= aug.scale_max && aug.jitter >= 0.0) {
            return Err(Error::Config("augmentation needs 0 < scale_min <= scale_max and jitter >= 0".into()));
        }
        if self.eval_noise.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::Config("eval_noise levels must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Assigns one key; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "n" => self.model.n = parse(key, value)?,
            "r" => self.model.r = parse(key, value)?,
            "k" => self.model.k = parse(key, value)?,
            "c" => self.model.c = parse(key, value)?,
            "c_up" => self.model.c_up = parse(key, value)?,
            "extractor_depth" => self.model.extractor_depth = parse(key, value)?,
            "head_hidden" => self.model.head_hidden = parse(key, value)?,
            "coarse_skip" => self.model.coarse_skip = parse(key, value)?,
            "no_pacm_pairs" => self.model.ablation.no_pacm_pairs = parse(key, value)?,
            "no_pocm" => self.model.ablation.no_pocm = parse(key, value)?,
            "raw_coordinate_codes" => self.model.ablation.raw_coordinate_codes = parse(key, value)?,
            "shapes" => {
                self.data.shapes = value
                    .split_whitespace()
                    .map(|s| s.parse::<AnalyticShape>().map_err(|e| Error::Config(format!("key `shapes`: {e}"))))
                    .collect::<Result<_>>()?
            }
            "pairs_per_shape" => self.data.pairs_per_shape = parse(key, value)?,
            "sparse_points" => self.data.sparse_points = parse(key, value)?,
            "val_fraction" => self.data.val_fraction = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr.base = parse(key, value)?,
            "lr_decay" => self.lr.factor = parse(key, value)?,
            "lr_decay_every" => self.lr.every = parse(key, value)?,
            "lr_floor" => self.lr.floor = parse(key, value)?,
            "lambda_start" => self.lambda.start = parse(key, value)?,
            "lambda_end" => self.lambda.end = parse(key, value)?,
            "emd_reduction" => {
                self.emd_reduction = match value {
                    "mean" => EmdReduction::Mean,
                    "sum" => EmdReduction::Sum,
                    other => return Err(Error::Config(format!("key `emd_reduction`: expected mean or sum, got `{other}`"))),
                }
            }
            "augment" => self.augment.enabled = parse(key, value)?,
            "augment_rotate" => self.augment.rotate = parse(key, value)?,
            "augment_scale_min" => self.augment.scale_min = parse(key, value)?,
            "augment_scale_max" => self.augment.scale_max = parse(key, value)?,
            "augment_jitter" => self.augment.jitter = parse(key, value)?,
            "eval_noise" => {
                self.eval_noise = value.split_whitespace().map(|v| parse(key, v)).collect::<Result<_>>()?
            }
            "seed" => self.seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            config.set(key.trim(), value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Every key with its current value, in [`CONFIG_KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let m = &self.model;
        let values = [
            m.n.to_string(),
            m.r.to_string(),
            m.k.to_string(),
            m.c.to_string(),
            m.c_up.to_string(),
            m.extractor_depth.to_string(),
            m.head_hidden.to_string(),
            m.coarse_skip.to_string(),
            m.ablation.no_pacm_pairs.to_string(),
            m.ablation.no_pocm.to_string(),
            m.ablation.raw_coordinate_codes.to_string(),
            join(&self.data.shapes),
            self.data.pairs_per_shape.to_string(),
            self.data.sparse_points.to_string(),
            self.data.val_fraction.to_string(),
            self.epochs.to_string(),
            self.batch_size.to_string(),
            self.lr.base.to_string(),
            self.lr.factor.to_string(),
            self.lr.every.to_string(),
            self.lr.floor.to_string(),
            self.lambda.start.to_string(),
            self.lambda.end.to_string(),
            match self.emd_reduction {
                EmdReduction::Mean => "mean".to_string(),
                EmdReduction::Sum => "sum".to_string(),
            },
            self.augment.enabled.to_string(),
            self.augment.rotate.to_string(),
            self.augment.scale_min.to_string(),
            self.augment.scale_max.to_string(),
            self.augment.jitter.to_string(),
            join(&self.eval_noise),
            self.seed.to_string(),
        ];
        CONFIG_KEYS.iter().map(|(k, _)| *k).zip(values).collect()
    }

    /// `key = value` text that [`Self::from_kv`] reads back unchanged.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// λ for `epoch`, reaching the end value in the final epoch.
    pub fn lambda_at(&self, epoch: usize) -> f64 {
        self.lambda.at(epoch, self.epochs.saturating_sub(1))
    }
}
