//! Dataset assembly, augmentation, the optimization loop, evaluation and
//! checkpoints.

mod checkpoint;
mod config;
mod dataset;
mod eval;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::{lr_schedule, AugmentConfig, DataConfig, LrSchedule, TrainConfig, CONFIG_KEYS};
pub use dataset::{augment_pair, build_dataset, build_toy_dataset, AugmentedSample, Dataset, Sample, ShapeSource};
pub use eval::{evaluate, predict, validation_cd, EvalRow, EvalTable, Prediction, Stage};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdamState, GradientMap, Graph, ParamStore};
use crate::error::{Error, Result};
use crate::loss::reconstruction_loss;
use crate::model::{forward, init_params};

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub loss: f64,
    pub lambda: f64,
    pub lr: f64,
    /// Refined Chamfer distance x1000 on the selection split.
    pub val_cd: f64,
}

impl LogRow {
    pub const CSV_HEADER: &'static str = "epoch,loss,lambda,lr,val_cd";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e}",
            self.epoch, self.loss, self.lambda, self.lr, self.val_cd
        )
    }
}

pub fn log_to_csv(rows: &[LogRow]) -> String {
    let mut out = format!("{}\n", LogRow::CSV_HEADER);
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights of the epoch with the lowest validation CD.
    pub best: Checkpoint,
    pub best_epoch: usize,
    pub final_params: ParamStore,
    pub log: Vec<LogRow>,
}

/// Loss and gradient of one sample.
pub fn sample_gradient(
    params: &ParamStore,
    config: &TrainConfig,
    sample: &AugmentedSample,
    lambda: f64,
) -> Result<(f64, GradientMap)> {
    let mut g = Graph::new();
    let out = forward(&mut g, params, &config.model, &sample.primary, &sample.adjacent)?;
    let loss = reconstruction_loss(&mut g, out.coarse, out.refined, &sample.ground_truth, lambda, config.emd_reduction)?;
    let value = g.value(loss).item().expect("loss is scalar");
    Ok((value, g.backward(loss)?))
}

/// Adam on mini-batches of the two-stage EMD loss.
///
/// Each epoch shuffles the training split and takes
/// `floor(len / batch_size)` steps (at least one), so with the desk defaults
/// 64 training pairs give 8 steps per epoch. After every epoch the refined
/// Chamfer distance is measured on the validation split (the training split
/// when none is held out) and the best weights are kept. `on_epoch` sees
/// each log row as soon as it is ready.
pub fn train(config: &TrainConfig, dataset: &Dataset, mut on_epoch: impl FnMut(&LogRow)) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let selection = if dataset.val.is_empty() { &dataset.train } else { &dataset.val };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(&config.model, rng.random());
    let mut adam = AdamState::new(Default::default());
    let steps_per_epoch = (dataset.train.len() / config.batch_size).max(1);
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Checkpoint)> = None;
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let lambda = config.lambda_at(epoch);
        let lr = config.lr.at(epoch);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size).take(steps_per_epoch) {
            let mut grads = GradientMap::new();
            let mut batch_loss = 0.0;
            for &i in batch {
                let sample = augment_pair(&dataset.train[i].pair, &config.augment, rng.random())?;
                let (loss, g) = match sample_gradient(&params, config, &sample, lambda) {
                    Err(Error::Degenerate(_)) => return Err(Error::Diverged { step }),
                    other => other?,
                };
                batch_loss += loss;
                grads.accumulate(&g)?;
            }
            let scale = 1.0 / batch.len() as f64;
            batch_loss *= scale;
            grads.scale(scale);
            if !batch_loss.is_finite() || grads.iter().any(|(_, g)| !g.is_finite()) {
                return Err(Error::Diverged { step });
            }
            adam.update(&mut params, &grads, lr)?;
            if !params.all_finite() {
                return Err(Error::Diverged { step });
            }
            epoch_loss += batch_loss;
            step += 1;
        }
        let val_cd = match validation_cd(&params, &config.model, selection) {
            Err(Error::Degenerate(_)) => return Err(Error::Diverged { step }),
            other => other?,
        };
        let row = LogRow { epoch, loss: epoch_loss / steps_per_epoch as f64, lambda, lr, val_cd };
        on_epoch(&row);
        log.push(row);
        if best.as_ref().is_none_or(|(cd, _, _)| val_cd < *cd) {
            let checkpoint = Checkpoint {
                config: config.clone(),
                step: step as u64,
                rng_seed: rng.get_seed(),
                rng_word_pos: rng.get_word_pos(),
                params: params.clone(),
            };
            best = Some((val_cd, epoch, checkpoint));
        }
    }
    let (_, best_epoch, best) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { best, best_epoch, final_params: params, log })
}
