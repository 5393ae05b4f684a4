use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{class_counts, positive_weight, weighted_bce, weighted_bce_grad, Adam, PairSample, TrainConfig};
use crate::error::{Error, Result};
use crate::estimator::{RunningStats, Trainable};
use crate::scalar::Scalar;
use crate::signals::PreparedDataset;

/// Losses after one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss<T> {
    pub epoch: usize,
    pub train_loss: T,
    /// `None` when there is no validation data.
    pub val_loss: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    pub history: Vec<EpochLoss<T>>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_loss: Option<T>,
    pub stopped_early: bool,
    pub positive_weight: T,
}

/// Pairs resolved against the dataset they index into.
#[derive(Debug, Clone, Copy)]
pub struct PairSet<'a, T> {
    pub dataset: &'a PreparedDataset<T>,
    pub pairs: &'a [PairSample],
}

impl<'a, T> PairSet<'a, T> {
    pub fn new(dataset: &'a PreparedDataset<T>, pairs: &'a [PairSample]) -> Self {
        Self { dataset, pairs }
    }
}

/// Mean weighted loss of the model over a pair set.
pub fn evaluate_loss<T: Scalar, M: Trainable<T>>(model: &M, set: PairSet<'_, T>, w_pos: T) -> Result<T> {
    let len = model.window_len();
    let mut total = T::zero();
    for pair in set.pairs {
        let p = model.probability(&pair.window(set.dataset, len)?)?;
        total += weighted_bce(p, pair.target(), w_pos);
    }
    Ok(total / T::from_count(set.pairs.len().max(1)))
}

/// Fits `model` with Adam on the weighted loss and keeps the parameters and
/// statistics of the epoch with the lowest validation loss. Statistics are
/// frozen on return.
///
/// `completed_epochs` resumes numbering after a checkpoint; epochs run up to
/// `cfg.epochs` in total.
pub fn train<T: Scalar, M: Trainable<T>>(
    model: &mut M,
    train_set: PairSet<'_, T>,
    val_set: PairSet<'_, T>,
    cfg: &TrainConfig,
    completed_epochs: usize,
) -> Result<TrainReport<T>> {
    cfg.validate()?;
    if train_set.pairs.is_empty() {
        return Err(Error::degenerate("no training pairs"));
    }
    if model.window_len() != cfg.window {
        return Err(Error::Shape {
            expected: cfg.window,
            got: model.window_len(),
        });
    }
    let len = cfg.window;
    let (n_pos, n_neg) = class_counts(train_set.pairs);
    let w_pos: T = positive_weight(n_pos, n_neg);
    let mut adam = Adam::new(model.params().len(), T::lit(cfg.learning_rate));
    let mut grad = vec![T::zero(); model.params().len()];
    let mut order: Vec<usize> = (0..train_set.pairs.len()).collect();

    let mut history = Vec::new();
    let mut best: Option<(T, usize, Vec<T>, RunningStats<T>)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in completed_epochs + 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = T::zero();
        for batch in order.chunks(cfg.batch_size) {
            if !model.stats().is_frozen() {
                let windows = batch
                    .iter()
                    .map(|&i| train_set.pairs[i].window(train_set.dataset, len))
                    .collect::<Result<Vec<_>>>()?;
                model.stats_mut().update(windows)?;
            }
            grad.iter_mut().for_each(|g| *g = T::zero());
            let scale = T::one() / T::from_count(batch.len());
            for &i in batch {
                let pair = &train_set.pairs[i];
                let window = pair.window(train_set.dataset, len)?;
                let (p, cache) = model.forward(&window)?;
                let y = pair.target();
                epoch_loss += weighted_bce(p, y, w_pos);
                model.backward_into(&window, &cache, weighted_bce_grad(p, y, w_pos) * scale, &mut grad)?;
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::numeric("gradient"));
            }
            adam.step(model.params_mut(), &grad);
        }
        let train_loss = epoch_loss / T::from_count(order.len());
        if !train_loss.is_finite() {
            return Err(Error::numeric("loss"));
        }
        let val_loss = if val_set.pairs.is_empty() {
            None
        } else {
            let v = evaluate_loss(model, val_set, w_pos)?;
            if !v.is_finite() {
                return Err(Error::numeric("validation loss"));
            }
            Some(v)
        };
        tracing::debug!(epoch, train_loss = %train_loss, val_loss = ?val_loss.map(|v| v.to_string()), "epoch");
        history.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
        let criterion = val_loss.unwrap_or(train_loss);
        let improved = match &best {
            None => true,
            Some((b, ..)) => val_loss.is_none() || criterion < *b,
        };
        if improved {
            best = Some((criterion, epoch, model.params().to_vec(), model.stats().clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (best_epoch, best_val_loss) = match best {
        Some((loss, epoch, params, stats)) => {
            model.params_mut().copy_from_slice(&params);
            *model.stats_mut() = stats;
            (epoch, (!val_set.pairs.is_empty()).then_some(loss))
        }
        None => (completed_epochs, None),
    };
    model.stats_mut().freeze();
    Ok(TrainReport {
        history,
        best_epoch,
        best_val_loss,
        stopped_early,
        positive_weight: w_pos,
    })
}
