use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{SeqGradients, SeqModel};
use super::rmsprop::{RmsProp, DEFAULT_DECAY, DEFAULT_EPSILON};
use crate::corpus::{Essay, ScoreRanges};
use crate::error::{Error, Result};

/// Scorer optimisation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    /// Return the best-validation snapshot instead of the last model.
    pub keep_best: bool,
    /// Rescale each batch gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for ScorerHyper {
    fn default() -> Self {
        ScorerHyper {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            rms_decay: DEFAULT_DECAY,
            rms_epsilon: DEFAULT_EPSILON,
            patience: Some(25),
            keep_best: true,
            clip_norm: None,
            seed: 0,
        }
    }
}

impl ScorerHyper {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean squared error over the epoch's training updates (scaled space).
    /// Epoch 0 reports the initial model without dropout.
    pub train_mse: f64,
    /// Raw-scale RMSE on the validation set; `None` without one.
    pub val_rmse: Option<f64>,
}

pub const HISTORY_HEADER: &str = "epoch,train_mse,val_rmse";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        let val = self.val_rmse.map(|v| format!("{v:?}")).unwrap_or_default();
        format!("{},{:?},{}", self.epoch, self.train_mse, val)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SeqModel,
    pub history: Vec<EpochRecord>,
    /// Epoch of the returned snapshot (0 = initial model).
    pub best_epoch: usize,
}

/// Clamped raw-scale predictions, one per essay.
pub fn predict(model: &SeqModel, essays: &[Essay], ranges: &ScoreRanges) -> Result<Vec<f64>> {
    essays
        .par_iter()
        .map(|e| predict_one(model, e, ranges))
        .collect()
}

pub fn predict_one(model: &SeqModel, essay: &Essay, ranges: &ScoreRanges) -> Result<f64> {
    let (lo, hi) = ranges.scaled_bounds(essay.set_id)?;
    let y = model.predict_raw(&essay.tokens)?;
    if !y.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite prediction for essay {}",
            essay.essay_id
        )));
    }
    ranges.unscale(essay.set_id, y.clamp(lo, hi))
}

fn raw_rmse(model: &SeqModel, essays: &[Essay], ranges: &ScoreRanges) -> Result<f64> {
    let pred = predict(model, essays, ranges)?;
    let sse: f64 = pred
        .iter()
        .zip(essays)
        .map(|(p, e)| (p - e.raw_score).powi(2))
        .sum();
    Ok((sse / essays.len() as f64).sqrt())
}

fn scaled_mse(model: &SeqModel, essays: &[Essay]) -> Result<f64> {
    let errs = essays
        .par_iter()
        .map(|e| Ok((model.predict_raw(&e.tokens)? - e.scaled_score).powi(2)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / essays.len() as f64)
}

/// Mean gradient and mean squared error over one batch. Per-essay work runs
/// in parallel; the reduction follows batch order.
fn batch_gradient(
    model: &SeqModel,
    batch: &[&Essay],
    seeds: &[u64],
) -> Result<(SeqGradients, f64)> {
    let parts = batch
        .par_iter()
        .zip(seeds)
        .map(|(essay, &seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cache = model.forward(&essay.tokens, Some(&mut rng))?;
            let err = (cache.prediction - essay.scaled_score).powi(2);
            Ok((model.bptt(&cache, essay.scaled_score), err))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = model.zero_gradients();
    let mut sse = 0.0;
    for (g, e) in &parts {
        total.add_assign(g);
        sse += e;
    }
    total.scale(1.0 / batch.len() as f64);
    Ok((total, sse))
}

/// Trains `model` with mini-batch RMSprop on squared error in scaled space.
pub fn train_scorer(
    model: SeqModel,
    train: &[Essay],
    validation: &[Essay],
    ranges: &ScoreRanges,
    hyper: &ScorerHyper,
) -> Result<TrainOutcome> {
    train_scorer_with(model, train, validation, ranges, hyper, |_| {})
}

/// As [`train_scorer`], calling `on_epoch` after every history record.
pub fn train_scorer_with(
    mut model: SeqModel,
    train: &[Essay],
    validation: &[Essay],
    ranges: &ScoreRanges,
    hyper: &ScorerHyper,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    hyper.validate()?;
    model.validate()?;
    if train.is_empty() {
        return Err(Error::Data("the training set is empty".into()));
    }
    let mut opt = RmsProp::new(&model, hyper.learning_rate, hyper.rms_decay, hyper.rms_epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(1);

    let val_rmse = |m: &SeqModel| -> Result<Option<f64>> {
        if validation.is_empty() {
            Ok(None)
        } else {
            raw_rmse(m, validation, ranges).map(Some)
        }
    };
    let first = EpochRecord {
        epoch: 0,
        train_mse: scaled_mse(&model, train)?,
        val_rmse: val_rmse(&model)?,
    };
    on_epoch(&first);
    let mut history = vec![first];
    let mut best = (model.clone(), 0, first.val_rmse);
    let mut since_best = 0;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for chunk in order.chunks(hyper.batch_size) {
            let batch: Vec<&Essay> = chunk.iter().map(|&i| &train[i]).collect();
            let seeds: Vec<u64> = batch.iter().map(|_| rng.next_u64()).collect();
            let (mut grad, batch_sse) = batch_gradient(&model, &batch, &seeds)?;
            if !batch_sse.is_finite() {
                return Err(Error::Numerical(format!("non-finite training loss in epoch {epoch}")));
            }
            sse += batch_sse;
            if let Some(limit) = hyper.clip_norm {
                let norm = grad.norm();
                if norm > limit {
                    grad.scale(limit / norm);
                }
            }
            opt.update(&mut model, &grad)?;
        }
        let record = EpochRecord {
            epoch,
            train_mse: sse / train.len() as f64,
            val_rmse: val_rmse(&model)?,
        };
        on_epoch(&record);
        history.push(record);

        match (record.val_rmse, best.2) {
            (Some(v), Some(b)) if v < b => {
                best = (model.clone(), epoch, Some(v));
                since_best = 0;
            }
            (Some(_), Some(_)) => since_best += 1,
            _ => {}
        }
        if matches!(hyper.patience, Some(p) if since_best >= p) {
            break;
        }
    }

    let last_epoch = history.last().map_or(0, |r| r.epoch);
    let (model, best_epoch) = if hyper.keep_best && best.2.is_some() {
        (best.0, best.1)
    } else {
        (model, last_epoch)
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}
