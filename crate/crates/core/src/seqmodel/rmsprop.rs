use ndarray::{Array2, Zip};

use super::model::{SeqGradients, SeqModel};
use crate::error::{Error, Result};

/// Running mean-square state for every trainable tensor of a [`SeqModel`].
///
/// Invariant: every accumulator is non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    embeddings: Array2<f64>,
    dense: Vec<Vec<f64>>,
}

pub const DEFAULT_DECAY: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// The scalar update rule; returns the new parameter value.
#[inline]
pub fn rmsprop_scalar(param: f64, acc: &mut f64, g: f64, lr: f64, decay: f64, eps: f64) -> f64 {
    *acc = decay * *acc + (1.0 - decay) * g * g;
    param - lr * g / (*acc + eps).sqrt()
}

impl RmsProp {
    pub fn new(model: &SeqModel, learning_rate: f64, decay: f64, epsilon: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&decay) || !(epsilon > 0.0) {
            return Err(Error::Config(
                "RMSprop decay must be in [0, 1) and epsilon positive".into(),
            ));
        }
        Ok(RmsProp {
            learning_rate,
            decay,
            epsilon,
            embeddings: Array2::zeros(model.embeddings.raw_dim()),
            dense: model.dense_slices().iter().map(|s| vec![0.0; s.len()]).collect(),
        })
    }

    /// Accumulators in model order: embeddings first, then dense tensors.
    pub fn accumulators(&self) -> impl Iterator<Item = f64> + '_ {
        self.embeddings
            .iter()
            .copied()
            .chain(self.dense.iter().flatten().copied())
    }

    /// One update. Embedding rows absent from `grad` have zero gradient:
    /// their accumulators decay and their values stay put.
    pub fn update(&mut self, model: &mut SeqModel, grad: &SeqGradients) -> Result<()> {
        let (lr, rho, eps) = (self.learning_rate, self.decay, self.epsilon);
        if self.embeddings.raw_dim() != model.embeddings.raw_dim() {
            return Err(Error::Shape("optimizer state does not match the model".into()));
        }
        let params = model.dense_slices_mut();
        let grads = grad.dense_slices();
        if params.len() != self.dense.len() || grads.len() != self.dense.len() {
            return Err(Error::Shape("optimizer state does not match the model".into()));
        }
        for ((p, g), acc) in params.into_iter().zip(grads).zip(&mut self.dense) {
            if p.len() != g.len() || p.len() != acc.len() {
                return Err(Error::Shape("gradient tensor has the wrong size".into()));
            }
            for ((p, &g), a) in p.iter_mut().zip(g).zip(acc.iter_mut()) {
                *p = rmsprop_scalar(*p, a, g, lr, rho, eps);
            }
        }

        self.embeddings.mapv_inplace(|a| rho * a);
        let dim = model.embeddings.ncols();
        for (&id, g) in &grad.embeddings {
            if id >= model.embeddings.nrows() || g.len() != dim {
                return Err(Error::Shape(format!("embedding gradient row {id} out of range")));
            }
            let mut row = model.embeddings.row_mut(id);
            let mut acc = self.embeddings.row_mut(id);
            Zip::from(&mut row).and(&mut acc).and(g).for_each(|p, a, &g| {
                *a += (1.0 - rho) * g * g;
                *p -= lr * g / (*a + eps).sqrt();
            });
        }
        Ok(())
    }
}
