use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::corpus::WindowSample;
use crate::error::{Error, Result};
use crate::linalg::{add_outer, uniform_matrix};

pub const INIT_SCALE: f64 = 0.05;

/// Hard tanh: `x` clipped to `[-1, 1]`.
pub fn htanh(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// Subgradient of [`htanh`]; zero at the kinks `|x| = 1`.
pub fn htanh_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Ranking hinge averaged over the corruptions.
pub fn loss_context(f_target: f64, f_corrupts: &[f64]) -> Result<f64> {
    if f_corrupts.is_empty() {
        return Err(Error::Shape("context loss needs at least one corruption".into()));
    }
    let total: f64 = f_corrupts
        .iter()
        .map(|&fc| (1.0 - f_target + fc).max(0.0))
        .sum();
    Ok(total / f_corrupts.len() as f64)
}

/// Mean squared error.
pub fn loss_score(predictions: &[f64], golds: &[f64]) -> Result<f64> {
    if predictions.len() != golds.len() || predictions.is_empty() {
        return Err(Error::Shape(format!(
            "score loss over {} predictions and {} golds",
            predictions.len(),
            golds.len()
        )));
    }
    let sum: f64 = predictions
        .iter()
        .zip(golds)
        .map(|(p, g)| (p - g) * (p - g))
        .sum();
    Ok(sum / predictions.len() as f64)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must be in [0, 1], got {alpha}")));
    }
    Ok(())
}

pub fn loss_overall(alpha: f64, context: f64, score: f64) -> Result<f64> {
    check_alpha(alpha)?;
    // evaluate the endpoints exactly so alpha=1/0 reproduce the component
    Ok(if alpha == 1.0 {
        context
    } else if alpha == 0.0 {
        score
    } else {
        alpha * context + (1.0 - alpha) * score
    })
}

/// Parameters of the window network. `embeddings` holds one row per
/// vocabulary id, i.e. the transpose of the `D × |V|` embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SsweParams {
    pub embeddings: Array2<f64>,
    /// `H × nD`
    pub w_hidden: Array2<f64>,
    pub b_hidden: Array1<f64>,
    pub w_context: Array1<f64>,
    pub b_context: f64,
    pub w_score: Array1<f64>,
    pub b_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadOutputs {
    pub context: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub overall: f64,
    pub context: f64,
    pub score: f64,
}

/// Gradient of the overall loss. Embedding rows are stored sparsely: only
/// ids that occur in the window or among the corruptions have an entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SsweGradients {
    pub embeddings: BTreeMap<usize, Array1<f64>>,
    pub w_hidden: Array2<f64>,
    pub b_hidden: Array1<f64>,
    pub w_context: Array1<f64>,
    pub b_context: f64,
    pub w_score: Array1<f64>,
    pub b_score: f64,
}

impl SsweGradients {
    pub fn embedding_row(&self, id: usize, dim: usize) -> Array1<f64> {
        self.embeddings
            .get(&id)
            .cloned()
            .unwrap_or_else(|| Array1::zeros(dim))
    }
}

impl SsweParams {
    /// Uniform `[-0.05, 0.05]` weights and embeddings, zero biases.
    pub fn init<R: Rng>(
        vocab_len: usize,
        dim: usize,
        hidden: usize,
        window: usize,
        rng: &mut R,
    ) -> Self {
        SsweParams {
            embeddings: uniform_matrix(rng, vocab_len, dim, INIT_SCALE),
            w_hidden: uniform_matrix(rng, hidden, window * dim, INIT_SCALE),
            b_hidden: Array1::zeros(hidden),
            w_context: uniform_matrix(rng, 1, hidden, INIT_SCALE).row(0).to_owned(),
            b_context: 0.0,
            w_score: uniform_matrix(rng, 1, hidden, INIT_SCALE).row(0).to_owned(),
            b_score: 0.0,
        }
    }

    pub fn zeros(vocab_len: usize, dim: usize, hidden: usize, window: usize) -> Self {
        SsweParams {
            embeddings: Array2::zeros((vocab_len, dim)),
            w_hidden: Array2::zeros((hidden, window * dim)),
            b_hidden: Array1::zeros(hidden),
            w_context: Array1::zeros(hidden),
            b_context: 0.0,
            w_score: Array1::zeros(hidden),
            b_score: 0.0,
        }
    }

    pub fn vocab_len(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.nrows()
    }

    pub fn window(&self) -> usize {
        self.w_hidden.ncols() / self.dim().max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        if self.dim() == 0 || self.w_hidden.ncols() % self.dim() != 0 {
            return Err(Error::Shape(format!(
                "hidden layer input width {} is not a multiple of embedding width {}",
                self.w_hidden.ncols(),
                self.dim()
            )));
        }
        if self.b_hidden.len() != h || self.w_context.len() != h || self.w_score.len() != h {
            return Err(Error::Shape("head widths do not match the hidden layer".into()));
        }
        let finite = self.embeddings.iter().all(|v| v.is_finite())
            && self.w_hidden.iter().all(|v| v.is_finite())
            && self.b_hidden.iter().all(|v| v.is_finite())
            && self.w_context.iter().all(|v| v.is_finite())
            && self.w_score.iter().all(|v| v.is_finite())
            && self.b_context.is_finite()
            && self.b_score.is_finite();
        if !finite {
            return Err(Error::Numerical("non-finite SSWE parameter".into()));
        }
        Ok(())
    }

    fn row(&self, id: usize) -> Result<ArrayView1<'_, f64>> {
        if id >= self.vocab_len() {
            return Err(Error::Lookup(format!(
                "token id {id} outside vocabulary of {}",
                self.vocab_len()
            )));
        }
        Ok(self.embeddings.row(id))
    }

    fn block(&self, j: usize) -> ArrayView2<'_, f64> {
        let d = self.dim();
        self.w_hidden.slice(s![.., j * d..(j + 1) * d])
    }

    /// In-order concatenation of the context's embedding vectors.
    pub fn embed_window(&self, context: &[usize]) -> Result<Array1<f64>> {
        let d = self.dim();
        let mut s = Array1::zeros(context.len() * d);
        for (j, &id) in context.iter().enumerate() {
            s.slice_mut(s![j * d..(j + 1) * d]).assign(&self.row(id)?);
        }
        Ok(s)
    }

    /// Both heads on the shared hard-tanh activation. Neither output is clamped.
    pub fn forward(&self, s: ArrayView1<f64>) -> Result<HeadOutputs> {
        if s.len() != self.w_hidden.ncols() {
            return Err(Error::Shape(format!(
                "window vector has length {}, network expects {}",
                s.len(),
                self.w_hidden.ncols()
            )));
        }
        let hidden = (self.w_hidden.dot(&s) + &self.b_hidden).mapv(htanh);
        Ok(HeadOutputs {
            context: self.w_context.dot(&hidden) + self.b_context,
            score: self.w_score.dot(&hidden) + self.b_score,
        })
    }

    /// Score-head prediction clamped to `[0, 1]`, for reporting.
    pub fn predict_score(&self, context: &[usize]) -> Result<f64> {
        let s = self.embed_window(context)?;
        Ok(self.forward(s.view())?.score.clamp(0.0, 1.0))
    }

    /// Losses for one window, its corrupted centres and the essay score.
    pub fn loss(&self, sample: &WindowSample, corrupt: &[usize], alpha: f64) -> Result<LossParts> {
        Ok(self.loss_and_grad(sample, corrupt, alpha, false)?.0)
    }

    /// Exact gradient of the overall loss for one window.
    pub fn backward(
        &self,
        sample: &WindowSample,
        corrupt: &[usize],
        alpha: f64,
    ) -> Result<(LossParts, SsweGradients)> {
        let (loss, grad) = self.loss_and_grad(sample, corrupt, alpha, true)?;
        Ok((loss, grad.expect("gradient requested")))
    }

    fn loss_and_grad(
        &self,
        sample: &WindowSample,
        corrupt: &[usize],
        alpha: f64,
        want_grad: bool,
    ) -> Result<(LossParts, Option<SsweGradients>)> {
        check_alpha(alpha)?;
        let n = sample.context.len();
        if n * self.dim() != self.w_hidden.ncols() {
            return Err(Error::Shape(format!(
                "window of {n} tokens does not fit a network built for {}",
                self.window()
            )));
        }
        if corrupt.is_empty() {
            return Err(Error::Shape("context loss needs at least one corruption".into()));
        }
        let c = sample.center_index();
        let target = sample.target();

        // Pre-activation shared by the true window and every corruption:
        // everything except the centre block.
        let mut base = self.b_hidden.clone();
        for (j, &id) in sample.context.iter().enumerate() {
            if j != c {
                base += &self.block(j).dot(&self.row(id)?);
            }
        }
        let center = self.block(c);
        let pre_true = &base + &center.dot(&self.row(target)?);
        let hid_true = pre_true.mapv(htanh);
        let f_true = self.w_context.dot(&hid_true) + self.b_context;
        let f_ss = self.w_score.dot(&hid_true) + self.b_score;

        let mut pre_corrupt = Vec::with_capacity(corrupt.len());
        let mut f_corrupt = Vec::with_capacity(corrupt.len());
        for &id in corrupt {
            let pre = &base + &center.dot(&self.row(id)?);
            f_corrupt.push(self.w_context.dot(&pre.mapv(htanh)) + self.b_context);
            pre_corrupt.push(pre);
        }

        let l_ctx = loss_context(f_true, &f_corrupt)?;
        let l_score = loss_score(&[f_ss], &[sample.scaled_score])?;
        let loss = LossParts {
            overall: loss_overall(alpha, l_ctx, l_score)?,
            context: l_ctx,
            score: l_score,
        };
        if !want_grad {
            return Ok((loss, None));
        }

        let e = corrupt.len() as f64;
        let active: Vec<bool> = f_corrupt.iter().map(|&fc| 1.0 - f_true + fc > 0.0).collect();
        let n_active = active.iter().filter(|&&a| a).count() as f64;
        let g_true = -alpha / e * n_active;
        let g_ss = 2.0 * (1.0 - alpha) * (f_ss - sample.scaled_score);

        let h = self.hidden();
        let mut grad = SsweGradients {
            embeddings: BTreeMap::new(),
            w_hidden: Array2::zeros(self.w_hidden.raw_dim()),
            b_hidden: Array1::zeros(h),
            w_context: &hid_true * g_true,
            b_context: g_true,
            w_score: &hid_true * g_ss,
            b_score: g_ss,
        };

        let d_hid_true = &self.w_context * g_true + &self.w_score * g_ss;
        let dpre_true = &d_hid_true * &pre_true.mapv(htanh_grad);
        let mut dpre_sum = dpre_true.clone();

        let dim = self.dim();
        let mut w_center_grad = Array2::zeros((h, dim));
        add_outer(&mut w_center_grad, dpre_true.view(), self.row(target)?);
        let target_grad = center.t().dot(&dpre_true);
        add_row(&mut grad.embeddings, target, target_grad);

        for ((&id, pre), &is_active) in corrupt.iter().zip(&pre_corrupt).zip(&active) {
            let g_k = if is_active { alpha / e } else { 0.0 };
            grad.w_context.scaled_add(g_k, &pre.mapv(htanh));
            grad.b_context += g_k;
            let dpre = &self.w_context * g_k * &pre.mapv(htanh_grad);
            add_outer(&mut w_center_grad, dpre.view(), self.row(id)?);
            add_row(&mut grad.embeddings, id, center.t().dot(&dpre));
            dpre_sum += &dpre;
        }

        for (j, &id) in sample.context.iter().enumerate() {
            if j == c {
                continue;
            }
            let mut block = grad.w_hidden.slice_mut(s![.., j * dim..(j + 1) * dim]);
            for (mut row, &g) in block.rows_mut().into_iter().zip(dpre_sum.iter()) {
                if g != 0.0 {
                    row.scaled_add(g, &self.row(id)?);
                }
            }
            add_row(&mut grad.embeddings, id, self.block(j).t().dot(&dpre_sum));
        }
        grad.w_hidden
            .slice_mut(s![.., c * dim..(c + 1) * dim])
            .assign(&w_center_grad);
        grad.b_hidden = dpre_sum;
        Ok((loss, Some(grad)))
    }

    /// `self -= lr * grad`, touching only the embedding rows present in `grad`.
    pub fn sgd_step(&mut self, grad: &SsweGradients, lr: f64) {
        for (&id, g) in &grad.embeddings {
            self.embeddings.row_mut(id).scaled_add(-lr, g);
        }
        self.w_hidden.scaled_add(-lr, &grad.w_hidden);
        self.b_hidden.scaled_add(-lr, &grad.b_hidden);
        self.w_context.scaled_add(-lr, &grad.w_context);
        self.b_context -= lr * grad.b_context;
        self.w_score.scaled_add(-lr, &grad.w_score);
        self.b_score -= lr * grad.b_score;
    }
}

fn add_row(map: &mut BTreeMap<usize, Array1<f64>>, id: usize, g: Array1<f64>) {
    match map.get_mut(&id) {
        Some(acc) => *acc += &g,
        None => {
            map.insert(id, g);
        }
    }
}
