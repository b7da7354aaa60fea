use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{check_alpha, LossParts, SsweParams};
use crate::corpus::window::check_window_size;
use crate::corpus::{corrupt_centers, extract_windows, Essay, Vocabulary, SPECIAL_COUNT};
use crate::error::{Error, Result};
use crate::linalg::cosine;

/// Hyperparameters of the embedding network and its SGD loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SsweHyper {
    pub dim: usize,
    pub hidden: usize,
    pub window: usize,
    pub corruptions: usize,
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SsweHyper {
    fn default() -> Self {
        SsweHyper {
            dim: 200,
            hidden: 100,
            window: 9,
            corruptions: 200,
            alpha: 0.1,
            learning_rate: 1e-7,
            epochs: 10,
            seed: 0,
        }
    }
}

impl SsweHyper {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.hidden == 0 {
            return Err(Error::Config("embedding and hidden widths must be positive".into()));
        }
        check_window_size(self.window)?;
        if self.corruptions == 0 {
            return Err(Error::Config("number of corruptions must be >= 1".into()));
        }
        check_alpha(self.alpha)?;
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        Ok(())
    }

    /// Initial parameters; depends only on the seed and shapes.
    pub fn initial_params(&self, vocab_len: usize) -> SsweParams {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        SsweParams::init(vocab_len, self.dim, self.hidden, self.window, &mut rng)
    }
}

/// Mean losses over one epoch's windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub overall: f64,
    pub context: f64,
    pub score: f64,
}

/// Per-window SGD over seeded shuffles of every training window. Each visit
/// draws fresh corruptions.
pub fn train_sswe(
    essays: &[Essay],
    vocab_len: usize,
    hyper: &SsweHyper,
) -> Result<(SsweParams, Vec<EpochLoss>)> {
    hyper.validate()?;
    train_sswe_from(hyper.initial_params(vocab_len), essays, hyper)
}

pub fn train_sswe_from(
    mut params: SsweParams,
    essays: &[Essay],
    hyper: &SsweHyper,
) -> Result<(SsweParams, Vec<EpochLoss>)> {
    hyper.validate()?;
    if essays.is_empty() {
        return Err(Error::Data("cannot train embeddings on an empty corpus".into()));
    }
    if params.window() != hyper.window || params.dim() != hyper.dim {
        return Err(Error::Shape("initial parameters do not match the hyperparameters".into()));
    }
    let mut windows = Vec::new();
    for essay in essays {
        windows.extend(extract_windows(essay, hyper.window)?);
    }
    let vocab_len = params.vocab_len();
    if vocab_len < SPECIAL_COUNT + 2 {
        return Err(Error::Config(format!(
            "vocabulary of {vocab_len} entries is too small for corruption sampling"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = Vec::with_capacity(hyper.epochs);
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossParts::default();
        for &w in &order {
            let sample = &windows[w];
            let corrupt = corrupt_centers(sample, hyper.corruptions, vocab_len, &mut rng)?;
            let (loss, grad) = params.backward(sample, &corrupt, hyper.alpha)?;
            if !loss.overall.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite embedding loss in epoch {epoch}"
                )));
            }
            sum.overall += loss.overall;
            sum.context += loss.context;
            sum.score += loss.score;
            params.sgd_step(&grad, hyper.learning_rate);
        }
        let n = windows.len() as f64;
        history.push(EpochLoss {
            epoch,
            overall: sum.overall / n,
            context: sum.context / n,
            score: sum.score / n,
        });
    }
    params.validate()?;
    Ok((params, history))
}

/// The `k` most cosine-similar words to `word`, excluding `word` itself and
/// the special tokens. Ties are broken by id.
pub fn nearest_neighbors(
    params: &SsweParams,
    vocab: &Vocabulary,
    word: &str,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    let query = vocab
        .id(word)
        .ok_or_else(|| Error::Lookup(format!("`{word}` is not in the vocabulary")))?;
    if vocab.len() != params.vocab_len() {
        return Err(Error::Shape(format!(
            "vocabulary has {} entries, embeddings have {}",
            vocab.len(),
            params.vocab_len()
        )));
    }
    let q = params.embeddings.row(query);
    let mut scored: Vec<(usize, f64)> = (SPECIAL_COUNT..vocab.len())
        .filter(|&id| id != query)
        .map(|id| (id, cosine(q, params.embeddings.row(id))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(id, c)| (vocab.token(id).unwrap_or_default().to_string(), c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn vocab(words: &[&str]) -> Vocabulary {
        let doc: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        Vocabulary::build([doc], 1)
    }

    #[test]
    fn neighbours_of_duplicate_and_orthogonal_columns() {
        let v = vocab(&["a", "b", "c"]);
        let mut p = SsweParams::zeros(v.len(), 3, 1, 3);
        p.embeddings = Array2::zeros((v.len(), 3));
        let (a, b, c) = (v.id("a").unwrap(), v.id("b").unwrap(), v.id("c").unwrap());
        p.embeddings.row_mut(a).assign(&ndarray::arr1(&[1.0, 0.0, 0.0]));
        p.embeddings.row_mut(b).assign(&ndarray::arr1(&[0.0, 1.0, 0.0]));
        p.embeddings.row_mut(c).assign(&ndarray::arr1(&[0.0, 0.0, 1.0]));
        let nn = nearest_neighbors(&p, &v, "a", 5).unwrap();
        assert_eq!(nn.len(), 2);
        assert!(nn.iter().all(|(w, cos)| w != "a" && *cos == 0.0));
        // ties broken by id
        assert_eq!(nn[0].0, "b");

        p.embeddings.row_mut(c).assign(&ndarray::arr1(&[2.0, 0.0, 0.0]));
        let nn = nearest_neighbors(&p, &v, "a", 1).unwrap();
        assert_eq!(nn, vec![("c".to_string(), 1.0)]);

        assert!(matches!(nearest_neighbors(&p, &v, "zzz", 1), Err(Error::Lookup(_))));
    }

    #[test]
    fn invalid_hyper_rejected() {
        let h = SsweHyper { window: 4, ..Default::default() };
        assert!(h.validate().is_err());
        let h = SsweHyper { alpha: -0.1, ..Default::default() };
        assert!(h.validate().is_err());
        let h = SsweHyper { corruptions: 0, ..Default::default() };
        assert!(h.validate().is_err());
    }

    #[test]
    fn empty_corpus_rejected() {
        let h = SsweHyper { dim: 2, hidden: 2, window: 3, corruptions: 1, ..Default::default() };
        assert!(matches!(train_sswe(&[], 10, &h), Err(Error::Data(_))));
    }
}
