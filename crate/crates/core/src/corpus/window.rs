use rand::Rng;

use super::{Essay, BOUNDARY, SPECIAL_COUNT};
use crate::error::{Error, Result};

/// An `n`-token context centred on one essay position.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub context: Vec<usize>,
    pub scaled_score: f64,
    pub source_essay: u64,
}

impl WindowSample {
    pub fn center_index(&self) -> usize {
        (self.context.len() - 1) / 2
    }

    pub fn target(&self) -> usize {
        self.context[self.center_index()]
    }
}

pub(crate) fn check_window_size(n: usize) -> Result<()> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::Config(format!("window size must be odd and >= 3, got {n}")));
    }
    Ok(())
}

/// One window per token; positions past either edge are [`BOUNDARY`].
pub fn extract_windows(essay: &Essay, n: usize) -> Result<Vec<WindowSample>> {
    check_window_size(n)?;
    let half = (n - 1) / 2;
    let len = essay.tokens.len() as isize;
    Ok((0..len)
        .map(|pos| {
            let context = (pos - half as isize..=pos + half as isize)
                .map(|j| {
                    if j < 0 || j >= len {
                        BOUNDARY
                    } else {
                        essay.tokens[j as usize]
                    }
                })
                .collect();
            WindowSample {
                context,
                scaled_score: essay.scaled_score,
                source_essay: essay.essay_id,
            }
        })
        .collect())
}

/// Draws `e` replacement centre words uniformly from the non-special ids of a
/// vocabulary of `vocab_len` entries, never the true target.
pub fn corrupt_centers<R: Rng + ?Sized>(
    sample: &WindowSample,
    e: usize,
    vocab_len: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if e == 0 {
        return Err(Error::Config("number of corruptions must be >= 1".into()));
    }
    let target = sample.target();
    let non_special = vocab_len.saturating_sub(SPECIAL_COUNT);
    let target_is_candidate = target >= SPECIAL_COUNT && target < vocab_len;
    let candidates = non_special - usize::from(target_is_candidate);
    if candidates == 0 {
        return Err(Error::Config(format!(
            "vocabulary has {non_special} non-special entries; too small to corrupt a window"
        )));
    }
    Ok((0..e)
        .map(|_| {
            let mut id = SPECIAL_COUNT + rng.random_range(0..candidates);
            if target_is_candidate && id >= target {
                id += 1;
            }
            id
        })
        .collect())
}

/// `e` copies of the window with the centre word replaced (see [`corrupt_centers`]).
pub fn corrupt_window<R: Rng + ?Sized>(
    sample: &WindowSample,
    e: usize,
    vocab_len: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let c = sample.center_index();
    Ok(corrupt_centers(sample, e, vocab_len, rng)?
        .into_iter()
        .map(|id| {
            let mut ctx = sample.context.clone();
            ctx[c] = id;
            ctx
        })
        .collect())
}
