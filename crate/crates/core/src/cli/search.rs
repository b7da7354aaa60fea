use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Config, Interval};
use crate::error::{Error, Result};

/// Random-search domain. Integer intervals are sampled uniformly, the
/// embedding learning rate log-uniformly, `window` over its odd members.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub dim: Interval<usize>,
    pub hidden: Interval<usize>,
    pub window: Interval<usize>,
    pub corruptions: Interval<usize>,
    pub alpha: Interval<f64>,
    pub learning_rate: Interval<f64>,
    pub units: Interval<usize>,
    pub dropout: Interval<f64>,
    pub trials: usize,
    /// When non-empty, every sampled point is evaluated once per alpha here.
    pub forced_alphas: Vec<f64>,
    pub seed: u64,
}

/// One sampled point of the search space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialParams {
    pub seed: u64,
    pub dim: usize,
    pub hidden: usize,
    pub window: usize,
    pub corruptions: usize,
    pub alpha: f64,
    pub learning_rate: f64,
    pub units: usize,
    pub dropout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub params: TrialParams,
    /// Best raw-scale validation RMSE; `None` when training diverged.
    pub val_rmse: Option<f64>,
}

pub const TRIALS_HEADER: &str =
    "trial,seed,dim,hidden,window,corruptions,alpha,learning_rate,units,dropout,val_rmse";

impl TrialResult {
    pub fn csv_row(&self) -> String {
        let p = &self.params;
        format!(
            "{},{},{},{},{},{},{:?},{:?},{},{:?},{}",
            self.trial,
            p.seed,
            p.dim,
            p.hidden,
            p.window,
            p.corruptions,
            p.alpha,
            p.learning_rate,
            p.units,
            p.dropout,
            self.val_rmse.map(|v| format!("{v:?}")).unwrap_or_default()
        )
    }
}

fn odd_members(w: Interval<usize>) -> Vec<usize> {
    (w.lo.max(3)..=w.hi).filter(|n| n % 2 == 1).collect()
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("search space: {m}")));
        if self.trials == 0 {
            return bad("search_trials must be >= 1");
        }
        if self.dim.lo == 0 || self.hidden.lo == 0 || self.units.lo == 0 || self.corruptions.lo == 0
        {
            return bad("integer dimensions must start at 1 or more");
        }
        if odd_members(self.window).is_empty() {
            return bad("search_window contains no odd size >= 3");
        }
        if !(self.learning_rate.lo > 0.0) {
            return bad("search_learning_rate must be positive (log-uniform)");
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.alpha.lo) || !unit(self.alpha.hi) || !self.forced_alphas.iter().all(|&a| unit(a))
        {
            return bad("alpha values must lie in [0, 1]");
        }
        if self.dropout.lo < 0.0 || self.dropout.hi >= 1.0 {
            return bad("search_dropout must lie in [0, 1)");
        }
        Ok(())
    }

    /// The trial sequence; a pure function of the space, seed included.
    pub fn sample(&self) -> Result<Vec<TrialParams>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(2);
        let windows = odd_members(self.window);
        let mut out = Vec::new();
        for _ in 0..self.trials {
            let ln = (self.learning_rate.lo.ln(), self.learning_rate.hi.ln());
            let p = TrialParams {
                seed: rng.next_u64(),
                dim: rng.random_range(self.dim.lo..=self.dim.hi),
                hidden: rng.random_range(self.hidden.lo..=self.hidden.hi),
                window: windows[rng.random_range(0..windows.len())],
                corruptions: rng.random_range(self.corruptions.lo..=self.corruptions.hi),
                alpha: self.alpha.lo + rng.random::<f64>() * (self.alpha.hi - self.alpha.lo),
                learning_rate: (ln.0 + rng.random::<f64>() * (ln.1 - ln.0)).exp(),
                units: rng.random_range(self.units.lo..=self.units.hi),
                dropout: self.dropout.lo + rng.random::<f64>() * (self.dropout.hi - self.dropout.lo),
            };
            if self.forced_alphas.is_empty() {
                out.push(p);
            } else {
                out.extend(self.forced_alphas.iter().map(|&alpha| TrialParams { alpha, ..p }));
            }
        }
        Ok(out)
    }
}

impl TrialParams {
    /// `base` with this point's values; scorer epochs become `search_epochs`.
    pub fn apply(&self, base: &Config) -> Config {
        Config {
            seed: self.seed,
            dim: self.dim,
            hidden: self.hidden,
            window: self.window,
            corruptions: self.corruptions,
            alpha: self.alpha,
            learning_rate: self.learning_rate,
            units: self.units,
            dropout: self.dropout,
            ..base.clone()
        }
    }
}

/// Runs `evaluate` on every trial in parallel. Results keep trial order, and
/// a numerical failure marks the trial as diverged instead of aborting.
pub fn run_trials<F>(space: &SearchSpace, evaluate: F) -> Result<Vec<TrialResult>>
where
    F: Fn(&TrialParams) -> Result<f64> + Sync,
{
    space
        .sample()?
        .into_par_iter()
        .enumerate()
        .map(|(trial, params)| {
            let val_rmse = match evaluate(&params) {
                Ok(v) if v.is_finite() => Some(v),
                Ok(_) | Err(Error::Numerical(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(TrialResult {
                trial,
                params,
                val_rmse,
            })
        })
        .collect()
}

/// Lowest validation RMSE; ties go to the earlier trial.
pub fn best_trial(results: &[TrialResult]) -> Option<&TrialResult> {
    results
        .iter()
        .filter(|r| r.val_rmse.is_some())
        .min_by(|a, b| a.val_rmse.unwrap().total_cmp(&b.val_rmse.unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> SearchSpace {
        Config::default().search_space()
    }

    #[test]
    fn same_seed_same_sequence() {
        let a = space().sample().unwrap();
        assert_eq!(a, space().sample().unwrap());
        let mut other = space();
        other.seed = 1;
        assert_ne!(a, other.sample().unwrap());
    }

    #[test]
    fn samples_respect_the_space() {
        let s = space();
        for p in s.sample().unwrap() {
            assert!(p.window % 2 == 1 && (3..=11).contains(&p.window));
            assert!((1e-8..=1e-2).contains(&p.learning_rate));
            assert!((0.0..=1.0).contains(&p.alpha));
            assert!((50..=300).contains(&p.dim));
            assert!((0.0..0.6).contains(&p.dropout));
        }
    }

    #[test]
    fn forced_alphas_pair_up_points() {
        let mut s = space();
        s.trials = 3;
        s.forced_alphas = vec![0.1, 1.0];
        let t = s.sample().unwrap();
        assert_eq!(t.len(), 6);
        for pair in t.chunks(2) {
            assert_eq!((pair[0].alpha, pair[1].alpha), (0.1, 1.0));
            assert_eq!(TrialParams { alpha: 0.0, ..pair[0] }, TrialParams { alpha: 0.0, ..pair[1] });
        }
    }

    #[test]
    fn single_trial_is_best() {
        let mut s = space();
        s.trials = 1;
        let r = run_trials(&s, |p| Ok(p.alpha)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(best_trial(&r), Some(&r[0]));
    }

    #[test]
    fn divergence_is_recorded_not_fatal() {
        let mut s = space();
        s.trials = 4;
        let r = run_trials(&s, |p| {
            if p.dim % 2 == 0 {
                Err(Error::Numerical("boom".into()))
            } else {
                Ok(p.dim as f64)
            }
        })
        .unwrap();
        assert_eq!(r.len(), 4);
        let best = best_trial(&r).map(|b| b.params.dim);
        let odd_min = r.iter().map(|t| t.params.dim).filter(|d| d % 2 == 1).min();
        assert_eq!(best, odd_min);
        assert!(run_trials(&s, |_| Err(Error::Data("x".into()))).is_err());
    }

    #[test]
    fn invalid_spaces_rejected() {
        let mut s = space();
        s.trials = 0;
        assert!(s.sample().is_err());
        let mut s = space();
        s.window = Interval { lo: 4, hi: 4 };
        assert!(s.validate().is_err());
        let mut s = space();
        s.learning_rate = Interval { lo: 0.0, hi: 1.0 };
        assert!(s.validate().is_err());
    }
}
