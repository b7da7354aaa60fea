//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use ats::cli::synth::{generate, Profile};
use ats::corpus::{Essay, EssayRecord, ScoreRange, ScoreRanges, ScoreScaling, Vocabulary};
use ats::seqmodel::{LstmLayer, SeqModel};
use ats::sswe::SsweParams;
use ats::corpus::WindowSample;
use statrs::statistics::Statistics;

// ---------------------------------------------------------------- metrics

/// 1-based ranks by counting; ties get the mean of the ranks they span.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(a: &[f64], b: &[f64]) -> f64 {
    let cov = a.iter().copied().covariance(b.iter().copied());
    cov / (a.iter().copied().std_dev() * b.iter().copied().std_dev())
}

pub fn brute_spearman(a: &[f64], b: &[f64]) -> f64 {
    brute_pearson(&brute_ranks(a), &brute_ranks(b))
}

pub fn brute_rmse(a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (sq / a.len() as f64).sqrt()
}

/// Kappa from the explicit observed and expected matrices.
pub fn brute_qwk(pred: &[f64], gold: &[f64], min: i64, max: i64) -> f64 {
    let k = (max - min + 1) as usize;
    let cat = |x: f64| ((x.round() as i64).clamp(min, max) - min) as usize;
    let n = pred.len() as f64;
    let mut o = vec![vec![0.0; k]; k];
    for (&p, &g) in pred.iter().zip(gold) {
        o[cat(p)][cat(g)] += 1.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64 - j as f64) / (k as f64 - 1.0)).powi(2);
            let row: f64 = o[i].iter().sum();
            let col: f64 = (0..k).map(|r| o[r][j]).sum();
            num += w * o[i][j] / n;
            den += w * (row / n) * (col / n);
        }
    }
    1.0 - num / den
}

// ---------------------------------------------------------------- lstm

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec(m: &ndarray::Array2<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[[r, c]] * v[c]).sum())
        .collect()
}

/// One peephole LSTM step written out element by element.
pub fn scalar_step(l: &LstmLayer, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let u = l.b_i.len();
    let (xi, hi, ci) = (matvec(&l.w_is, x), matvec(&l.w_ih, h), matvec(&l.w_ic, c));
    let (xf, hf, cf) = (matvec(&l.w_fs, x), matvec(&l.w_fh, h), matvec(&l.w_fc, c));
    let (xc, hc) = (matvec(&l.w_cs, x), matvec(&l.w_ch, h));
    let mut c_new = vec![0.0; u];
    for k in 0..u {
        let i = sigmoid(xi[k] + hi[k] + ci[k] + l.b_i[k]);
        let f = sigmoid(xf[k] + hf[k] + cf[k] + l.b_f[k]);
        let g = (xc[k] + hc[k] + l.b_c[k]).tanh();
        c_new[k] = i * g + f * c[k];
    }
    let (xo, ho, co) = (matvec(&l.w_os, x), matvec(&l.w_oh, h), matvec(&l.w_oc, &c_new));
    let h_new = (0..u)
        .map(|k| sigmoid(xo[k] + ho[k] + co[k] + l.b_o[k]) * c_new[k].tanh())
        .collect();
    (h_new, c_new)
}

// ---------------------------------------------------------------- finite differences

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps vanishing gradients
/// from turning rounding noise into large ratios.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central difference of `loss` with respect to the scalar behind `slot`.
pub fn central_diff<M>(model: &mut M, slot: impl Fn(&mut M) -> &mut f64, loss: impl Fn(&M) -> f64) -> f64 {
    let orig = *slot(model);
    *slot(model) = orig + FD_STEP;
    let up = loss(model);
    *slot(model) = orig - FD_STEP;
    let down = loss(model);
    *slot(model) = orig;
    (up - down) / (2.0 * FD_STEP)
}

/// Worst relative error of the SSWE gradient over every parameter that
/// the window touches.
pub fn sswe_max_rel_error(p: &SsweParams, sample: &WindowSample, corrupt: &[usize], alpha: f64) -> f64 {
    let (_, g) = p.backward(sample, corrupt, alpha).unwrap();
    let loss = |q: &SsweParams| q.loss(sample, corrupt, alpha).unwrap().overall;
    let mut model = p.clone();
    let mut worst: f64 = 0.0;
    let mut check = |a: f64, n: f64| worst = worst.max(rel_error(a, n));

    let mut ids: Vec<usize> = sample.context.iter().chain(corrupt).copied().collect();
    ids.sort_unstable();
    ids.dedup();
    for &id in &ids {
        let row = g.embedding_row(id, p.dim());
        for k in 0..p.dim() {
            let n = central_diff(&mut model, |m| &mut m.embeddings[[id, k]], loss);
            check(row[k], n);
        }
    }
    for r in 0..p.w_hidden.nrows() {
        for c in 0..p.w_hidden.ncols() {
            let n = central_diff(&mut model, |m| &mut m.w_hidden[[r, c]], loss);
            check(g.w_hidden[[r, c]], n);
        }
        let n = central_diff(&mut model, |m| &mut m.b_hidden[r], loss);
        check(g.b_hidden[r], n);
        let n = central_diff(&mut model, |m| &mut m.w_context[r], loss);
        check(g.w_context[r], n);
        let n = central_diff(&mut model, |m| &mut m.w_score[r], loss);
        check(g.w_score[r], n);
    }
    check(g.b_context, central_diff(&mut model, |m| &mut m.b_context, loss));
    check(g.b_score, central_diff(&mut model, |m| &mut m.b_score, loss));
    worst
}

/// Worst relative error of the scorer gradient of `(ŷ - gold)^2` over every
/// dense parameter and every embedding row the essay uses.
pub fn seq_max_rel_error(m: &SeqModel, tokens: &[usize], gold: f64) -> f64 {
    let cache = m.forward(tokens, None).unwrap();
    let g = m.bptt(&cache, gold);
    let loss = |q: &SeqModel| {
        let y = q.predict_raw(tokens).unwrap();
        (y - gold) * (y - gold)
    };
    let mut model = m.clone();
    let mut worst: f64 = 0.0;

    // Entries zeroed by the peephole mask are not parameters: their gradient
    // must be exactly zero and perturbing them is meaningless.
    let mut ones = m.clone();
    for s in ones.dense_slices_mut() {
        s.fill(1.0);
    }
    for stack in &mut ones.layers {
        stack.forward.mask_peepholes(m.arch.peephole);
        if let Some(b) = &mut stack.backward {
            b.mask_peepholes(m.arch.peephole);
        }
    }
    let live: Vec<Vec<f64>> = ones.dense_slices().iter().map(|s| s.to_vec()).collect();

    let analytic: Vec<Vec<f64>> = g.dense_slices().iter().map(|s| s.to_vec()).collect();
    for (s, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            if live[s][j] == 0.0 {
                assert_eq!(a, 0.0, "masked entry {s}/{j} has a gradient");
                continue;
            }
            let n = central_diff(&mut model, |q| &mut q.dense_slices_mut().into_iter().nth(s).unwrap()[j], loss);
            worst = worst.max(rel_error(a, n));
        }
    }
    let mut ids = tokens.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let dim = m.arch.dim;
    for id in ids {
        let row = g.embedding_row(id, dim);
        for k in 0..dim {
            let n = central_diff(&mut model, |q| &mut q.embeddings[[id, k]], loss);
            worst = worst.max(rel_error(row[k], n));
        }
    }
    worst
}

// ---------------------------------------------------------------- fixtures

/// A synthetic profile encoded against a vocabulary of every essay, on a
/// single 0..10 set.
pub struct Fixture {
    pub essays: Vec<Essay>,
    pub words: Vec<Vec<String>>,
    pub vocab: Vocabulary,
    pub ranges: ScoreRanges,
}

pub fn ranges_0_10() -> ScoreRanges {
    ScoreRanges {
        ranges: BTreeMap::from([(1, ScoreRange { min: 0.0, max: 10.0 })]),
        scaling: ScoreScaling::Normalized,
    }
}

pub fn records(profile: Profile, seed: u64) -> Vec<EssayRecord> {
    generate(profile, seed)
        .into_iter()
        .map(|e| EssayRecord {
            essay_id: e.id,
            set_id: 1,
            tokens: e.words,
            raw_score: e.score,
        })
        .collect()
}

pub fn fixture(profile: Profile, seed: u64) -> Fixture {
    let recs = records(profile, seed);
    let vocab = Vocabulary::build(recs.iter().map(|r| r.tokens.clone()), 1);
    let ranges = ranges_0_10();
    let essays = recs
        .iter()
        .map(|r| Essay::encode(r, &vocab, &ranges).unwrap())
        .collect();
    Fixture {
        essays,
        words: recs.into_iter().map(|r| r.tokens).collect(),
        vocab,
        ranges,
    }
}

pub fn cosine_distance(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    1.0 - a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt())
}
