mod common;

use ats::saliency::input_gradients;
use ats::seqmodel::{Architecture, LstmLayer, Peephole, SeqModel};
use common::*;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_layer(rng: &mut ChaCha8Rng, input: usize, units: usize, peephole: Peephole) -> LstmLayer {
    let mut l = LstmLayer::init(input, units, peephole, rng);
    for s in l.slices_mut() {
        s.iter_mut().for_each(|x| *x = rng.random_range(-0.8..0.8));
    }
    l.mask_peepholes(peephole);
    l
}

#[test]
fn lstm_step_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for peephole in [Peephole::Full, Peephole::Diagonal, Peephole::Off] {
        for _ in 0..10 {
            let (input, units) = (rng.random_range(1..7), rng.random_range(1..6));
            let l = random_layer(&mut rng, input, units, peephole);
            let vec = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let (x, h, c) = (vec(input, &mut rng), vec(units, &mut rng), vec(units, &mut rng));
            let (h1, c1) = l
                .step(&Array1::from(x.clone()), &Array1::from(h.clone()), &Array1::from(c.clone()))
                .unwrap();
            let (h2, c2) = scalar_step(&l, &x, &h, &c);
            for k in 0..units {
                assert!((h1[k] - h2[k]).abs() < 1e-12, "{peephole:?} h[{k}]");
                assert!((c1[k] - c2[k]).abs() < 1e-12, "{peephole:?} c[{k}]");
            }
        }
    }
}

#[test]
fn masked_peepholes_stay_masked() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let l = random_layer(&mut rng, 3, 4, Peephole::Diagonal);
    for m in [&l.w_ic, &l.w_fc, &l.w_oc] {
        for ((r, c), v) in m.indexed_iter() {
            assert!(r == c || *v == 0.0);
        }
    }
    let off = random_layer(&mut rng, 3, 4, Peephole::Off);
    assert!(off.w_oc.iter().all(|&v| v == 0.0));
}

#[test]
fn restricted_peepholes_have_exact_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for peephole in [Peephole::Diagonal, Peephole::Off] {
        for (layers, bidirectional) in [(1, false), (2, true)] {
            let arch = Architecture {
                dim: 3,
                units: 3,
                layers,
                bidirectional,
                peephole,
            };
            let m = SeqModel::new(arch, 0.0, 9, rng.random()).unwrap();
            let tokens: Vec<usize> = (0..7).map(|_| rng.random_range(0..9)).collect();
            let err = seq_max_rel_error(&m, &tokens, 0.8);
            assert!(err <= 1e-4, "{peephole:?} {layers} {bidirectional}: {err}");
        }
    }
}

#[test]
fn input_gradients_match_finite_differences() {
    let arch = Architecture {
        dim: 4,
        units: 3,
        layers: 2,
        bidirectional: true,
        peephole: Peephole::Full,
    };
    let model = SeqModel::new(arch, 0.5, 10, 8).unwrap();
    // Repeated ids: every position needs its own gradient, not the row sum.
    let tokens = [3usize, 5, 3, 7, 3, 9];
    let pseudo = 1.0;
    let dx = input_gradients(&model, &tokens, pseudo).unwrap();
    for (t, g) in dx.iter().enumerate() {
        for k in 0..arch.dim {
            // Give position t its own embedding row so the perturbation is local.
            let mut m = model.clone();
            let mut e = m.embeddings.clone();
            let extra = e.row(tokens[t]).to_owned();
            e.push_row(extra.view()).unwrap();
            m.embeddings = e;
            let mut local = tokens.to_vec();
            local[t] = 10;
            let loss = |q: &SeqModel| (q.predict_raw(&local).unwrap() - pseudo).powi(2);
            let n = central_diff(&mut m, |q| &mut q.embeddings[[10, k]], loss);
            assert!(rel_error(g[k], n) <= 1e-4, "t={t} k={k}: {} vs {n}", g[k]);
        }
    }
}
