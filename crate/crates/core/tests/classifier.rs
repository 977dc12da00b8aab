use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlattack_core::classifier::*;
use vlattack_core::nn::{softmax, ParamStore};
use vlattack_core::text::{TokenId, TokenSeq};
use vlattack_core::victim::Victim;

fn cfg(vocab: usize) -> ClassifierConfig {
    ClassifierConfig { vocab_size: vocab, dim: 8, heads: 2, ffn_dim: 12, layers: 2, num_classes: 2, max_len: 16 }
}

fn perturbed(seed: u64, vocab: usize) -> ClassifierModel {
    let mut m = ClassifierModel::new(cfg(vocab), seed).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed + 1000);
    for p in m.params_mut().params_mut() {
        for v in p.value.data_mut() {
            *v += r.gen_range(-0.3..0.3);
        }
    }
    m.mlm_trained = true;
    m
}

fn random_seq(r: &mut ChaCha8Rng, vocab: usize) -> TokenSeq {
    let mut ids = vec![TokenId::CLS];
    ids.extend((0..r.gen_range(1..9)).map(|_| TokenId(r.gen_range(5..vocab as u32))));
    ids.extend((0..r.gen_range(0..3)).map(|_| TokenId::PAD));
    TokenSeq::new(ids).unwrap()
}

// ---------------------------------------------------------------------------
// Straight-line reference forward pass, reading parameters by name.

fn p<'a>(ps: &'a ParamStore, name: &str) -> &'a [f64] {
    ps.params().iter().find(|q| q.name == name).unwrap_or_else(|| panic!("no param {name}")).value.data()
}

fn affine(ps: &ParamStore, name: &str, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let w = p(ps, &format!("{name}.weight"));
    let b = p(ps, &format!("{name}.bias"));
    let out_dim = b.len();
    let in_dim = w.len() / out_dim;
    x.iter()
        .map(|row| (0..out_dim).map(|o| b[o] + (0..in_dim).map(|i| row[i] * w[i * out_dim + o]).sum::<f64>()).collect())
        .collect()
}

fn norm(ps: &ParamStore, name: &str, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let g = p(ps, &format!("{name}.gamma"));
    let b = p(ps, &format!("{name}.beta"));
    x.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            row.iter().enumerate().map(|(k, v)| (v - mean) / (var + 1e-9).sqrt() * g[k] + b[k]).collect()
        })
        .collect()
}

fn reference_logits(model: &ClassifierModel, x: &TokenSeq) -> Vec<f64> {
    let c = &model.config;
    let ps = model.params();
    let emb = p(ps, "embed");
    let d = c.dim;
    let ids = x.ids();
    let live: Vec<usize> = (0..ids.len()).filter(|&i| ids[i] != TokenId::PAD).collect();
    let mut h: Vec<Vec<f64>> = ids
        .iter()
        .enumerate()
        .map(|(pos, t)| {
            (0..d)
                .map(|k| {
                    let i = (k / 2 * 2) as f64;
                    let angle = pos as f64 / 10000f64.powf(i / d as f64);
                    let pe = if k % 2 == 0 { angle.sin() } else { angle.cos() };
                    (d as f64).sqrt() * emb[t.index() * d + k] + pe
                })
                .collect()
        })
        .collect();
    let dh = d / c.heads;
    for l in 0..c.layers {
        let a = norm(ps, &format!("enc{l}.ln1"), &h);
        let q = affine(ps, &format!("enc{l}.attn.q"), &a);
        let k = affine(ps, &format!("enc{l}.attn.k"), &a);
        let v = affine(ps, &format!("enc{l}.attn.v"), &a);
        let mut ctx = vec![vec![0.0; d]; h.len()];
        for head in 0..c.heads {
            let r = head * dh..(head + 1) * dh;
            for i in 0..h.len() {
                let scores: Vec<f64> = live
                    .iter()
                    .map(|&j| r.clone().map(|m| q[i][m] * k[j][m]).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let w = softmax(&scores);
                for (wj, &j) in w.iter().zip(&live) {
                    for m in r.clone() {
                        ctx[i][m] += wj * v[j][m];
                    }
                }
            }
        }
        let att = affine(ps, &format!("enc{l}.attn.o"), &ctx);
        let x1: Vec<Vec<f64>> = h.iter().zip(&att).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        let b2 = norm(ps, &format!("enc{l}.ln2"), &x1);
        let up = affine(ps, &format!("enc{l}.ffn.up"), &b2);
        let act: Vec<Vec<f64>> = up
            .iter()
            .map(|r| r.iter().map(|&x| 0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())).collect())
            .collect();
        let down = affine(ps, &format!("enc{l}.ffn.down"), &act);
        h = x1.iter().zip(&down).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
    }
    let h = norm(ps, "final_ln", &h);
    let mut pooled = vec![0.0; d];
    for &i in &live {
        for k in 0..d {
            pooled[k] += h[i][k] / live.len() as f64;
        }
    }
    affine(ps, "head", &[pooled]).remove(0)
}

#[test]
fn predict_matches_straight_line_recomputation() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for i in 0..100 {
        let model = perturbed(i % 5, 14);
        let x = random_seq(&mut r, 14);
        let reference = softmax(&reference_logits(&model, &x));
        let pred = model.predict(&x);
        for (a, b) in pred.probs.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-10, "case {i}: {a} vs {b}");
        }
        let argmax = if reference[1] > reference[0] { 1 } else { 0 };
        assert_eq!(pred.label, argmax);
    }
}

#[test]
fn probabilities_sum_to_one_and_argmax_is_shift_invariant() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let model = perturbed(3, 14);
    for _ in 0..50 {
        let x = random_seq(&mut r, 14);
        let pred = model.predict(&x);
        assert!((pred.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let logits = model.logits(&x);
        let shifted: Vec<f64> = logits.iter().map(|l| l + 123.0).collect();
        let sp = softmax(&shifted);
        let arg = |v: &[f64]| if v[1] > v[0] { 1 } else { 0 };
        assert_eq!(arg(&sp), pred.label);
    }
}

#[test]
fn blk_augment_degenerate_and_two_slot_cases() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let x = TokenSeq::new(vec![TokenId::CLS, TokenId(7), TokenId(9)]).unwrap();
    for _ in 0..100 {
        assert_eq!(blk_augment(&x, 0.0, &mut r), x);
    }
    let short = TokenSeq::new(vec![TokenId::CLS, TokenId(7)]).unwrap();
    let mut seen = [false; 2];
    for _ in 0..200 {
        let a = blk_augment(&short, 1.0, &mut r);
        let pos = a.ids().iter().position(|&t| t == TokenId::BLK).unwrap();
        assert!(pos == 1 || pos == 2);
        seen[pos - 1] = true;
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn blk_augment_slot_frequencies_are_uniform() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let n = 6;
    let mut ids = vec![TokenId::CLS];
    ids.extend((0..n - 1).map(|i| TokenId(5 + i as u32)));
    let x = TokenSeq::new(ids).unwrap();
    let draws = 10_000;
    let mut counts = vec![0usize; n + 1];
    for _ in 0..draws {
        let a = blk_augment(&x, 1.0, &mut r);
        assert_eq!(a.len(), n + 1);
        assert_eq!(a.ids().iter().filter(|&&t| t == TokenId::BLK).count(), 1);
        counts[a.ids().iter().position(|&t| t == TokenId::BLK).unwrap()] += 1;
    }
    assert_eq!(counts[0], 0, "never before CLS");
    let pr = 1.0 / n as f64;
    let sigma = (draws as f64 * pr * (1.0 - pr)).sqrt();
    for &c in &counts[1..] {
        assert!((c as f64 - draws as f64 * pr).abs() <= 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn mlm_topk_contract() {
    let vocab = 14;
    let model = perturbed(5, vocab);
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let x = random_seq(&mut r, vocab);
        let pos = x.content_positions().next().unwrap();
        let all = model.mlm_topk(&x, pos, 100).unwrap();
        assert_eq!(all.tokens.len(), vocab - 5 - 1);
        assert!(!all.tokens.contains(&x.ids()[pos]));
        assert!(all.tokens.iter().all(|t| !t.is_special()));
        let probs = model.mlm_probs(&x, pos).unwrap();
        for w in all.tokens.windows(2) {
            assert!(probs[w[0].index()] >= probs[w[1].index()]);
        }
        let top3 = model.mlm_topk(&x, pos, 3).unwrap();
        assert_eq!(top3.tokens, all.tokens[..3].to_vec());
    }
    let x = TokenSeq::new(vec![TokenId::CLS, TokenId(6), TokenId::PAD]).unwrap();
    assert!(model.mlm_topk(&x, 0, 3).is_err());
    assert!(model.mlm_topk(&x, 2, 3).is_err());
    let with_blk = x.with_inserted(1, TokenId::BLK);
    assert_eq!(model.mlm_topk(&with_blk, 1, 100).unwrap().tokens.len(), vocab - 5);
}

#[test]
fn mlm_fallback_is_flagged_without_mlm_training() {
    let model = ClassifierModel::new(cfg(14), 1).unwrap();
    let x = TokenSeq::new(vec![TokenId::CLS, TokenId(6), TokenId(8)]).unwrap();
    let c = model.mlm_topk(&x, 1, 3).unwrap();
    assert!(c.uniform_fallback);
    assert_eq!(c.tokens, vec![TokenId(5), TokenId(7), TokenId(8)]);
}

#[test]
fn tied_embedding_moves_mlm_logit() {
    let mut model = perturbed(6, 14);
    let x = TokenSeq::new(vec![TokenId::CLS, TokenId(6), TokenId(8)]).unwrap();
    let before = model.mlm_probs(&x, 1).unwrap();
    let t = TokenId(11);
    for v in embedding_row_mut(&mut model, t) {
        *v += 0.5;
    }
    let after = model.mlm_probs(&x, 1).unwrap();
    assert_ne!(before[t.index()], after[t.index()]);
    assert_eq!(model.embedding(t), model.params().params()[model.embed_id().0].value.row(t.index()));
}

#[test]
fn input_grads_are_pure() {
    let model = perturbed(7, 14);
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let x = random_seq(&mut r, 14);
    let before = model.params().clone();
    let (l1, g1) = model.input_grads(&x, 1).unwrap();
    let (l2, g2) = model.input_grads(&x, 1).unwrap();
    assert_eq!(l1.to_bits(), l2.to_bits());
    assert_eq!(g1, g2);
    assert_eq!(&before, model.params());
}

#[test]
fn training_is_deterministic_and_labels_untouched() {
    let data = vlattack_core::text::synth_classification(1, 24, 0.0);
    let vocab = vlattack_core::text::ClassificationGrammar::default().vocab();
    let arch = ClassifierConfig { dim: 8, ffn_dim: 16, ..ClassifierConfig::new(vocab.len()) };
    let tc = TrainConfig { epochs: 1, batch_size: 8, ..Default::default() };
    let a = finetune(&data, arch.clone(), &tc).unwrap();
    let b = finetune(&data, arch, &tc).unwrap();
    assert_eq!(a.params(), b.params());
    assert!(a.clean_accuracy.is_some());
}

#[test]
fn empty_training_set_is_rejected() {
    assert!(finetune(&[], cfg(14), &TrainConfig::default()).is_err());
}
