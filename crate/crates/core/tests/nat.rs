use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlattack_core::attack::OpSet;
use vlattack_core::nat::*;
use vlattack_core::nn::{softmax, Tape};
use vlattack_core::text::{BitextGrammar, TokenId, TokenSeq};
use vlattack_core::Error;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-3;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn small(seed: u64, vocab: usize) -> Seq2SeqModel {
    let cfg = NatConfig { vocab_size: vocab, dim: 8, heads: 2, ffn_dim: 12, enc_layers: 1, dec_layers: 2, max_len: 16, max_offset: 3 };
    let mut m = Seq2SeqModel::new(cfg, seed).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 99);
    for p in m.params_mut().params_mut() {
        for v in p.value.data_mut() {
            *v += r.gen_range(-0.2..0.2);
        }
    }
    m
}

fn random_ids(r: &mut ChaCha8Rng, vocab: usize, lo: usize, hi: usize) -> TokenSeq {
    TokenSeq::new((0..r.gen_range(lo..=hi)).map(|_| TokenId(r.gen_range(5..vocab as u32))).collect()).unwrap()
}

#[test]
fn translator_parameter_gradients() {
    let vocab = 11;
    for seed in 0..20 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut m = small(seed, vocab);
        let src = random_ids(&mut r, vocab, 2, 5);
        let tgt = random_ids(&mut r, vocab, 2, 5);
        let target = MaskedTarget::sample(&tgt, &mut r);
        let targets = target.targets();
        let obj = NatObjective {
            targets: &targets,
            token_weight: 0.5,
            length_class: m.config.offset_class(src.len(), tgt.len()),
            length_weight: 0.8,
        };
        let mut tape = Tape::new();
        m.forward(&src, &target.input, &obj, &mut tape).unwrap();
        let mut grads = m.zero_grads();
        m.backward(&mut tape, Some(&mut grads)).unwrap();
        let mut worst: f64 = 0.0;
        for p in 0..m.params().len() {
            for k in 0..m.params().params()[p].value.len() {
                let orig = m.params().params()[p].value.data()[k];
                m.params_mut().params_mut()[p].value.data_mut()[k] = orig + EPS;
                let up = m.objective_loss(&src, &target.input, &obj).unwrap();
                m.params_mut().params_mut()[p].value.data_mut()[k] = orig - EPS;
                let down = m.objective_loss(&src, &target.input, &obj).unwrap();
                m.params_mut().params_mut()[p].value.data_mut()[k] = orig;
                worst = worst.max(rel_err(grads.tensors()[p].data()[k], (up - down) / (2.0 * EPS)));
            }
        }
        assert!(worst < TOL, "seed {seed}: {worst}");
    }
}

/// With only the length objective the embedding table enters through the
/// source lookups alone, so a row's finite difference equals the summed
/// input gradient of that token's occurrences.
#[test]
fn translator_source_input_gradients() {
    let vocab = 11;
    let embed = 0;
    for seed in 0..20 {
        let mut r = ChaCha8Rng::seed_from_u64(seed + 40);
        let mut m = small(seed + 40, vocab);
        assert_eq!(m.params().params()[embed].name, "embed");
        let src = random_ids(&mut r, vocab, 2, 6);
        let dec = random_ids(&mut r, vocab, 2, 6);
        let obj = NatObjective { targets: &[], token_weight: 0.0, length_class: Some(r.gen_range(0..7)), length_weight: 1.0 };
        let mut tape = Tape::new();
        m.forward(&src, &dec, &obj, &mut tape).unwrap();
        let (ds, dh) = m.backward(&mut tape, None).unwrap();
        assert!(dh.data().iter().all(|&v| v == 0.0));
        let tok = src.ids()[0];
        for c in 0..m.config.dim {
            let analytic: f64 = (0..src.len()).filter(|&i| src.ids()[i] == tok).map(|i| ds.row(i)[c]).sum();
            let k = tok.index() * m.config.dim + c;
            let orig = m.params().params()[embed].value.data()[k];
            m.params_mut().params_mut()[embed].value.data_mut()[k] = orig + EPS;
            let up = m.objective_loss(&src, &dec, &obj).unwrap();
            m.params_mut().params_mut()[embed].value.data_mut()[k] = orig - EPS;
            let down = m.objective_loss(&src, &dec, &obj).unwrap();
            m.params_mut().params_mut()[embed].value.data_mut()[k] = orig;
            assert!(rel_err(analytic, (up - down) / (2.0 * EPS)) < TOL, "seed {seed}");
        }
    }
}

#[test]
fn remask_schedule() {
    let counts: Vec<usize> = (1..=10).map(|t| remask_count(20, t, 10)).collect();
    assert_eq!(counts, vec![18, 16, 14, 12, 10, 8, 6, 4, 2, 0]);
    assert_eq!(remask_count(5, 1, 1), 0);
    assert_eq!(remask_count(7, 1, 4), 6);
}

#[test]
fn length_head_is_a_distribution_over_offsets() {
    let m = small(3, 11);
    assert_eq!(m.config.length_classes(), 7);
    assert_eq!(m.config.offset_class(4, 1), Some(0));
    assert_eq!(m.config.offset_class(4, 7), Some(6));
    assert_eq!(m.config.offset_class(4, 8), None);
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let src = random_ids(&mut r, 11, 1, 8);
        let p = m.length_probs(&src);
        assert_eq!(p.len(), 7);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(m.predict_length(&src) >= 1);
    }
}

#[test]
fn masked_target_pairs_kth_mask_with_kth_gold() {
    let tgt = TokenSeq::new(vec![TokenId(5), TokenId(6), TokenId(7), TokenId(8)]).unwrap();
    let mt = MaskedTarget::new(&tgt, &[false, true, false, true]);
    assert_eq!(mt.targets(), vec![(1, TokenId(6)), (3, TokenId(8))]);
    assert_eq!((mt.masked_count(), mt.residual_count()), (2, 2));
    let shifted = MaskedTarget { input: mt.input.with_inserted(0, TokenId(9)), gold: mt.gold.clone() };
    assert_eq!(shifted.targets(), vec![(2, TokenId(6)), (4, TokenId(8))]);
    assert_eq!(MaskedTarget::full(&tgt).residual_count(), 0);
}

#[test]
fn masked_loss_is_the_sum_over_masked_slots() {
    let m = small(4, 11);
    let mut r = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let src = random_ids(&mut r, 11, 2, 6);
        let tgt = random_ids(&mut r, 11, 2, 6);
        let mt = MaskedTarget::sample(&tgt, &mut r);
        let logits = m.token_logits(&src, &mt.input);
        let manual: f64 = mt.targets().iter().map(|&(p, g)| -softmax(logits.row(p))[g.index()].ln()).sum();
        let got = masked_loss(&m, &src, &mt).unwrap();
        assert!((got - manual).abs() < 1e-9);
        assert!((masked_loss_from_logits(&logits, &mt.targets()) - manual).abs() < 1e-9);
    }
}

#[test]
fn decoding_is_deterministic_and_content_only() {
    let m = small(5, 11);
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let src = random_ids(&mut r, 11, 1, 6);
        let a = decode_with_length(&m, &src, 5, 4);
        assert_eq!(a, decode_with_length(&m, &src, 5, 4));
        assert_eq!(a.len(), 5);
        assert!(a.ids().iter().all(|t| !t.is_special()));
        let b = mask_predict_decode(&m, &src, 3);
        assert_eq!(b.len(), m.predict_length(&src));
    }
}

#[test]
fn zero_step_attack_is_identity() {
    let m = small(6, 11);
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let src = random_ids(&mut r, 11, 3, 6);
    let mt = MaskedTarget::sample(&random_ids(&mut r, 11, 3, 6), &mut r);
    let vocab: Vec<TokenId> = (5..11).map(TokenId).collect();
    let res = nat_attack(&m, &src, &mt, &NatAttackConfig { steps: 0, ..Default::default() }, &vocab).unwrap();
    assert_eq!((res.src, res.target.clone(), res.trace.len()), (src, mt, 0));
    assert_eq!(res.loss_before, res.loss_after);
}

#[test]
fn attack_keeps_gold_and_specials_out() {
    let m = small(7, 11);
    let vocab: Vec<TokenId> = (5..11).map(TokenId).collect();
    let mut r = ChaCha8Rng::seed_from_u64(7);
    for i in 0..20 {
        let src = random_ids(&mut r, 11, 3, 6);
        let mt = MaskedTarget::sample(&random_ids(&mut r, 11, 3, 6), &mut r);
        let cfg = NatAttackConfig { steps: 3, top_k: 4, allowed_ops: OpSet::ALL, seed: i };
        let res = nat_attack(&m, &src, &mt, &cfg, &vocab).unwrap();
        assert_eq!(res.target.gold, mt.gold);
        assert_eq!(res.target.masked_count(), mt.masked_count());
        assert_eq!(res.trace.len(), 3);
        assert!(res.src.ids().iter().all(|t| !t.is_special()));
        assert!(res.target.input.ids().iter().all(|t| *t == TokenId::MASK || !t.is_special()));
        assert_eq!(res, nat_attack(&m, &src, &mt, &cfg, &vocab).unwrap());
        if mt.residual_count() == 0 {
            assert!(res.trace.iter().all(|(s, _)| *s == Side::Encoder));
        }
    }
}

#[test]
fn bleu_hand_worked_two_sentences() {
    // p1 = 8/9, p2 = 6/8, p3 = 3/6, p4 = 1/4 after add-one smoothing above
    // unigrams; c = 9, r = 10. Product of precisions is 1/12.
    let w = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
    let hyps = vec![w("the cat sat on the mat"), w("a dog runs")];
    let refs = vec![w("the cat is on the mat"), w("a dog runs fast")];
    let expected = 100.0 * (-1.0f64 / 9.0).exp() * 12f64.powf(-0.25);
    assert!((expected - 48.078_371_183).abs() < 1e-6);
    assert!((bleu(&hyps, &refs).unwrap() - expected).abs() < 1e-6);
}

#[test]
fn bleu_edge_cases() {
    let refs = vec![vec![1, 2, 3, 4, 5], vec![6, 7]];
    assert_eq!(bleu(&refs, &refs).unwrap(), 100.0);
    assert_eq!(bleu(&[vec![9, 9, 9]], &[vec![1, 2, 3]]).unwrap(), 0.0);
    assert_eq!(bleu::<u32>(&[], &[]).unwrap_err(), Error::EmptyCorpus);
    assert!(bleu(&[vec![1]], &[vec![1], vec![2]]).is_err());
    let longer = bleu(&[vec![1, 2, 3, 4, 5, 6]], &[vec![1, 2, 3, 4, 5]]).unwrap();
    assert!(longer < 100.0 && longer > 0.0);
}

#[test]
fn trained_translator_beats_chance_on_a_tiny_bitext() {
    let g = BitextGrammar::default();
    let vocab = g.vocab();
    let train = g.generate(1, 60);
    let cfg = NatTrainConfig { epochs: 3, seed: 1, ..Default::default() };
    let (m, stats) = nat_train(&train, NatConfig { dim: 16, ffn_dim: 32, ..NatConfig::new(vocab.len()) }, &cfg).unwrap();
    assert_eq!(stats.epoch_losses.len(), 3);
    assert!(stats.epoch_losses[2] < stats.epoch_losses[0]);
    let (m2, _) = nat_train(&train, NatConfig { dim: 16, ffn_dim: 32, ..NatConfig::new(vocab.len()) }, &cfg).unwrap();
    assert_eq!(m.params().params()[0].value, m2.params().params()[0].value);
    assert!(nat_train(&[], NatConfig::new(vocab.len()), &cfg).is_err());
}

struct Trained {
    model: Seq2SeqModel,
    test: Vec<vlattack_core::text::BitextPair>,
    source_vocab: Vec<TokenId>,
}

fn trained() -> &'static Trained {
    static T: std::sync::OnceLock<Trained> = std::sync::OnceLock::new();
    T.get_or_init(|| {
        let g = BitextGrammar::default();
        let vocab = g.vocab();
        let cfg = NatTrainConfig { epochs: 25, seed: 2, ..Default::default() };
        let (model, _) = nat_train(&g.generate(11, 600), NatConfig::new(vocab.len()), &cfg).unwrap();
        Trained { model, test: g.generate(12, 200), source_vocab: g.source_ids(&vocab) }
    })
}

/// Fraction of reference positions reproduced, over the longer length.
fn positional_accuracy(hyp: &TokenSeq, reference: &TokenSeq) -> f64 {
    let hits = hyp.ids().iter().zip(reference.ids()).filter(|(a, b)| a == b).count();
    hits as f64 / hyp.len().max(reference.len()) as f64
}

#[test]
fn forcing_the_gold_length_does_not_hurt_decoding() {
    let t = trained();
    let n = t.test.len() as f64;
    let (mut gold, mut predicted) = (0.0, 0.0);
    for p in &t.test {
        gold += positional_accuracy(&decode_with_length(&t.model, &p.src, p.tgt.len(), 4), &p.tgt) / n;
        predicted += positional_accuracy(&mask_predict_decode(&t.model, &p.src, 4), &p.tgt) / n;
    }
    assert!(gold >= predicted, "gold-length accuracy {gold} < predicted-length accuracy {predicted}");
}

#[test]
fn single_step_attacks_raise_the_masked_loss() {
    let t = trained();
    let mut raised = 0;
    for (i, p) in t.test.iter().enumerate() {
        let mut r = ChaCha8Rng::seed_from_u64(i as u64);
        let target = MaskedTarget::sample(&p.tgt, &mut r);
        let cfg = NatAttackConfig { steps: 1, seed: i as u64, ..Default::default() };
        let res = nat_attack(&t.model, &p.src, &target, &cfg, &t.source_vocab).unwrap();
        raised += usize::from(res.loss_after >= res.loss_before);
    }
    assert_eq!(t.test.len(), 200);
    assert!(raised >= 180, "{raised}/200 attacks raised the loss");
}
