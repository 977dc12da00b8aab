use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlattack_core::advtrain::*;
use vlattack_core::attack::{AttackConfig, AttackMode};
use vlattack_core::classifier::{continue_training, finetune, ClassifierConfig, TrainConfig};
use vlattack_core::linear::LinearVictim;
use vlattack_core::text::{word_levenshtein, ClassificationGrammar, LabeledExample, TokenId, TokenSeq};
use vlattack_core::victim::Victim;
use vlattack_core::Error;

fn linear_trainset(m: &LinearVictim, seed: u64, n: usize) -> Vec<LabeledExample> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut ids = vec![TokenId::CLS];
            ids.extend((0..r.gen_range(3..12)).map(|_| TokenId(r.gen_range(5..30))));
            let x = TokenSeq::new(ids).unwrap();
            // A quarter of the set is mislabeled so the misclassified path is exercised.
            let y = m.predict(&x).label ^ usize::from(r.gen_bool(0.25));
            LabeledExample { x, y }
        })
        .collect()
}

#[test]
fn zero_budget_reproduces_the_original_set() {
    let m = LinearVictim::random(30, 4, 1);
    let train = linear_trainset(&m, 1, 40);
    let cfg = AttackConfig { budget_fraction: 0.01, ..Default::default() };
    let aug = generate_adv_trainset(&m, &train, &cfg).unwrap();
    assert_eq!(aug.labeled(), train);
    assert_eq!(aug.adversarial_count(), 0);
    assert_eq!(aug.ratio(), 0.0);
}

#[test]
fn adversarial_members_keep_labels_and_provenance() {
    let m = LinearVictim::random(30, 4, 2);
    let train = linear_trainset(&m, 2, 60);
    let cfg = AttackConfig { budget_fraction: 0.5, sim_threshold: 0.0, top_k: 8, ..Default::default() };
    let aug = generate_adv_trainset(&m, &train, &cfg).unwrap();
    assert_eq!(&aug.labeled()[..train.len()], &train[..]);
    assert!(aug.adversarial_count() > 0);
    let attackable = train.iter().filter(|e| m.predict(&e.x).label == e.y).count();
    assert_eq!(aug.attackable, attackable);
    assert_eq!(aug.ratio(), aug.successes as f64 / attackable as f64);
    assert_eq!(aug.successes, aug.adversarial_count());
    for a in &aug.examples[train.len()..] {
        let src = &train[a.provenance.unwrap()];
        assert_eq!(a.example.y, src.y);
        assert_ne!(m.predict(&a.example.x).label, src.y);
        assert!(word_levenshtein(src.x.ids(), a.example.x.ids()) >= 1);
    }
}

#[test]
fn augmentation_requires_until_success() {
    let m = LinearVictim::random(30, 4, 3);
    let cfg = AttackConfig { mode: AttackMode::FixedSteps(2), ..Default::default() };
    assert!(matches!(generate_adv_trainset(&m, &[], &cfg), Err(Error::Config(_))));
}

#[test]
fn schedule_scales_epochs_and_rate() {
    let base = TrainConfig { epochs: 10, lr: 1e-3, ..Default::default() };
    let s = AdvTrainConfig::default().schedule(&base);
    assert_eq!(s.epochs, 3);
    assert!((s.lr - 1e-4).abs() < 1e-18);
    assert_eq!(AdvTrainConfig::default().schedule(&TrainConfig { epochs: 1, ..base }).epochs, 1);
}

#[test]
fn no_adversarial_members_is_plain_continued_training() {
    let g = ClassificationGrammar { max_len: 10, ..Default::default() };
    let vocab = g.vocab();
    let train = g.generate(4, 40, 0.0);
    let arch = ClassifierConfig { dim: 16, ffn_dim: 32, layers: 1, ..ClassifierConfig::new(vocab.len()) };
    let base = TrainConfig { epochs: 4, seed: 4, ..Default::default() };
    let model = finetune(&train, arch, &base).unwrap();
    let aug = AugmentedDataset::from_original(&train);
    let a = adv_finetune(&model, &aug, &base, &AdvTrainConfig::default()).unwrap();
    let mut b = model.clone();
    continue_training(&mut b, &train, &AdvTrainConfig::default().schedule(&base)).unwrap();
    assert_eq!(a.params(), b.params());
    assert!(adv_finetune(&model, &AugmentedDataset::default(), &base, &AdvTrainConfig::default()).is_err());
}

#[test]
fn robustness_is_a_pure_function() {
    let m = LinearVictim::random(30, 4, 5);
    let test = linear_trainset(&m, 5, 30);
    let cfg = AttackConfig { top_k: 6, ..Default::default() };
    let a = robustness(&m, &test, &cfg).unwrap();
    assert_eq!(a, robustness(&m, &test, &cfg).unwrap());
    assert!(a.robust_accuracy <= a.clean_accuracy);
}
