//! Deterministic synthetic corpora.
//!
//! Classification sentences mix planted polarity adjectives (optionally
//! negated by a preceding `not`) with neutral filler; the label is the sign of
//! the net polarity. Translation pairs come from a fixed word-level
//! transducer with a dictionary, an adjective/noun swap and two-token
//! expansions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::vocab::{tokenize, tokenize_plain, BitextPair, LabeledExample, TokenSeq, Vocab};
use crate::rng::seeded;

const POSITIVE: [&str; 24] = [
    "good", "great", "excellent", "wonderful", "superb", "brilliant", "delightful", "charming",
    "lovely", "enjoyable", "fantastic", "terrific", "splendid", "marvelous", "pleasant",
    "amazing", "outstanding", "beautiful", "fine", "solid", "gripping", "moving", "clever",
    "fresh",
];

const NEGATIVE: [&str; 24] = [
    "bad", "awful", "terrible", "horrible", "dreadful", "boring", "dull", "poor", "weak",
    "tedious", "lousy", "mediocre", "bland", "clumsy", "messy", "painful", "ugly", "annoying",
    "stale", "sloppy", "shallow", "lame", "dire", "flat",
];

const NEGATION: &str = "not";

const FILLER: &[&str] = &[
    "the", "a", "an", "this", "that", "movie", "film", "plot", "story", "acting", "cast",
    "director", "scene", "scenes", "ending", "music", "script", "camera", "actor", "actress",
    "character", "characters", "dialogue", "pace", "screen", "studio", "sequel", "version",
    "audience", "critic", "season", "episode", "show", "series", "drama", "comedy", "thriller",
    "picture", "role", "hero", "villain", "soundtrack", "effects", "budget", "set", "costume",
    "frame", "shot", "was", "is", "were", "felt", "seemed", "looked", "became", "remains",
    "stays", "with", "and", "but", "of", "in", "on", "at", "for", "by", "to", "from", "about",
    "after", "before", "during", "overall", "really", "quite", "rather", "somewhat", "simply",
    "mostly", "just", "also", "still", "again", "even", "here", "there", "then", "now", "today",
    "yesterday", "it", "its", "they", "their", "we", "our", "i", "my", "you", "your", "he",
    "she", "his", "her", "one", "two", "three", "some", "many", "few", "every", "whole",
    "entire", "first", "last", "final", "new", "old", "long", "short", "night",
];

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Polarity {
    Negative,
    Positive,
}

/// Parameters of the classification generator.
#[derive(Clone, Debug)]
pub struct ClassificationGrammar {
    pub min_len: usize,
    pub max_len: usize,
    /// Net polarity of a sentence is drawn from `1..=max_margin`.
    pub max_margin: usize,
    /// Upper bound on opposite-polarity adjectives added on top of the margin.
    pub max_minority: usize,
    /// Probability that a polarity unit is written as `not` + opposite adjective.
    pub negation_rate: f64,
}

impl Default for ClassificationGrammar {
    fn default() -> Self {
        Self { min_len: 8, max_len: 24, max_margin: 2, max_minority: 0, negation_rate: 0.2 }
    }
}

impl ClassificationGrammar {
    pub fn vocab(&self) -> Vocab {
        let words = POSITIVE
            .iter()
            .chain(NEGATIVE.iter())
            .chain(core::iter::once(&NEGATION))
            .chain(FILLER.iter());
        Vocab::new(words).expect("built-in word lists are valid")
    }

    pub fn positive_words(&self) -> &'static [&'static str] {
        &POSITIVE
    }

    pub fn negative_words(&self) -> &'static [&'static str] {
        &NEGATIVE
    }

    pub fn negation_word(&self) -> &'static str {
        NEGATION
    }

    pub fn filler_words(&self) -> &'static [&'static str] {
        &FILLER
    }

    pub fn polarity(&self, word: &str) -> Option<Polarity> {
        if POSITIVE.contains(&word) {
            Some(Polarity::Positive)
        } else if NEGATIVE.contains(&word) {
            Some(Polarity::Negative)
        } else {
            None
        }
    }

    /// Net polarity: each adjective counts ±1, flipped when directly preceded
    /// by `not`.
    pub fn net_polarity<'a, I>(&self, words: I) -> i64
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut prev_not = false;
        let mut net = 0i64;
        for w in words {
            if let Some(p) = self.polarity(w) {
                let sign = if p == Polarity::Positive { 1 } else { -1 };
                net += if prev_not { -sign } else { sign };
            }
            prev_not = w == NEGATION;
        }
        net
    }

    /// Reference labeler: 1 for positive net polarity, 0 for negative, `None`
    /// on a tie.
    pub fn label_of<'a, I>(&self, words: I) -> Option<usize>
    where
        I: IntoIterator<Item = &'a str>,
    {
        match self.net_polarity(words) {
            n if n > 0 => Some(1),
            n if n < 0 => Some(0),
            _ => None,
        }
    }

    /// Generates one sentence with the requested label before noise.
    pub fn sentence<R: Rng>(&self, label: usize, rng: &mut R) -> String {
        let len = rng.gen_range(self.min_len..=self.max_len);
        let margin = rng.gen_range(1..=self.max_margin);
        let minority = rng.gen_range(0..=self.max_minority);
        let main = if label == 1 { Polarity::Positive } else { Polarity::Negative };
        let other = if label == 1 { Polarity::Negative } else { Polarity::Positive };

        let mut chunks: Vec<Vec<&str>> = Vec::new();
        let mut used = 0;
        let polar = core::iter::repeat(main)
            .take(margin + minority)
            .chain(core::iter::repeat(other).take(minority));
        for p in polar {
            let negated = rng.gen_bool(self.negation_rate) && used + 2 <= len;
            let chunk = if negated {
                vec![NEGATION, pick(flip(p), rng)]
            } else {
                vec![pick(p, rng)]
            };
            used += chunk.len();
            chunks.push(chunk);
        }
        while used < len {
            chunks.push(vec![*FILLER.choose(rng).unwrap()]);
            used += 1;
        }
        chunks.shuffle(rng);
        chunks.concat().join(" ")
    }
}

fn flip(p: Polarity) -> Polarity {
    match p {
        Polarity::Positive => Polarity::Negative,
        Polarity::Negative => Polarity::Positive,
    }
}

fn pick<R: Rng>(p: Polarity, rng: &mut R) -> &'static str {
    match p {
        Polarity::Positive => POSITIVE.choose(rng).unwrap(),
        Polarity::Negative => NEGATIVE.choose(rng).unwrap(),
    }
}

/// Balanced synthetic sentiment data over [`ClassificationGrammar::vocab`].
pub fn synth_classification(seed: u64, n: usize, noise_rate: f64) -> Vec<LabeledExample> {
    ClassificationGrammar::default().generate(seed, n, noise_rate)
}

impl ClassificationGrammar {
    pub fn generate(&self, seed: u64, n: usize, noise_rate: f64) -> Vec<LabeledExample> {
        let vocab = self.vocab();
        let mut rng = seeded(seed);
        let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        labels.shuffle(&mut rng);
        labels
            .into_iter()
            .map(|label| {
                let text = self.sentence(label, &mut rng);
                let y = if noise_rate > 0.0 && rng.gen_bool(noise_rate.min(1.0)) {
                    1 - label
                } else {
                    label
                };
                LabeledExample { x: tokenize(&text, &vocab).expect("non-empty sentence"), y }
            })
            .collect()
    }
}

/// Parameters of the translation transducer and its sampler.
#[derive(Clone, Debug)]
pub struct BitextGrammar {
    pub plain_words: usize,
    pub adjectives: usize,
    pub expandable: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a pair contains at least one expandable token.
    pub expand_rate: f64,
    pub adjective_rate: f64,
}

impl Default for BitextGrammar {
    fn default() -> Self {
        Self {
            plain_words: 30,
            adjectives: 10,
            expandable: 6,
            min_len: 3,
            max_len: 8,
            expand_rate: 0.4,
            adjective_rate: 0.25,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum SrcClass {
    Plain(usize),
    Adjective(usize),
    Expandable(usize),
}

impl BitextGrammar {
    fn source_words(&self) -> Vec<String> {
        let mut w = Vec::new();
        w.extend((0..self.plain_words).map(|i| format!("s_w{i:02}")));
        w.extend((0..self.adjectives).map(|i| format!("s_a{i:02}")));
        w.extend((0..self.expandable).map(|i| format!("s_x{i:02}")));
        w
    }

    fn target_words(&self) -> Vec<String> {
        let mut w = Vec::new();
        w.extend((0..self.plain_words).map(|i| format!("t_w{i:02}")));
        w.extend((0..self.adjectives).map(|i| format!("t_a{i:02}")));
        for i in 0..self.expandable {
            w.push(format!("t_x{i:02}"));
            w.push(format!("t_y{i:02}"));
        }
        w
    }

    pub fn vocab(&self) -> Vocab {
        let mut words = self.source_words();
        words.extend(self.target_words());
        Vocab::new(words).expect("generated word lists are valid")
    }

    fn class_of(word: &str) -> Option<SrcClass> {
        let idx = |s: &str| s.parse::<usize>().ok();
        if let Some(rest) = word.strip_prefix("s_w") {
            idx(rest).map(SrcClass::Plain)
        } else if let Some(rest) = word.strip_prefix("s_a") {
            idx(rest).map(SrcClass::Adjective)
        } else if let Some(rest) = word.strip_prefix("s_x") {
            idx(rest).map(SrcClass::Expandable)
        } else {
            None
        }
    }

    fn emit(class: SrcClass, out: &mut Vec<String>) {
        match class {
            SrcClass::Plain(i) => out.push(format!("t_w{i:02}")),
            SrcClass::Adjective(i) => out.push(format!("t_a{i:02}")),
            SrcClass::Expandable(i) => {
                out.push(format!("t_x{i:02}"));
                out.push(format!("t_y{i:02}"));
            }
        }
    }

    /// Applies the transducer to a source sentence. Unknown words are dropped.
    pub fn translate(&self, src: &str) -> String {
        let classes: Vec<SrcClass> = src.split_whitespace().filter_map(Self::class_of).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < classes.len() {
            match (classes[i], classes.get(i + 1)) {
                (SrcClass::Adjective(_), Some(&next @ SrcClass::Plain(_))) => {
                    Self::emit(next, &mut out);
                    Self::emit(classes[i], &mut out);
                    i += 2;
                }
                (c, _) => {
                    Self::emit(c, &mut out);
                    i += 1;
                }
            }
        }
        out.join(" ")
    }

    pub fn source_sentence<R: Rng>(&self, rng: &mut R) -> String {
        let len = rng.gen_range(self.min_len..=self.max_len);
        let expansions = if rng.gen_bool(self.expand_rate) {
            if rng.gen_bool(0.25) && len >= 2 {
                2
            } else {
                1
            }
        } else {
            0
        };
        let mut words: Vec<String> = (0..expansions)
            .map(|_| format!("s_x{:02}", rng.gen_range(0..self.expandable)))
            .collect();
        while words.len() < len {
            let w = if rng.gen_bool(self.adjective_rate) {
                format!("s_a{:02}", rng.gen_range(0..self.adjectives))
            } else {
                format!("s_w{:02}", rng.gen_range(0..self.plain_words))
            };
            words.push(w);
        }
        words.shuffle(rng);
        words.join(" ")
    }

    pub fn generate(&self, seed: u64, n: usize) -> Vec<BitextPair> {
        let vocab = self.vocab();
        let mut rng = seeded(seed);
        (0..n)
            .map(|_| {
                let src = self.source_sentence(&mut rng);
                let tgt = self.translate(&src);
                BitextPair {
                    src: tokenize_plain(&src, &vocab).expect("non-empty source"),
                    tgt: tokenize_plain(&tgt, &vocab).expect("non-empty target"),
                }
            })
            .collect()
    }

    /// Number of expandable tokens in a source sequence.
    pub fn expansions_in(&self, src: &TokenSeq, vocab: &Vocab) -> usize {
        src.ids()
            .iter()
            .filter(|&&id| {
                vocab.token(id).and_then(Self::class_of).map_or(false, |c| {
                    matches!(c, SrcClass::Expandable(_))
                })
            })
            .count()
    }

    /// Ids of all source-side words.
    pub fn source_ids(&self, vocab: &Vocab) -> Vec<crate::TokenId> {
        self.source_words().iter().filter_map(|w| vocab.id(w)).collect()
    }
}

/// Synthetic translation pairs from [`BitextGrammar::default`].
pub fn synth_bitext(seed: u64, n: usize) -> Vec<BitextPair> {
    BitextGrammar::default().generate(seed, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{detokenize, normalize};

    #[test]
    fn tiny_set_is_balanced() {
        let data = synth_classification(1, 4, 0.0);
        assert_eq!(data.len(), 4);
        assert_eq!(data.iter().filter(|e| e.y == 1).count(), 2);
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(synth_classification(9, 50, 0.1), synth_classification(9, 50, 0.1));
        assert_eq!(synth_bitext(9, 50), synth_bitext(9, 50));
        assert_ne!(synth_classification(9, 50, 0.0), synth_classification(10, 50, 0.0));
    }

    #[test]
    fn lengths_and_balance() {
        let g = ClassificationGrammar::default();
        let data = g.generate(3, 1000, 0.1);
        for ex in &data {
            let n = ex.x.len() - 1;
            assert!((8..=24).contains(&n), "length {n}");
        }
        let pos = data.iter().filter(|e| e.y == 1).count() as f64 / data.len() as f64;
        assert!((pos - 0.5).abs() <= 0.05);
    }

    #[test]
    fn detokenize_round_trip() {
        let g = ClassificationGrammar::default();
        let vocab = g.vocab();
        let mut rng = seeded(11);
        for i in 0..100 {
            let s = g.sentence(i % 2, &mut rng);
            let seq = tokenize(&s, &vocab).unwrap();
            assert_eq!(detokenize(&seq, &vocab), normalize(&s));
        }
    }

    /// Noise-free data is separable by a perceptron over counts of effective
    /// polarity units (`not` + adjective counted as one unit of the flipped
    /// polarity).
    #[test]
    fn noise_free_data_is_separable_on_keyword_counts() {
        let g = ClassificationGrammar::default();
        let vocab = g.vocab();
        let data = g.generate(5, 600, 0.0);
        let features = |ex: &LabeledExample| -> [f64; 3] {
            let words: Vec<&str> = ex.x.ids()[1..].iter().map(|&i| vocab.token(i).unwrap()).collect();
            let (mut pos, mut neg) = (0.0, 0.0);
            for (k, w) in words.iter().enumerate() {
                let negated = k > 0 && words[k - 1] == "not";
                match (g.polarity(w), negated) {
                    (Some(Polarity::Positive), false) | (Some(Polarity::Negative), true) => pos += 1.0,
                    (Some(_), _) => neg += 1.0,
                    _ => {}
                }
            }
            [pos, neg, 1.0]
        };
        let mut w = [0.0f64; 3];
        for _ in 0..50 {
            for ex in &data {
                let f = features(ex);
                let s: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
                let t = if ex.y == 1 { 1.0 } else { -1.0 };
                if s * t <= 0.0 {
                    for k in 0..3 {
                        w[k] += t * f[k];
                    }
                }
            }
        }
        let correct = data
            .iter()
            .filter(|ex| {
                let s: f64 = features(ex).iter().zip(&w).map(|(a, b)| a * b).sum();
                (s > 0.0) == (ex.y == 1)
            })
            .count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn labels_follow_reference_rule_without_noise() {
        let g = ClassificationGrammar::default();
        let vocab = g.vocab();
        for ex in g.generate(8, 300, 0.0) {
            let words = ex.x.ids()[1..].iter().map(|&i| vocab.token(i).unwrap());
            assert_eq!(g.label_of(words), Some(ex.y));
        }
    }

    /// Independent re-implementation of the transducer rules over token strings.
    fn reference_transduce(src: &[&str]) -> Vec<String> {
        let tr = |w: &str| -> Vec<String> {
            let (kind, idx) = w.split_at(3);
            match kind {
                "s_w" => vec![format!("t_w{idx}")],
                "s_a" => vec![format!("t_a{idx}")],
                "s_x" => vec![format!("t_x{idx}"), format!("t_y{idx}")],
                _ => unreachable!(),
            }
        };
        let mut out = Vec::new();
        let mut i = 0;
        while i < src.len() {
            if src[i].starts_with("s_a") && i + 1 < src.len() && src[i + 1].starts_with("s_w") {
                out.extend(tr(src[i + 1]));
                out.extend(tr(src[i]));
                i += 2;
            } else {
                out.extend(tr(src[i]));
                i += 1;
            }
        }
        out
    }

    #[test]
    fn bitext_matches_reference_transducer() {
        let g = BitextGrammar::default();
        let vocab = g.vocab();
        let pairs = g.generate(2, 500);
        let mut expanded = 0;
        for p in &pairs {
            let src: Vec<&str> = p.src.ids().iter().map(|&i| vocab.token(i).unwrap()).collect();
            let tgt: Vec<&str> = p.tgt.ids().iter().map(|&i| vocab.token(i).unwrap()).collect();
            assert_eq!(reference_transduce(&src), tgt);
            let k = g.expansions_in(&p.src, &vocab);
            assert_eq!(p.tgt.len(), p.src.len() + k);
            if k > 0 {
                expanded += 1;
            }
        }
        let frac = expanded as f64 / pairs.len() as f64;
        assert!((0.3..0.5).contains(&frac), "expanded fraction {frac}");
    }
}
