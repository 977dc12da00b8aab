//! A victim whose loss is linear in the input embeddings.
//!
//! `score(x) = w · mean(e(x_i))` over every position except `[PAD]` and
//! `[CLS]`, and the loss is the margin `−(2y − 1)·score`. First-order edit
//! scores are exact for this family, which turns the engine's selection rules
//! into checkable equalities against true-loss enumeration.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{softmax, Tensor};
use crate::rng::seeded;
use crate::text::{TokenId, TokenSeq};
use crate::victim::{CandidateSet, GradientView, Prediction, Victim};

#[derive(Clone, Debug)]
pub struct LinearVictim {
    embeddings: Tensor,
    weights: Vec<f64>,
    /// Context-free stand-in for a language model: candidates are ranked by
    /// this per-token score.
    lm_scores: Vec<f64>,
    max_len: usize,
}

impl LinearVictim {
    pub fn new(embeddings: Tensor, weights: Vec<f64>, lm_scores: Vec<f64>, max_len: usize) -> Self {
        assert_eq!(embeddings.cols(), weights.len());
        assert_eq!(embeddings.rows(), lm_scores.len());
        Self { embeddings, weights, lm_scores, max_len }
    }

    pub fn random(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let emb: Vec<f64> = (0..vocab_size * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let weights = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lm = (0..vocab_size).map(|_| rng.gen_range(0.0..1.0)).collect();
        Self::new(Tensor::matrix(vocab_size, dim, emb), weights, lm, 64)
    }

    fn counted(id: TokenId) -> bool {
        id != TokenId::PAD && id != TokenId::CLS
    }

    pub fn score(&self, x: &TokenSeq) -> f64 {
        let n = x.ids().iter().filter(|&&id| Self::counted(id)).count();
        if n == 0 {
            return 0.0;
        }
        let mut mean = alloc::vec![0.0; self.weights.len()];
        for &id in x.ids().iter().filter(|&&id| Self::counted(id)) {
            for (m, e) in mean.iter_mut().zip(self.embeddings.row(id.index())) {
                *m += e;
            }
        }
        mean.iter().zip(&self.weights).map(|(m, w)| m / n as f64 * w).sum()
    }

    fn sign(y: usize) -> f64 {
        if y == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

impl Victim for LinearVictim {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn vocab_size(&self) -> usize {
        self.embeddings.rows()
    }

    fn max_len(&self) -> usize {
        self.max_len
    }

    fn embedding(&self, token: TokenId) -> &[f64] {
        self.embeddings.row(token.index())
    }

    fn loss(&self, x: &TokenSeq, y: usize) -> f64 {
        -Self::sign(y) * self.score(x)
    }

    fn loss_and_grads(&self, x: &TokenSeq, y: usize) -> (f64, GradientView) {
        let n = x.ids().iter().filter(|&&id| Self::counted(id)).count().max(1);
        let row: Vec<f64> = self.weights.iter().map(|w| -Self::sign(y) * w / n as f64).collect();
        let mut grads = Tensor::zeros(&[x.len(), self.dim()]);
        for (i, &id) in x.ids().iter().enumerate() {
            if Self::counted(id) {
                grads.row_mut(i).copy_from_slice(&row);
            }
        }
        (self.loss(x, y), GradientView(grads))
    }

    fn predict(&self, x: &TokenSeq) -> Prediction {
        let s = self.score(x);
        let probs = softmax(&[-s, s]);
        let label = usize::from(s > 0.0);
        Prediction { label, probs }
    }

    fn candidates(&self, x: &TokenSeq, pos: usize, k: usize) -> Result<CandidateSet> {
        let current = x.get(pos).ok_or(Error::IllegalPosition(pos))?;
        if current == TokenId::CLS || current == TokenId::PAD {
            return Err(Error::IllegalPosition(pos));
        }
        let mut ids: Vec<TokenId> = self.content_ids().filter(|&t| t != current).collect();
        ids.sort_by(|a, b| {
            self.lm_scores[b.index()]
                .total_cmp(&self.lm_scores[a.index()])
                .then(a.cmp(b))
        });
        ids.truncate(k);
        Ok(CandidateSet { tokens: ids, uniform_fallback: false })
    }
}
