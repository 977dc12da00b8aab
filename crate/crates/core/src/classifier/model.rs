use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    matmul_bt, positional_encoding, softmax, softmax_cross_entropy, EncoderCache, EncoderLayer, Grads, LayerNorm,
    LayerNormCache, Linear, ParamId, ParamStore, Tape, Tensor,
};
use crate::rng::seeded;
use crate::text::{TokenId, TokenSeq};
use crate::victim::{CandidateSet, GradientView, Prediction, Victim};

/// Architecture descriptor for [`ClassifierModel`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub layers: usize,
    pub num_classes: usize,
    pub max_len: usize,
}

impl ClassifierConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size, dim: 64, heads: 2, ffn_dim: 128, layers: 2, num_classes: 2, max_len: 64 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || self.dim % self.heads != 0 {
            return Err(Error::Config(format!("dim {} not divisible by heads {}", self.dim, self.heads)));
        }
        if self.vocab_size <= crate::text::SPECIAL_TOKENS.len() || self.num_classes < 2 || self.max_len < 2 {
            return Err(Error::Config("degenerate classifier architecture".into()));
        }
        Ok(())
    }
}

/// What a forward pass is trained or scored against.
#[derive(Clone, Copy, Debug, Default)]
pub struct Objective<'a> {
    /// Classification target.
    pub label: Option<usize>,
    /// `(position, original token)` pairs predicted by the MLM head.
    pub mlm_targets: &'a [(usize, TokenId)],
    /// Weight of the mean MLM cross-entropy.
    pub mlm_weight: f64,
}

impl<'a> Objective<'a> {
    pub fn classify(label: usize) -> Self {
        Self { label: Some(label), mlm_targets: &[], mlm_weight: 0.0 }
    }
}

/// Cached activations of one forward pass, consumed by backward.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    ids: Vec<TokenId>,
    pool_rows: Vec<usize>,
    layers: Vec<EncoderCache>,
    final_ln: LayerNormCache,
    hidden: Tensor,
    pooled: Tensor,
    dlogits: Option<Vec<f64>>,
    /// `(position, weighted ∂loss/∂mlm_logits)`.
    dmlm: Vec<(usize, Vec<f64>)>,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub loss: f64,
    pub logits: Vec<f64>,
}

/// Transformer encoder classifier with a masked-LM head whose output matrix is
/// the input embedding table.
#[derive(Clone, Debug)]
pub struct ClassifierModel {
    pub config: ClassifierConfig,
    params: ParamStore,
    embed: ParamId,
    layers: Vec<EncoderLayer>,
    final_ln: LayerNorm,
    head: Linear,
    mlm_bias: ParamId,
    positions: Tensor,
    /// False when the MLM objective was disabled during training.
    pub mlm_trained: bool,
    /// Accuracy on the clean training set, recorded by fine-tuning.
    pub clean_accuracy: Option<f64>,
}

impl ClassifierModel {
    pub fn new(config: ClassifierConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(seed);
        let mut ps = ParamStore::new();
        let embed = ps.uniform("embed", &[config.vocab_size, config.dim], &mut rng);
        let layers = (0..config.layers)
            .map(|l| EncoderLayer::new(&mut ps, &format!("enc{l}"), config.dim, config.heads, config.ffn_dim, &mut rng))
            .collect();
        let final_ln = LayerNorm::new(&mut ps, "final_ln", config.dim);
        let head = Linear::new(&mut ps, "head", config.dim, config.num_classes, &mut rng);
        let mlm_bias = ps.constant("mlm.bias", &[config.vocab_size], 0.0);
        let positions = positional_encoding(config.max_len, config.dim);
        Ok(Self {
            config,
            params: ps,
            embed,
            layers,
            final_ln,
            head,
            mlm_bias,
            positions,
            mlm_trained: false,
            clean_accuracy: None,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn embed_id(&self) -> ParamId {
        self.embed
    }

    fn position_row(&self, pos: usize) -> Vec<f64> {
        if pos < self.positions.rows() {
            self.positions.row(pos).to_vec()
        } else {
            positional_encoding(pos + 1, self.config.dim).row(pos).to_vec()
        }
    }

    fn check(&self, x: &TokenSeq) {
        assert!(
            x.ids().iter().all(|t| t.index() < self.config.vocab_size),
            "token id out of range for model vocabulary"
        );
    }

    /// Multiplier applied to embedding rows on input so they are not swamped
    /// by the unit-scale positional encodings.
    pub fn embed_scale(&self) -> f64 {
        libm::sqrt(self.config.dim as f64)
    }

    /// Encoder input rows `s·e(x_i) + pe(i)`.
    fn input_rows(&self, ids: &[TokenId]) -> Tensor {
        let d = self.config.dim;
        let scale = self.embed_scale();
        let emb = self.params.get(self.embed);
        let mut h = Tensor::zeros(&[ids.len(), d]);
        for (i, id) in ids.iter().enumerate() {
            let pe = self.position_row(i);
            for ((o, e), p) in h.row_mut(i).iter_mut().zip(emb.row(id.index())).zip(&pe) {
                *o = scale * e + p;
            }
        }
        h
    }

    /// Final hidden states plus the per-layer caches.
    fn encode(&self, ids: &[TokenId]) -> (Tensor, Vec<EncoderCache>, LayerNormCache) {
        let mask: Vec<bool> = ids.iter().map(|&t| t == TokenId::PAD).collect();
        let mut h = self.input_rows(ids);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, c) = layer.forward(&self.params, &h, &mask);
            h = out;
            caches.push(c);
        }
        let (hidden, ln) = self.final_ln.forward(&self.params, &h);
        (hidden, caches, ln)
    }

    fn mlm_logits(&self, hidden_row: &[f64]) -> Vec<f64> {
        let v = self.config.vocab_size;
        let mut logits = matmul_bt(hidden_row, self.params.get(self.embed).data(), 1, self.config.dim, v);
        for (l, b) in logits.iter_mut().zip(self.params.get(self.mlm_bias).data()) {
            *l += b;
        }
        logits
    }

    fn pool(&self, ids: &[TokenId], hidden: &Tensor) -> (Vec<usize>, Tensor) {
        let rows: Vec<usize> = (0..ids.len()).filter(|&i| ids[i] != TokenId::PAD).collect();
        let mut pooled = Tensor::zeros(&[1, self.config.dim]);
        if !rows.is_empty() {
            let inv = 1.0 / rows.len() as f64;
            for &r in &rows {
                for (p, h) in pooled.data_mut().iter_mut().zip(hidden.row(r)) {
                    *p += h * inv;
                }
            }
        }
        (rows, pooled)
    }

    /// Runs the network on `x` and records the cache needed by
    /// [`ClassifierModel::backward`].
    pub fn forward(&self, x: &TokenSeq, objective: &Objective<'_>, tape: &mut Tape<ForwardCache>) -> Result<ForwardOutput> {
        self.check(x);
        let ids = x.ids().to_vec();
        let (hidden, layers, final_ln) = self.encode(&ids);
        let (pool_rows, pooled) = self.pool(&ids, &hidden);
        let logits = self.head.forward(&self.params, &pooled).into_data();
        let mut loss = 0.0;
        let mut dlogits = None;
        if let Some(y) = objective.label {
            if y >= self.config.num_classes {
                return Err(Error::Config(format!("label {y} out of range")));
            }
            let (l, g) = softmax_cross_entropy(&logits, y);
            loss += l;
            dlogits = Some(g);
        }
        let mut dmlm = Vec::with_capacity(objective.mlm_targets.len());
        if !objective.mlm_targets.is_empty() && objective.mlm_weight != 0.0 {
            let w = objective.mlm_weight / objective.mlm_targets.len() as f64;
            for &(pos, target) in objective.mlm_targets {
                let (l, mut g) = softmax_cross_entropy(&self.mlm_logits(hidden.row(pos)), target.index());
                loss += w * l;
                g.iter_mut().for_each(|v| *v *= w);
                dmlm.push((pos, g));
            }
        }
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("classifier loss {loss}")));
        }
        tape.record(ForwardCache { ids, pool_rows, layers, final_ln, hidden, pooled, dlogits, dmlm });
        Ok(ForwardOutput { loss, logits })
    }

    /// Back-propagates the recorded pass. Returns `∂loss/∂e(x_i)` per
    /// position and, when `grads` is given, accumulates parameter gradients.
    pub fn backward(&self, tape: &mut Tape<ForwardCache>, mut grads: Option<&mut Grads>) -> Result<Tensor> {
        let cache = tape.take()?;
        let d = self.config.dim;
        let n = cache.ids.len();
        let mut dhidden = Tensor::zeros(&[n, d]);
        if let Some(dlogits) = &cache.dlogits {
            let dl = Tensor::matrix(1, dlogits.len(), dlogits.clone());
            let dpooled = self.head.backward(&self.params, &cache.pooled, &dl, grads.as_deref_mut());
            let inv = 1.0 / cache.pool_rows.len() as f64;
            for &r in &cache.pool_rows {
                for (o, g) in dhidden.row_mut(r).iter_mut().zip(dpooled.data()) {
                    *o += g * inv;
                }
            }
        }
        let emb = self.params.get(self.embed);
        for (pos, g) in &cache.dmlm {
            let dh = crate::nn::matmul(g, emb.data(), 1, self.config.vocab_size, d);
            for (o, v) in dhidden.row_mut(*pos).iter_mut().zip(&dh) {
                *o += v;
            }
            if let Some(gr) = grads.as_deref_mut() {
                let h = cache.hidden.row(*pos);
                let de = gr.get_mut(self.embed);
                for (t, &gt) in g.iter().enumerate() {
                    if gt != 0.0 {
                        for (o, hv) in de.row_mut(t).iter_mut().zip(h) {
                            *o += gt * hv;
                        }
                    }
                }
                for (o, gt) in gr.get_mut(self.mlm_bias).data_mut().iter_mut().zip(g) {
                    *o += gt;
                }
            }
        }
        let mut dh = self.final_ln.backward(&self.params, &cache.final_ln, &dhidden, grads.as_deref_mut());
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            dh = layer.backward(&self.params, c, &dh, grads.as_deref_mut());
        }
        dh.scale(self.embed_scale());
        if let Some(gr) = grads {
            let de = gr.get_mut(self.embed);
            for (i, id) in cache.ids.iter().enumerate() {
                for (o, g) in de.row_mut(id.index()).iter_mut().zip(dh.row(i)) {
                    *o += g;
                }
            }
        }
        Ok(dh)
    }

    /// Loss of `x` under `objective` without recording anything.
    pub fn objective_loss(&self, x: &TokenSeq, objective: &Objective<'_>) -> Result<f64> {
        let mut tape = Tape::new();
        Ok(self.forward(x, objective, &mut tape)?.loss)
    }

    pub fn logits(&self, x: &TokenSeq) -> Vec<f64> {
        self.check(x);
        let (hidden, _, _) = self.encode(x.ids());
        let (_, pooled) = self.pool(x.ids(), &hidden);
        self.head.forward(&self.params, &pooled).into_data()
    }

    /// `∂L(y, f(x))/∂e(x_i)` for every position; parameters are untouched.
    pub fn input_grads(&self, x: &TokenSeq, y: usize) -> Result<(f64, GradientView)> {
        let mut tape = Tape::new();
        let out = self.forward(x, &Objective::classify(y), &mut tape)?;
        let g = self.backward(&mut tape, None)?;
        Ok((out.loss, GradientView(g)))
    }

    /// MLM distribution over the whole vocabulary at `pos` with that position
    /// replaced by `[MASK]`.
    pub fn mlm_probs(&self, x: &TokenSeq, pos: usize) -> Result<Vec<f64>> {
        let current = x.get(pos).ok_or(Error::IllegalPosition(pos))?;
        if matches!(current, TokenId::PAD | TokenId::CLS | TokenId::UNK) {
            return Err(Error::IllegalPosition(pos));
        }
        self.check(x);
        let masked = x.with_replaced(pos, TokenId::MASK);
        let (hidden, _, _) = self.encode(masked.ids());
        Ok(softmax(&self.mlm_logits(hidden.row(pos))))
    }

    /// The `k` most probable content tokens at `pos`, excluding the token
    /// currently there. Placeholder positions (`[MASK]`, `[BLK]`) may be
    /// queried. Without a trained MLM head the first `k` content ids are
    /// returned and the set is flagged.
    pub fn mlm_topk(&self, x: &TokenSeq, pos: usize, k: usize) -> Result<CandidateSet> {
        let current = x.get(pos).ok_or(Error::IllegalPosition(pos))?;
        if matches!(current, TokenId::PAD | TokenId::CLS | TokenId::UNK) {
            return Err(Error::IllegalPosition(pos));
        }
        let content = (crate::text::SPECIAL_TOKENS.len()..self.config.vocab_size)
            .map(|i| TokenId(i as u32))
            .filter(|&t| t != current);
        if !self.mlm_trained {
            return Ok(CandidateSet { tokens: content.take(k).collect(), uniform_fallback: true });
        }
        let probs = self.mlm_probs(x, pos)?;
        let mut tokens: Vec<TokenId> = content.collect();
        tokens.sort_by(|a, b| probs[b.index()].total_cmp(&probs[a.index()]).then(a.cmp(b)));
        tokens.truncate(k);
        Ok(CandidateSet { tokens, uniform_fallback: false })
    }

    pub fn predict_probs(&self, x: &TokenSeq) -> Prediction {
        let probs = softmax(&self.logits(x));
        let mut label = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[label] {
                label = i;
            }
        }
        Prediction { label, probs }
    }

    pub fn zero_grads(&self) -> Grads {
        self.params.zero_grads()
    }
}

impl Victim for ClassifierModel {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn max_len(&self) -> usize {
        self.config.max_len
    }

    fn embedding(&self, token: TokenId) -> &[f64] {
        self.params.get(self.embed).row(token.index())
    }

    fn loss(&self, x: &TokenSeq, y: usize) -> f64 {
        let logits = self.logits(x);
        softmax_cross_entropy(&logits, y).0
    }

    fn loss_and_grads(&self, x: &TokenSeq, y: usize) -> (f64, GradientView) {
        self.input_grads(x, y).expect("forward recorded and label in range")
    }

    fn predict(&self, x: &TokenSeq) -> Prediction {
        self.predict_probs(x)
    }

    fn candidates(&self, x: &TokenSeq, pos: usize, k: usize) -> Result<CandidateSet> {
        self.mlm_topk(x, pos, k)
    }
}

/// Mutable access used by tests that need to poke individual weights.
pub fn embedding_row_mut(model: &mut ClassifierModel, token: TokenId) -> &mut [f64] {
    let id = model.embed;
    model.params.get_mut(id).row_mut(token.index())
}

const _: () = {
    const fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<ClassifierModel>();
};
