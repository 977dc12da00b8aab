use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    matmul, matmul_bt, positional_encoding, softmax, softmax_cross_entropy, DecoderCache, DecoderLayer, EncoderCache,
    EncoderLayer, Grads, LayerNorm, LayerNormCache, Linear, ParamId, ParamStore, Tape, Tensor,
};
use crate::rng::seeded;
use crate::text::{TokenId, TokenSeq};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NatConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub max_len: usize,
    /// Length offsets `|y| − |x|` in `[−max_offset, max_offset]` are modeled.
    pub max_offset: usize,
}

impl NatConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size, dim: 64, heads: 2, ffn_dim: 128, enc_layers: 2, dec_layers: 2, max_len: 32, max_offset: 8 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || self.dim % self.heads != 0 {
            return Err(Error::Config(format!("dim {} not divisible by heads {}", self.dim, self.heads)));
        }
        if self.vocab_size <= crate::text::SPECIAL_TOKENS.len() || self.max_len < 2 {
            return Err(Error::Config("degenerate translator architecture".into()));
        }
        Ok(())
    }

    pub fn length_classes(&self) -> usize {
        2 * self.max_offset + 1
    }

    /// Class index of a length offset, `None` outside the modeled range.
    pub fn offset_class(&self, src_len: usize, tgt_len: usize) -> Option<usize> {
        let off = tgt_len as i64 - src_len as i64;
        (off.unsigned_abs() as usize <= self.max_offset).then(|| (off + self.max_offset as i64) as usize)
    }
}

/// Loss specification for one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct NatObjective<'a> {
    /// `(decoder position, gold token)` for every masked slot.
    pub targets: &'a [(usize, TokenId)],
    /// Multiplier on each masked-token cross-entropy (1 gives the plain sum).
    pub token_weight: f64,
    pub length_class: Option<usize>,
    pub length_weight: f64,
}

impl<'a> NatObjective<'a> {
    /// `−Σ log P(y_t | y_r, x)` over the masked slots only.
    pub fn masked_sum(targets: &'a [(usize, TokenId)]) -> Self {
        Self { targets, token_weight: 1.0, length_class: None, length_weight: 0.0 }
    }
}

/// Masked-slot cross-entropy summed over `targets`, from a full logit matrix.
pub fn masked_loss_from_logits(logits: &Tensor, targets: &[(usize, TokenId)]) -> f64 {
    targets.iter().map(|&(p, t)| softmax_cross_entropy(logits.row(p), t.index()).0).sum()
}

#[derive(Clone, Debug)]
pub struct NatCache {
    src: Vec<TokenId>,
    dec: Vec<TokenId>,
    enc_layers: Vec<EncoderCache>,
    enc_ln: LayerNormCache,
    enc_out: Tensor,
    pool_rows: Vec<usize>,
    pooled: Tensor,
    dec_layers: Vec<DecoderCache>,
    dec_ln: LayerNormCache,
    dec_out: Tensor,
    dtokens: Vec<(usize, Vec<f64>)>,
    dlength: Option<Vec<f64>>,
}

/// Encoder-decoder conditional masked LM with bidirectional decoder
/// self-attention, a tied output head and a length-offset classifier.
#[derive(Clone, Debug)]
pub struct Seq2SeqModel {
    pub config: NatConfig,
    params: ParamStore,
    embed: ParamId,
    enc_layers: Vec<EncoderLayer>,
    enc_ln: LayerNorm,
    dec_layers: Vec<DecoderLayer>,
    dec_ln: LayerNorm,
    out_bias: ParamId,
    length_head: Linear,
    positions: Tensor,
}

impl Seq2SeqModel {
    pub fn new(config: NatConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(seed);
        let mut ps = ParamStore::new();
        let (d, h, f) = (config.dim, config.heads, config.ffn_dim);
        let embed = ps.uniform("embed", &[config.vocab_size, d], &mut rng);
        let enc_layers = (0..config.enc_layers)
            .map(|l| EncoderLayer::new(&mut ps, &format!("enc{l}"), d, h, f, &mut rng))
            .collect();
        let enc_ln = LayerNorm::new(&mut ps, "enc_ln", d);
        let dec_layers = (0..config.dec_layers)
            .map(|l| DecoderLayer::new(&mut ps, &format!("dec{l}"), d, h, f, &mut rng))
            .collect();
        let dec_ln = LayerNorm::new(&mut ps, "dec_ln", d);
        let out_bias = ps.constant("out.bias", &[config.vocab_size], 0.0);
        let length_head = Linear::new(&mut ps, "length", d, config.length_classes(), &mut rng);
        let positions = positional_encoding(config.max_len, d);
        Ok(Self { config, params: ps, embed, enc_layers, enc_ln, dec_layers, dec_ln, out_bias, length_head, positions })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn zero_grads(&self) -> Grads {
        self.params.zero_grads()
    }

    pub fn embedding(&self, token: TokenId) -> &[f64] {
        self.params.get(self.embed).row(token.index())
    }

    pub fn embed_scale(&self) -> f64 {
        libm::sqrt(self.config.dim as f64)
    }

    fn input_rows(&self, ids: &[TokenId]) -> Tensor {
        let d = self.config.dim;
        let scale = self.embed_scale();
        let emb = self.params.get(self.embed);
        let extra = (ids.len() > self.positions.rows()).then(|| positional_encoding(ids.len(), d));
        let pe = extra.as_ref().unwrap_or(&self.positions);
        let mut h = Tensor::zeros(&[ids.len(), d]);
        for (i, id) in ids.iter().enumerate() {
            assert!(id.index() < self.config.vocab_size, "token id out of range for model vocabulary");
            for ((o, e), p) in h.row_mut(i).iter_mut().zip(emb.row(id.index())).zip(pe.row(i)) {
                *o = scale * e + p;
            }
        }
        h
    }

    fn pad_mask(ids: &[TokenId]) -> Vec<bool> {
        ids.iter().map(|&t| t == TokenId::PAD).collect()
    }

    fn run_encoder(&self, src: &[TokenId]) -> (Tensor, Vec<EncoderCache>, LayerNormCache) {
        let mask = Self::pad_mask(src);
        let mut h = self.input_rows(src);
        let mut caches = Vec::with_capacity(self.enc_layers.len());
        for layer in &self.enc_layers {
            let (out, c) = layer.forward(&self.params, &h, &mask);
            h = out;
            caches.push(c);
        }
        let (out, ln) = self.enc_ln.forward(&self.params, &h);
        (out, caches, ln)
    }

    fn run_decoder(&self, dec: &[TokenId], enc: &Tensor, src: &[TokenId]) -> (Tensor, Vec<DecoderCache>, LayerNormCache) {
        let (self_mask, enc_mask) = (Self::pad_mask(dec), Self::pad_mask(src));
        let mut h = self.input_rows(dec);
        let mut caches = Vec::with_capacity(self.dec_layers.len());
        for layer in &self.dec_layers {
            let (out, c) = layer.forward(&self.params, &h, &self_mask, enc, &enc_mask);
            h = out;
            caches.push(c);
        }
        let (out, ln) = self.dec_ln.forward(&self.params, &h);
        (out, caches, ln)
    }

    fn pool(&self, src: &[TokenId], enc: &Tensor) -> (Vec<usize>, Tensor) {
        let rows: Vec<usize> = (0..src.len()).filter(|&i| src[i] != TokenId::PAD).collect();
        let mut pooled = Tensor::zeros(&[1, self.config.dim]);
        let inv = 1.0 / rows.len().max(1) as f64;
        for &r in &rows {
            for (p, h) in pooled.data_mut().iter_mut().zip(enc.row(r)) {
                *p += h * inv;
            }
        }
        (rows, pooled)
    }

    fn token_logits_row(&self, h: &[f64]) -> Vec<f64> {
        let v = self.config.vocab_size;
        let mut logits = matmul_bt(h, self.params.get(self.embed).data(), 1, self.config.dim, v);
        for (l, b) in logits.iter_mut().zip(self.params.get(self.out_bias).data()) {
            *l += b;
        }
        logits
    }

    pub fn forward(
        &self,
        src: &TokenSeq,
        dec: &TokenSeq,
        objective: &NatObjective<'_>,
        tape: &mut Tape<NatCache>,
    ) -> Result<f64> {
        let (src_ids, dec_ids) = (src.ids().to_vec(), dec.ids().to_vec());
        let (enc_out, enc_layers, enc_ln) = self.run_encoder(&src_ids);
        let (dec_out, dec_layers, dec_ln) = self.run_decoder(&dec_ids, &enc_out, &src_ids);
        let (pool_rows, pooled) = self.pool(&src_ids, &enc_out);
        let mut loss = 0.0;
        let mut dtokens = Vec::with_capacity(objective.targets.len());
        for &(pos, gold) in objective.targets {
            if pos >= dec_ids.len() {
                return Err(Error::Shape(format!("target position {pos} beyond decoder input")));
            }
            let (l, mut g) = softmax_cross_entropy(&self.token_logits_row(dec_out.row(pos)), gold.index());
            loss += objective.token_weight * l;
            g.iter_mut().for_each(|v| *v *= objective.token_weight);
            dtokens.push((pos, g));
        }
        let mut dlength = None;
        if let Some(class) = objective.length_class {
            let logits = self.length_head.forward(&self.params, &pooled).into_data();
            let (l, mut g) = softmax_cross_entropy(&logits, class);
            loss += objective.length_weight * l;
            g.iter_mut().for_each(|v| *v *= objective.length_weight);
            dlength = Some(g);
        }
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("translator loss {loss}")));
        }
        tape.record(NatCache {
            src: src_ids,
            dec: dec_ids,
            enc_layers,
            enc_ln,
            enc_out,
            pool_rows,
            pooled,
            dec_layers,
            dec_ln,
            dec_out,
            dtokens,
            dlength,
        });
        Ok(loss)
    }

    /// Returns `(∂L/∂e(src_i), ∂L/∂e(dec_i))` and accumulates parameter
    /// gradients when `grads` is given.
    pub fn backward(&self, tape: &mut Tape<NatCache>, mut grads: Option<&mut Grads>) -> Result<(Tensor, Tensor)> {
        let c = tape.take()?;
        let d = self.config.dim;
        let v = self.config.vocab_size;
        let emb = self.params.get(self.embed);
        let mut ddec_out = Tensor::zeros(&[c.dec.len(), d]);
        for (pos, g) in &c.dtokens {
            let dh = matmul(g, emb.data(), 1, v, d);
            for (o, x) in ddec_out.row_mut(*pos).iter_mut().zip(&dh) {
                *o += x;
            }
            if let Some(gr) = grads.as_deref_mut() {
                let h = c.dec_out.row(*pos);
                let de = gr.get_mut(self.embed);
                for (t, &gt) in g.iter().enumerate() {
                    for (o, hv) in de.row_mut(t).iter_mut().zip(h) {
                        *o += gt * hv;
                    }
                }
                for (o, gt) in gr.get_mut(self.out_bias).data_mut().iter_mut().zip(g) {
                    *o += gt;
                }
            }
        }
        let mut dh = self.dec_ln.backward(&self.params, &c.dec_ln, &ddec_out, grads.as_deref_mut());
        let mut denc = Tensor::zeros(&[c.src.len(), d]);
        for (layer, cache) in self.dec_layers.iter().zip(&c.dec_layers).rev() {
            let (dx, de) = layer.backward(&self.params, cache, &dh, grads.as_deref_mut());
            dh = dx;
            denc.add_assign(&de);
        }
        if let Some(g) = &c.dlength {
            let dl = Tensor::matrix(1, g.len(), g.clone());
            let dpooled = self.length_head.backward(&self.params, &c.pooled, &dl, grads.as_deref_mut());
            let inv = 1.0 / c.pool_rows.len().max(1) as f64;
            for &r in &c.pool_rows {
                for (o, x) in denc.row_mut(r).iter_mut().zip(dpooled.data()) {
                    *o += x * inv;
                }
            }
        }
        let _ = &c.enc_out;
        let mut ds = self.enc_ln.backward(&self.params, &c.enc_ln, &denc, grads.as_deref_mut());
        for (layer, cache) in self.enc_layers.iter().zip(&c.enc_layers).rev() {
            ds = layer.backward(&self.params, cache, &ds, grads.as_deref_mut());
        }
        let scale = self.embed_scale();
        ds.scale(scale);
        dh.scale(scale);
        if let Some(gr) = grads {
            let de = gr.get_mut(self.embed);
            for (ids, rows) in [(&c.src, &ds), (&c.dec, &dh)] {
                for (i, id) in ids.iter().enumerate() {
                    for (o, x) in de.row_mut(id.index()).iter_mut().zip(rows.row(i)) {
                        *o += x;
                    }
                }
            }
        }
        Ok((ds, dh))
    }

    pub fn objective_loss(&self, src: &TokenSeq, dec: &TokenSeq, objective: &NatObjective<'_>) -> Result<f64> {
        self.forward(src, dec, objective, &mut Tape::new())
    }

    /// Output logits for every decoder position, `[|dec| × V]`.
    pub fn token_logits(&self, src: &TokenSeq, dec: &TokenSeq) -> Tensor {
        let (enc, _, _) = self.run_encoder(src.ids());
        let (out, _, _) = self.run_decoder(dec.ids(), &enc, src.ids());
        let v = self.config.vocab_size;
        let mut logits = Tensor::zeros(&[dec.len(), v]);
        for i in 0..dec.len() {
            logits.row_mut(i).copy_from_slice(&self.token_logits_row(out.row(i)));
        }
        logits
    }

    /// Distribution over length offsets `−max_offset..=max_offset`.
    pub fn length_probs(&self, src: &TokenSeq) -> Vec<f64> {
        let (enc, _, _) = self.run_encoder(src.ids());
        let (_, pooled) = self.pool(src.ids(), &enc);
        softmax(self.length_head.forward(&self.params, &pooled).data())
    }

    /// `|src|` plus the most probable offset, at least 1.
    pub fn predict_length(&self, src: &TokenSeq) -> usize {
        let probs = self.length_probs(src);
        let mut best = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        let len = src.len() as i64 + best as i64 - self.config.max_offset as i64;
        len.clamp(1, self.config.max_len as i64) as usize
    }
}
