use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::param::{Grads, ParamId, ParamStore};
use super::tensor::{dot, matmul, matmul_at_acc, matmul_bt, Tensor};

/// Additive attention bias applied to masked (PAD) keys.
pub const NEG_MASK: f64 = -1e9;

const LN_EPS: f64 = 1e-9;

/// Fixed sinusoidal position table `[len × dim]`.
pub fn positional_encoding(len: usize, dim: usize) -> Tensor {
    let mut pe = Tensor::zeros(&[len, dim]);
    for pos in 0..len {
        let row = pe.row_mut(pos);
        for i in (0..dim).step_by(2) {
            let freq = libm::pow(10000.0, i as f64 / dim as f64);
            let angle = pos as f64 / freq;
            row[i] = libm::sin(angle);
            if i + 1 < dim {
                row[i + 1] = libm::cos(angle);
            }
        }
    }
    pe
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::tanh(GELU_C * (x + 0.044715 * x * x * x)))
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    let t = libm::tanh(GELU_C * (x + 0.044715 * x * x * x));
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(ps: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let w = ps.uniform(&format!("{name}.weight"), &[in_dim, out_dim], rng);
        let b = ps.constant(&format!("{name}.bias"), &[out_dim], 0.0);
        Self { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor) -> Tensor {
        let rows = x.rows();
        let mut out = matmul(x.data(), ps.get(self.w).data(), rows, self.in_dim, self.out_dim);
        let b = ps.get(self.b).data();
        for r in out.chunks_mut(self.out_dim) {
            for (o, bv) in r.iter_mut().zip(b) {
                *o += bv;
            }
        }
        Tensor::matrix(rows, self.out_dim, out)
    }

    /// Returns `∂L/∂x` given the forward input `x` and `∂L/∂y`.
    pub fn backward(&self, ps: &ParamStore, x: &Tensor, dy: &Tensor, grads: Option<&mut Grads>) -> Tensor {
        let rows = x.rows();
        if let Some(g) = grads {
            matmul_at_acc(g.get_mut(self.w).data_mut(), x.data(), dy.data(), rows, self.in_dim, self.out_dim);
            let db = g.get_mut(self.b).data_mut();
            for r in dy.data().chunks(self.out_dim) {
                for (d, v) in db.iter_mut().zip(r) {
                    *d += v;
                }
            }
        }
        let dx = matmul_bt(dy.data(), ps.get(self.w).data(), rows, self.out_dim, self.in_dim);
        Tensor::matrix(rows, self.in_dim, dx)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub struct LayerNormCache {
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gamma = ps.constant(&format!("{name}.gamma"), &[dim], 1.0);
        let beta = ps.constant(&format!("{name}.beta"), &[dim], 0.0);
        Self { gamma, beta, dim }
    }

    /// Normalizes each row to zero mean and unit variance (before the affine map).
    pub fn normalize(x: &Tensor) -> (Tensor, Vec<f64>) {
        let d = x.cols();
        let mut xhat = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = xhat.row_mut(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / libm::sqrt(var + LN_EPS);
            row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
            inv_std.push(inv);
        }
        (xhat, inv_std)
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor) -> (Tensor, LayerNormCache) {
        let (xhat, inv_std) = Self::normalize(x);
        let gamma = ps.get(self.gamma).data();
        let beta = ps.get(self.beta).data();
        let mut y = xhat.clone();
        for r in 0..y.rows() {
            for ((v, g), b) in y.row_mut(r).iter_mut().zip(gamma).zip(beta) {
                *v = *v * g + b;
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, ps: &ParamStore, cache: &LayerNormCache, dy: &Tensor, grads: Option<&mut Grads>) -> Tensor {
        let d = self.dim as f64;
        let gamma = ps.get(self.gamma).data();
        if let Some(g) = grads {
            let (dg, db) = {
                let mut dg = vec![0.0; self.dim];
                let mut db = vec![0.0; self.dim];
                for r in 0..dy.rows() {
                    for (k, (&gy, &xh)) in dy.row(r).iter().zip(cache.xhat.row(r)).enumerate() {
                        dg[k] += gy * xh;
                        db[k] += gy;
                    }
                }
                (dg, db)
            };
            g.get_mut(self.gamma).data_mut().iter_mut().zip(&dg).for_each(|(a, b)| *a += b);
            g.get_mut(self.beta).data_mut().iter_mut().zip(&db).for_each(|(a, b)| *a += b);
        }
        let mut dx = Tensor::zeros(dy.shape());
        let mut dxhat = vec![0.0; self.dim];
        for r in 0..dy.rows() {
            let xh = cache.xhat.row(r);
            for (k, v) in dxhat.iter_mut().enumerate() {
                *v = dy.row(r)[k] * gamma[k];
            }
            let sum: f64 = dxhat.iter().sum();
            let sum_xh: f64 = dot(&dxhat, xh);
            let inv = cache.inv_std[r];
            for (k, out) in dx.row_mut(r).iter_mut().enumerate() {
                *out = inv / d * (d * dxhat[k] - sum - xh[k] * sum_xh);
            }
        }
        dx
    }
}

/// Multi-head scaled dot-product attention with a key padding mask.
#[derive(Clone, Debug)]
pub struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    xq: Tensor,
    xkv: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    /// `heads × Lq × Lk` attention weights.
    probs: Vec<f64>,
    ctx: Tensor,
}

impl AttentionCache {
    /// Attention weights of head `h`, query row `i`.
    pub fn weights(&self, h: usize, i: usize) -> &[f64] {
        let lq = self.q.rows();
        let lk = self.k.rows();
        let start = (h * lq + i) * lk;
        &self.probs[start..start + lk]
    }
}

impl Attention {
    pub fn new<R: Rng>(ps: &mut ParamStore, name: &str, dim: usize, heads: usize, rng: &mut R) -> Self {
        assert!(dim % heads == 0, "dim must divide into heads");
        Self {
            q: Linear::new(ps, &format!("{name}.q"), dim, dim, rng),
            k: Linear::new(ps, &format!("{name}.k"), dim, dim, rng),
            v: Linear::new(ps, &format!("{name}.v"), dim, dim, rng),
            o: Linear::new(ps, &format!("{name}.o"), dim, dim, rng),
            heads,
            dim,
        }
    }

    /// `key_mask[j] == true` marks key `j` as padding.
    pub fn forward(&self, ps: &ParamStore, xq: &Tensor, xkv: &Tensor, key_mask: &[bool]) -> (Tensor, AttentionCache) {
        let (lq, lk) = (xq.rows(), xkv.rows());
        debug_assert_eq!(key_mask.len(), lk);
        let q = self.q.forward(ps, xq);
        let k = self.k.forward(ps, xkv);
        let v = self.v.forward(ps, xkv);
        let dh = self.dim / self.heads;
        let scale = 1.0 / libm::sqrt(dh as f64);
        let mut probs = vec![0.0; self.heads * lq * lk];
        let mut ctx = Tensor::zeros(&[lq, self.dim]);
        for h in 0..self.heads {
            let off = h * dh;
            for i in 0..lq {
                let qi = &q.row(i)[off..off + dh];
                let p = &mut probs[(h * lq + i) * lk..(h * lq + i + 1) * lk];
                let mut max = f64::NEG_INFINITY;
                for j in 0..lk {
                    let mut s = dot(qi, &k.row(j)[off..off + dh]) * scale;
                    if key_mask[j] {
                        s += NEG_MASK;
                    }
                    p[j] = s;
                    max = max.max(s);
                }
                let mut sum = 0.0;
                for pj in p.iter_mut() {
                    *pj = libm::exp(*pj - max);
                    sum += *pj;
                }
                p.iter_mut().for_each(|pj| *pj /= sum);
                let crow = &mut ctx.row_mut(i)[off..off + dh];
                for j in 0..lk {
                    let w = p[j];
                    if w == 0.0 {
                        continue;
                    }
                    for (c, vv) in crow.iter_mut().zip(&v.row(j)[off..off + dh]) {
                        *c += w * vv;
                    }
                }
            }
        }
        let out = self.o.forward(ps, &ctx);
        let cache = AttentionCache { xq: xq.clone(), xkv: xkv.clone(), q, k, v, probs, ctx };
        (out, cache)
    }

    /// Returns `(∂L/∂xq, ∂L/∂xkv)`.
    pub fn backward(&self, ps: &ParamStore, cache: &AttentionCache, dout: &Tensor, mut grads: Option<&mut Grads>) -> (Tensor, Tensor) {
        let (lq, lk) = (cache.q.rows(), cache.k.rows());
        let dh = self.dim / self.heads;
        let scale = 1.0 / libm::sqrt(dh as f64);
        let dctx = self.o.backward(ps, &cache.ctx, dout, grads.as_deref_mut());
        let mut dq = Tensor::zeros(&[lq, self.dim]);
        let mut dk = Tensor::zeros(&[lk, self.dim]);
        let mut dv = Tensor::zeros(&[lk, self.dim]);
        let mut dp = vec![0.0; lk];
        for h in 0..self.heads {
            let off = h * dh;
            for i in 0..lq {
                let p = &cache.probs[(h * lq + i) * lk..(h * lq + i + 1) * lk];
                let dci = &dctx.row(i)[off..off + dh];
                for j in 0..lk {
                    dp[j] = dot(dci, &cache.v.row(j)[off..off + dh]);
                    if p[j] != 0.0 {
                        for (d, c) in dv.row_mut(j)[off..off + dh].iter_mut().zip(dci) {
                            *d += p[j] * c;
                        }
                    }
                }
                let pdp: f64 = dot(p, &dp);
                let qi = &cache.q.row(i)[off..off + dh];
                for j in 0..lk {
                    let ds = p[j] * (dp[j] - pdp) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let kj = &cache.k.row(j)[off..off + dh];
                    for (d, kv) in dq.row_mut(i)[off..off + dh].iter_mut().zip(kj) {
                        *d += ds * kv;
                    }
                    for (d, qv) in dk.row_mut(j)[off..off + dh].iter_mut().zip(qi) {
                        *d += ds * qv;
                    }
                }
            }
        }
        let dxq = self.q.backward(ps, &cache.xq, &dq, grads.as_deref_mut());
        let mut dxkv = self.k.backward(ps, &cache.xkv, &dk, grads.as_deref_mut());
        dxkv.add_assign(&self.v.backward(ps, &cache.xkv, &dv, grads));
        (dxq, dxkv)
    }
}

#[derive(Clone, Debug)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

#[derive(Clone, Debug)]
pub struct FeedForwardCache {
    x: Tensor,
    pre: Tensor,
    act: Tensor,
}

impl FeedForward {
    pub fn new<R: Rng>(ps: &mut ParamStore, name: &str, dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            up: Linear::new(ps, &format!("{name}.up"), dim, hidden, rng),
            down: Linear::new(ps, &format!("{name}.down"), hidden, dim, rng),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor) -> (Tensor, FeedForwardCache) {
        let pre = self.up.forward(ps, x);
        let mut act = pre.clone();
        act.data_mut().iter_mut().for_each(|v| *v = gelu(*v));
        let out = self.down.forward(ps, &act);
        (out, FeedForwardCache { x: x.clone(), pre, act })
    }

    pub fn backward(&self, ps: &ParamStore, cache: &FeedForwardCache, dy: &Tensor, mut grads: Option<&mut Grads>) -> Tensor {
        let mut dact = self.down.backward(ps, &cache.act, dy, grads.as_deref_mut());
        for (d, &p) in dact.data_mut().iter_mut().zip(cache.pre.data()) {
            *d *= gelu_grad(p);
        }
        self.up.backward(ps, &cache.x, &dact, grads)
    }
}

/// Pre-norm transformer encoder block.
#[derive(Clone, Debug)]
pub struct EncoderLayer {
    pub ln1: LayerNorm,
    pub attn: Attention,
    pub ln2: LayerNorm,
    pub ffn: FeedForward,
}

#[derive(Clone, Debug)]
pub struct EncoderCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    ffn: FeedForwardCache,
}

impl EncoderCache {
    pub fn attention(&self) -> &AttentionCache {
        &self.attn
    }
}

impl EncoderLayer {
    pub fn new<R: Rng>(ps: &mut ParamStore, name: &str, dim: usize, heads: usize, ffn: usize, rng: &mut R) -> Self {
        Self {
            ln1: LayerNorm::new(ps, &format!("{name}.ln1"), dim),
            attn: Attention::new(ps, &format!("{name}.attn"), dim, heads, rng),
            ln2: LayerNorm::new(ps, &format!("{name}.ln2"), dim),
            ffn: FeedForward::new(ps, &format!("{name}.ffn"), dim, ffn, rng),
        }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Tensor, mask: &[bool]) -> (Tensor, EncoderCache) {
        let (a, ln1) = self.ln1.forward(ps, x);
        let (att, attn) = self.attn.forward(ps, &a, &a, mask);
        let x1 = x.add(&att);
        let (b, ln2) = self.ln2.forward(ps, &x1);
        let (f, ffn) = self.ffn.forward(ps, &b);
        (x1.add(&f), EncoderCache { ln1, attn, ln2, ffn })
    }

    pub fn backward(&self, ps: &ParamStore, cache: &EncoderCache, dy: &Tensor, mut grads: Option<&mut Grads>) -> Tensor {
        let db = self.ffn.backward(ps, &cache.ffn, dy, grads.as_deref_mut());
        let mut dx1 = self.ln2.backward(ps, &cache.ln2, &db, grads.as_deref_mut());
        dx1.add_assign(dy);
        let (daq, dakv) = self.attn.backward(ps, &cache.attn, &dx1, grads.as_deref_mut());
        let mut dx = self.ln1.backward(ps, &cache.ln1, &daq.add(&dakv), grads);
        dx.add_assign(&dx1);
        dx
    }
}

/// Pre-norm decoder block with bidirectional self-attention and
/// cross-attention over the encoder output.
#[derive(Clone, Debug)]
pub struct DecoderLayer {
    pub ln1: LayerNorm,
    pub self_attn: Attention,
    pub ln2: LayerNorm,
    pub cross_attn: Attention,
    pub ln3: LayerNorm,
    pub ffn: FeedForward,
}

#[derive(Clone, Debug)]
pub struct DecoderCache {
    ln1: LayerNormCache,
    self_attn: AttentionCache,
    ln2: LayerNormCache,
    cross_attn: AttentionCache,
    ln3: LayerNormCache,
    ffn: FeedForwardCache,
}

impl DecoderLayer {
    pub fn new<R: Rng>(ps: &mut ParamStore, name: &str, dim: usize, heads: usize, ffn: usize, rng: &mut R) -> Self {
        Self {
            ln1: LayerNorm::new(ps, &format!("{name}.ln1"), dim),
            self_attn: Attention::new(ps, &format!("{name}.self"), dim, heads, rng),
            ln2: LayerNorm::new(ps, &format!("{name}.ln2"), dim),
            cross_attn: Attention::new(ps, &format!("{name}.cross"), dim, heads, rng),
            ln3: LayerNorm::new(ps, &format!("{name}.ln3"), dim),
            ffn: FeedForward::new(ps, &format!("{name}.ffn"), dim, ffn, rng),
        }
    }

    pub fn forward(
        &self,
        ps: &ParamStore,
        x: &Tensor,
        self_mask: &[bool],
        enc: &Tensor,
        enc_mask: &[bool],
    ) -> (Tensor, DecoderCache) {
        let (a, ln1) = self.ln1.forward(ps, x);
        let (sa, self_attn) = self.self_attn.forward(ps, &a, &a, self_mask);
        let x1 = x.add(&sa);
        let (b, ln2) = self.ln2.forward(ps, &x1);
        let (ca, cross_attn) = self.cross_attn.forward(ps, &b, enc, enc_mask);
        let x2 = x1.add(&ca);
        let (c, ln3) = self.ln3.forward(ps, &x2);
        let (f, ffn) = self.ffn.forward(ps, &c);
        (x2.add(&f), DecoderCache { ln1, self_attn, ln2, cross_attn, ln3, ffn })
    }

    /// Returns `(∂L/∂x, ∂L/∂enc)`.
    pub fn backward(&self, ps: &ParamStore, cache: &DecoderCache, dy: &Tensor, mut grads: Option<&mut Grads>) -> (Tensor, Tensor) {
        let dc = self.ffn.backward(ps, &cache.ffn, dy, grads.as_deref_mut());
        let mut dx2 = self.ln3.backward(ps, &cache.ln3, &dc, grads.as_deref_mut());
        dx2.add_assign(dy);
        let (dbq, denc) = self.cross_attn.backward(ps, &cache.cross_attn, &dx2, grads.as_deref_mut());
        let mut dx1 = self.ln2.backward(ps, &cache.ln2, &dbq, grads.as_deref_mut());
        dx1.add_assign(&dx2);
        let (daq, dakv) = self.self_attn.backward(ps, &cache.self_attn, &dx1, grads.as_deref_mut());
        let mut dx = self.ln1.backward(ps, &cache.ln1, &daq.add(&dakv), grads);
        dx.add_assign(&dx1);
        (dx, denc)
    }
}
