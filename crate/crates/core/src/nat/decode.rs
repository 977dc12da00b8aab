use alloc::vec::Vec;

use super::model::Seq2SeqModel;
use crate::nn::softmax;
use crate::text::{TokenId, TokenSeq, SPECIAL_TOKENS};

/// Most probable non-special token and its probability.
pub fn argmax_content(logits: &[f64]) -> (TokenId, f64) {
    let probs = softmax(logits);
    let mut best = SPECIAL_TOKENS.len();
    for i in SPECIAL_TOKENS.len()..probs.len() {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    (TokenId(best as u32), probs[best])
}

/// Number of tokens re-masked after iteration `t` of `iterations`:
/// `⌈n·(T − t)/T⌉`.
pub fn remask_count(n: usize, t: usize, iterations: usize) -> usize {
    (n * (iterations - t)).div_ceil(iterations)
}

/// Mask-predict decoding with the predicted target length.
pub fn mask_predict_decode(model: &Seq2SeqModel, src: &TokenSeq, iterations: usize) -> TokenSeq {
    decode_with_length(model, src, model.predict_length(src), iterations)
}

/// Mask-predict decoding of a target of exactly `len` tokens.
///
/// Iteration 1 predicts every slot from an all-`[MASK]` input; afterwards the
/// `⌈n·(T − t)/T⌉` least confident slots are masked again and re-predicted.
pub fn decode_with_length(model: &Seq2SeqModel, src: &TokenSeq, len: usize, iterations: usize) -> TokenSeq {
    assert!(iterations >= 1 && len >= 1);
    let mut tokens = alloc::vec![TokenId::MASK; len];
    let mut confidence = alloc::vec![0.0f64; len];
    let mut masked: Vec<usize> = (0..len).collect();
    for t in 1..=iterations {
        let input = TokenSeq::new(tokens.clone()).expect("len ≥ 1");
        let logits = model.token_logits(src, &input);
        for &i in &masked {
            let (tok, p) = argmax_content(logits.row(i));
            tokens[i] = tok;
            confidence[i] = p;
        }
        let n = remask_count(len, t, iterations);
        if n == 0 {
            break;
        }
        let mut order: Vec<usize> = (0..len).collect();
        order.sort_by(|&a, &b| confidence[a].total_cmp(&confidence[b]).then(a.cmp(&b)));
        masked = order[..n].to_vec();
        for &i in &masked {
            tokens[i] = TokenId::MASK;
        }
    }
    TokenSeq::new(tokens).expect("len ≥ 1")
}
