use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const MAX_N: usize = 4;

fn ngram_counts<T: Ord + Clone>(seq: &[T], n: usize) -> BTreeMap<Vec<T>, usize> {
    let mut counts = BTreeMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU-4 in `[0, 100]`: clipped n-gram precisions pooled over the
/// corpus, unigram precision unsmoothed, add-one smoothing for `n > 1`, and
/// the brevity penalty `exp(1 − r/c)` when the hypotheses are shorter.
pub fn bleu<T: Ord + Clone>(hypotheses: &[Vec<T>], references: &[Vec<T>]) -> Result<f64> {
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if hypotheses.len() != references.len() {
        return Err(Error::Shape("hypothesis and reference counts differ".into()));
    }
    let mut matches = [0usize; MAX_N];
    let mut totals = [0usize; MAX_N];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_N {
            let rc = ngram_counts(r, n);
            for (g, c) in ngram_counts(h, n) {
                matches[n - 1] += c.min(rc.get(&g).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
    }
    if hyp_len == 0 || matches[0] == 0 {
        return Ok(0.0);
    }
    let mut log_p = libm::log(matches[0] as f64 / totals[0] as f64);
    for n in 1..MAX_N {
        log_p += libm::log((matches[n] + 1) as f64 / (totals[n] + 1) as f64);
    }
    let bp = if hyp_len < ref_len { libm::exp(1.0 - ref_len as f64 / hyp_len as f64) } else { 1.0 };
    Ok(100.0 * bp * libm::exp(log_p / MAX_N as f64))
}
