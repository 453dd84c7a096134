use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::tokenizer::pre_tokenize;

/// Added to zero n-gram precisions before the geometric mean.
pub const BLEU_SMOOTHING: f64 = 1e-9;

/// Lowercased word tokens with template tags and special tokens removed.
pub fn metric_tokens(text: &str) -> Vec<String> {
    pre_tokenize(text)
        .into_iter()
        .filter(|t| !(t.starts_with('[') && t.ends_with(']') && t.len() > 2))
        .filter(|t| !(t.starts_with('<') && t.ends_with('>') && t.len() > 2))
        .collect()
}

/// `exp` of the mean negative log-likelihood per token.
pub fn perplexity(nlls: &[f64]) -> Result<f64, MetricsError> {
    perplexity_from_total(nlls.iter().sum(), nlls.len())
}

pub fn perplexity_from_total(total_nll: f64, n_tokens: usize) -> Result<f64, MetricsError> {
    if n_tokens == 0 {
        return Err(MetricsError::Empty("perplexity"));
    }
    Ok((total_nll / n_tokens as f64).exp())
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn check_pairs(h: usize, r: usize, what: &'static str) -> Result<(), MetricsError> {
    if h != r {
        return Err(MetricsError::LengthMismatch { left: h, right: r });
    }
    if h == 0 {
        return Err(MetricsError::Empty(what));
    }
    Ok(())
}

/// Corpus BLEU with clipped counts, uniform weights up to `max_n`, brevity
/// penalty and [`BLEU_SMOOTHING`] on zero precisions.
pub fn bleu(hyps: &[Vec<String>], refs: &[Vec<String>], max_n: usize) -> Result<f64, MetricsError> {
    check_pairs(hyps.len(), refs.len(), "bleu")?;
    if !(1..=4).contains(&max_n) {
        return Err(MetricsError::Order(max_n));
    }
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_n {
            let rc = ngram_counts(r, n);
            for (g, c) in ngram_counts(h, n) {
                matched[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
                total[n - 1] += c;
            }
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let log_p: f64 = (0..max_n)
        .map(|i| {
            let p = if total[i] == 0 { 0.0 } else { matched[i] as f64 / total[i] as f64 };
            (if p == 0.0 { BLEU_SMOOTHING } else { p }).ln()
        })
        .sum::<f64>()
        / max_n as f64;
    let bp = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(bp * log_p.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RougeVariant {
    One,
    Two,
    L,
}

fn f_measure(overlap: usize, hyp: usize, reference: usize) -> f64 {
    if overlap == 0 || hyp == 0 || reference == 0 {
        return 0.0;
    }
    let p = overlap as f64 / hyp as f64;
    let r = overlap as f64 / reference as f64;
    2.0 * p * r / (p + r)
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Mean per-pair ROUGE F-measure.
pub fn rouge(hyps: &[Vec<String>], refs: &[Vec<String>], variant: RougeVariant) -> Result<f64, MetricsError> {
    check_pairs(hyps.len(), refs.len(), "rouge")?;
    let total: f64 = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| match variant {
            RougeVariant::L => f_measure(lcs(h, r), h.len(), r.len()),
            RougeVariant::One | RougeVariant::Two => {
                let n = if variant == RougeVariant::One { 1 } else { 2 };
                let hc = ngram_counts(h, n);
                let rc = ngram_counts(r, n);
                let overlap = hc.iter().map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0))).sum();
                f_measure(overlap, hc.values().sum(), rc.values().sum())
            }
        })
        .sum();
    Ok(total / hyps.len() as f64)
}
