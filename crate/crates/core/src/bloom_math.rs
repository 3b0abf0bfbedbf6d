//! Closed-form false-positive and sizing formulas for Bloom filters and
//! for multi-term threshold queries over them.
//!
//! Notation follows the index: a filter has `w` bits and `k` hash functions
//! and holds `v` distinct terms. A query has `ell` distinct terms and a
//! document matches when at least a fraction `K` of them test positive.
//!
//! All probabilities are evaluated in log space so that `k * v` in the
//! hundreds of millions or `ell` in the tens of thousands neither underflow
//! nor overflow.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Slack applied before rounding `K * ell` up, so `0.9 * 10` stays 9.
const THRESHOLD_EPS: f64 = 1e-9;

/// Shape of one Bloom filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BloomSpec {
    /// Bits in the filter.
    pub w: u64,
    /// Hash functions.
    pub k: u32,
    /// Distinct inserted terms.
    pub v: u64,
}

impl BloomSpec {
    pub fn new(w: u64, k: u32, v: u64) -> Result<Self> {
        if w == 0 {
            return Err(Error::InvalidParams("filter width w must be >= 1".into()));
        }
        if k == 0 {
            return Err(Error::InvalidParams("hash count k must be >= 1".into()));
        }
        Ok(BloomSpec { w, k, v })
    }

    pub fn fill(&self) -> f64 {
        self.v as f64 / self.w as f64
    }
}

/// A multi-term query against a filter with per-term false-positive rate `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuerySpec {
    pub ell: u64,
    /// Coverage threshold in (0, 1].
    pub coverage: f64,
    pub p: f64,
}

impl QuerySpec {
    pub fn new(ell: u64, coverage: f64, p: f64) -> Result<Self> {
        if ell == 0 {
            return Err(Error::InvalidParams("ell must be >= 1".into()));
        }
        if !(coverage > 0.0 && coverage <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "coverage threshold K must lie in (0, 1], got {coverage}"
            )));
        }
        check_probability(p)?;
        Ok(QuerySpec { ell, coverage, p })
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "false-positive rate p must lie in (0, 1), got {p}"
        )))
    }
}

/// `(1 - (1 - 1/w)^(kv))^k`, the textbook false-positive rate.
///
/// Note this is never below [`fpr_approx`]: `1 - x <= e^-x` puts the
/// exponential form underneath, with the gap vanishing as `w` grows.
pub fn fpr_exact(spec: BloomSpec) -> f64 {
    if spec.v == 0 {
        return 0.0;
    }
    let kv = spec.k as f64 * spec.v as f64;
    // ln((1 - 1/w)^(kv)); -inf when w == 1
    let log_empty = kv * (-1.0 / spec.w as f64).ln_1p();
    let set = -log_empty.exp_m1();
    powi_k(set, spec.k)
}

/// `(1 - e^(-kv/w))^k`.
pub fn fpr_approx(spec: BloomSpec) -> f64 {
    if spec.v == 0 {
        return 0.0;
    }
    let ratio = spec.k as f64 * spec.v as f64 / spec.w as f64;
    let set = -(-ratio).exp_m1();
    powi_k(set, spec.k)
}

fn powi_k(base: f64, k: u32) -> f64 {
    if base <= 0.0 {
        0.0
    } else {
        (k as f64 * base.ln()).exp()
    }
}

/// Smallest filter width with `fpr_approx(w, k, v) <= p`.
///
/// Inverts the exponential form for a fixed `k`, giving
/// `w = ceil(k v / -ln(1 - p^(1/k)))`. An empty document gets `w = 1`.
pub fn size_filter(v: u64, p: f64, k: u32) -> Result<u64> {
    check_probability(p)?;
    if k == 0 {
        return Err(Error::InvalidParams("hash count k must be >= 1".into()));
    }
    if v == 0 {
        return Ok(1);
    }
    let root = (p.ln() / k as f64).exp();
    if root >= 1.0 {
        return Err(Error::InvalidParams(format!(
            "p = {p} is too close to 1 for k = {k}"
        )));
    }
    let per_bit = -(-root).ln_1p();
    let mut w = ((k as f64 * v as f64) / per_bit).ceil().max(1.0) as u64;

    // The closed form can land one off at the rounding boundary; settle on
    // the minimal width as judged by fpr_approx itself.
    let fpr = |w: u64| fpr_approx(BloomSpec { w, k, v });
    while fpr(w) > p {
        w += 1;
    }
    while w > 1 && fpr(w - 1) <= p {
        w -= 1;
    }
    Ok(w)
}

/// `max(1, round((w / v) ln 2))`.
pub fn optimal_k(w: u64, v: u64) -> u32 {
    let v = v.max(1);
    let k = (w as f64 / v as f64 * LN_2).round();
    k.clamp(1.0, u32::MAX as f64) as u32
}

/// Width and hash count from the optimal-k closed forms
/// `w = -v ln p / (ln 2)^2` and `k = (w / v) ln 2`.
pub fn optimal_params(v: u64, p: f64) -> Result<(u64, u32)> {
    check_probability(p)?;
    if v == 0 {
        return Ok((1, 1));
    }
    let w = (-(v as f64) * p.ln() / (LN_2 * LN_2)).ceil() as u64;
    Ok((w, optimal_k(w, v)))
}

/// Minimum score a document needs to be reported: `ceil(K * ell)`, at least 1.
pub fn coverage_threshold(ell: u64, coverage: f64) -> u64 {
    let raw = (coverage * ell as f64 - THRESHOLD_EPS).ceil();
    (raw.max(1.0) as u64).min(ell.max(1))
}

/// Probability that more than `floor(K ell)` of `ell` independent terms are
/// false positives, i.e. `1 - sum_{i=0}^{floor(K ell)} C(ell,i) p^i (1-p)^(ell-i)`.
pub fn query_fpr(q: QuerySpec) -> f64 {
    let floor = (q.coverage * q.ell as f64 + THRESHOLD_EPS).floor() as u64;
    binomial_upper_tail(q.ell, q.p, floor + 1)
}

/// Probability that a document with no true terms reaches the engine's
/// reporting threshold `ceil(K ell)`.
///
/// Differs from [`query_fpr`] only when `K ell` is an integer.
pub fn match_fpr(q: QuerySpec) -> f64 {
    binomial_upper_tail(q.ell, q.p, coverage_threshold(q.ell, q.coverage))
}

/// Chernoff upper bound `exp(-ell (K - p)^2 / (2 (1 - p)))` on [`query_fpr`].
pub fn query_fpr_chernoff(q: QuerySpec) -> Result<f64> {
    if q.coverage < q.p {
        return Err(Error::InvalidParams(format!(
            "Chernoff bound needs K >= p (K = {}, p = {})",
            q.coverage, q.p
        )));
    }
    let d = q.coverage - q.p;
    Ok((-(q.ell as f64) * d * d / (2.0 * (1.0 - q.p))).exp())
}

/// `P[X >= min_successes]` for `X ~ Binomial(n, p)`.
pub fn binomial_upper_tail(n: u64, p: f64, min_successes: u64) -> f64 {
    if min_successes == 0 {
        return 1.0;
    }
    if min_successes > n {
        return 0.0;
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();

    // log C(n, i) built up incrementally from log C(n, 0) = 0.
    let mut log_choose = 0.0f64;
    for i in 0..min_successes {
        log_choose += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    let mut terms = Vec::with_capacity((n - min_successes + 1) as usize);
    for i in min_successes..=n {
        terms.push(log_choose + i as f64 * ln_p + (n - i) as f64 * ln_q);
        if i < n {
            log_choose += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum = neumaier_sum(terms.iter().map(|t| (t - max).exp()));
    (max + sum.ln()).exp().min(1.0)
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
