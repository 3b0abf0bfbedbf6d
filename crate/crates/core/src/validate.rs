//! Self-checks for a built index against the corpus it was built from.
//!
//! Three suites:
//! 1. no false negatives: substrings of documents must return their source
//!    at full score with `K = 1`;
//! 2. calibration: single alien terms measure each document's
//!    false-positive rate, which should sit near `p` for the fullest
//!    document of each block and not above it elsewhere;
//! 3. oracle: on up to 64 sampled documents, every filter column and every
//!    query score is recomputed straight from the document's terms.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bloom_math::{fpr_exact, BloomSpec};
use crate::error::{Error, Result};
use crate::input::Document;
use crate::query::{pattern_terms, query_terms, score_documents, QueryOptions, RowSource};
use crate::terms::{hash_rows, TermSet};

/// Blocks whose fullest document has fewer terms than this are too small
/// for the rate to settle near `p` (a 3-bit filter can only hit 0, 1/3, ...).
pub const MIN_CALIBRATION_TERMS: u64 = 1000;

#[derive(Debug, Clone)]
pub struct ValidationConfig {
    /// Patterns sampled from documents for suite 1.
    pub patterns: usize,
    /// Pattern lengths cycled through in suite 1; clipped to the source string.
    pub pattern_lengths: Vec<usize>,
    /// Alien single-term probes for suite 2.
    pub alien_trials: usize,
    /// Allowed distance of a measured rate from `p`.
    pub tolerance: f64,
    /// Documents sampled for suite 3.
    pub oracle_docs: usize,
    /// Queries scored against the oracle in suite 3.
    pub oracle_queries: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            patterns: 1000,
            pattern_lengths: vec![31, 100, 1000],
            alien_trials: 100_000,
            tolerance: 0.03,
            oracle_docs: 64,
            oracle_queries: 200,
            seed: 0x5eed,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub suites: Vec<SuiteReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            let verdict = if s.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{verdict}\t{}\t{}", s.name, s.detail)?;
        }
        Ok(())
    }
}

/// Per-document view of the corpus, in the index's stored order.
struct Corpus<'a> {
    docs: Vec<&'a Document>,
    terms: Vec<TermSet>,
    /// Block of each stored document.
    block: Vec<usize>,
}

fn align<'a>(src: &(impl RowSource + ?Sized), corpus: &'a [Document]) -> Result<Corpus<'a>> {
    let by_name: HashMap<&str, &Document> = corpus.iter().map(|d| (d.name.as_str(), d)).collect();
    if by_name.len() != corpus.len() {
        return Err(Error::Incompatible(
            "corpus has duplicate document names".into(),
        ));
    }
    if src.doc_count() != corpus.len() {
        return Err(Error::Incompatible(format!(
            "index has {} documents, corpus has {}",
            src.doc_count(),
            corpus.len()
        )));
    }
    let params = src.params();
    let mut out = Corpus {
        docs: Vec::with_capacity(corpus.len()),
        terms: Vec::with_capacity(corpus.len()),
        block: Vec::with_capacity(corpus.len()),
    };
    for b in 0..src.block_count() {
        for entry in src.block_docs(b) {
            let doc = by_name.get(entry.name.as_str()).ok_or_else(|| {
                Error::Incompatible(format!("index document `{}` not in corpus", entry.name))
            })?;
            let terms = doc.terms(params);
            if terms.len() as u64 != entry.term_count {
                return Err(Error::Incompatible(format!(
                    "document `{}` has {} terms, index recorded {}",
                    entry.name,
                    terms.len(),
                    entry.term_count
                )));
            }
            out.docs.push(doc);
            out.terms.push(terms);
            out.block.push(b);
        }
    }
    Ok(out)
}

fn sample_pattern<'a>(
    doc: &'a Document,
    len: usize,
    q: usize,
    rng: &mut impl Rng,
) -> Option<&'a [u8]> {
    let usable: Vec<&Vec<u8>> = doc.strings.iter().filter(|s| s.len() >= q).collect();
    let s = usable.choose(rng)?;
    let len = len.clamp(q, s.len());
    let start = rng.gen_range(0..=s.len() - len);
    Some(&s[start..start + len])
}

fn no_false_negatives(
    src: &(impl RowSource + ?Sized),
    corpus: &Corpus<'_>,
    cfg: &ValidationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SuiteReport> {
    let q = src.params().q;
    let candidates: Vec<usize> = (0..corpus.docs.len())
        .filter(|&i| !corpus.terms[i].is_empty())
        .collect();
    let opts = QueryOptions {
        coverage: 1.0,
        top: None,
        workers: cfg.workers,
    };
    let lengths = if cfg.pattern_lengths.is_empty() {
        vec![q]
    } else {
        cfg.pattern_lengths.clone()
    };
    let (mut run, mut misses) = (0usize, Vec::new());
    if !candidates.is_empty() {
        for i in 0..cfg.patterns {
            let d = candidates[rng.gen_range(0..candidates.len())];
            let Some(pattern) = sample_pattern(corpus.docs[d], lengths[i % lengths.len()], q, rng)
            else {
                continue;
            };
            let terms = pattern_terms(src.params(), pattern);
            if terms.is_empty() {
                continue;
            }
            run += 1;
            let res = query_terms(src, &terms, &opts)?;
            let name = &corpus.docs[d].name;
            if !res
                .hits
                .iter()
                .any(|h| &h.doc_name == name && h.score == res.ell)
            {
                misses.push(name.clone());
            }
        }
    }
    let passed = misses.is_empty();
    let detail = if passed {
        format!("{run} sampled patterns all returned their source at full score")
    } else {
        misses.sort();
        misses.dedup();
        format!(
            "{} source documents missed, e.g. {:?}",
            misses.len(),
            &misses[..misses.len().min(5)]
        )
    };
    Ok(SuiteReport {
        name: "no-false-negatives",
        passed,
        detail,
    })
}

/// Random q-gram over `alphabet` that occurs in no document.
fn alien_term(
    src: &(impl RowSource + ?Sized),
    corpus: &Corpus<'_>,
    alphabet: &[u8],
    rng: &mut ChaCha8Rng,
) -> Option<TermSet> {
    let q = src.params().q;
    for _ in 0..1000 {
        let raw: Vec<u8> = (0..q)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
            .collect();
        let terms = pattern_terms(src.params(), &raw);
        let Some(term) = terms.iter().next() else {
            continue;
        };
        if corpus.terms.iter().all(|t| !t.contains(term)) {
            return Some(terms);
        }
    }
    None
}

fn calibration(
    src: &(impl RowSource + ?Sized),
    corpus: &Corpus<'_>,
    cfg: &ValidationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SuiteReport> {
    let params = *src.params();
    let alphabet: Vec<u8> = if params.canonical {
        b"ACGT".to_vec()
    } else {
        let mut seen = [false; 256];
        for d in &corpus.docs {
            for s in &d.strings {
                for &b in s {
                    seen[b as usize] = true;
                }
            }
        }
        (0..=255u8).filter(|&b| seen[b as usize]).collect()
    };
    if alphabet.is_empty() {
        return Ok(SuiteReport {
            name: "fpr-calibration",
            passed: true,
            detail: "empty corpus, nothing to measure".into(),
        });
    }
    let mut hits = vec![0u64; corpus.docs.len()];
    let mut trials = 0u64;
    for _ in 0..cfg.alien_trials {
        let Some(alien) = alien_term(src, corpus, &alphabet, rng) else {
            break;
        };
        trials += 1;
        for (h, s) in hits
            .iter_mut()
            .zip(score_documents(src, &alien, cfg.workers)?)
        {
            *h += s as u64;
        }
    }
    if trials == 0 {
        return Ok(SuiteReport {
            name: "fpr-calibration",
            passed: false,
            detail: "could not generate any alien term".into(),
        });
    }
    let rate = |i: usize| hits[i] as f64 / trials as f64;

    let mut failures = Vec::new();
    let mut checked_blocks = 0;
    let mut summary = Vec::new();
    let mut first = 0usize;
    for b in 0..src.block_count() {
        let docs = src.block_docs(b);
        let width = src.block_width(b);
        let range = first..first + docs.len();
        first = range.end;
        let Some(fullest) = range
            .clone()
            .max_by_key(|&i| (docs[i - range.start].term_count, i))
        else {
            continue;
        };
        let max_terms = docs[fullest - range.start].term_count;
        if max_terms >= MIN_CALIBRATION_TERMS {
            checked_blocks += 1;
            let r = rate(fullest);
            summary.push(r);
            if (r - params.p).abs() > cfg.tolerance {
                failures.push(format!(
                    "block {b}: fullest document `{}` rate {r:.4}, p = {}",
                    corpus.docs[fullest].name, params.p
                ));
            }
        }
        for i in range.clone() {
            let spec = BloomSpec {
                w: width,
                k: params.k,
                v: docs[i - range.start].term_count,
            };
            let bound = params.p.max(fpr_exact(spec)) + cfg.tolerance;
            if rate(i) > bound {
                failures.push(format!(
                    "document `{}` rate {:.4} above {bound:.4}",
                    corpus.docs[i].name,
                    rate(i)
                ));
            }
        }
    }
    let passed = failures.is_empty();
    let detail = if passed {
        let (lo, hi) = summary
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(r), hi.max(r))
            });
        if checked_blocks == 0 {
            format!("{trials} alien terms; no block large enough to calibrate, per-document bounds hold")
        } else {
            format!("{trials} alien terms; fullest-document rates in [{lo:.4}, {hi:.4}] over {checked_blocks} blocks")
        }
    } else {
        format!(
            "{} violations: {}",
            failures.len(),
            failures[..failures.len().min(5)].join("; ")
        )
    };
    Ok(SuiteReport {
        name: "fpr-calibration",
        passed,
        detail,
    })
}

/// Expected set rows of one document's filter.
fn oracle_rows(terms: &TermSet, params: &crate::terms::IndexParams, width: u64) -> HashSet<u64> {
    terms
        .iter()
        .flat_map(|t| hash_rows(params.hash_scheme, t, params.k, width))
        .collect()
}

fn oracle_equivalence(
    src: &(impl RowSource + ?Sized),
    corpus: &Corpus<'_>,
    cfg: &ValidationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SuiteReport> {
    let params = *src.params();
    let mut sample: Vec<usize> = (0..corpus.docs.len()).collect();
    if sample.len() > cfg.oracle_docs {
        sample.shuffle(rng);
        sample.truncate(cfg.oracle_docs);
        sample.sort_unstable();
    }
    // stored position -> (block, column)
    let mut column = Vec::with_capacity(corpus.docs.len());
    for b in 0..src.block_count() {
        for c in 0..src.block_docs(b).len() {
            column.push((b, c));
        }
    }
    let expected: HashMap<usize, HashSet<u64>> = sample
        .iter()
        .map(|&i| {
            (
                i,
                oracle_rows(&corpus.terms[i], &params, src.block_width(corpus.block[i])),
            )
        })
        .collect();

    let mut failures = Vec::new();
    let blocks: HashSet<usize> = sample.iter().map(|&i| corpus.block[i]).collect();
    let mut blocks: Vec<usize> = blocks.into_iter().collect();
    blocks.sort_unstable();
    for &b in &blocks {
        let doc_count = src.block_docs(b).len();
        let row_bytes = doc_count.div_ceil(8);
        let mut row = vec![0u8; row_bytes];
        let members: Vec<usize> = sample
            .iter()
            .copied()
            .filter(|&i| corpus.block[i] == b)
            .collect();
        let pad_mask: u8 = if doc_count % 8 == 0 {
            0
        } else {
            !((1u8 << (doc_count % 8)) - 1)
        };
        for r in 0..src.block_width(b) {
            src.read_row(b, r, &mut row)?;
            if row_bytes > 0 && row[row_bytes - 1] & pad_mask != 0 {
                failures.push(format!("block {b} row {r}: padding bits set"));
            }
            for &i in &members {
                let c = column[i].1;
                let bit = row[c / 8] >> (c % 8) & 1 == 1;
                if bit != expected[&i].contains(&r) {
                    failures.push(format!(
                        "document `{}` row {r}: stored {}, expected {}",
                        corpus.docs[i].name, bit as u8, !bit as u8
                    ));
                }
            }
        }
    }

    // scores recomputed from the expected columns
    let mut queries = 0;
    let candidates: Vec<usize> = sample
        .iter()
        .copied()
        .filter(|&i| !corpus.terms[i].is_empty())
        .collect();
    for n in 0..cfg.oracle_queries {
        if candidates.is_empty() {
            break;
        }
        let d = candidates[rng.gen_range(0..candidates.len())];
        let len = cfg
            .pattern_lengths
            .get(n % cfg.pattern_lengths.len().max(1))
            .copied()
            .unwrap_or(params.q);
        let Some(pattern) = sample_pattern(corpus.docs[d], len, params.q, rng) else {
            continue;
        };
        let mut pattern = pattern.to_vec();
        // perturb half the queries so partial scores are exercised
        if n % 2 == 1 {
            let positions = pattern.len();
            for _ in 0..positions.div_ceil(10) {
                let at = rng.gen_range(0..positions);
                let other = pattern[rng.gen_range(0..positions)];
                pattern[at] = other;
            }
        }
        let terms = pattern_terms(&params, &pattern);
        if terms.is_empty() {
            continue;
        }
        queries += 1;
        let scores = score_documents(src, &terms, cfg.workers)?;
        for &i in &sample {
            let w = src.block_width(corpus.block[i]);
            let set = &expected[&i];
            let want = terms
                .iter()
                .filter(|t| {
                    hash_rows(params.hash_scheme, t, params.k, w)
                        .iter()
                        .all(|r| set.contains(r))
                })
                .count() as u32;
            if scores[i] != want {
                failures.push(format!(
                    "document `{}`: engine score {}, oracle {want}",
                    corpus.docs[i].name, scores[i]
                ));
            }
        }
    }

    let passed = failures.is_empty();
    let detail = if passed {
        format!(
            "{} documents, {queries} queries match the column oracle",
            sample.len()
        )
    } else {
        format!(
            "{} mismatches: {}",
            failures.len(),
            failures[..failures.len().min(5)].join("; ")
        )
    };
    Ok(SuiteReport {
        name: "oracle-equivalence",
        passed,
        detail,
    })
}

/// Runs all three suites. Errors mean the corpus does not belong to the
/// index or the index could not be read; failed checks are reported in
/// the returned report.
pub fn validate(
    src: &(impl RowSource + ?Sized),
    corpus: &[Document],
    cfg: &ValidationConfig,
) -> Result<ValidationReport> {
    let aligned = align(src, corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let suites = vec![
        no_false_negatives(src, &aligned, cfg, &mut rng)?,
        calibration(src, &aligned, cfg, &mut rng)?,
        oracle_equivalence(src, &aligned, cfg, &mut rng)?,
    ];
    Ok(ValidationReport { suites })
}
