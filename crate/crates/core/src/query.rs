//! Query execution over a bit-sliced matrix.
//!
//! For every block the engine hashes each distinct query term to its `k`
//! rows, ANDs those rows into one indicator row, and adds the indicator
//! into per-document counters. Counters are packed eight to a `u128` word
//! (one word per indicator byte) so a single table lookup and one wide add
//! process eight documents at once.

use rayon::prelude::*;

use crate::bloom_math::coverage_threshold;
use crate::classic::{run_in_pool, ClassicIndex, DocEntry};
use crate::compact::CompactIndex;
use crate::error::{Error, Result};
use crate::terms::{for_each_row, IndexParams, TermSet};

/// Read access to the rows of a (possibly multi-block) bit-sliced index.
pub trait RowSource: Sync {
    fn params(&self) -> &IndexParams;

    fn block_count(&self) -> usize;

    fn block_width(&self, block: usize) -> u64;

    fn block_docs(&self, block: usize) -> &[DocEntry];

    /// Copies row `row` of `block` into `buf`, which is exactly
    /// `ceil(docs / 8)` bytes long.
    fn read_row(&self, block: usize, row: u64, buf: &mut [u8]) -> Result<()>;

    fn doc_count(&self) -> usize {
        (0..self.block_count())
            .map(|b| self.block_docs(b).len())
            .sum()
    }
}

impl RowSource for ClassicIndex {
    fn params(&self) -> &IndexParams {
        ClassicIndex::params(self)
    }

    fn block_count(&self) -> usize {
        1
    }

    fn block_width(&self, _block: usize) -> u64 {
        self.width()
    }

    fn block_docs(&self, _block: usize) -> &[DocEntry] {
        self.docs()
    }

    fn read_row(&self, _block: usize, row: u64, buf: &mut [u8]) -> Result<()> {
        buf.copy_from_slice(self.row(row));
        Ok(())
    }
}

impl RowSource for CompactIndex {
    fn params(&self) -> &IndexParams {
        CompactIndex::params(self)
    }

    fn block_count(&self) -> usize {
        self.blocks().len()
    }

    fn block_width(&self, block: usize) -> u64 {
        self.blocks()[block].width()
    }

    fn block_docs(&self, block: usize) -> &[DocEntry] {
        self.blocks()[block].docs()
    }

    fn read_row(&self, block: usize, row: u64, buf: &mut [u8]) -> Result<()> {
        buf.copy_from_slice(self.blocks()[block].row(row));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOptions {
    /// Fraction of distinct query terms a document must contain, in (0, 1].
    pub coverage: f64,
    /// Keep at most this many hits after thresholding.
    pub top: Option<usize>,
    /// Workers sharing the score array; 1 runs inline.
    pub workers: usize,
}

impl Default for QueryOptions {
    fn default() -> Self {
        QueryOptions {
            coverage: 0.9,
            top: None,
            workers: 1,
        }
    }
}

impl QueryOptions {
    pub fn with_coverage(coverage: f64) -> Self {
        QueryOptions {
            coverage,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coverage > 0.0 && self.coverage <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "coverage threshold K must lie in (0, 1], got {}",
                self.coverage
            )));
        }
        if self.top == Some(0) {
            return Err(Error::InvalidParams("top must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredHit {
    pub doc_name: String,
    /// Distinct query terms whose Bloom test passed for this document.
    pub score: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    /// Distinct terms in the query.
    pub ell: u64,
    /// Minimum reported score, `ceil(K * ell)`.
    pub threshold: u64,
    pub hits: Vec<ScoredHit>,
}

const fn build_expand16() -> [u128; 256] {
    let mut table = [0u128; 256];
    let mut b = 0;
    while b < 256 {
        let mut v = 0u128;
        let mut j = 0;
        while j < 8 {
            v |= (((b >> j) & 1) as u128) << (16 * j);
            j += 1;
        }
        table[b] = v;
        b += 1;
    }
    table
}

const fn build_expand32() -> [[u128; 2]; 256] {
    let mut table = [[0u128; 2]; 256];
    let mut b = 0;
    while b < 256 {
        let mut j = 0;
        while j < 8 {
            table[b][j / 4] |= (((b >> j) & 1) as u128) << (32 * (j % 4));
            j += 1;
        }
        b += 1;
    }
    table
}

/// Byte -> eight 16-bit counters, counter `j` = bit `j`.
static EXPAND16: [u128; 256] = build_expand16();
/// Byte -> eight 32-bit counters in two words.
static EXPAND32: [[u128; 2]; 256] = build_expand32();

/// The eight per-document increments encoded by one indicator byte,
/// lowest document first.
pub fn expand_byte(b: u8) -> [u16; 8] {
    let packed = EXPAND16[b as usize];
    std::array::from_fn(|j| (packed >> (16 * j)) as u16)
}

/// Bitwise AND of equally long rows.
pub fn and_rows(rows: &[&[u8]]) -> Vec<u8> {
    let (first, rest) = rows.split_first().expect("at least one row");
    let mut out = first.to_vec();
    for row in rest {
        assert_eq!(row.len(), out.len(), "row length mismatch");
        for (o, r) in out.iter_mut().zip(row.iter()) {
            *o &= r;
        }
    }
    out
}

/// Distinct query terms of `pattern` under the index's gram rules.
pub fn pattern_terms(params: &IndexParams, pattern: &[u8]) -> TermSet {
    TermSet::extract("query", &[pattern], params.q, params.canonical)
}

/// Per-term indicator rows for one block, `ell * row_bytes` bytes.
fn indicator_rows(
    src: &(impl RowSource + ?Sized),
    block: usize,
    terms: &TermSet,
) -> Result<Vec<u8>> {
    let params = src.params();
    let width = src.block_width(block);
    let row_bytes = src.block_docs(block).len().div_ceil(8);
    let mut out = vec![0u8; terms.len() * row_bytes];
    let mut row = vec![0u8; row_bytes];
    let mut rows = Vec::with_capacity(params.k as usize);
    for (t, term) in terms.iter().enumerate() {
        rows.clear();
        for_each_row(params.hash_scheme, term, params.k, width, |r| rows.push(r));
        let dst = &mut out[t * row_bytes..(t + 1) * row_bytes];
        src.read_row(block, rows[0], dst)?;
        for &r in &rows[1..] {
            src.read_row(block, r, &mut row)?;
            for (d, s) in dst.iter_mut().zip(row.iter()) {
                *d &= s;
            }
        }
    }
    Ok(out)
}

/// Adds every term's indicator bytes from `start` on into 16-bit lanes.
fn add16(indicators: &[u8], row_bytes: usize, start: usize, acc: &mut [u128]) {
    for term_row in indicators.chunks_exact(row_bytes) {
        for (a, &b) in acc.iter_mut().zip(&term_row[start..]) {
            *a = a.wrapping_add(EXPAND16[b as usize]);
        }
    }
}

fn add32(indicators: &[u8], row_bytes: usize, start: usize, acc: &mut [[u128; 2]]) {
    for term_row in indicators.chunks_exact(row_bytes) {
        for (a, &b) in acc.iter_mut().zip(&term_row[start..]) {
            let e = &EXPAND32[b as usize];
            a[0] = a[0].wrapping_add(e[0]);
            a[1] = a[1].wrapping_add(e[1]);
        }
    }
}

/// Splits `len` bytes into at most `workers` contiguous ranges.
fn partitions(len: usize, workers: usize) -> Vec<(usize, usize)> {
    let step = len.div_ceil(workers.max(1)).max(1);
    (0..len)
        .step_by(step)
        .map(|s| (s, (s + step).min(len)))
        .collect()
}

fn block_scores(
    indicators: &[u8],
    row_bytes: usize,
    doc_count: usize,
    ell: usize,
    workers: usize,
) -> Vec<u32> {
    let ranges = partitions(row_bytes, workers);
    let mut scores = vec![0u32; row_bytes * 8];
    if ell <= u16::MAX as usize {
        let mut acc = vec![0u128; row_bytes];
        let mut slices = Vec::with_capacity(ranges.len());
        let mut rest = acc.as_mut_slice();
        for &(s, e) in &ranges {
            let (head, tail) = rest.split_at_mut(e - s);
            slices.push((s, head));
            rest = tail;
        }
        if slices.len() == 1 {
            add16(indicators, row_bytes, 0, slices.pop().unwrap().1);
        } else {
            slices
                .into_par_iter()
                .for_each(|(start, part)| add16(indicators, row_bytes, start, part));
        }
        for (i, word) in acc.iter().enumerate() {
            for j in 0..8 {
                scores[i * 8 + j] = (word >> (16 * j)) as u16 as u32;
            }
        }
    } else {
        let mut acc = vec![[0u128; 2]; row_bytes];
        let mut slices = Vec::with_capacity(ranges.len());
        let mut rest = acc.as_mut_slice();
        for &(s, e) in &ranges {
            let (head, tail) = rest.split_at_mut(e - s);
            slices.push((s, head));
            rest = tail;
        }
        if slices.len() == 1 {
            add32(indicators, row_bytes, 0, slices.pop().unwrap().1);
        } else {
            slices
                .into_par_iter()
                .for_each(|(start, part)| add32(indicators, row_bytes, start, part));
        }
        for (i, words) in acc.iter().enumerate() {
            for j in 0..8 {
                scores[i * 8 + j] = (words[j / 4] >> (32 * (j % 4))) as u32;
            }
        }
    }
    scores.truncate(doc_count);
    scores
}

/// Scores every document for `terms`, in stored order (block by block).
pub fn score_documents(
    src: &(impl RowSource + ?Sized),
    terms: &TermSet,
    workers: usize,
) -> Result<Vec<u32>> {
    let ell = terms.len();
    if ell == 0 {
        return Err(Error::EmptyQuery);
    }
    if ell > u32::MAX as usize {
        return Err(Error::QueryTooLong(ell));
    }
    if terms.q() != src.params().q {
        return Err(Error::InvalidParams(format!(
            "query terms have q = {}, index has q = {}",
            terms.q(),
            src.params().q
        )));
    }
    let workers = workers.max(1);
    run_in_pool(workers, || {
        let mut scores = Vec::with_capacity(src.doc_count());
        for block in 0..src.block_count() {
            let doc_count = src.block_docs(block).len();
            if doc_count == 0 {
                continue;
            }
            let row_bytes = doc_count.div_ceil(8);
            let indicators = indicator_rows(src, block, terms)?;
            scores.extend(block_scores(
                &indicators,
                row_bytes,
                doc_count,
                ell,
                workers,
            ));
        }
        Ok(scores)
    })?
}

/// Scores, thresholds at `ceil(K * ell)` and ranks by score descending,
/// then document name ascending.
pub fn query_terms(
    src: &(impl RowSource + ?Sized),
    terms: &TermSet,
    opts: &QueryOptions,
) -> Result<QueryResult> {
    opts.validate()?;
    let scores = score_documents(src, terms, opts.workers)?;
    let ell = terms.len() as u64;
    let threshold = coverage_threshold(ell, opts.coverage);
    let names = (0..src.block_count()).flat_map(|b| src.block_docs(b).iter());
    let mut hits: Vec<ScoredHit> = names
        .zip(scores)
        .filter(|(_, s)| *s as u64 >= threshold)
        .map(|(d, s)| ScoredHit {
            doc_name: d.name.clone(),
            score: s as u64,
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then_with(|| a.doc_name.cmp(&b.doc_name))
    });
    if let Some(top) = opts.top {
        hits.truncate(top);
    }
    Ok(QueryResult {
        ell,
        threshold,
        hits,
    })
}

/// Runs a raw pattern: extracts its distinct q-grams (canonicalized when
/// the index is) and calls [`query_terms`].
pub fn query(
    src: &(impl RowSource + ?Sized),
    pattern: &[u8],
    opts: &QueryOptions,
) -> Result<QueryResult> {
    let terms = pattern_terms(src.params(), pattern);
    query_terms(src, &terms, opts)
}
