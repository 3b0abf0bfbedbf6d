//! The classic bit-sliced index: one Bloom filter width for every document,
//! stored as a `w x |D|` bit matrix in row-major order.
//!
//! Row `r` holds bit `r` of every document's filter. Within a row, document
//! `j` is bit `j % 8` of byte `j / 8` (LSB first) and rows are zero-padded to
//! whole bytes.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::bloom_math::size_filter;
use crate::error::{Error, Result};
use crate::terms::{for_each_row, IndexParams, TermSet};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DocEntry {
    pub name: String,
    /// Distinct terms inserted into this document's filter.
    pub term_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicIndex {
    params: IndexParams,
    width: u64,
    docs: Vec<DocEntry>,
    rows: Vec<u8>,
}

pub(crate) fn row_bytes_for(doc_count: usize) -> usize {
    doc_count.div_ceil(8)
}

/// Number of workers used when the caller does not say.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub(crate) fn run_in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn check_documents(docs: &[TermSet], params: &IndexParams) -> Result<()> {
    params.validate()?;
    if docs.is_empty() {
        return Err(Error::NoDocuments);
    }
    let mut seen = HashSet::with_capacity(docs.len());
    for d in docs {
        if d.q() != params.q {
            return Err(Error::InvalidParams(format!(
                "document `{}` has q = {}, index has q = {}",
                d.name(),
                d.q(),
                params.q
            )));
        }
        if !seen.insert(d.name()) {
            return Err(Error::DuplicateName(d.name().to_string()));
        }
    }
    Ok(())
}

/// Appends the columns of `b` after the columns of `a`, row by row.
fn concat_rows(a: &[u8], a_docs: usize, b: &[u8], b_docs: usize, width: usize) -> Vec<u8> {
    let (a_bytes, b_bytes) = (row_bytes_for(a_docs), row_bytes_for(b_docs));
    let out_bytes = row_bytes_for(a_docs + b_docs);
    let mut out = vec![0u8; width * out_bytes];
    let shift = a_docs % 8;
    let start = a_docs / 8;
    for r in 0..width {
        let dst = &mut out[r * out_bytes..(r + 1) * out_bytes];
        dst[..a_bytes].copy_from_slice(&a[r * a_bytes..(r + 1) * a_bytes]);
        let src = &b[r * b_bytes..(r + 1) * b_bytes];
        if shift == 0 {
            dst[start..start + b_bytes].copy_from_slice(src);
        } else {
            for (i, &byte) in src.iter().enumerate() {
                dst[start + i] |= byte << shift;
                if start + i + 1 < out_bytes {
                    dst[start + i + 1] |= byte >> (8 - shift);
                }
            }
        }
    }
    out
}

impl ClassicIndex {
    /// Builds with the width required by the largest document, using all
    /// available cores.
    pub fn build(docs: &[TermSet], params: &IndexParams) -> Result<Self> {
        Self::build_with_workers(docs, params, default_workers())
    }

    pub fn build_with_workers(
        docs: &[TermSet],
        params: &IndexParams,
        workers: usize,
    ) -> Result<Self> {
        check_documents(docs, params)?;
        let largest = docs.iter().map(|d| d.len() as u64).max().unwrap_or(0);
        let width = size_filter(largest, params.p, params.k)?;
        Self::build_with_width(docs, params, width, workers)
    }

    /// Builds with a caller-chosen width, e.g. one agreed ahead of a merge.
    ///
    /// Documents are split into `workers` batches of consecutive columns;
    /// each batch is built on its own and the batches are concatenated in
    /// order, so the matrix does not depend on scheduling.
    pub fn build_with_width(
        docs: &[TermSet],
        params: &IndexParams,
        width: u64,
        workers: usize,
    ) -> Result<Self> {
        check_documents(docs, params)?;
        if width == 0 {
            return Err(Error::InvalidParams("width must be >= 1".into()));
        }
        if usize::try_from(width).is_err() {
            return Err(Error::InvalidParams(format!(
                "width {width} does not fit in memory"
            )));
        }
        let workers = workers.max(1);
        // batches are a multiple of 8 columns so that all but the last
        // concatenate on byte boundaries
        let batch = docs.len().div_ceil(workers).next_multiple_of(8);
        let parts: Vec<ClassicIndex> = run_in_pool(workers, || {
            docs.par_chunks(batch)
                .map(|chunk| Self::build_batch(chunk, params, width))
                .collect()
        })?;
        let mut parts = parts.into_iter();
        let mut index = parts.next().expect("at least one document");
        for part in parts {
            index.append(part);
        }
        Ok(index)
    }

    fn build_batch(docs: &[TermSet], params: &IndexParams, width: u64) -> ClassicIndex {
        let row_bytes = row_bytes_for(docs.len());
        let mut rows = vec![0u8; width as usize * row_bytes];
        for (col, doc) in docs.iter().enumerate() {
            let (byte, mask) = (col / 8, 1u8 << (col % 8));
            for term in doc.iter() {
                for_each_row(params.hash_scheme, term, params.k, width, |r| {
                    rows[r as usize * row_bytes + byte] |= mask;
                });
            }
        }
        ClassicIndex {
            params: *params,
            width,
            docs: docs
                .iter()
                .map(|d| DocEntry {
                    name: d.name().to_string(),
                    term_count: d.len() as u64,
                })
                .collect(),
            rows,
        }
    }

    /// An index with no documents, for use as a merge identity.
    pub fn empty(params: &IndexParams, width: u64) -> Result<Self> {
        params.validate()?;
        if width == 0 {
            return Err(Error::InvalidParams("width must be >= 1".into()));
        }
        Ok(ClassicIndex {
            params: *params,
            width,
            docs: Vec::new(),
            rows: Vec::new(),
        })
    }

    /// Reassembles an index from stored parts, checking sizes and padding.
    pub fn from_parts(
        params: IndexParams,
        width: u64,
        docs: Vec<DocEntry>,
        rows: Vec<u8>,
    ) -> Result<Self> {
        params.validate()?;
        if width == 0 {
            return Err(Error::Format("block width is zero".into()));
        }
        let row_bytes = row_bytes_for(docs.len());
        let expected = (width as u128) * row_bytes as u128;
        if rows.len() as u128 != expected {
            return Err(Error::Format(format!(
                "matrix has {} bytes, expected {expected}",
                rows.len()
            )));
        }
        let index = ClassicIndex {
            params,
            width,
            docs,
            rows,
        };
        if let Some(r) = index.first_dirty_padding_row() {
            return Err(Error::Format(format!("padding bits set in row {r}")));
        }
        Ok(index)
    }

    fn first_dirty_padding_row(&self) -> Option<u64> {
        let used = self.docs.len() % 8;
        if used == 0 || self.docs.is_empty() {
            return None;
        }
        let mask = !((1u8 << used) - 1);
        let rb = self.row_bytes();
        (0..self.width).find(|&r| self.rows[r as usize * rb + rb - 1] & mask != 0)
    }

    /// Concatenates two indexes built with identical parameters and width.
    pub fn merge(a: ClassicIndex, b: ClassicIndex) -> Result<Self> {
        if a.params != b.params {
            return Err(Error::Incompatible(format!(
                "parameters differ: {:?} vs {:?}",
                a.params, b.params
            )));
        }
        if a.width != b.width {
            return Err(Error::Incompatible(format!(
                "widths differ: {} vs {}",
                a.width, b.width
            )));
        }
        let names: HashSet<&str> = a.docs.iter().map(|d| d.name.as_str()).collect();
        if let Some(dup) = b.docs.iter().find(|d| names.contains(d.name.as_str())) {
            return Err(Error::DuplicateName(dup.name.clone()));
        }
        let mut a = a;
        a.append(b);
        Ok(a)
    }

    fn append(&mut self, other: ClassicIndex) {
        debug_assert_eq!(self.width, other.width);
        self.rows = concat_rows(
            &self.rows,
            self.docs.len(),
            &other.rows,
            other.docs.len(),
            self.width as usize,
        );
        self.docs.extend(other.docs);
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    /// Filter width, i.e. the number of rows.
    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn docs(&self) -> &[DocEntry] {
        &self.docs
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn row_bytes(&self) -> usize {
        row_bytes_for(self.docs.len())
    }

    pub fn row(&self, r: u64) -> &[u8] {
        let rb = self.row_bytes();
        &self.rows[r as usize * rb..(r as usize + 1) * rb]
    }

    /// The whole matrix, row after row.
    pub fn matrix(&self) -> &[u8] {
        &self.rows
    }

    pub fn bit(&self, row: u64, doc: usize) -> bool {
        self.row(row)[doc / 8] >> (doc % 8) & 1 == 1
    }

    /// Bytes of the bit matrix: `w * ceil(|D| / 8)`.
    pub fn footprint(&self) -> u64 {
        self.width * self.row_bytes() as u64
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut [u8] {
        &mut self.rows
    }
}
