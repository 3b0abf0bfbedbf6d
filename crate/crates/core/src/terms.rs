//! Term extraction: q-grams, reverse-complement canonicalization and the
//! hash family that maps a term to filter rows.

use std::fmt;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use crate::bloom_math::check_probability;
use crate::error::{Error, Result};

/// Default compact block size.
pub const DEFAULT_BLOCK_SIZE: usize = 1024;

/// Identifies the 64-bit hash family used for row mapping. Stored in the file
/// header; readers reject schemes they do not know.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum HashScheme {
    /// XXH64 of the term bytes, seeded with the hash index `0..k`.
    Xxh64 = 0,
}

impl HashScheme {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(HashScheme::Xxh64),
            other => Err(Error::UnknownHashScheme(other)),
        }
    }

    #[inline]
    pub fn hash(self, term: &[u8], seed: u64) -> u64 {
        match self {
            HashScheme::Xxh64 => xxh64(term, seed),
        }
    }
}

/// Parameters shared by every filter in an index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    /// Gram length.
    pub q: usize,
    /// Hash functions per term.
    pub k: u32,
    /// Target per-filter false-positive rate.
    pub p: f64,
    /// Treat a DNA gram and its reverse complement as one term.
    pub canonical: bool,
    /// Documents per compact block.
    pub block_size: usize,
    pub hash_scheme: HashScheme,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams {
            q: 31,
            k: 1,
            p: 0.3,
            canonical: false,
            block_size: DEFAULT_BLOCK_SIZE,
            hash_scheme: HashScheme::Xxh64,
        }
    }
}

impl IndexParams {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidParams("q must be >= 1".into()));
        }
        if self.q > u32::MAX as usize {
            return Err(Error::InvalidParams("q does not fit in 32 bits".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be >= 1".into()));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidParams("block size must be >= 1".into()));
        }
        check_probability(self.p)
    }

    /// Row positions of `term` in a filter of `w` bits.
    pub fn hash_rows(&self, term: &[u8], w: u64) -> Vec<u64> {
        hash_rows(self.hash_scheme, term, self.k, w)
    }

    pub fn extract(&self, name: impl Into<String>, content: &[impl AsRef<[u8]>]) -> TermSet {
        TermSet::extract(name, content, self.q, self.canonical)
    }
}

/// `H(term, seed = i) mod w` for `i in 0..k`.
pub fn hash_rows(scheme: HashScheme, term: &[u8], k: u32, w: u64) -> Vec<u64> {
    (0..k as u64)
        .map(|seed| scheme.hash(term, seed) % w)
        .collect()
}

pub(crate) fn for_each_row(
    scheme: HashScheme,
    term: &[u8],
    k: u32,
    w: u64,
    mut f: impl FnMut(u64),
) {
    for seed in 0..k as u64 {
        f(scheme.hash(term, seed) % w);
    }
}

#[inline]
fn complement(b: u8) -> Option<u8> {
    match b {
        b'A' => Some(b'T'),
        b'C' => Some(b'G'),
        b'G' => Some(b'C'),
        b'T' => Some(b'A'),
        _ => None,
    }
}

/// Reverse complement of a string over `{A, C, G, T}`.
pub fn revcomp(seq: &[u8]) -> Result<Vec<u8>> {
    seq.iter()
        .rev()
        .map(|&b| complement(b).ok_or(Error::InvalidBase(b as char)))
        .collect()
}

/// Writes `min(gram, revcomp(gram))` into `out`. Returns false and leaves
/// `out` unspecified if `gram` has a non-ACGT byte.
fn canonicalize_into(gram: &[u8], out: &mut Vec<u8>) -> bool {
    out.clear();
    for &b in gram.iter().rev() {
        match complement(b) {
            Some(c) => out.push(c),
            None => return false,
        }
    }
    if gram <= out.as_slice() {
        out.clear();
        out.extend_from_slice(gram);
    }
    true
}

/// The distinct q-grams of one document or query.
///
/// Terms are stored back to back in one buffer, sorted and deduplicated.
#[derive(Clone, PartialEq, Eq)]
pub struct TermSet {
    name: String,
    q: usize,
    data: Vec<u8>,
    skipped: u64,
}

impl fmt::Debug for TermSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TermSet")
            .field("name", &self.name)
            .field("q", &self.q)
            .field("len", &self.len())
            .field("skipped", &self.skipped)
            .finish()
    }
}

impl TermSet {
    /// Collects every q-gram of every string in `content`. Grams never span
    /// two strings, and strings shorter than `q` contribute nothing.
    ///
    /// With `canonical`, each gram is replaced by the smaller of itself and
    /// its reverse complement; grams containing anything other than
    /// `A`, `C`, `G`, `T` are dropped and counted in [`TermSet::skipped`].
    pub fn extract(
        name: impl Into<String>,
        content: &[impl AsRef<[u8]>],
        q: usize,
        canonical: bool,
    ) -> TermSet {
        assert!(q >= 1, "q must be >= 1");
        let total: usize = content
            .iter()
            .map(|s| (s.as_ref().len() + 1).saturating_sub(q))
            .sum();
        let mut grams = Vec::with_capacity(total * q);
        let mut skipped = 0u64;
        let mut scratch = Vec::with_capacity(q);
        for s in content {
            let s = s.as_ref();
            if s.len() < q {
                continue;
            }
            for gram in s.windows(q) {
                if canonical {
                    if canonicalize_into(gram, &mut scratch) {
                        grams.extend_from_slice(&scratch);
                    } else {
                        skipped += 1;
                    }
                } else {
                    grams.extend_from_slice(gram);
                }
            }
        }
        let mut set = TermSet {
            name: name.into(),
            q,
            data: grams,
            skipped,
        };
        set.sort_dedup();
        set
    }

    /// Builds a set directly from terms, each of length `q`.
    pub fn from_terms<T: AsRef<[u8]>>(
        name: impl Into<String>,
        q: usize,
        terms: impl IntoIterator<Item = T>,
    ) -> Result<TermSet> {
        let mut data = Vec::new();
        for t in terms {
            let t = t.as_ref();
            if t.len() != q {
                return Err(Error::InvalidParams(format!(
                    "term of length {} in a q = {q} set",
                    t.len()
                )));
            }
            data.extend_from_slice(t);
        }
        let mut set = TermSet {
            name: name.into(),
            q,
            data,
            skipped: 0,
        };
        set.sort_dedup();
        Ok(set)
    }

    fn sort_dedup(&mut self) {
        let q = self.q;
        let n = self.data.len() / q;
        let mut order: Vec<usize> = (0..n).collect();
        let data = &self.data;
        order.sort_unstable_by(|&a, &b| data[a * q..(a + 1) * q].cmp(&data[b * q..(b + 1) * q]));
        let mut out: Vec<u8> = Vec::with_capacity(self.data.len());
        for i in order {
            let gram = &data[i * q..(i + 1) * q];
            if out.len() >= q && &out[out.len() - q..] == gram {
                continue;
            }
            out.extend_from_slice(gram);
        }
        out.shrink_to_fit();
        self.data = out;
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of distinct terms.
    pub fn len(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Grams dropped for containing non-DNA characters under canonicalization.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    /// Terms in ascending byte order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.data.chunks_exact(self.q)
    }

    pub fn contains(&self, term: &[u8]) -> bool {
        if term.len() != self.q {
            return false;
        }
        let q = self.q;
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.data[mid * q..(mid + 1) * q].cmp(term) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}
