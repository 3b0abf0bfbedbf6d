#![allow(dead_code)]

//! Corpus generators and a column-wise Bloom oracle shared by the
//! integration tests. The oracle never looks at the bit matrix: it keeps
//! each document's filter as a set of row numbers and tests membership
//! directly.

use std::collections::{HashMap, HashSet};

use cobs_index::{Document, IndexParams, RowSource, TermSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dna(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect()
}

/// `n` single-record DNA documents with lengths drawn uniformly from `lens`.
pub fn dna_corpus(seed: u64, n: usize, lens: std::ops::RangeInclusive<usize>) -> Vec<Document> {
    let mut rng = rng(seed);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(lens.clone());
            Document {
                name: format!("doc{i:04}"),
                strings: vec![random_dna(&mut rng, len)],
            }
        })
        .collect()
}

pub fn term_sets(docs: &[Document], params: &IndexParams) -> Vec<TermSet> {
    docs.iter().map(|d| d.terms(params)).collect()
}

/// 2-bit packing of a DNA k-mer, k <= 32.
pub fn pack(kmer: &[u8]) -> u64 {
    kmer.iter().fold(0u64, |acc, &b| {
        let code = match b {
            b'A' => 0,
            b'C' => 1,
            b'G' => 2,
            b'T' => 3,
            other => panic!("not DNA: {other}"),
        };
        acc << 2 | code
    })
}

/// Independent reverse complement, used to canonicalize probes.
pub fn canonical(kmer: &[u8]) -> Vec<u8> {
    let rc: Vec<u8> = kmer
        .iter()
        .rev()
        .map(|b| match b {
            b'A' => b'T',
            b'C' => b'G',
            b'G' => b'C',
            b'T' => b'A',
            other => panic!("not DNA: {other}"),
        })
        .collect();
    if rc.as_slice() < kmer {
        rc
    } else {
        kmer.to_vec()
    }
}

/// Every canonical k-mer of the corpus, packed.
pub fn kmer_universe(docs: &[Document], k: usize) -> HashSet<u64> {
    let mut set = HashSet::new();
    for d in docs {
        for s in &d.strings {
            for w in s.windows(k) {
                set.insert(pack(&canonical(w)));
            }
        }
    }
    set
}

/// Column-wise replay of every document's Bloom filter.
pub struct BloomOracle {
    params: IndexParams,
    /// name -> (width, set rows)
    filters: HashMap<String, (u64, HashSet<u64>)>,
}

impl BloomOracle {
    /// Rebuilds each document's filter at the width the index assigned to
    /// its block.
    pub fn new(src: &(impl RowSource + ?Sized), docs: &[TermSet]) -> Self {
        let params = *src.params();
        let widths: HashMap<&str, u64> = (0..src.block_count())
            .flat_map(|b| {
                src.block_docs(b)
                    .iter()
                    .map(move |d| (d.name.as_str(), src.block_width(b)))
            })
            .collect();
        let filters = docs
            .iter()
            .map(|d| {
                let w = widths[d.name()];
                let mut rows = HashSet::new();
                for t in d.iter() {
                    for seed in 0..params.k as u64 {
                        rows.insert(xxhash_rust::xxh64::xxh64(t, seed) % w);
                    }
                }
                (d.name().to_string(), (w, rows))
            })
            .collect();
        BloomOracle { params, filters }
    }

    pub fn contains(&self, doc: &str, term: &[u8]) -> bool {
        let (w, rows) = &self.filters[doc];
        (0..self.params.k as u64)
            .all(|seed| rows.contains(&(xxhash_rust::xxh64::xxh64(term, seed) % w)))
    }

    pub fn score(&self, doc: &str, terms: &TermSet) -> u64 {
        terms.iter().filter(|t| self.contains(doc, t)).count() as u64
    }

    /// Hits at `ceil(K ell)` ranked by score descending then name.
    pub fn query(&self, terms: &TermSet, coverage: f64) -> Vec<(String, u64)> {
        let ell = terms.len() as u64;
        let threshold = ((coverage * ell as f64 - 1e-9).ceil() as u64).max(1);
        let mut hits: Vec<(String, u64)> = self
            .filters
            .keys()
            .map(|name| (name.clone(), self.score(name, terms)))
            .filter(|(_, s)| *s >= threshold)
            .collect();
        hits.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        hits
    }
}

/// Mixed query workload: substrings of documents, mutated substrings and
/// random strings, over the corpus alphabet.
pub fn query_suite(
    docs: &[Document],
    q: usize,
    n: usize,
    lengths: &[usize],
    seed: u64,
) -> Vec<Vec<u8>> {
    let mut rng = rng(seed);
    let alphabet: Vec<u8> = {
        let mut seen: Vec<u8> = docs
            .iter()
            .flat_map(|d| d.strings.iter().flatten().copied())
            .collect();
        seen.sort_unstable();
        seen.dedup();
        if seen.is_empty() {
            b"ACGT".to_vec()
        } else {
            seen
        }
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let len = lengths[i % lengths.len()].max(q);
        let kind = i % 3;
        let source = docs
            .get(rng.gen_range(0..docs.len().max(1)))
            .and_then(|d| d.strings.iter().find(|s| s.len() >= len));
        let mut pattern = match (kind, source) {
            (0 | 1, Some(s)) => {
                let start = rng.gen_range(0..=s.len() - len);
                s[start..start + len].to_vec()
            }
            _ => (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect(),
        };
        if kind == 1 {
            for _ in 0..len.div_ceil(8) {
                let at = rng.gen_range(0..len);
                pattern[at] = alphabet[rng.gen_range(0..alphabet.len())];
            }
        }
        out.push(pattern);
    }
    out
}
