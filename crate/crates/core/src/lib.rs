//! Approximate q-gram and k-mer search over document collections.
//!
//! Each document becomes a Bloom filter over its distinct q-grams. The
//! filters are stored bit-sliced: row `r` of the matrix holds bit `r` of
//! every document's filter, so looking up one term touches `k` contiguous
//! rows instead of `|D|` scattered filters. A query ANDs the rows of each
//! of its terms and counts, per document, how many terms passed; documents
//! reaching a coverage threshold `K` are reported.
//!
//! Two layouts are provided:
//!
//! * [`ClassicIndex`]: one filter width for everything, sized for the
//!   largest document. Indexes built with the same width can be merged.
//! * [`CompactIndex`]: documents sorted by size and cut into blocks, each
//!   block sized for its own largest document, so small documents stop
//!   paying for large ones while the false-positive rate stays near `p`.
//!
//! ```
//! use cobs_index::{CompactIndex, IndexParams, QueryOptions, TermSet};
//!
//! let params = IndexParams { q: 4, ..Default::default() };
//! let docs = [
//!     TermSet::extract("greeting", &["hello world"], 4, false),
//!     TermSet::extract("farewell", &["goodbye world"], 4, false),
//! ];
//! let index = CompactIndex::build(&docs, &params).unwrap();
//! let result = cobs_index::query(&index, b"hello", &QueryOptions::with_coverage(1.0)).unwrap();
//! assert_eq!(result.hits[0].doc_name, "greeting");
//! ```

pub mod bloom_math;
pub mod classic;
pub mod cli;
pub mod compact;
pub mod error;
pub mod input;
pub mod query;
pub mod storage;
pub mod terms;
pub mod validate;

pub use classic::{ClassicIndex, DocEntry};
pub use compact::CompactIndex;
pub use error::{Error, Result};
pub use input::{Document, InputFormat};
pub use query::{
    query, query_terms, score_documents, QueryOptions, QueryResult, RowSource, ScoredHit,
};
pub use storage::{
    open_random_access, open_resident, write_index, Index, IndexKind, RandomAccessIndex,
};
pub use terms::{HashScheme, IndexParams, TermSet};
