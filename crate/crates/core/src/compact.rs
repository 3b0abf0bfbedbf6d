//! The compact index: documents ordered by size and cut into blocks of at
//! most `B`, each block a classic index sized for its own largest document.

use rayon::prelude::*;

use crate::classic::{check_documents, default_workers, run_in_pool, ClassicIndex};
use crate::error::{Error, Result};
use crate::terms::{IndexParams, TermSet};

#[derive(Debug, Clone, PartialEq)]
pub struct CompactIndex {
    params: IndexParams,
    blocks: Vec<ClassicIndex>,
}

impl CompactIndex {
    pub fn build(docs: &[TermSet], params: &IndexParams) -> Result<Self> {
        Self::build_with_workers(docs, params, default_workers())
    }

    /// Sorts documents by `(term count, name)`, splits them into runs of
    /// `params.block_size` and builds one classic subindex per run. Blocks
    /// are built concurrently and assembled in order.
    pub fn build_with_workers(
        docs: &[TermSet],
        params: &IndexParams,
        workers: usize,
    ) -> Result<Self> {
        check_documents(docs, params)?;
        let mut order: Vec<&TermSet> = docs.iter().collect();
        order.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.name().cmp(b.name())));

        let chunks: Vec<Vec<TermSet>> = order
            .chunks(params.block_size)
            .map(|c| c.iter().map(|&d| d.clone()).collect())
            .collect();
        let blocks = run_in_pool(workers.max(1), || {
            chunks
                .par_iter()
                .map(|chunk| ClassicIndex::build_with_workers(chunk, params, 1))
                .collect::<Result<Vec<_>>>()
        })??;
        Ok(CompactIndex {
            params: *params,
            blocks,
        })
    }

    /// Reassembles from stored blocks, checking the ordering invariants.
    pub fn from_blocks(params: IndexParams, blocks: Vec<ClassicIndex>) -> Result<Self> {
        params.validate()?;
        if blocks.is_empty() {
            return Err(Error::Format("compact index without blocks".into()));
        }
        let last = blocks.len() - 1;
        let mut prev_count = 0u64;
        for (i, b) in blocks.iter().enumerate() {
            if b.params() != &params {
                return Err(Error::Format(format!("block {i} parameters differ")));
            }
            if b.doc_count() > params.block_size || (i < last && b.doc_count() != params.block_size)
            {
                return Err(Error::Format(format!(
                    "block {i} holds {} documents with block size {}",
                    b.doc_count(),
                    params.block_size
                )));
            }
            for d in b.docs() {
                if d.term_count < prev_count {
                    return Err(Error::Format(format!("block {i} breaks size order")));
                }
                prev_count = d.term_count;
            }
        }
        Ok(CompactIndex { params, blocks })
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn blocks(&self) -> &[ClassicIndex] {
        &self.blocks
    }

    pub fn doc_count(&self) -> usize {
        self.blocks.iter().map(ClassicIndex::doc_count).sum()
    }

    /// Document names in stored (size-sorted) order.
    pub fn doc_order(&self) -> impl Iterator<Item = &str> {
        self.blocks
            .iter()
            .flat_map(|b| b.docs().iter().map(|d| d.name.as_str()))
    }

    /// `sum_i w_i * ceil(|D_i| / 8)` bytes.
    pub fn footprint(&self) -> u64 {
        self.blocks.iter().map(ClassicIndex::footprint).sum()
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [ClassicIndex] {
        &mut self.blocks
    }
}
