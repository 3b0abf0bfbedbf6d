//! Comparing the space used by one wide matrix and by per-block matrices
//! when document sizes are skewed.
//!
//! ```text
//! cargo run --example compact_vs_classic
//! ```

use cobs_index::{ClassicIndex, CompactIndex, IndexParams, TermSet};

pub fn run_example() -> cobs_index::Result<()> {
    let params = IndexParams {
        q: 4,
        block_size: 16,
        ..Default::default()
    };
    let docs: Vec<TermSet> = (0..128u32)
        .map(|i| {
            let n = 50 + (i * i) as usize;
            let terms = (0..n as u32).map(|t| t.to_be_bytes());
            TermSet::from_terms(format!("doc{i:03}"), 4, terms)
        })
        .collect::<Result<_, _>>()?;

    let classic = ClassicIndex::build(&docs, &params)?;
    let compact = CompactIndex::build(&docs, &params)?;
    println!(
        "classic: width {} x {} docs = {} bytes",
        classic.width(),
        classic.doc_count(),
        classic.footprint()
    );
    for (i, block) in compact.blocks().iter().enumerate() {
        println!(
            "  block {i:>2}: {:>2} docs, width {:>6}",
            block.doc_count(),
            block.width()
        );
    }
    println!(
        "compact: {} bytes ({:.1}% of classic)",
        compact.footprint(),
        100.0 * compact.footprint() as f64 / classic.footprint() as f64
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
