//! Building two classic indexes separately at an agreed width and merging
//! them into one.
//!
//! ```text
//! cargo run --example merge_classic
//! ```

use cobs_index::bloom_math::size_filter;
use cobs_index::{query, ClassicIndex, IndexParams, QueryOptions, TermSet};

pub fn run_example() -> cobs_index::Result<()> {
    let params = IndexParams {
        q: 3,
        ..Default::default()
    };
    let texts = [
        ("alpha", "the quick brown fox"),
        ("beta", "jumps over the lazy dog"),
        ("gamma", "pack my box with five dozen liquor jugs"),
        ("delta", "how vexingly quick daft zebras jump"),
        ("epsilon", "sphinx of black quartz judge my vow"),
    ];
    let docs: Vec<TermSet> = texts
        .iter()
        .map(|(n, t)| params.extract(*n, &[t]))
        .collect();

    let largest = docs.iter().map(|d| d.len() as u64).max().unwrap_or(0);
    let width = size_filter(largest, params.p, params.k)?;
    let left = ClassicIndex::build_with_width(&docs[..2], &params, width, 1)?;
    let right = ClassicIndex::build_with_width(&docs[2..], &params, width, 1)?;
    let merged = ClassicIndex::merge(left, right)?;
    let joint = ClassicIndex::build_with_width(&docs, &params, width, 1)?;
    println!(
        "merged {} docs at width {width}; identical to joint build: {}",
        merged.doc_count(),
        merged == joint
    );

    let result = query(&merged, b"quick", &QueryOptions::with_coverage(1.0))?;
    for hit in &result.hits {
        println!("{}\t{}/{}", hit.doc_name, hit.score, result.ell);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
