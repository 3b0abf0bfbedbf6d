//! Approximate substring search over plain text with 4-grams.
//!
//! ```text
//! cargo run --example text_search
//! ```

use cobs_index::{query, ClassicIndex, Document, IndexParams, QueryOptions};

pub fn run_example() -> cobs_index::Result<()> {
    let lines = [
        "Bloom filters answer membership queries with one-sided error",
        "A signature file stores one bit vector per document",
        "Bit slicing transposes signatures so a term reads contiguous rows",
        "Inverted indexes map each term to a posting list",
        "Approximate matching tolerates a few mismatched grams",
    ];
    let docs: Vec<Document> = lines
        .iter()
        .enumerate()
        .map(|(i, l)| Document {
            name: format!("line{}", i + 1),
            strings: vec![l.to_lowercase().into_bytes()],
        })
        .collect();
    let params = IndexParams {
        q: 4,
        p: 0.05,
        k: 2,
        ..Default::default()
    };
    let terms: Vec<_> = docs.iter().map(|d| d.terms(&params)).collect();
    let index = ClassicIndex::build(&terms, &params)?;

    for needle in [
        "signatures",
        "bit slicing",
        "posting lists",
        "membership querys",
    ] {
        let result = query(&index, needle.as_bytes(), &QueryOptions::with_coverage(0.7))?;
        let hits: Vec<String> = result
            .hits
            .iter()
            .map(|h| format!("{}({}/{})", h.doc_name, h.score, result.ell))
            .collect();
        println!("{needle:>18}: {}", hits.join(" "));
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
