//! Indexing a few DNA documents and searching them with k-mer queries.
//!
//! ```text
//! cargo run --example build_and_query
//! ```

use cobs_index::{query, CompactIndex, Document, IndexParams, QueryOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dna(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect()
}

pub fn run_example() -> cobs_index::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let docs: Vec<Document> = (0..20)
        .map(|i| Document {
            name: format!("genome{i:02}"),
            strings: vec![random_dna(&mut rng, 2_000 + 500 * i)],
        })
        .collect();

    let params = IndexParams {
        canonical: true,
        block_size: 8,
        ..Default::default()
    };
    let terms: Vec<_> = docs.iter().map(|d| d.terms(&params)).collect();
    let index = CompactIndex::build(&terms, &params)?;
    println!(
        "{} documents in {} blocks, {} bytes of filters",
        index.doc_count(),
        index.blocks().len(),
        index.footprint()
    );

    let source = &docs[7].strings[0];
    let mut pattern = source[100..400].to_vec();
    for i in (0..pattern.len()).step_by(60) {
        pattern[i] = if pattern[i] == b'A' { b'C' } else { b'A' };
    }

    for coverage in [1.0, 0.8, 0.5] {
        let result = query(&index, &pattern, &QueryOptions::with_coverage(coverage))?;
        println!(
            "K={coverage}: ell={} threshold={}",
            result.ell, result.threshold
        );
        for hit in result.hits.iter().take(3) {
            println!("  {}\t{}", hit.doc_name, hit.score);
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
