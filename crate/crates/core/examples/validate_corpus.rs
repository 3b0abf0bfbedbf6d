//! Running the self-check suites against an index and the corpus it was
//! built from.
//!
//! ```text
//! cargo run --example validate_corpus
//! ```

use cobs_index::validate::{validate, ValidationConfig};
use cobs_index::{CompactIndex, Document, IndexParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> cobs_index::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let corpus: Vec<Document> = (0..24)
        .map(|i| Document {
            name: format!("isolate{i:02}"),
            strings: vec![(0..rng.gen_range(2_000..8_000))
                .map(|_| b"ACGT"[rng.gen_range(0..4)])
                .collect()],
        })
        .collect();
    let params = IndexParams {
        canonical: true,
        block_size: 8,
        ..Default::default()
    };
    let terms: Vec<_> = corpus.iter().map(|d| d.terms(&params)).collect();
    let index = CompactIndex::build(&terms, &params)?;

    let cfg = ValidationConfig {
        patterns: 200,
        alien_trials: 20_000,
        tolerance: 0.03,
        ..Default::default()
    };
    let report = validate(&index, &corpus, &cfg)?;
    print!("{report}");
    println!("overall: {}", if report.passed() { "PASS" } else { "FAIL" });
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
