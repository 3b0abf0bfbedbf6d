//! Writing an index to disk and querying it without loading the matrix.
//!
//! ```text
//! cargo run --example random_access
//! ```

use cobs_index::{
    open_random_access, open_resident, query, write_index, CompactIndex, Document, IndexParams,
    QueryOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> cobs_index::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let docs: Vec<Document> = (0..64)
        .map(|i| Document {
            name: format!("sample{i:02}"),
            strings: vec![(0..5_000).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect()],
        })
        .collect();
    let params = IndexParams {
        canonical: true,
        block_size: 16,
        ..Default::default()
    };
    let terms: Vec<_> = docs.iter().map(|d| d.terms(&params)).collect();
    let index = CompactIndex::build(&terms, &params)?;

    let dir = tempfile::tempdir().map_err(|e| cobs_index::Error::Io {
        path: std::env::temp_dir(),
        source: e,
    })?;
    let path = dir.path().join("samples.cobs");
    write_index(&index, &path)?;
    let file_len = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);

    let resident = open_resident(&path)?;
    let on_disk = open_random_access(&path)?;
    let pattern = &docs[42].strings[0][1_000..1_100];
    let opts = QueryOptions::default();
    let a = query(&resident, pattern, &opts)?;
    let b = query(&on_disk, pattern, &opts)?;
    println!(
        "file {file_len} bytes, matrix {} bytes",
        on_disk.footprint()
    );
    println!(
        "random-access read {} bytes for a {}-term query",
        on_disk.bytes_read(),
        b.ell
    );
    println!("readers agree: {}", a == b);
    if let Some(top) = b.hits.first() {
        println!("best hit {} with score {}", top.doc_name, top.score);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
