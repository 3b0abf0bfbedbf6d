//! Sizing filters and predicting query false-positive rates.
//!
//! ```text
//! cargo run --example plan_parameters
//! ```

use cobs_index::bloom_math::{
    fpr_approx, fpr_exact, optimal_params, query_fpr, query_fpr_chernoff, size_filter, BloomSpec,
    QuerySpec,
};

pub fn run_example() -> cobs_index::Result<()> {
    let terms = 1_000_000;
    for (p, k) in [(0.3, 1), (0.1, 1), (0.1, 3), (0.01, 3)] {
        let w = size_filter(terms, p, k)?;
        let spec = BloomSpec::new(w, k, terms)?;
        println!(
            "v={terms} p={p} k={k}: w={w} bits ({:.2} MiB), fpr approx {:.4}, exact {:.4}",
            w as f64 / 8.0 / (1 << 20) as f64,
            fpr_approx(spec),
            fpr_exact(spec)
        );
    }

    let (w, k) = optimal_params(terms, 0.01)?;
    println!("optimal for p=0.01: w={w}, k={k}");

    for ell in [10, 30, 70, 200] {
        let q = QuerySpec::new(ell, 0.5, 0.3)?;
        println!(
            "ell={ell:>3} K=0.5 p=0.3: query fpr {:.3e}, Chernoff bound {:.3e}",
            query_fpr(q),
            query_fpr_chernoff(q)?
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
