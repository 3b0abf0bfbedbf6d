//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.
//!
//! ```text
//! cargo test -p cobs-index --test acceptance
//! ```

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use cobs_index::bloom_math::{fpr_exact, match_fpr, query_fpr, size_filter, BloomSpec, QuerySpec};
use cobs_index::classic::default_workers;
use cobs_index::query::pattern_terms;
use cobs_index::storage::{from_bytes, to_bytes};
use cobs_index::{
    open_random_access, open_resident, query, query_terms, score_documents, ClassicIndex,
    CompactIndex, Document, IndexParams, QueryOptions, RowSource, TermSet,
};
use common::{
    canonical, dna_corpus, kmer_universe, pack, query_suite, random_dna, rng, term_sets,
    BloomOracle,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

struct Corpus {
    docs: Vec<Document>,
}

impl Corpus {
    fn get() -> &'static Corpus {
        static CORPUS: std::sync::OnceLock<Corpus> = std::sync::OnceLock::new();
        CORPUS.get_or_init(|| Corpus {
            docs: dna_corpus(0xC0B5, 200, 1_000..=50_000),
        })
    }

    fn params(k: u32, block_size: usize) -> IndexParams {
        IndexParams {
            q: 31,
            k,
            p: 0.3,
            canonical: true,
            block_size,
            ..Default::default()
        }
    }
}

fn names_in_order(src: &impl RowSource) -> Vec<&str> {
    (0..src.block_count())
        .flat_map(|b| src.block_docs(b).iter().map(|d| d.name.as_str()))
        .collect()
}

fn single_term(q: usize, term: &[u8]) -> TermSet {
    TermSet::from_terms("probe", q, [term]).unwrap()
}

fn c1_spot_value() -> Outcome {
    let got = query_fpr(QuerySpec::new(70, 0.5, 0.3).unwrap());
    let msg = format!("query_fpr(70, 0.5, 0.3) = {got:.7} (target 0.000143 +- 2e-6)");
    if (got - 0.000143).abs() <= 2e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Sum of `p^|S| (1-p)^(ell-|S|)` over every subset `S` of the ell terms
/// whose size satisfies `accept`.
fn enumerate(ell: u32, p: f64, accept: impl Fn(u32) -> bool) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for mask in 0u32..(1u32 << ell) {
        let x = mask.count_ones();
        if !accept(x) {
            continue;
        }
        let term = p.powi(x as i32) * (1.0 - p).powi((ell - x) as i32);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn c2_enumeration() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for ell in 1..=20u32 {
        for &k in &[0.25, 0.5, 0.75, 1.0] {
            for &p in &[0.1, 0.3, 0.5] {
                let spec = QuerySpec::new(ell as u64, k, p).unwrap();
                let floor = (k * ell as f64).floor() as u32;
                let ceil = (k * ell as f64).ceil().max(1.0) as u32;
                let strict = enumerate(ell, p, |x| x > floor);
                let reached = enumerate(ell, p, |x| x >= ceil);
                worst = worst.max((query_fpr(spec) - strict).abs());
                worst = worst.max((match_fpr(spec) - reached).abs());
                cases += 2;
            }
        }
    }
    let msg = format!("{cases} cases, max |closed form - enumeration| = {worst:.2e} (limit 1e-12)");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c3_no_false_negatives() -> Outcome {
    let corpus = Corpus::get();
    let mut rng = rng(3);
    let mut patterns = Vec::new();
    for &len in &[31usize, 100, 1000] {
        for _ in 0..1000 {
            let d = rng.gen_range(0..corpus.docs.len());
            let s = &corpus.docs[d].strings[0];
            let start = rng.gen_range(0..=s.len() - len);
            patterns.push((d, s[start..start + len].to_vec()));
        }
    }
    let opts = QueryOptions {
        coverage: 1.0,
        top: None,
        workers: default_workers(),
    };
    let mut failures = 0usize;
    let mut runs = Vec::new();
    for k in [1u32, 3] {
        let sets = term_sets(&corpus.docs, &Corpus::params(k, 16));
        let classic = ClassicIndex::build(&sets, &Corpus::params(k, 16)).unwrap();
        let compact = CompactIndex::build(&sets, &Corpus::params(k, 16)).unwrap();
        for (label, src) in [
            ("classic", &classic as &dyn Src),
            ("compact", &compact as &dyn Src),
        ] {
            let mut missed = 0usize;
            for (d, pat) in &patterns {
                let res = src.run(pat, &opts);
                let name = &corpus.docs[*d].name;
                if !res
                    .hits
                    .iter()
                    .any(|h| &h.doc_name == name && h.score == res.ell)
                {
                    missed += 1;
                }
            }
            failures += missed;
            runs.push(format!("{label} k={k}: {missed} missed"));
        }
    }
    let msg = format!("{} queries per index; {}", patterns.len(), runs.join(", "));
    if failures == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

trait Src {
    fn run(&self, pattern: &[u8], opts: &QueryOptions) -> cobs_index::QueryResult;
}

impl<T: RowSource> Src for T {
    fn run(&self, pattern: &[u8], opts: &QueryOptions) -> cobs_index::QueryResult {
        query(self, pattern, opts).unwrap()
    }
}

fn aliens(docs: &[Document], n: usize, seed: u64) -> Vec<Vec<u8>> {
    let universe = kmer_universe(docs, 31);
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let kmer = canonical(&random_dna(&mut rng, 31));
        if !universe.contains(&pack(&kmer)) {
            out.push(kmer);
        }
    }
    out
}

fn c4_fpr_calibration() -> Outcome {
    let corpus = Corpus::get();
    let probes = aliens(&corpus.docs, 100_000, 4);
    let mut lines = Vec::new();
    let mut ok = true;
    for block_size in [16usize, 1024] {
        let params = Corpus::params(1, block_size);
        let sets = term_sets(&corpus.docs, &params);
        let index = CompactIndex::build(&sets, &params).unwrap();
        let mut counts = vec![0u64; index.doc_count()];
        for probe in &probes {
            let scores = score_documents(&index, &single_term(31, probe), 1).unwrap();
            for (c, s) in counts.iter_mut().zip(scores) {
                *c += s as u64;
            }
        }
        let rates: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / probes.len() as f64)
            .collect();
        let mut col = 0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for block in index.blocks() {
            let docs = block.docs();
            let fullest = (0..docs.len())
                .max_by_key(|&i| (docs[i].term_count, std::cmp::Reverse(i)))
                .unwrap();
            let rate = rates[col + fullest];
            lo = lo.min(rate);
            hi = hi.max(rate);
            ok &= (0.27..=0.33).contains(&rate);
            col += docs.len();
        }
        let worst = rates.iter().cloned().fold(0.0, f64::max);
        ok &= worst <= 0.33;
        lines.push(format!(
            "B={block_size}: {} blocks, fullest-doc rates in [{lo:.4}, {hi:.4}], max doc rate {worst:.4}",
            index.blocks().len()
        ));
    }
    let msg = lines.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c5_long_query_negatives() -> Outcome {
    let corpus = Corpus::get();
    let universe = kmer_universe(&corpus.docs, 31);
    let mut rng = rng(5);
    let mut patterns = Vec::with_capacity(10_000);
    while patterns.len() < 10_000 {
        let p = random_dna(&mut rng, 100);
        if p.windows(31)
            .all(|w| !universe.contains(&pack(&canonical(w))))
        {
            patterns.push(p);
        }
    }
    let opts = QueryOptions {
        coverage: 0.5,
        top: None,
        workers: default_workers(),
    };
    let mut ok = true;
    let mut lines = Vec::new();
    for block_size in [1024usize, 16] {
        let params = Corpus::params(1, block_size);
        let sets = term_sets(&corpus.docs, &params);
        let index = CompactIndex::build(&sets, &params).unwrap();
        let mut expected_per_query = 0.0;
        for block in index.blocks() {
            for d in block.docs() {
                let f = fpr_exact(BloomSpec::new(block.width(), 1, d.term_count).unwrap());
                expected_per_query += match_fpr(QuerySpec::new(70, 0.5, f).unwrap());
            }
        }
        let mut hits = 0usize;
        let mut hit_queries = 0usize;
        for p in &patterns {
            let res = query(&index, p, &opts).unwrap();
            assert_eq!(res.ell, 70);
            hits += res.hits.len();
            hit_queries += usize::from(!res.hits.is_empty());
        }
        ok &= hits == 0;
        lines.push(format!(
            "B={block_size}: {hits} spurious hits in {hit_queries} of {} queries (binomial model expects {:.1})",
            patterns.len(),
            expected_per_query * patterns.len() as f64
        ));
    }
    let msg = lines.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// A small random corpus over DNA or a short text alphabet.
fn random_corpus(
    rng: &mut impl Rng,
    max_docs: usize,
    max_len: usize,
) -> (Vec<Document>, IndexParams) {
    let dna = rng.gen_bool(0.5);
    let q = if dna {
        rng.gen_range(3..=31)
    } else {
        rng.gen_range(2..=8)
    };
    let params = IndexParams {
        q,
        k: rng.gen_range(1..=3),
        p: [0.1, 0.3, 0.5][rng.gen_range(0..3)],
        canonical: dna && rng.gen_bool(0.5),
        block_size: rng.gen_range(1..=16),
        ..Default::default()
    };
    let n = rng.gen_range(1..=max_docs);
    let docs = (0..n)
        .map(|i| {
            let len = if rng.gen_bool(0.05) {
                0
            } else {
                rng.gen_range(0..=max_len)
            };
            let body = if dna {
                random_dna(rng, len)
            } else {
                (0..len).map(|_| b"abcde "[rng.gen_range(0..6)]).collect()
            };
            Document {
                name: format!("d{i:02}"),
                strings: vec![body],
            }
        })
        .collect();
    (docs, params)
}

fn check_against_oracle(
    src: &impl RowSource,
    sets: &[TermSet],
    patterns: &[Vec<u8>],
    label: &str,
) -> Result<(), String> {
    let oracle = BloomOracle::new(src, sets);
    let names = names_in_order(src);
    for b in 0..src.block_count() {
        let v = src
            .block_docs(b)
            .iter()
            .map(|d| d.term_count)
            .max()
            .unwrap_or(0);
        let w = size_filter(v, src.params().p, src.params().k).unwrap();
        if w != src.block_width(b) {
            return Err(format!(
                "{label}: block {b} width {} != {w}",
                src.block_width(b)
            ));
        }
    }
    for (i, pat) in patterns.iter().enumerate() {
        let terms = pattern_terms(src.params(), pat);
        if terms.is_empty() {
            continue;
        }
        let scores = score_documents(src, &terms, 1).unwrap();
        for (name, s) in names.iter().zip(&scores) {
            let want = oracle.score(name, &terms);
            if *s as u64 != want {
                return Err(format!(
                    "{label}: pattern {i} doc {name}: engine {s} oracle {want}"
                ));
            }
        }
        let coverage = [0.2, 0.5, 0.9, 1.0][i % 4];
        let got: Vec<(String, u64)> =
            query_terms(src, &terms, &QueryOptions::with_coverage(coverage))
                .unwrap()
                .hits
                .into_iter()
                .map(|h| (h.doc_name, h.score))
                .collect();
        if got != oracle.query(&terms, coverage) {
            return Err(format!(
                "{label}: pattern {i} hit list differs at K={coverage}"
            ));
        }
    }
    Ok(())
}

fn c6_oracle_equivalence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(6);
    let mut checked = 0usize;
    for trial in 0..100 {
        let (docs, params) = random_corpus(&mut rng, 64, 3000);
        let sets = term_sets(&docs, &params);
        let patterns = query_suite(
            &docs,
            params.q,
            40,
            &[params.q, 2 * params.q, 60, 300],
            trial,
        );
        let classic = ClassicIndex::build(&sets, &params).unwrap();
        let compact = CompactIndex::build(&sets, &params).unwrap();
        let cpath = dir.path().join("c.idx");
        let kpath = dir.path().join("k.idx");
        cobs_index::write_index(&classic, &cpath).unwrap();
        cobs_index::write_index(&compact, &kpath).unwrap();
        let tag = |s: &str| format!("trial {trial} {s}");
        check_against_oracle(&classic, &sets, &patterns, &tag("classic"))?;
        check_against_oracle(&compact, &sets, &patterns, &tag("compact"))?;
        check_against_oracle(
            &open_resident(&cpath).unwrap(),
            &sets,
            &patterns,
            &tag("classic resident"),
        )?;
        check_against_oracle(
            &open_resident(&kpath).unwrap(),
            &sets,
            &patterns,
            &tag("compact resident"),
        )?;
        check_against_oracle(
            &open_random_access(&cpath).unwrap(),
            &sets,
            &patterns,
            &tag("classic random-access"),
        )?;
        check_against_oracle(
            &open_random_access(&kpath).unwrap(),
            &sets,
            &patterns,
            &tag("compact random-access"),
        )?;
        checked += patterns.len() * 6;
    }
    Ok(format!("100 corpora, {checked} pattern checks across classic/compact x in-memory/resident/random-access"))
}

fn c7_compaction() -> Outcome {
    let mut rng = rng(7);
    let skewed: Vec<Document> = (0..200)
        .map(|i| {
            let len = (1_000f64 * 50f64.powf(rng.gen::<f64>())) as usize;
            Document {
                name: format!("s{i:03}"),
                strings: vec![random_dna(&mut rng, len)],
            }
        })
        .collect();
    let params = Corpus::params(1, 16);
    let sets = term_sets(&skewed, &params);
    let (min, max) = sets.iter().fold((usize::MAX, 0), |(lo, hi), s| {
        (lo.min(s.len()), hi.max(s.len()))
    });
    let classic = ClassicIndex::build(&sets, &params).unwrap().footprint();
    let compact = CompactIndex::build(&sets, &params).unwrap().footprint();
    let ratio = compact as f64 / classic as f64;

    let uniform: Vec<Document> = (0..40)
        .map(|i| Document {
            name: format!("u{i:02}"),
            strings: vec![random_dna(&mut rng, 5_000)],
        })
        .collect();
    let uparams = Corpus::params(1, uniform.len());
    let usets = term_sets(&uniform, &uparams);
    let uclassic = ClassicIndex::build(&usets, &uparams).unwrap().footprint();
    let ucompact = CompactIndex::build(&usets, &uparams).unwrap().footprint();

    let uniform_uneven = Corpus::get();
    let uu_sets = term_sets(&uniform_uneven.docs, &params);
    let uu_ratio = CompactIndex::build(&uu_sets, &params).unwrap().footprint() as f64
        / ClassicIndex::build(&uu_sets, &params).unwrap().footprint() as f64;

    let msg = format!(
        "term counts {min}..{max} ({:.0}x): compact/classic = {ratio:.3} (limit 0.5); uniform B=|D|: {ucompact} vs {uclassic} bytes; \
         [info] uniform-length 1-50 kB corpus ratio {uu_ratio:.3}",
        max as f64 / min as f64
    );
    if max >= 10 * min && ratio <= 0.5 && ucompact == uclassic {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c8_round_trip() -> Outcome {
    let corpus = Corpus::get();
    let dir = tempfile::tempdir().unwrap();
    let params = Corpus::params(3, 16);
    let sets = term_sets(&corpus.docs, &params);
    let patterns = query_suite(&corpus.docs, 31, 300, &[31, 100, 1000], 8);
    let mut compared = 0;
    for (label, bytes) in [
        (
            "classic",
            to_bytes(&ClassicIndex::build(&sets, &params).unwrap()).unwrap(),
        ),
        (
            "compact",
            to_bytes(&CompactIndex::build(&sets, &params).unwrap()).unwrap(),
        ),
    ] {
        let again = to_bytes(&from_bytes(&bytes).unwrap()).unwrap();
        if again != bytes {
            return Err(format!("{label}: re-serialized bytes differ"));
        }
        let path = dir.path().join(format!("{label}.idx"));
        std::fs::write(&path, &bytes).unwrap();
        let resident = open_resident(&path).unwrap();
        let random = open_random_access(&path).unwrap();
        for (i, p) in patterns.iter().enumerate() {
            let opts = QueryOptions::with_coverage([0.5, 0.9, 1.0][i % 3]);
            let a = query(&resident, p, &opts).unwrap();
            let b = query(&random, p, &opts).unwrap();
            if a != b {
                return Err(format!("{label}: pattern {i} differs between readers"));
            }
            let terms = pattern_terms(&params, p);
            if score_documents(&resident, &terms, 1).unwrap()
                != score_documents(&random, &terms, 1).unwrap()
            {
                return Err(format!(
                    "{label}: pattern {i} scores differ between readers"
                ));
            }
            compared += 1;
        }
    }
    Ok(format!("classic and compact byte-identical after round trip; {compared} queries agree across readers"))
}

fn c9_merge() -> Outcome {
    let corpus = Corpus::get();
    let mut rng = rng(9);
    for trial in 0..10 {
        let k = rng.gen_range(1..=3);
        let params = Corpus::params(k, 16);
        let n = rng.gen_range(2..=60);
        let start = rng.gen_range(0..=corpus.docs.len() - n);
        let docs = &corpus.docs[start..start + n];
        let split = rng.gen_range(1..n);
        let sets = term_sets(docs, &params);
        let v = sets.iter().map(|s| s.len() as u64).max().unwrap();
        let w = size_filter(v, params.p, k).unwrap();
        let a = ClassicIndex::build_with_width(&sets[..split], &params, w, 1).unwrap();
        let b = ClassicIndex::build_with_width(&sets[split..], &params, w, 1).unwrap();
        let merged = ClassicIndex::merge(a, b).unwrap();
        let joint = ClassicIndex::build_with_width(&sets, &params, w, 1).unwrap();
        if merged != joint {
            return Err(format!(
                "trial {trial}: merged index differs from joint build ({n} docs, split {split})"
            ));
        }
        for (i, p) in query_suite(docs, 31, 30, &[31, 100, 1000], trial)
            .iter()
            .enumerate()
        {
            let opts = QueryOptions::with_coverage([0.3, 0.7, 1.0][i % 3]);
            if query(&merged, p, &opts).unwrap() != query(&joint, p, &opts).unwrap() {
                return Err(format!("trial {trial}: query {i} differs"));
            }
        }
    }
    Ok("10 random splits: merged matrix and query results identical to the joint build".into())
}

fn c10_determinism() -> Outcome {
    let max = default_workers().max(4);
    let mut rng = rng(10);
    let mut queries = 0;
    for trial in 0..20 {
        let (docs, params) = random_corpus(&mut rng, 150, 4000);
        let sets = term_sets(&docs, &params);
        let c1 = ClassicIndex::build_with_workers(&sets, &params, 1).unwrap();
        let cn = ClassicIndex::build_with_workers(&sets, &params, max).unwrap();
        let k1 = CompactIndex::build_with_workers(&sets, &params, 1).unwrap();
        let kn = CompactIndex::build_with_workers(&sets, &params, max).unwrap();
        if to_bytes(&c1).unwrap() != to_bytes(&cn).unwrap() {
            return Err(format!("trial {trial}: classic files differ"));
        }
        if to_bytes(&k1).unwrap() != to_bytes(&kn).unwrap() {
            return Err(format!("trial {trial}: compact files differ"));
        }
        for (i, p) in query_suite(&docs, params.q, 30, &[params.q, 50, 400], trial)
            .iter()
            .enumerate()
        {
            let coverage = [0.3, 0.8, 1.0][i % 3];
            let one = QueryOptions {
                coverage,
                top: None,
                workers: 1,
            };
            let many = QueryOptions {
                workers: max,
                ..one
            };
            for src in [&c1 as &dyn Src, &k1 as &dyn Src] {
                if src.run(p, &one) != src.run(p, &many) {
                    return Err(format!(
                        "trial {trial}: query {i} listing differs across workers"
                    ));
                }
            }
            queries += 1;
        }
    }
    Ok(format!(
        "20 trials, 1 vs {max} workers: identical files; {queries} queries with identical listings"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("query_fpr spot value", c1_spot_value),
        ("closed form vs enumeration", c2_enumeration),
        ("zero false negatives", c3_no_false_negatives),
        ("FPR calibration", c4_fpr_calibration),
        ("long-query false positives", c5_long_query_negatives),
        ("engine vs column oracle", c6_oracle_equivalence),
        ("compaction benefit", c7_compaction),
        ("round trip and readers", c8_round_trip),
        ("merge correctness", c9_merge),
        ("determinism under parallelism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
