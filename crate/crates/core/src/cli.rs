//! The `cobs` command line: `build`, `query`, `stats` and `validate`.
//!
//! Results go to stdout, progress and timings to stderr. Exit codes:
//! 0 success, 1 usage error, 2 data or format error, 3 validation failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::bloom_math::{
    fpr_approx, match_fpr, query_fpr, query_fpr_chernoff, size_filter, BloomSpec, QuerySpec,
};
use crate::classic::{run_in_pool, ClassicIndex};
use crate::compact::CompactIndex;
use crate::error::Error;
use crate::input::{collect_inputs, read_document, read_fasta, Document, InputFormat};
use crate::query::{pattern_terms, query, query_terms, QueryOptions, QueryResult, RowSource};
use crate::storage::{open_random_access, open_resident, write_index, Index, IndexKind};
use crate::terms::{IndexParams, TermSet, DEFAULT_BLOCK_SIZE};
use crate::validate::{validate, ValidationConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "COBS_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "cobs",
    version,
    about = "Compact bit-sliced signature index for q-gram search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Classic,
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Memory {
    Resident,
    RandomAccess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Auto,
    Fasta,
    Text,
}

impl From<Format> for InputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Auto => InputFormat::Auto,
            Format::Fasta => InputFormat::Fasta,
            Format::Text => InputFormat::Text,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an index from files or directories.
    Build {
        #[arg(long, value_enum, default_value = "compact")]
        mode: Mode,
        /// Gram length.
        #[arg(short = 'q', long = "term-size", default_value_t = 31)]
        q: usize,
        /// Target per-document false-positive rate.
        #[arg(short = 'p', long = "fpr", default_value_t = 0.3)]
        p: f64,
        /// Hash functions per term.
        #[arg(short = 'k', long = "hashes", default_value_t = 1)]
        k: u32,
        /// Documents per compact block.
        #[arg(short = 'B', long = "block-size", default_value_t = DEFAULT_BLOCK_SIZE)]
        block_size: usize,
        /// Merge each DNA gram with its reverse complement.
        #[arg(long)]
        canonical: bool,
        #[arg(long, value_enum, default_value = "auto")]
        format: Format,
        #[arg(short = 'o', long = "output")]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Query an index with one pattern or a FASTA file of patterns.
    Query {
        index: PathBuf,
        /// Pattern to search for.
        #[arg(required_unless_present = "file", conflicts_with = "file")]
        pattern: Option<String>,
        /// FASTA file with one query per record.
        #[arg(short = 'f', long)]
        file: Option<PathBuf>,
        /// Fraction of query terms a document must contain.
        #[arg(short = 'K', long = "threshold", default_value_t = 0.9)]
        coverage: f64,
        /// Report at most this many hits per query.
        #[arg(short = 't', long = "top")]
        top: Option<usize>,
        #[arg(long, value_enum, default_value = "resident")]
        memory: Memory,
    },
    /// Describe an index, or plan parameters without one.
    Stats {
        /// Index file; omit to use the planner flags.
        index: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Planner: distinct terms in the largest document.
        #[arg(long = "terms", requires = "fpr")]
        terms: Option<u64>,
        #[arg(short = 'p', long = "fpr")]
        fpr: Option<f64>,
        #[arg(short = 'k', long = "hashes", default_value_t = 1)]
        k: u32,
        /// Planner: distinct terms in a query.
        #[arg(long = "ell")]
        ell: Option<u64>,
        /// Planner: coverage threshold.
        #[arg(short = 'K', long = "threshold", default_value_t = 0.9)]
        coverage: f64,
    },
    /// Check an index against the corpus it was built from.
    Validate {
        index: PathBuf,
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
        /// Alien single-term probes for the calibration suite.
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        /// Patterns sampled from documents for the false-negative suite.
        #[arg(long, default_value_t = 1000)]
        patterns: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long, value_enum, default_value = "auto")]
        format: Format,
        #[arg(long, value_enum, default_value = "resident")]
        memory: Memory,
        #[arg(long)]
        json: bool,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParams(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: e.to_string(),
    }
}

fn workers_from_env() -> Result<usize, Failure> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(usage(format!(
                "{WORKERS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(crate::classic::default_workers()),
    }
}

/// Runs the CLI with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Build {
            mode,
            q,
            p,
            k,
            block_size,
            canonical,
            format,
            out: path,
            inputs,
        } => {
            let params = IndexParams {
                q,
                k,
                p,
                canonical,
                block_size,
                ..Default::default()
            };
            cmd_build(mode, params, format.into(), &inputs, &path, err)
        }
        Command::Query {
            index,
            pattern,
            file,
            coverage,
            top,
            memory,
        } => {
            let opts = QueryOptions {
                coverage,
                top,
                workers: 1,
            };
            cmd_query(
                &index,
                pattern.as_deref(),
                file.as_deref(),
                opts,
                memory,
                out,
                err,
            )
        }
        Command::Stats {
            index,
            json,
            terms,
            fpr,
            k,
            ell,
            coverage,
        } => match index {
            Some(index) => cmd_stats(&index, json, out),
            None => cmd_plan(terms, fpr, k, ell, coverage, json, out),
        },
        Command::Validate {
            index,
            corpus,
            trials,
            patterns,
            seed,
            format,
            memory,
            json,
        } => {
            let cfg = ValidationConfig {
                patterns,
                alien_trials: trials,
                seed,
                ..Default::default()
            };
            cmd_validate(&index, &corpus, format.into(), memory, cfg, json, out, err)
        }
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn read_corpus(
    inputs: &[PathBuf],
    format: InputFormat,
    workers: usize,
) -> Result<Vec<Document>, Failure> {
    let files = collect_inputs(inputs)?;
    if files.is_empty() {
        return Err(Error::NoDocuments.into());
    }
    let docs = run_in_pool(workers, || {
        files
            .par_iter()
            .map(|f| read_document(f, format))
            .collect::<Result<Vec<_>, Error>>()
    })??;
    Ok(docs)
}

fn cmd_build(
    mode: Mode,
    params: IndexParams,
    format: InputFormat,
    inputs: &[PathBuf],
    out: &std::path::Path,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    params.validate()?;
    let workers = workers_from_env()?;

    let t = Instant::now();
    let docs = read_corpus(inputs, format, workers)?;
    let terms: Vec<TermSet> = run_in_pool(workers, || {
        docs.par_iter().map(|d| d.terms(&params)).collect()
    })?;
    drop(docs);
    let total_terms: u64 = terms.iter().map(|t| t.len() as u64).sum();
    let skipped: u64 = terms.iter().map(TermSet::skipped).sum();
    writeln!(
        err,
        "read {} documents, {total_terms} terms ({skipped} grams skipped) in {:.3}s",
        terms.len(),
        t.elapsed().as_secs_f64()
    )
    .map_err(io_failure)?;

    let t = Instant::now();
    let index: Index = match mode {
        Mode::Classic => ClassicIndex::build_with_workers(&terms, &params, workers)?.into(),
        Mode::Compact => CompactIndex::build_with_workers(&terms, &params, workers)?.into(),
    };
    writeln!(
        err,
        "built {} index with {} blocks in {:.3}s",
        kind_name(index.kind()),
        index.blocks().len(),
        t.elapsed().as_secs_f64()
    )
    .map_err(io_failure)?;

    let t = Instant::now();
    write_index(&index, out)?;
    writeln!(
        err,
        "wrote {} ({} matrix bytes) in {:.3}s",
        out.display(),
        index.footprint(),
        t.elapsed().as_secs_f64()
    )
    .map_err(io_failure)?;
    Ok(EXIT_OK)
}

fn kind_name(kind: IndexKind) -> &'static str {
    match kind {
        IndexKind::Classic => "classic",
        IndexKind::Compact => "compact",
    }
}

enum Reader {
    Resident(Index),
    RandomAccess(crate::storage::RandomAccessIndex),
}

impl Reader {
    fn open(path: &std::path::Path, memory: Memory) -> Result<Self, Failure> {
        Ok(match memory {
            Memory::Resident => Reader::Resident(open_resident(path)?),
            Memory::RandomAccess => Reader::RandomAccess(open_random_access(path)?),
        })
    }

    fn source(&self) -> &dyn RowSource {
        match self {
            Reader::Resident(x) => x,
            Reader::RandomAccess(x) => x,
        }
    }
}

fn write_hits(out: &mut dyn Write, res: &QueryResult) -> std::io::Result<()> {
    for h in &res.hits {
        writeln!(out, "{}\t{}\t{}", h.doc_name, h.score, res.ell)?;
    }
    Ok(())
}

fn cmd_query(
    index: &std::path::Path,
    pattern: Option<&str>,
    file: Option<&std::path::Path>,
    mut opts: QueryOptions,
    memory: Memory,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    opts.validate()?;
    let workers = workers_from_env()?;
    let reader = Reader::open(index, memory)?;
    let src = reader.source();
    let canonical = src.params().canonical;

    if let Some(pattern) = pattern {
        opts.workers = workers;
        let bytes = if canonical {
            pattern.to_ascii_uppercase()
        } else {
            pattern.to_string()
        };
        let res = query(src, bytes.as_bytes(), &opts)?;
        write_hits(out, &res).map_err(io_failure)?;
        return Ok(EXIT_OK);
    }

    let file = file.expect("clap requires a pattern or a file");
    let records = read_fasta(file)?;
    let results: Vec<Result<QueryResult, Error>> = run_in_pool(workers, || {
        records
            .par_iter()
            .map(|r| query_terms(src, &pattern_terms(src.params(), &r.seq), &opts))
            .collect()
    })?;
    for (rec, res) in records.iter().zip(results) {
        match res {
            Ok(res) => {
                writeln!(out, "*{}\t{}", rec.name, res.hits.len()).map_err(io_failure)?;
                write_hits(out, &res).map_err(io_failure)?;
            }
            Err(Error::EmptyQuery) => {
                writeln!(
                    err,
                    "query `{}`: no terms of length {}",
                    rec.name,
                    src.params().q
                )
                .map_err(io_failure)?;
                writeln!(out, "*{}\t0", rec.name).map_err(io_failure)?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct BlockStats {
    block: usize,
    docs: usize,
    width: u64,
    max_terms: u64,
    fill: f64,
    predicted_fpr: f64,
}

#[derive(Debug, Serialize)]
struct IndexStats {
    kind: IndexKind,
    params: IndexParams,
    documents: usize,
    footprint_bytes: u64,
    blocks: Vec<BlockStats>,
}

fn cmd_stats(index: &std::path::Path, json: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let reader = open_random_access(index)?;
    let params = *reader.params();
    let blocks: Vec<BlockStats> = reader
        .header()
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let max_terms = b.docs.iter().map(|d| d.term_count).max().unwrap_or(0);
            let spec = BloomSpec {
                w: b.width,
                k: params.k,
                v: max_terms,
            };
            BlockStats {
                block: i,
                docs: b.docs.len(),
                width: b.width,
                max_terms,
                fill: spec.fill(),
                predicted_fpr: fpr_approx(spec),
            }
        })
        .collect();
    let stats = IndexStats {
        kind: reader.kind(),
        params,
        documents: reader.doc_count(),
        footprint_bytes: reader.footprint(),
        blocks,
    };
    if json {
        serde_json::to_writer_pretty(&mut *out, &stats).map_err(|e| io_failure(e.into()))?;
        writeln!(out).map_err(io_failure)?;
        return Ok(EXIT_OK);
    }
    let p = &stats.params;
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(io_failure);
    w(out, format!("kind\t{}", kind_name(stats.kind)))?;
    w(
        out,
        format!(
            "q\t{}\nk\t{}\np\t{}\ncanonical\t{}\nblock_size\t{}",
            p.q, p.k, p.p, p.canonical, p.block_size
        ),
    )?;
    w(
        out,
        format!(
            "documents\t{}\nfootprint_bytes\t{}",
            stats.documents, stats.footprint_bytes
        ),
    )?;
    w(
        out,
        "block\tdocs\twidth\tmax_terms\tfill\tpredicted_fpr".to_string(),
    )?;
    for b in &stats.blocks {
        w(
            out,
            format!(
                "{}\t{}\t{}\t{}\t{:.6}\t{:.6}",
                b.block, b.docs, b.width, b.max_terms, b.fill, b.predicted_fpr
            ),
        )?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct Plan {
    terms: Option<u64>,
    p: Option<f64>,
    k: u32,
    width: Option<u64>,
    predicted_fpr: Option<f64>,
    ell: Option<u64>,
    threshold: f64,
    query_fpr: Option<f64>,
    match_fpr: Option<f64>,
    chernoff_bound: Option<f64>,
}

fn cmd_plan(
    terms: Option<u64>,
    fpr: Option<f64>,
    k: u32,
    ell: Option<u64>,
    coverage: f64,
    json: bool,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    if terms.is_none() && ell.is_none() {
        return Err(usage(
            "stats needs an index file, or planner flags --terms/--fpr and/or --ell/--fpr",
        ));
    }
    let mut plan = Plan {
        terms,
        p: fpr,
        k,
        width: None,
        predicted_fpr: None,
        ell,
        threshold: coverage,
        query_fpr: None,
        match_fpr: None,
        chernoff_bound: None,
    };
    if let Some(v) = terms {
        let p = fpr.ok_or_else(|| usage("--terms needs --fpr"))?;
        let w = size_filter(v, p, k)?;
        plan.width = Some(w);
        plan.predicted_fpr = Some(fpr_approx(BloomSpec::new(w, k, v)?));
    }
    if let Some(ell) = ell {
        let p = fpr.ok_or_else(|| usage("--ell needs --fpr"))?;
        let q = QuerySpec::new(ell, coverage, p)?;
        plan.query_fpr = Some(query_fpr(q));
        plan.match_fpr = Some(match_fpr(q));
        plan.chernoff_bound = query_fpr_chernoff(q).ok();
    }
    if json {
        serde_json::to_writer_pretty(&mut *out, &plan).map_err(|e| io_failure(e.into()))?;
        writeln!(out).map_err(io_failure)?;
        return Ok(EXIT_OK);
    }
    let mut line = |key: &str, value: String| writeln!(out, "{key}\t{value}").map_err(io_failure);
    if let (Some(w), Some(f)) = (plan.width, plan.predicted_fpr) {
        line("width", w.to_string())?;
        line("predicted_fpr", format!("{f:.6}"))?;
    }
    if let (Some(qf), Some(mf)) = (plan.query_fpr, plan.match_fpr) {
        line("query_fpr", format!("{qf:.6e}"))?;
        line("match_fpr", format!("{mf:.6e}"))?;
        match plan.chernoff_bound {
            Some(b) => line("chernoff_bound", format!("{b:.6e}"))?,
            None => line("chernoff_bound", "n/a (K < p)".into())?,
        }
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate(
    index: &std::path::Path,
    corpus: &[PathBuf],
    format: InputFormat,
    memory: Memory,
    mut cfg: ValidationConfig,
    json: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let workers = workers_from_env()?;
    cfg.workers = 1;
    let reader = Reader::open(index, memory)?;
    let docs = read_corpus(corpus, format, workers)?;
    let t = Instant::now();
    let report = validate(reader.source(), &docs, &cfg)?;
    writeln!(err, "validated in {:.3}s", t.elapsed().as_secs_f64()).map_err(io_failure)?;
    if json {
        serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| io_failure(e.into()))?;
        writeln!(out).map_err(io_failure)?;
    } else {
        write!(out, "{report}").map_err(io_failure)?;
    }
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    })
}
