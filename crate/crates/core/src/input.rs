//! Reading documents from disk: FASTA records or whole-file text.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::terms::{IndexParams, TermSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    /// Pick by extension: `.fa`, `.fasta`, `.fna` are FASTA, anything else text.
    #[default]
    Auto,
    Fasta,
    Text,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(InputFormat::Auto),
            "fasta" => Ok(InputFormat::Fasta),
            "text" => Ok(InputFormat::Text),
            other => Err(format!(
                "unknown input format `{other}` (auto, fasta, text)"
            )),
        }
    }
}

impl InputFormat {
    pub fn resolve(self, path: &Path) -> InputFormat {
        match self {
            InputFormat::Auto => {
                let ext = path
                    .extension()
                    .and_then(|e| e.to_str())
                    .map(|e| e.to_ascii_lowercase());
                match ext.as_deref() {
                    Some("fa" | "fasta" | "fna") => InputFormat::Fasta,
                    _ => InputFormat::Text,
                }
            }
            other => other,
        }
    }
}

/// One input file: a name and its independent strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub name: String,
    pub strings: Vec<Vec<u8>>,
}

impl Document {
    pub fn terms(&self, params: &IndexParams) -> TermSet {
        params.extract(self.name.clone(), &self.strings)
    }

    pub fn total_len(&self) -> usize {
        self.strings.iter().map(Vec::len).sum()
    }
}

/// A named FASTA record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FastaRecord {
    pub name: String,
    pub seq: Vec<u8>,
}

/// Splits FASTA text into records. Sequence lines are concatenated and
/// uppercased; the record name is the header up to the first whitespace.
/// Sequence before the first header becomes an unnamed record.
pub fn parse_fasta(bytes: &[u8]) -> Vec<FastaRecord> {
    let mut records = Vec::new();
    let mut current: Option<FastaRecord> = None;
    for line in bytes.split(|&b| b == b'\n') {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if let Some(header) = line.strip_prefix(b">") {
            records.extend(current.take());
            let header = String::from_utf8_lossy(header);
            let name = header.split_whitespace().next().unwrap_or("").to_string();
            current = Some(FastaRecord {
                name,
                seq: Vec::new(),
            });
        } else if !line.is_empty() {
            let rec = current.get_or_insert_with(|| FastaRecord {
                name: String::new(),
                seq: Vec::new(),
            });
            rec.seq.extend(
                line.iter()
                    .filter(|b| !b.is_ascii_whitespace())
                    .map(u8::to_ascii_uppercase),
            );
        }
    }
    records.extend(current);
    records
}

pub fn read_fasta(path: &Path) -> Result<Vec<FastaRecord>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_fasta(&bytes))
}

/// Document name for a path: the file name without its last extension.
pub fn document_name(path: &Path) -> String {
    path.file_stem()
        .or_else(|| path.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn read_document(path: &Path, format: InputFormat) -> Result<Document> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let strings = match format.resolve(path) {
        InputFormat::Fasta => parse_fasta(&bytes).into_iter().map(|r| r.seq).collect(),
        _ => vec![bytes],
    };
    Ok(Document {
        name: document_name(path),
        strings,
    })
}

/// Expands directories recursively. Files inside a directory come in
/// lexicographic path order; explicit file arguments keep their position.
pub fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
        if meta.is_dir() {
            let mut found = Vec::new();
            walk(path, &mut found)?;
            found.sort();
            out.extend(found);
        } else {
            out.push(path.clone());
        }
    }
    Ok(out)
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let ty = entry.file_type().map_err(|e| Error::io(&path, e))?;
        if ty.is_dir() {
            walk(&path, out)?;
        } else if ty.is_file() || (ty.is_symlink() && path.is_file()) {
            out.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fasta_records() {
        let text = b">r1 some description\nacgt\nAC\r\n>r2\n\nGGG\n";
        let recs = parse_fasta(text);
        assert_eq!(
            recs,
            vec![
                FastaRecord {
                    name: "r1".into(),
                    seq: b"ACGTAC".to_vec()
                },
                FastaRecord {
                    name: "r2".into(),
                    seq: b"GGG".to_vec()
                },
            ]
        );
    }

    #[test]
    fn fasta_without_header() {
        let recs = parse_fasta(b"ACGT\nTT\n");
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].seq, b"ACGTTT");
        assert!(parse_fasta(b"").is_empty());
    }

    #[test]
    fn format_by_extension() {
        assert_eq!(
            InputFormat::Auto.resolve(Path::new("x.fa")),
            InputFormat::Fasta
        );
        assert_eq!(
            InputFormat::Auto.resolve(Path::new("x.FASTA")),
            InputFormat::Fasta
        );
        assert_eq!(
            InputFormat::Auto.resolve(Path::new("x.fna")),
            InputFormat::Fasta
        );
        assert_eq!(
            InputFormat::Auto.resolve(Path::new("x.txt")),
            InputFormat::Text
        );
        assert_eq!(
            InputFormat::Text.resolve(Path::new("x.fa")),
            InputFormat::Text
        );
        assert_eq!(document_name(Path::new("/a/b/sample.fa")), "sample");
    }

    #[test]
    fn directories_expand_sorted() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        for name in ["b.txt", "a.txt", "sub/c.fa"] {
            fs::write(dir.path().join(name), "x").unwrap();
        }
        let files = collect_inputs(&[dir.path().to_path_buf()]).unwrap();
        let names: Vec<_> = files
            .iter()
            .map(|p| {
                p.strip_prefix(dir.path())
                    .unwrap()
                    .to_string_lossy()
                    .into_owned()
            })
            .collect();
        assert_eq!(names, ["a.txt", "b.txt", "sub/c.fa"]);
        assert!(collect_inputs(&[dir.path().join("missing")]).is_err());
    }
}
