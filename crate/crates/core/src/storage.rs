//! On-disk index format and the two ways to read it back.
//!
//! Layout, all integers little-endian (see FORMAT.md for a worked example):
//!
//! ```text
//! magic        8   "COBSIDX1"
//! version      u8  = 1
//! kind         u8  0 classic, 1 compact
//! hash_scheme  u8
//! canonical    u8  0 or 1
//! q            u32
//! k            u32
//! p            f64
//! block_size   u64
//! block_count  u64
//! per block:   doc_count u64, width u64,
//!              per doc: name_len u16, name bytes, term_count u64
//! offsets      block_count x u64, absolute file offset of each payload
//! payload      per block: width rows of ceil(doc_count / 8) bytes
//! ```
//!
//! A classic index is a one-block file of kind 0.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::classic::{row_bytes_for, ClassicIndex, DocEntry};
use crate::compact::CompactIndex;
use crate::error::{Error, Result};
use crate::query::RowSource;
use crate::terms::{HashScheme, IndexParams};

pub const MAGIC: &[u8; 8] = b"COBSIDX1";
pub const VERSION: u8 = 1;

/// Fixed-size part of the header, up to and including `block_count`.
pub const FIXED_HEADER_LEN: usize = 44;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Classic,
    Compact,
}

impl IndexKind {
    fn id(self) -> u8 {
        match self {
            IndexKind::Classic => 0,
            IndexKind::Compact => 1,
        }
    }

    fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(IndexKind::Classic),
            1 => Ok(IndexKind::Compact),
            other => Err(Error::Format(format!("unknown index kind {other}"))),
        }
    }
}

/// A fully resident index of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Index {
    Classic(ClassicIndex),
    Compact(CompactIndex),
}

impl From<ClassicIndex> for Index {
    fn from(x: ClassicIndex) -> Self {
        Index::Classic(x)
    }
}

impl From<CompactIndex> for Index {
    fn from(x: CompactIndex) -> Self {
        Index::Compact(x)
    }
}

impl Index {
    pub fn kind(&self) -> IndexKind {
        match self {
            Index::Classic(_) => IndexKind::Classic,
            Index::Compact(_) => IndexKind::Compact,
        }
    }

    pub fn blocks(&self) -> &[ClassicIndex] {
        match self {
            Index::Classic(x) => std::slice::from_ref(x),
            Index::Compact(x) => x.blocks(),
        }
    }

    pub fn footprint(&self) -> u64 {
        self.blocks().iter().map(ClassicIndex::footprint).sum()
    }

    /// Mutable access to the raw matrix of one block.
    pub fn block_matrix_mut(&mut self, block: usize) -> &mut [u8] {
        match self {
            Index::Classic(x) => x.matrix_mut(),
            Index::Compact(x) => x.blocks_mut()[block].matrix_mut(),
        }
    }
}

impl RowSource for Index {
    fn params(&self) -> &IndexParams {
        match self {
            Index::Classic(x) => x.params(),
            Index::Compact(x) => x.params(),
        }
    }

    fn block_count(&self) -> usize {
        self.blocks().len()
    }

    fn block_width(&self, block: usize) -> u64 {
        self.blocks()[block].width()
    }

    fn block_docs(&self, block: usize) -> &[DocEntry] {
        self.blocks()[block].docs()
    }

    fn read_row(&self, block: usize, row: u64, buf: &mut [u8]) -> Result<()> {
        buf.copy_from_slice(self.blocks()[block].row(row));
        Ok(())
    }
}

/// Borrowed view of something that can be written.
#[derive(Debug, Clone, Copy)]
pub enum IndexRef<'a> {
    Classic(&'a ClassicIndex),
    Compact(&'a CompactIndex),
}

impl<'a> From<&'a ClassicIndex> for IndexRef<'a> {
    fn from(x: &'a ClassicIndex) -> Self {
        IndexRef::Classic(x)
    }
}

impl<'a> From<&'a CompactIndex> for IndexRef<'a> {
    fn from(x: &'a CompactIndex) -> Self {
        IndexRef::Compact(x)
    }
}

impl<'a> From<&'a Index> for IndexRef<'a> {
    fn from(x: &'a Index) -> Self {
        match x {
            Index::Classic(c) => IndexRef::Classic(c),
            Index::Compact(c) => IndexRef::Compact(c),
        }
    }
}

impl IndexRef<'_> {
    fn parts(&self) -> (IndexKind, &IndexParams, &[ClassicIndex]) {
        match *self {
            IndexRef::Classic(x) => (IndexKind::Classic, x.params(), std::slice::from_ref(x)),
            IndexRef::Compact(x) => (IndexKind::Compact, x.params(), x.blocks()),
        }
    }
}

/// Serializes the header (everything before the payload).
fn encode_header(
    kind: IndexKind,
    params: &IndexParams,
    blocks: &[ClassicIndex],
) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(FIXED_HEADER_LEN + blocks.len() * 24);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(kind.id());
    out.push(params.hash_scheme.id());
    out.push(params.canonical as u8);
    out.extend_from_slice(&(params.q as u32).to_le_bytes());
    out.extend_from_slice(&params.k.to_le_bytes());
    out.extend_from_slice(&params.p.to_le_bytes());
    out.extend_from_slice(&(params.block_size as u64).to_le_bytes());
    out.extend_from_slice(&(blocks.len() as u64).to_le_bytes());
    for b in blocks {
        out.extend_from_slice(&(b.doc_count() as u64).to_le_bytes());
        out.extend_from_slice(&b.width().to_le_bytes());
        for d in b.docs() {
            let len = u16::try_from(d.name.len()).map_err(|_| {
                let head: String = d.name.chars().take(32).collect();
                Error::InvalidParams(format!("document name longer than 65535 bytes: {head}..."))
            })?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(d.name.as_bytes());
            out.extend_from_slice(&d.term_count.to_le_bytes());
        }
    }
    let mut offset = (out.len() + 8 * blocks.len()) as u64;
    for b in blocks {
        out.extend_from_slice(&offset.to_le_bytes());
        offset += b.footprint();
    }
    Ok(out)
}

/// The complete file image.
pub fn to_bytes<'a>(index: impl Into<IndexRef<'a>>) -> Result<Vec<u8>> {
    let index = index.into();
    let (kind, params, blocks) = index.parts();
    let mut out = encode_header(kind, params, blocks)?;
    for b in blocks {
        out.extend_from_slice(b.matrix());
    }
    Ok(out)
}

pub fn write_index<'a>(index: impl Into<IndexRef<'a>>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let index = index.into();
    let (kind, params, blocks) = index.parts();
    let header = encode_header(kind, params, blocks)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&header).map_err(|e| Error::io(path, e))?;
    for b in blocks {
        w.write_all(b.matrix()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parsed header of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMeta {
    pub width: u64,
    pub docs: Vec<DocEntry>,
    /// Absolute file offset of the block's first row.
    pub offset: u64,
}

impl BlockMeta {
    pub fn row_bytes(&self) -> usize {
        row_bytes_for(self.docs.len())
    }

    pub fn payload_len(&self) -> u64 {
        self.width * self.row_bytes() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub kind: IndexKind,
    pub params: IndexParams,
    pub blocks: Vec<BlockMeta>,
    /// Bytes before the first payload byte.
    pub len: u64,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated header at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
}

/// Parses and checks the header. `bytes` must contain at least the whole
/// header; `file_len` is the total file size, used to verify the offsets.
pub fn parse_header(bytes: &[u8], file_len: u64) -> Result<Header> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)
        .map_err(|_| Error::Format("file too short for magic".into()))?
        != MAGIC
    {
        return Err(Error::Format("bad magic".into()));
    }
    let version = c.u8()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let kind = IndexKind::from_id(c.u8()?)?;
    let hash_scheme = HashScheme::from_id(c.u8()?)?;
    let canonical = match c.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("canonical flag {other}"))),
    };
    let q = c.u32()? as usize;
    let k = c.u32()?;
    let p = f64::from_le_bytes(c.array()?);
    let block_size =
        usize::try_from(c.u64()?).map_err(|_| Error::Format("block size overflow".into()))?;
    let params = IndexParams {
        q,
        k,
        p,
        canonical,
        block_size,
        hash_scheme,
    };
    params
        .validate()
        .map_err(|e| Error::Format(e.to_string()))?;

    let block_count = c.u64()?;
    // every block needs at least 24 header bytes
    if block_count == 0 || block_count > file_len / 24 {
        return Err(Error::Format(format!(
            "implausible block count {block_count}"
        )));
    }
    if kind == IndexKind::Classic && block_count != 1 {
        return Err(Error::Format(format!(
            "classic index with {block_count} blocks"
        )));
    }
    let mut blocks = Vec::with_capacity(block_count as usize);
    for _ in 0..block_count {
        let doc_count = c.u64()?;
        let width = c.u64()?;
        if width == 0 {
            return Err(Error::Format("zero block width".into()));
        }
        if doc_count > file_len / 10 {
            return Err(Error::Format(format!(
                "implausible document count {doc_count}"
            )));
        }
        let mut docs = Vec::with_capacity(doc_count as usize);
        for _ in 0..doc_count {
            let len = c.u16()? as usize;
            let name = std::str::from_utf8(c.take(len)?)
                .map_err(|_| Error::Format("document name is not UTF-8".into()))?
                .to_string();
            let term_count = c.u64()?;
            docs.push(DocEntry { name, term_count });
        }
        blocks.push(BlockMeta {
            width,
            docs,
            offset: 0,
        });
    }
    for b in &mut blocks {
        b.offset = c.u64()?;
    }
    let len = c.pos as u64;

    let mut expected = len;
    for (i, b) in blocks.iter().enumerate() {
        if b.offset != expected {
            return Err(Error::Format(format!(
                "block {i} payload at {}, expected {expected}",
                b.offset
            )));
        }
        expected = b
            .payload_len()
            .checked_add(expected)
            .ok_or_else(|| Error::Format("payload size overflow".into()))?;
    }
    if expected != file_len {
        return Err(Error::Format(format!(
            "file is {file_len} bytes, layout needs {expected}"
        )));
    }
    Ok(Header {
        kind,
        params,
        blocks,
        len,
    })
}

/// Parses a complete file image into a resident index.
pub fn from_bytes(bytes: &[u8]) -> Result<Index> {
    let header = parse_header(bytes, bytes.len() as u64)?;
    let params = header.params;
    let blocks = header
        .blocks
        .into_iter()
        .map(|b| {
            let start = b.offset as usize;
            let rows = bytes[start..start + b.payload_len() as usize].to_vec();
            ClassicIndex::from_parts(params, b.width, b.docs, rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(match header.kind {
        IndexKind::Classic => Index::Classic(blocks.into_iter().next().expect("one block")),
        IndexKind::Compact => Index::Compact(CompactIndex::from_blocks(params, blocks)?),
    })
}

/// Loads the whole file; queries never touch it again.
pub fn open_resident(path: impl AsRef<Path>) -> Result<Index> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    }
}

/// Reads the header eagerly and fetches rows with positional reads on
/// demand, so a query touches only the rows its terms hash to.
#[derive(Debug)]
pub struct RandomAccessIndex {
    path: PathBuf,
    file: File,
    header: Header,
    bytes_read: AtomicU64,
}

impl RandomAccessIndex {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let header = read_header(&file, file_len, &path).map_err(|e| with_path(e, &path))?;
        Ok(RandomAccessIndex {
            path,
            file,
            header,
            bytes_read: AtomicU64::new(0),
        })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn kind(&self) -> IndexKind {
        self.header.kind
    }

    /// Payload bytes fetched since open or the last reset.
    pub fn bytes_read(&self) -> u64 {
        self.bytes_read.load(Ordering::Relaxed)
    }

    pub fn reset_bytes_read(&self) {
        self.bytes_read.store(0, Ordering::Relaxed);
    }

    pub fn footprint(&self) -> u64 {
        self.header.blocks.iter().map(BlockMeta::payload_len).sum()
    }
}

/// Reads a growing prefix until the header parses or provably cannot.
fn read_header(file: &File, file_len: u64, path: &Path) -> Result<Header> {
    let mut want = 4096u64.min(file_len);
    loop {
        let mut buf = vec![0u8; want as usize];
        read_at(file, &mut buf, 0).map_err(|e| Error::io(path, e))?;
        // offsets are checked against the real length only once the whole
        // header is in the buffer
        match parse_header(&buf, file_len) {
            Err(Error::Format(msg)) if msg.starts_with("truncated header") && want < file_len => {
                want = (want * 4).min(file_len);
            }
            other => return other,
        }
    }
}

#[cfg(unix)]
fn read_at(file: &File, buf: &mut [u8], offset: u64) -> std::io::Result<()> {
    use std::os::unix::fs::FileExt;
    file.read_exact_at(buf, offset)
}

#[cfg(windows)]
fn read_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> std::io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        let n = file.seek_read(buf, offset)?;
        if n == 0 {
            return Err(std::io::ErrorKind::UnexpectedEof.into());
        }
        buf = &mut buf[n..];
        offset += n as u64;
    }
    Ok(())
}

impl RowSource for RandomAccessIndex {
    fn params(&self) -> &IndexParams {
        &self.header.params
    }

    fn block_count(&self) -> usize {
        self.header.blocks.len()
    }

    fn block_width(&self, block: usize) -> u64 {
        self.header.blocks[block].width
    }

    fn block_docs(&self, block: usize) -> &[DocEntry] {
        &self.header.blocks[block].docs
    }

    fn read_row(&self, block: usize, row: u64, buf: &mut [u8]) -> Result<()> {
        let meta = &self.header.blocks[block];
        debug_assert!(row < meta.width);
        let rb = meta.row_bytes() as u64;
        read_at(&self.file, buf, meta.offset + row * rb).map_err(|e| Error::io(&self.path, e))?;
        self.bytes_read.fetch_add(rb, Ordering::Relaxed);
        Ok(())
    }
}

pub fn open_random_access(path: impl AsRef<Path>) -> Result<RandomAccessIndex> {
    RandomAccessIndex::open(path)
}
