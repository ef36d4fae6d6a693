//! Token-embedding matrices and their vocabularies.
//!
//! Two on-disk formats are supported:
//!
//! * SEMX, the native binary container: magic `SEMX`, `u32` version (1),
//!   `u64` vocabulary size `V`, `u64` dimension `n`, then `V` entries of
//!   (`u32` byte length, UTF-8 bytes), then `V*n` row-major `f32` values.
//!   All integers and floats are little-endian.
//! * word2vec text: a `V n` header line followed by `token x1 .. xn` lines.
//!
//! An [`EmbeddingSpace`] is immutable. Steering a token produces a new space
//! that shares the base matrix and overlays the modified row.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SEMX_MAGIC: &[u8; 4] = b"SEMX";
pub const SEMX_VERSION: u32 = 1;

/// Prefixes tried, in order, for the leading-space variant of a word.
/// Plain space covers decoded vocabularies; `▁` and `Ġ` are the raw
/// SentencePiece and byte-level BPE spellings.
const SPACE_MARKERS: [char; 3] = [' ', '\u{2581}', '\u{0120}'];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::Validation(format!("duplicate token {tok:?} at id {id}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// A vocabulary plus a `V x n` matrix of `f32` token vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    vocab: Arc<Vocabulary>,
    matrix: Arc<Vec<f32>>,
    dim: usize,
    patches: Arc<BTreeMap<usize, Box<[f32]>>>,
}

impl EmbeddingSpace {
    pub fn new(vocab: Vocabulary, matrix: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dimension must be positive".into()));
        }
        if matrix.len() != vocab.len() * dim {
            return Err(Error::Validation(format!(
                "matrix has {} values, expected {} x {}",
                matrix.len(),
                vocab.len(),
                dim
            )));
        }
        if let Some(pos) = matrix.iter().position(|x| !x.is_finite()) {
            let row = pos / dim;
            return Err(Error::Validation(format!(
                "non-finite value in row {row} ({:?})",
                vocab.token(row).unwrap_or_default()
            )));
        }
        Ok(Self {
            vocab: Arc::new(vocab),
            matrix: Arc::new(matrix),
            dim,
            patches: Arc::new(BTreeMap::new()),
        })
    }

    /// Builds a space from `(token, vector)` rows.
    pub fn from_rows<S: Into<String>>(rows: Vec<(S, Vec<f32>)>) -> Result<Self> {
        let dim = rows.first().map(|(_, v)| v.len()).unwrap_or(0);
        let mut tokens = Vec::with_capacity(rows.len());
        let mut matrix = Vec::with_capacity(rows.len() * dim);
        for (i, (tok, v)) in rows.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Validation(format!(
                    "row {i} has {} values, expected {dim}",
                    v.len()
                )));
            }
            tokens.push(tok.into());
            matrix.extend_from_slice(&v);
        }
        Self::new(Vocabulary::new(tokens)?, matrix, dim)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// Row `id`, including any overlaid modification.
    ///
    /// Panics if `id` is out of range.
    pub fn row(&self, id: usize) -> &[f32] {
        if !self.patches.is_empty() {
            if let Some(p) = self.patches.get(&id) {
                return p;
            }
        }
        &self.matrix[id * self.dim..(id + 1) * self.dim]
    }

    pub fn row_f64(&self, id: usize) -> Vec<f64> {
        self.row(id).iter().map(|&x| f64::from(x)).collect()
    }

    pub fn row_norm(&self, id: usize) -> f64 {
        self.row(id).iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
    }

    pub fn check_id(&self, id: usize) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::Validation(format!("token id {id} out of range (V = {})", self.len())))
        }
    }

    /// Returns a space identical to `self` except that row `id` is `values`.
    /// The base matrix is shared, not copied.
    pub fn with_row(&self, id: usize, values: Vec<f32>) -> Result<Self> {
        self.check_id(id)?;
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: values.len() });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("non-finite value in replacement row {id}")));
        }
        let mut patches = (*self.patches).clone();
        patches.insert(id, values.into_boxed_slice());
        Ok(Self {
            vocab: Arc::clone(&self.vocab),
            matrix: Arc::clone(&self.matrix),
            dim: self.dim,
            patches: Arc::new(patches),
        })
    }

    /// Ids of rows that differ from the base matrix.
    pub fn modified_rows(&self) -> Vec<usize> {
        self.patches.keys().copied().collect()
    }

    /// All rows, row-major, with modifications applied.
    pub fn to_dense(&self) -> Vec<f32> {
        if self.patches.is_empty() {
            return (*self.matrix).clone();
        }
        let mut out = (*self.matrix).clone();
        for (&id, row) in self.patches.iter() {
            out[id * self.dim..(id + 1) * self.dim].copy_from_slice(row);
        }
        out
    }
}

impl PartialEq for EmbeddingSpace {
    /// Bitwise comparison of the effective matrix.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.vocab == other.vocab
            && (0..self.len()).all(|i| {
                self.row(i).iter().zip(other.row(i)).all(|(a, b)| a.to_bits() == b.to_bits())
            })
    }
}

pub fn load_container(path: impl AsRef<Path>) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    read_container(BufReader::new(file), Some(file_len))
}

/// Reads a SEMX container. When `total_len` is known, the declared sizes are
/// checked against it before the matrix is allocated.
pub fn read_container<R: Read>(mut reader: R, total_len: Option<u64>) -> Result<EmbeddingSpace> {
    let mut consumed: u64 = 0;
    let mut header = [0u8; 24];
    read_exact_or_truncated(&mut reader, &mut header, consumed, total_len)?;
    consumed += 24;
    if &header[0..4] != SEMX_MAGIC {
        return Err(Error::Format("bad magic, expected \"SEMX\"".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != SEMX_VERSION {
        return Err(Error::Format(format!("unsupported SEMX version {version}")));
    }
    let vocab_size = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let dim = u64::from_le_bytes(header[16..24].try_into().unwrap());

    let payload = vocab_size
        .checked_mul(dim)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::Format("declared sizes overflow".into()))?;
    if let Some(total) = total_len {
        // every vocab entry costs at least 4 bytes
        let min_len = vocab_size.saturating_mul(4).saturating_add(payload).saturating_add(24);
        if min_len > total {
            return Err(Error::Truncated { expected: min_len, actual: total });
        }
    }
    let vocab_size = usize::try_from(vocab_size).map_err(|_| Error::Format("vocab size too large".into()))?;
    let dim = usize::try_from(dim).map_err(|_| Error::Format("dimension too large".into()))?;

    let mut tokens = Vec::with_capacity(vocab_size);
    let mut len_buf = [0u8; 4];
    for i in 0..vocab_size {
        read_exact_or_truncated(&mut reader, &mut len_buf, consumed, total_len)?;
        consumed += 4;
        let n = u32::from_le_bytes(len_buf) as usize;
        let mut bytes = vec![0u8; n];
        read_exact_or_truncated(&mut reader, &mut bytes, consumed, total_len)?;
        consumed += n as u64;
        let tok = String::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("vocabulary entry {i} is not valid UTF-8")))?;
        tokens.push(tok);
    }

    let expected_total = consumed + payload;
    if let Some(total) = total_len {
        if total != expected_total {
            return Err(Error::Truncated { expected: expected_total, actual: total });
        }
    }

    let mut matrix = vec![0f32; vocab_size * dim];
    let mut buf = vec![0u8; 4 * dim.max(1) * 256];
    let mut filled = 0usize;
    while filled < matrix.len() {
        let take = (matrix.len() - filled).min(buf.len() / 4);
        let bytes = &mut buf[..take * 4];
        read_exact_or_truncated(&mut reader, bytes, consumed, total_len)?;
        consumed += bytes.len() as u64;
        for (dst, src) in matrix[filled..filled + take].iter_mut().zip(bytes.chunks_exact(4)) {
            *dst = f32::from_le_bytes(src.try_into().unwrap());
        }
        filled += take;
    }
    let mut extra = [0u8; 1];
    match reader.read(&mut extra) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::Truncated { expected: expected_total, actual: expected_total + 1 });
        }
        Err(e) => return Err(Error::Format(format!("read error: {e}"))),
    }

    EmbeddingSpace::new(Vocabulary::new(tokens)?, matrix, dim)
}

fn read_exact_or_truncated<R: Read>(
    reader: &mut R,
    buf: &mut [u8],
    consumed: u64,
    total_len: Option<u64>,
) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated {
                expected: consumed + buf.len() as u64,
                actual: total_len.unwrap_or(consumed),
            }
        } else {
            Error::Format(format!("read error: {e}"))
        }
    })
}

pub fn save_container(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_container(space, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_container<W: Write>(space: &EmbeddingSpace, w: &mut W) -> std::io::Result<()> {
    w.write_all(SEMX_MAGIC)?;
    w.write_all(&SEMX_VERSION.to_le_bytes())?;
    w.write_all(&(space.len() as u64).to_le_bytes())?;
    w.write_all(&(space.dim() as u64).to_le_bytes())?;
    for tok in space.vocab().tokens() {
        let len = u32::try_from(tok.len())
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "token too long"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(tok.as_bytes())?;
    }
    let mut buf = Vec::with_capacity(space.dim() * 4);
    for i in 0..space.len() {
        buf.clear();
        for x in space.row(i) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn load_word2vec_text(path: impl AsRef<Path>) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word2vec_text(BufReader::new(file))
}

pub fn read_word2vec_text<R: BufRead>(reader: R) -> Result<EmbeddingSpace> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::Parse { line: 1, message: e.to_string() })?,
        None => return Err(Error::Parse { line: 1, message: "empty file".into() }),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (rows, dim) = match fields.as_slice() {
        [v, n] => (
            v.parse::<usize>().map_err(|e| Error::Parse { line: 1, message: format!("bad row count: {e}") })?,
            n.parse::<usize>().map_err(|e| Error::Parse { line: 1, message: format!("bad dimension: {e}") })?,
        ),
        _ => return Err(Error::Parse { line: 1, message: "header must be \"V n\"".into() }),
    };

    let mut tokens = Vec::with_capacity(rows);
    let mut matrix = Vec::with_capacity(rows * dim);
    let mut line_no = 1u64;
    for line in lines {
        line_no += 1;
        let line = line.map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        if tokens.len() == rows {
            return Err(Error::Parse {
                line: line_no,
                message: format!("more rows than the {rows} declared in the header"),
            });
        }
        let (token, values) = split_word2vec_line(line, dim)
            .ok_or_else(|| Error::Parse { line: line_no, message: format!("expected a token and {dim} values") })?;
        for v in values {
            let x: f32 = v
                .parse()
                .map_err(|_| Error::Parse { line: line_no, message: format!("not a number: {v:?}") })?;
            matrix.push(x);
        }
        tokens.push(token.to_string());
    }
    if tokens.len() != rows {
        return Err(Error::Parse {
            line: line_no,
            message: format!("header declares {rows} rows, file has {}", tokens.len()),
        });
    }
    EmbeddingSpace::new(Vocabulary::new(tokens)?, matrix, dim)
}

/// Splits `token x1 .. xn`. A line starting with whitespace keeps that
/// whitespace as part of the token, so leading-space vocabulary entries
/// survive a round trip.
fn split_word2vec_line(line: &str, dim: usize) -> Option<(&str, Vec<&str>)> {
    if line.starts_with(char::is_whitespace) {
        let mut parts: Vec<&str> = line.rsplitn(dim + 1, ' ').collect();
        if parts.len() != dim + 1 {
            return None;
        }
        let token = parts.pop()?;
        if token.trim().is_empty() || parts.iter().any(|p| p.is_empty()) {
            return None;
        }
        parts.reverse();
        Some((token, parts))
    } else {
        let mut fields = line.split_whitespace();
        let token = fields.next()?;
        let values: Vec<&str> = fields.collect();
        (values.len() == dim).then_some((token, values))
    }
}

pub fn save_word2vec_text(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for tok in space.vocab().tokens() {
        if tok.trim().is_empty() || tok.contains('\n') || tok.trim_end() != tok || tok.trim_start().contains(char::is_whitespace) {
            return Err(Error::Validation(format!("token {tok:?} cannot be written in word2vec text form")));
        }
    }
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "{} {}", space.len(), space.dim())?;
        for (i, tok) in space.vocab().tokens().iter().enumerate() {
            w.write_all(tok.as_bytes())?;
            for x in space.row(i) {
                write!(w, " {x:?}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Loads either format, sniffing the SEMX magic.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let mut magic = [0u8; 4];
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let n = f.read(&mut magic).map_err(|e| Error::io(path, e))?;
    if n == 4 && &magic == SEMX_MAGIC {
        load_container(path)
    } else {
        load_word2vec_text(path)
    }
}

/// Orthographic variant under which a word was found in the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    LeadingSpace,
    Bare,
    Capitalized,
    LeadingSpaceCapitalized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenResolution {
    pub word: String,
    pub token_id: Option<usize>,
    pub variant_used: Option<Variant>,
}

impl TokenResolution {
    pub fn is_resolved(&self) -> bool {
        self.token_id.is_some()
    }
}

/// Maps a word to a single vocabulary token.
///
/// Variants are tried in a fixed order: leading-space, bare, capitalized,
/// leading-space-capitalized. The first hit wins. Words that only exist as
/// multi-token splits resolve to nothing.
pub fn resolve_word(space: &EmbeddingSpace, word: &str) -> TokenResolution {
    resolve_in_vocab(space.vocab(), word)
}

pub fn resolve_in_vocab(vocab: &Vocabulary, word: &str) -> TokenResolution {
    let capitalized = capitalize(word);
    let spaced = |w: &str| SPACE_MARKERS.iter().find_map(|m| vocab.id(&format!("{m}{w}")));
    let hit = spaced(word)
        .map(|id| (id, Variant::LeadingSpace))
        .or_else(|| vocab.id(word).map(|id| (id, Variant::Bare)))
        .or_else(|| vocab.id(&capitalized).map(|id| (id, Variant::Capitalized)))
        .or_else(|| spaced(&capitalized).map(|id| (id, Variant::LeadingSpaceCapitalized)));
    TokenResolution {
        word: word.to_string(),
        token_id: hit.map(|(id, _)| id),
        variant_used: hit.map(|(_, v)| v),
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EmbeddingSpace {
        EmbeddingSpace::from_rows(vec![("a", vec![1.0, 0.0, 0.0]), ("b", vec![0.0, 1.0, 0.0])]).unwrap()
    }

    fn bytes_of(space: &EmbeddingSpace) -> Vec<u8> {
        let mut buf = Vec::new();
        write_container(space, &mut buf).unwrap();
        buf
    }

    #[test]
    fn minimal_container_layout() {
        let buf = bytes_of(&tiny());
        assert_eq!(&buf[..4], b"SEMX");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 24 + (4 + 1) * 2 + 6 * 4);
        let back = read_container(&buf[..], Some(buf.len() as u64)).unwrap();
        assert_eq!(back.dim(), 3);
        assert_eq!(back.vocab().tokens(), &["a".to_string(), "b".to_string()]);
        assert_eq!(back, tiny());
    }

    #[test]
    fn short_payload_is_truncation() {
        let buf = bytes_of(&tiny());
        let short = &buf[..buf.len() - 4];
        assert!(matches!(read_container(short, Some(short.len() as u64)), Err(Error::Truncated { .. })));
        assert!(matches!(read_container(short, None), Err(Error::Truncated { .. })));
        let mut long = buf.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(read_container(&long[..], None), Err(Error::Truncated { .. })));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut buf = bytes_of(&tiny());
        buf[0] = b'X';
        assert!(matches!(read_container(&buf[..], None), Err(Error::Format(_))));
        let mut buf = bytes_of(&tiny());
        buf[4] = 2;
        assert!(matches!(read_container(&buf[..], None), Err(Error::Format(_))));
    }

    #[test]
    fn non_finite_entry_names_row() {
        let mut buf = bytes_of(&tiny());
        let n = buf.len();
        buf[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        match read_container(&buf[..], None) {
            Err(Error::Validation(msg)) => assert!(msg.contains("row 1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn word2vec_text_parsing() {
        let s = read_word2vec_text("2 2\nhot 1 0\ncold 0 1\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.row(1), &[0.0, 1.0]);

        let err = read_word2vec_text("3 2\nhot 1 0\ncold 0 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));

        match read_word2vec_text("2 2\nhot 1 0\ncold 0 1 5\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }

        let s = read_word2vec_text("1 2\n kind 0.5 -1\n".as_bytes()).unwrap();
        assert_eq!(s.vocab().token(0), Some(" kind"));
    }

    #[test]
    fn resolve_order() {
        let s = EmbeddingSpace::from_rows(vec![
            ("kind", vec![1.0]),
            (" kind", vec![2.0]),
            ("Winter", vec![3.0]),
            ("\u{2581}Peace", vec![4.0]),
        ])
        .unwrap();
        let r = resolve_word(&s, "kind");
        assert_eq!(r.token_id, Some(1));
        assert_eq!(r.variant_used, Some(Variant::LeadingSpace));
        let r = resolve_word(&s, "winter");
        assert_eq!((r.token_id, r.variant_used), (Some(2), Some(Variant::Capitalized)));
        let r = resolve_word(&s, "peace");
        assert_eq!((r.token_id, r.variant_used), (Some(3), Some(Variant::LeadingSpaceCapitalized)));
        let r = resolve_word(&s, "zebra");
        assert!(!r.is_resolved());
        assert_eq!(r.variant_used, None);
        assert_eq!(resolve_word(&s, "kind"), resolve_word(&s, "kind"));
    }

    #[test]
    fn with_row_shares_base() {
        let s = tiny();
        let t = s.with_row(1, vec![0.0, 0.0, 2.0]).unwrap();
        assert_eq!(s.row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(t.row(1), &[0.0, 0.0, 2.0]);
        assert_eq!(t.row(0), s.row(0));
        assert_eq!(t.modified_rows(), vec![1]);
        assert_eq!(t.to_dense()[3..], [0.0, 0.0, 2.0]);
        assert!(s.with_row(5, vec![0.0; 3]).is_err());
        assert!(s.with_row(0, vec![0.0; 2]).is_err());
    }

    #[test]
    fn duplicate_tokens_rejected() {
        assert!(Vocabulary::new(vec!["a".into(), "a".into()]).is_err());
    }
}
