//! Embedding tables and their on-disk containers.
//!
//! Two formats are supported:
//!
//! * CSV with header `clip_id,frame,e0,...,e{D-1}`.
//! * A little-endian binary container:
//!
//! ```text
//! "EMB1" | u32 version (=1) | u32 N | u32 D
//! N × [ u32 id_len | id_len bytes UTF-8 clip_id | u32 frame_index | D × f32 ]
//! ```
//!
//! Vectors are held in f64 in memory. The binary container stores f32, so a
//! binary load followed by a save reproduces the input byte for byte.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u32 = 1;

/// Size of the fixed binary header: magic + version + N + D.
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Csv,
    Binary,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EmbeddingFormat::Csv),
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            other => Err(Error::Format(format!("unknown embedding format `{other}`"))),
        }
    }
}

impl EmbeddingFormat {
    /// Guesses the format from a file extension (`.csv` → CSV, anything else → binary).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EmbeddingFormat::Csv,
            _ => EmbeddingFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub clip_id: String,
    pub frame_index: u32,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    rows: Vec<EmbeddingRow>,
}

impl EmbeddingTable {
    /// Validates dimensions, finiteness and `(clip_id, frame_index)` uniqueness.
    /// An empty row list is allowed here; loading and saving reject it.
    pub fn new(dim: usize, rows: Vec<EmbeddingRow>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("embedding dimension must be at least 1"));
        }
        let mut seen = HashSet::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.vector.len() != dim {
                return Err(Error::Format(format!(
                    "row {i} has {} values, expected {dim}",
                    row.vector.len()
                )));
            }
            if let Some(j) = row.vector.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, column: j });
            }
            if !seen.insert((row.clip_id.as_str(), row.frame_index)) {
                return Err(Error::validation(format!(
                    "duplicate (clip_id, frame) pair ({}, {}) at row {i}",
                    row.clip_id, row.frame_index
                )));
            }
        }
        Ok(EmbeddingTable { dim, rows })
    }

    /// Builds a clip-level table (frame 0) from ids and matrix rows.
    pub fn from_matrix(ids: &[String], m: &Matrix) -> Result<Self> {
        if ids.len() != m.nrows() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: ids.len(),
            });
        }
        let rows = ids
            .iter()
            .enumerate()
            .map(|(i, id)| EmbeddingRow {
                clip_id: id.clone(),
                frame_index: 0,
                vector: m.row(i).iter().copied().collect(),
            })
            .collect();
        Self::new(m.ncols(), rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[EmbeddingRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.rows.len(), self.dim, |i, j| self.rows[i].vector[j])
    }

    /// Index of the first row for each clip id.
    pub fn clip_index(&self) -> HashMap<&str, usize> {
        let mut idx = HashMap::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            idx.entry(row.clip_id.as_str()).or_insert(i);
        }
        idx
    }
}

/// Averages the frames of each clip. Output has one row per clip, frame 0,
/// in order of first appearance.
pub fn pool_frames(table: &EmbeddingTable) -> Result<EmbeddingTable> {
    if table.is_empty() {
        return Err(Error::validation("cannot pool an empty table"));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut acc: HashMap<&str, (Vec<f64>, usize)> = HashMap::new();
    for row in &table.rows {
        let entry = acc.entry(row.clip_id.as_str()).or_insert_with(|| {
            order.push(row.clip_id.as_str());
            (vec![0.0; table.dim], 0)
        });
        for (s, v) in entry.0.iter_mut().zip(&row.vector) {
            *s += v;
        }
        entry.1 += 1;
    }
    let rows = order
        .into_iter()
        .map(|id| {
            let (sum, count) = &acc[id];
            let n = *count as f64;
            EmbeddingRow {
                clip_id: id.to_string(),
                frame_index: 0,
                vector: sum.iter().map(|s| s / n).collect(),
            }
        })
        .collect();
    EmbeddingTable::new(table.dim, rows)
}

pub fn load_embeddings(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let table = match format {
        EmbeddingFormat::Csv => read_csv(BufReader::new(file))?,
        EmbeddingFormat::Binary => read_binary(BufReader::new(file))?,
    };
    if table.is_empty() {
        return Err(Error::validation(format!("{} contains no rows", path.display())));
    }
    Ok(table)
}

pub fn save_embeddings(
    table: &EmbeddingTable,
    path: impl AsRef<Path>,
    format: EmbeddingFormat,
) -> Result<()> {
    let path = path.as_ref();
    if table.is_empty() {
        return Err(Error::validation("refusing to write an empty embedding table"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        EmbeddingFormat::Csv => write_csv(table, &mut w)?,
        EmbeddingFormat::Binary => write_binary(table, &mut w).map_err(|e| Error::io(path, e))?,
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Exact byte length of the binary encoding of `table`.
pub fn binary_size(table: &EmbeddingTable) -> usize {
    HEADER_LEN
        + table
            .rows
            .iter()
            .map(|r| 4 + r.clip_id.len() + 4 + 4 * table.dim)
            .sum::<usize>()
}

pub fn write_binary<W: Write>(table: &EmbeddingTable, w: &mut W) -> std::io::Result<()> {
    let too_big = |what: &str| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("{what} exceeds u32"));
    let n = u32::try_from(table.rows.len()).map_err(|_| too_big("row count"))?;
    let d = u32::try_from(table.dim).map_err(|_| too_big("dimension"))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&d.to_le_bytes())?;
    for row in &table.rows {
        let id = row.clip_id.as_bytes();
        let len = u32::try_from(id.len()).map_err(|_| too_big("clip id"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(id)?;
        w.write_all(&row.frame_index.to_le_bytes())?;
        for &v in &row.vector {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated file reading {what}: {e}")))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<EmbeddingTable> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file shorter than magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = read_u32(&mut r, "row count")? as usize;
    let d = read_u32(&mut r, "dimension")? as usize;
    if d == 0 {
        return Err(Error::Format("dimension is zero".into()));
    }
    let mut rows = Vec::with_capacity(n.min(1 << 20));
    let mut fbuf = vec![0u8; 4 * d];
    for i in 0..n {
        let len = read_u32(&mut r, "id length")? as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id)
            .map_err(|e| Error::Format(format!("truncated clip id at row {i}: {e}")))?;
        let clip_id = String::from_utf8(id)
            .map_err(|_| Error::Format(format!("clip id at row {i} is not UTF-8")))?;
        let frame_index = read_u32(&mut r, "frame index")?;
        r.read_exact(&mut fbuf)
            .map_err(|e| Error::Format(format!("truncated vector at row {i}: {e}")))?;
        let mut vector = Vec::with_capacity(d);
        for (j, chunk) in fbuf.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, column: j });
            }
            vector.push(f64::from(v));
        }
        rows.push(EmbeddingRow {
            clip_id,
            frame_index,
            vector,
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::Format(e.to_string()))? != 0 {
        return Err(Error::Format("trailing bytes after last record".into()));
    }
    EmbeddingTable::new(d, rows)
}

pub fn write_csv<W: Write>(table: &EmbeddingTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["clip_id".to_string(), "frame".to_string()];
    header.extend((0..table.dim).map(|j| format!("e{j}")));
    out.write_record(&header)?;
    for row in &table.rows {
        let mut rec = Vec::with_capacity(table.dim + 2);
        rec.push(row.clip_id.clone());
        rec.push(row.frame_index.to_string());
        // `{}` on f64 prints the shortest string that round-trips exactly.
        rec.extend(row.vector.iter().map(|v| format!("{v}")));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_csv<R: Read>(r: R) -> Result<EmbeddingTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "clip_id" || &header[1] != "frame" {
        return Err(Error::Format(
            "CSV header must be `clip_id,frame,e0,...`".into(),
        ));
    }
    let dim = header.len() - 2;
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("e{j}") {
            return Err(Error::Format(format!("CSV header column {} is `{name}`, expected `e{j}`", j + 2)));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 2 {
            return Err(Error::Format(format!(
                "row {i} has {} values, expected {dim}",
                rec.len().saturating_sub(2)
            )));
        }
        let frame_index = rec[1]
            .trim()
            .parse::<u32>()
            .map_err(|e| Error::Format(format!("row {i}: bad frame index `{}`: {e}", &rec[1])))?;
        let mut vector = Vec::with_capacity(dim);
        for (j, field) in rec.iter().skip(2).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("row {i}, column {j}: `{field}`: {e}")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, column: j });
            }
            vector.push(v);
        }
        rows.push(EmbeddingRow {
            clip_id: rec[0].to_string(),
            frame_index,
            vector,
        });
    }
    EmbeddingTable::new(dim, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, frame: u32, v: &[f64]) -> EmbeddingRow {
        EmbeddingRow {
            clip_id: id.into(),
            frame_index: frame,
            vector: v.to_vec(),
        }
    }

    #[test]
    fn binary_two_by_three() {
        let t = EmbeddingTable::new(3, vec![row("a", 0, &[1.0, 2.0, 3.0]), row("b", 0, &[4.0, 5.0, 6.0])]).unwrap();
        let mut buf = Vec::new();
        write_binary(&t, &mut buf).unwrap();
        assert_eq!(&buf[..4], MAGIC);
        let back = read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.dim(), 3);
        assert_eq!(back.rows()[1].vector, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn bad_magic() {
        let err = read_binary(&b"EMB2\x01\0\0\0"[..]).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn csv_row_too_wide() {
        let text = "clip_id,frame,e0,e1,e2\na,0,1,2,3\nb,0,1,2,3,4\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn csv_nan_rejected_with_row() {
        let text = "clip_id,frame,e0\na,0,1\nb,0,NaN\n";
        match read_csv(text.as_bytes()) {
            Err(Error::NonFinite { row, column }) => assert_eq!((row, column), (1, 0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_frame_rejected() {
        let err = EmbeddingTable::new(1, vec![row("a", 0, &[1.0]), row("a", 0, &[2.0])]).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn pool_two_frames() {
        let t = EmbeddingTable::new(2, vec![row("a", 0, &[1.0, 2.0]), row("a", 1, &[3.0, 4.0])]).unwrap();
        let p = pool_frames(&t).unwrap();
        assert_eq!(p.rows(), &[row("a", 0, &[2.0, 3.0])]);
    }

    #[test]
    fn pool_single_frame_identity() {
        let t = EmbeddingTable::new(2, vec![row("x", 7, &[0.1, -0.3])]).unwrap();
        let p = pool_frames(&t).unwrap();
        assert_eq!(p.rows()[0].vector, vec![0.1, -0.3]);
        assert_eq!(p.rows()[0].frame_index, 0);
    }

    #[test]
    fn pool_preserves_first_appearance_order() {
        let t = EmbeddingTable::new(
            1,
            vec![row("b", 0, &[1.0]), row("a", 0, &[2.0]), row("b", 1, &[3.0])],
        )
        .unwrap();
        let p = pool_frames(&t).unwrap();
        let ids: Vec<_> = p.rows().iter().map(|r| r.clip_id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        assert_eq!(p.rows()[0].vector, vec![2.0]);
    }
}
