//! On-disk formats: the `RGEM` binary embedding file, CSV tables and JSON
//! sidecars for relative representations and alignment maps.
//!
//! `RGEM` layout, all little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `RGEM` |
//! | 4 | version (`u32`, currently 1) |
//! | 8 | rows (`u64`) |
//! | 8 | cols (`u64`) |
//! | 8·rows·cols | payload, `f64` row-major |
//! | 4 | CRC-32 of the payload bytes |

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentMap, Correspondence, MapKind};
use crate::error::{Error, Result};
use crate::geometry::MetricSpec;
use crate::numerics::DenseMatrix;
use crate::relrep::{RelRepMatrix, RelRepMode};

pub const RGEM_MAGIC: &[u8; 4] = b"RGEM";
pub const RGEM_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Formats a real with 17 significant digits (lossless for `f64`).
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn encode_embedding(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data().len() + 4);
    out.extend_from_slice(RGEM_MAGIC);
    out.extend_from_slice(&RGEM_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    let start = out.len();
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode_embedding(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Format(format!("embedding file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != RGEM_MAGIC {
        return Err(Error::Format("bad magic (expected RGEM)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != RGEM_VERSION {
        return Err(Error::Format(format!("unsupported embedding version {version}")));
    }
    let (rows, cols) = (u64_at(8), u64_at(16));
    let count = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| Error::Format(format!("declared shape {rows}x{cols} is too large")))?;
    if bytes.len() != HEADER_LEN + count + 4 {
        return Err(Error::Format(format!(
            "declared shape {rows}x{cols} needs {} payload bytes, file has {}",
            count,
            bytes.len().saturating_sub(HEADER_LEN + 4)
        )));
    }
    let payload = &bytes[HEADER_LEN..HEADER_LEN + count];
    let stored = u32_at(HEADER_LEN + count);
    let actual = crc32fast::hash(payload);
    if stored != actual {
        return Err(Error::Format(format!("CRC mismatch (stored {stored:08x}, computed {actual:08x})")));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseMatrix::new(rows as usize, cols as usize, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_embedding(path: &Path, m: &DenseMatrix) -> Result<()> {
    fs::write(path, encode_embedding(m))?;
    Ok(())
}

pub fn read_embedding(path: &Path) -> Result<DenseMatrix> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_embedding(&bytes)
}

/// Writes a CSV with a header row; values use [`fmt_real`].
pub fn write_matrix_csv(path: &Path, header: &[String], m: &DenseMatrix) -> Result<()> {
    if header.len() != m.cols() {
        return Err(Error::InvalidArgument(format!(
            "CSV header has {} columns, matrix has {}",
            header.len(),
            m.cols()
        )));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| fmt_real(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV with a header row. Returns the header and the values.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, DenseMatrix)> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header: Vec<String> = match lines.next() {
        Some(l) => l?.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(Error::Format(format!("{} is empty", path.display()))),
    };
    let mut data = Vec::new();
    let mut rows = 0;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Format(format!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                lineno + 2,
                header.len(),
                fields.len()
            )));
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("{}:{}: bad number '{f}'", path.display(), lineno + 2)))?;
            data.push(v);
        }
        rows += 1;
    }
    let m = DenseMatrix::new(rows, header.len(), data).map_err(|e| Error::Format(e.to_string()))?;
    Ok((header, m))
}

/// Reads a single-column CSV of non-negative integers (e.g. labels).
pub fn read_index_csv(path: &Path) -> Result<Vec<usize>> {
    let (_, m) = read_matrix_csv(path)?;
    if m.cols() != 1 {
        return Err(Error::Format(format!("{} must have exactly one column", path.display())));
    }
    m.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Format(format!("{} contains non-index value {v}", path.display())))
            }
        })
        .collect()
}

pub fn write_index_csv(path: &Path, name: &str, values: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{name}")?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_loss_csv(path: &Path, history: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "epoch,loss")?;
    for (e, l) in history.iter().enumerate() {
        writeln!(w, "{e},{}", fmt_real(*l))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_correspondence_csv(path: &Path, c: &Correspondence) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "source_index,target_index,score")?;
    for i in 0..c.len() {
        writeln!(w, "{},{},{}", c.sources[i], c.targets[i], fmt_real(c.scores[i]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_correspondence_csv(path: &Path) -> Result<Correspondence> {
    let (header, m) = read_matrix_csv(path)?;
    if header != ["source_index", "target_index", "score"] {
        return Err(Error::Format(format!("{}: unexpected correspondence header", path.display())));
    }
    let idx = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Format(format!("{}: bad index {v}", path.display())))
        }
    };
    let mut c = Correspondence {
        sources: vec![],
        targets: vec![],
        scores: vec![],
    };
    for row in m.row_iter() {
        c.sources.push(idx(row[0])?);
        c.targets.push(idx(row[1])?);
        c.scores.push(row[2]);
    }
    Ok(c)
}

/// Metadata stored next to a relative-representation embedding file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelRepSidecar {
    pub format_version: u32,
    pub mode: RelRepMode,
    pub metric: Option<MetricSpec>,
    pub steps: Option<usize>,
    pub anchor_fingerprint: String,
    pub anchor_indices: Vec<usize>,
    pub rows: usize,
    pub anchors: usize,
}

/// Writes `<path>` (RGEM) and `<path>.json` (sidecar).
pub fn write_relrep(path: &Path, r: &RelRepMatrix, anchor_indices: &[usize]) -> Result<()> {
    write_embedding(path, &r.values)?;
    let side = RelRepSidecar {
        format_version: 1,
        mode: r.mode,
        metric: r.metric,
        steps: r.steps,
        anchor_fingerprint: r.fingerprint.clone(),
        anchor_indices: anchor_indices.to_vec(),
        rows: r.values.rows(),
        anchors: r.values.cols(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

pub fn read_relrep(path: &Path) -> Result<(RelRepMatrix, Vec<usize>)> {
    let values = read_embedding(path)?;
    let side: RelRepSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)
        .map_err(|e| Error::Format(format!("relrep sidecar: {e}")))?;
    if side.format_version != 1 {
        return Err(Error::Format(format!("unsupported sidecar version {}", side.format_version)));
    }
    if (side.rows, side.anchors) != values.shape() || side.anchor_indices.len() != side.anchors {
        return Err(Error::Format("relrep sidecar does not match the embedding shape".into()));
    }
    if crate::relrep::anchor_fingerprint(&side.anchor_indices) != side.anchor_fingerprint {
        return Err(Error::Format("anchor fingerprint does not match anchor indices".into()));
    }
    Ok((
        RelRepMatrix {
            values,
            mode: side.mode,
            metric: side.metric,
            steps: side.steps,
            fingerprint: side.anchor_fingerprint,
            zero_rows: Vec::new(),
        },
        side.anchor_indices,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapDocument {
    format_version: u32,
    kind: MapKind,
    rows: usize,
    cols: usize,
    matrix: Vec<f64>,
    translation: Vec<f64>,
    fit_residual: f64,
    underdetermined: bool,
}

pub fn alignment_to_json(m: &AlignmentMap) -> Result<String> {
    let doc = MapDocument {
        format_version: 1,
        kind: m.kind,
        rows: m.matrix.rows(),
        cols: m.matrix.cols(),
        matrix: m.matrix.data().to_vec(),
        translation: m.translation.clone(),
        fit_residual: m.fit_residual,
        underdetermined: m.underdetermined,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn alignment_from_json(s: &str) -> Result<AlignmentMap> {
    let doc: MapDocument = serde_json::from_str(s).map_err(|e| Error::Format(format!("alignment map: {e}")))?;
    if doc.format_version != 1 {
        return Err(Error::Format(format!("unsupported alignment map version {}", doc.format_version)));
    }
    if doc.translation.len() != doc.cols {
        return Err(Error::Format("translation length does not match map output dimension".into()));
    }
    let matrix = DenseMatrix::new(doc.rows, doc.cols, doc.matrix).map_err(|e| Error::Format(e.to_string()))?;
    if doc.kind == MapKind::Orthogonal {
        let err = if doc.rows == doc.cols {
            matrix.transpose().matmul(&matrix)?.max_abs_diff(&DenseMatrix::identity(doc.cols))
        } else {
            f64::INFINITY
        };
        if err > 1e-8 {
            return Err(Error::Format(format!("orthogonal map violates TᵀT = I (error {err:e})")));
        }
    }
    Ok(AlignmentMap {
        kind: doc.kind,
        matrix,
        translation: doc.translation,
        fit_residual: doc.fit_residual,
        underdetermined: doc.underdetermined,
    })
}

pub fn save_alignment(path: &Path, m: &AlignmentMap) -> Result<()> {
    fs::write(path, alignment_to_json(m)?)?;
    Ok(())
}

pub fn load_alignment(path: &Path) -> Result<AlignmentMap> {
    alignment_from_json(&fs::read_to_string(path)?)
}
