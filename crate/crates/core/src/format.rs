//! On-disk formats: the FTR1 binary feature file, CSV feature fixtures and
//! the labeled text stats files.
//!
//! FTR1 layout (little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FTR1"
//! 4       4     u32 frame count T
//! 8       4     u32 dimension D
//! 12      4     u32 kind code
//! 16      4·T·D f32 payload, row-major
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result, ResultExt};
use crate::features::{FeatureKind, FeatureSequence, LogF0Stats, NormStats};

pub const FTR1_MAGIC: [u8; 4] = *b"FTR1";
const HEADER_LEN: usize = 16;

/// Serializes a sequence as FTR1. Values are stored as f32; anything that
/// overflows f32 is rejected rather than written as infinity.
pub fn encode_ftr1(seq: &FeatureSequence) -> Result<Vec<u8>> {
    let frames = u32::try_from(seq.frames()).map_err(|_| Error::Format("frame count exceeds u32".into()))?;
    let dim = u32::try_from(seq.dim()).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * seq.frames() * seq.dim());
    buf.extend_from_slice(&FTR1_MAGIC);
    buf.extend_from_slice(&frames.to_le_bytes());
    buf.extend_from_slice(&dim.to_le_bytes());
    buf.extend_from_slice(&seq.kind().code().to_le_bytes());
    for &v in seq.data().iter() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::Format(format!("value {v} is not representable as f32")));
        }
        buf.extend_from_slice(&f.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_ftr1(bytes: &[u8]) -> Result<FeatureSequence> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("FTR1 header truncated ({} bytes)", bytes.len())));
    }
    if bytes[..4] != FTR1_MAGIC {
        return Err(Error::Format("bad magic, expected \"FTR1\"".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let frames = word(4) as usize;
    let dim = word(8) as usize;
    let code = word(12);
    let kind = FeatureKind::from_code(code).ok_or_else(|| Error::Format(format!("unknown kind code {code}")))?;
    let expected = frames
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let data = Array2::from_shape_vec((frames, dim), values).map_err(|e| Error::Format(e.to_string()))?;
    FeatureSequence::new(kind, data)
}

pub fn write_ftr1(path: impl AsRef<Path>, seq: &FeatureSequence) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ftr1(seq).in_file(path)?;
    let mut f = fs::File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    f.write_all(&bytes).map_err(|e| Error::from(e).in_file(path))
}

pub fn read_ftr1(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::from(e).in_file(path))?;
    decode_ftr1(&bytes).in_file(path)
}

/// Writes one frame per line, comma-separated, no header.
pub fn write_csv<W: Write>(writer: W, seq: &FeatureSequence) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in seq.data().rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R, kind: FeatureKind) -> Result<FeatureSequence> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        let dim = kind.width().ok_or(Error::Empty("CSV without rows has no width"))?;
        return FeatureSequence::empty(kind, dim);
    }
    FeatureSequence::from_rows(kind, &rows)
}

const NORM_HEADER: &str = "# cyclevc norm-stats v1";
const LOGF0_HEADER: &str = "# cyclevc logf0-stats v1";

fn join(values: &Array1<f64>) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Text stats document:
///
/// ```text
/// # cyclevc norm-stats v1
/// dim 75
/// mean m0 m1 ...
/// std s0 s1 ...
/// ```
pub fn format_norm_stats(stats: &NormStats) -> String {
    format!(
        "{NORM_HEADER}\ndim {}\nmean {}\nstd {}\n",
        stats.dim(),
        join(&stats.mean),
        join(&stats.std)
    )
}

fn labeled_lines<'a>(text: &'a str, header: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some(h) if h == header => {}
        other => {
            return Err(Error::Format(format!("expected header {header:?}, found {other:?}")));
        }
    }
    Ok(lines
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_once(char::is_whitespace).unwrap_or((l, "")))
        .collect())
}

fn field<'a>(fields: &[(&'a str, &'a str)], label: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == label)
        .map(|(_, v)| v.trim())
        .ok_or_else(|| Error::Format(format!("missing field {label:?}")))
}

fn parse_num<T: std::str::FromStr>(s: &str, label: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| Error::Format(format!("{label}: {s:?}: {e}")))
}

fn parse_vector(s: &str, label: &str) -> Result<Array1<f64>> {
    s.split_whitespace()
        .map(|v| parse_num::<f64>(v, label))
        .collect::<Result<Vec<_>>>()
        .map(Array1::from)
}

pub fn parse_norm_stats(text: &str) -> Result<NormStats> {
    let fields = labeled_lines(text, NORM_HEADER)?;
    let dim: usize = parse_num(field(&fields, "dim")?, "dim")?;
    let mean = parse_vector(field(&fields, "mean")?, "mean")?;
    let std = parse_vector(field(&fields, "std")?, "std")?;
    if mean.len() != dim {
        return Err(Error::Format(format!("mean has {} values, dim is {dim}", mean.len())));
    }
    NormStats::new(mean, std)
}

pub fn format_logf0_stats(stats: &LogF0Stats) -> String {
    format!(
        "{LOGF0_HEADER}\nmean {}\nstd {}\nvoiced_count {}\n",
        stats.mean, stats.std, stats.voiced_count
    )
}

pub fn parse_logf0_stats(text: &str) -> Result<LogF0Stats> {
    let fields = labeled_lines(text, LOGF0_HEADER)?;
    LogF0Stats::new(
        parse_num(field(&fields, "mean")?, "mean")?,
        parse_num(field(&fields, "std")?, "std")?,
        parse_num(field(&fields, "voiced_count")?, "voiced_count")?,
    )
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::from(e).in_file(path))
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))
}

pub fn read_norm_stats(path: impl AsRef<Path>) -> Result<NormStats> {
    let path = path.as_ref();
    parse_norm_stats(&read_text(path)?).in_file(path)
}

pub fn read_logf0_stats(path: impl AsRef<Path>) -> Result<LogF0Stats> {
    let path = path.as_ref();
    parse_logf0_stats(&read_text(path)?).in_file(path)
}
