//! Dataset and partition files.
//!
//! Binary dataset layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  content
//! 0       8     magic  b"JLKITDS\0"
//! 8       4     format version (u32) = 1
//! 12      4     reserved, zero
//! 16      8     m (u64)
//! 24      8     d (u64)
//! 32      8·m·d IEEE-754 f64 values, row-major
//! ```
//!
//! CSV datasets carry one point per row; a header row is optional and is
//! recognised by failing to parse as numbers. Point ids are row numbers.
//! Partition CSVs have the columns `id,cluster`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{JlError, Result};
use crate::kmeans::Partition;
use crate::projection::Dataset;

pub const MAGIC: &[u8; 8] = b"JLKITDS\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Binary,
}

impl DatasetFormat {
    /// `.bin` / `.jlds` are binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("jlds") => DatasetFormat::Binary,
            _ => DatasetFormat::Csv,
        }
    }
}

pub fn write_dataset_binary<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[..8].copy_from_slice(MAGIC);
    header[8..12].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.write_all(&header)?;
    out.write_all(&(data.len() as u64).to_le_bytes())?;
    out.write_all(&(data.dim() as u64).to_le_bytes())?;
    for row in data.points().rows() {
        for v in row {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset_binary<R: Read>(mut input: R) -> Result<Dataset> {
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header)?;
    if &header[..8] != MAGIC {
        return Err(JlError::Format("not a jlkit binary dataset".into()));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(JlError::Format(format!(
            "unsupported dataset format version {version}"
        )));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let m = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let d = u64::from_le_bytes(word) as usize;
    let count = m
        .checked_mul(d)
        .ok_or_else(|| JlError::Format("m·d overflows".into()))?;
    let mut bytes = vec![0u8; count * 8];
    input.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let points = Array2::from_shape_vec((m, d), values)
        .map_err(|e| JlError::Format(format!("bad dataset shape: {e}")))?;
    Dataset::from_points(points)
}

pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..data.dim()).map(|j| format!("x{j}")))?;
    for row in data.points().rows() {
        // `{}` on f64 prints the shortest string that round-trips.
        w.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let parsed = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(JlError::Format(format!("line {}: {e}", line + 1)));
            }
        };
        match width {
            None => width = Some(parsed.len()),
            Some(w) if w != parsed.len() => {
                return Err(JlError::Format(format!(
                    "line {}: expected {w} values, found {}",
                    line + 1,
                    parsed.len()
                )))
            }
            _ => {}
        }
        values.extend(parsed);
        rows += 1;
    }
    let width = width.ok_or_else(|| JlError::Format("no data rows".into()))?;
    let points = Array2::from_shape_vec((rows, width), values)
        .map_err(|e| JlError::Format(format!("bad dataset shape: {e}")))?;
    Dataset::from_points(points)
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    match DatasetFormat::from_path(path) {
        DatasetFormat::Binary => write_dataset_binary(data, out),
        DatasetFormat::Csv => write_dataset_csv(data, out),
    }
}

/// Reads either format; binary files are recognised by their magic bytes.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut file = BufReader::new(File::open(path)?);
    let mut probe = [0u8; 8];
    let n = read_up_to(&mut file, &mut probe)?;
    let file = BufReader::new(File::open(path)?);
    if n == 8 && &probe == MAGIC {
        read_dataset_binary(file)
    } else {
        read_dataset_csv(file)
    }
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            k => filled += k,
        }
    }
    Ok(filled)
}

pub fn write_partition_csv<W: Write>(ids: &[u64], partition: &Partition, out: W) -> Result<()> {
    if ids.len() != partition.len() {
        return Err(JlError::Shape(format!(
            "{} ids for a partition of {} points",
            ids.len(),
            partition.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "cluster"])?;
    for (id, c) in ids.iter().zip(partition.assignments()) {
        w.write_record([id.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Returns `(ids, partition)`; the number of clusters is one past the largest label.
pub fn read_partition_csv<R: Read>(input: R) -> Result<(Vec<u64>, Partition)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let bad = || JlError::Format(format!("partition line {}", line + 2));
        if record.len() != 2 {
            return Err(bad());
        }
        ids.push(record[0].parse::<u64>().map_err(|_| bad())?);
        labels.push(record[1].parse::<usize>().map_err(|_| bad())?);
    }
    let k = labels
        .iter()
        .max()
        .map(|&c| c + 1)
        .ok_or_else(|| JlError::Format("empty partition file".into()))?;
    Ok((ids, Partition::new(labels, k)?))
}

pub fn write_partition(path: &Path, ids: &[u64], partition: &Partition) -> Result<()> {
    write_partition_csv(ids, partition, BufWriter::new(File::create(path)?))
}

pub fn read_partition(path: &Path) -> Result<(Vec<u64>, Partition)> {
    read_partition_csv(BufReader::new(File::open(path)?))
}
