use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureMatrix, LabelVector, Split};
use crate::bounds::ClassCount;
use crate::error::{Error, Result};

pub const BIN_MAGIC: &[u8; 4] = b"FBEE";
pub const BIN_VERSION: u32 = 1;
const BIN_HEADER_LEN: usize = 4 + 4 + 8 + 8 + 4;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// On-disk dataset encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// Little-endian binary: `FBEE`, version, n, d, classes, f32 features, u32 labels.
    Bin,
    /// `d` feature columns followed by an integer label column.
    Csv { header: bool },
    /// IDX image file (`0x803`) with its companion label file (`0x801`).
    Idx,
}

pub fn load_dataset(path: &Path, format: DataFormat, num_classes: ClassCount, split: Split) -> Result<Dataset> {
    match format {
        DataFormat::Bin => load_bin(path, num_classes, split),
        DataFormat::Csv { header } => load_csv(path, header, num_classes, split),
        DataFormat::Idx => {
            let labels = idx_labels_path(path)?;
            load_idx_pair(path, &labels, num_classes, split)
        }
    }
}

/// Writes the binary format.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let f = ds.features();
    let mut buf = Vec::with_capacity(BIN_HEADER_LEN + 4 * (f.values().len() + ds.n()));
    buf.extend_from_slice(BIN_MAGIC);
    buf.extend_from_slice(&BIN_VERSION.to_le_bytes());
    buf.extend_from_slice(&(f.n() as u64).to_le_bytes());
    buf.extend_from_slice(&(f.d() as u64).to_le_bytes());
    buf.extend_from_slice(&(ds.num_classes().get() as u32).to_le_bytes());
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for y in ds.labels().as_slice() {
        buf.extend_from_slice(&y.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn le_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn le_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn load_bin(path: &Path, num_classes: ClassCount, split: Split) -> Result<Dataset> {
    let bytes = read_all(path)?;
    if bytes.len() < BIN_HEADER_LEN {
        return Err(Error::parse(path, format!("truncated header: {} bytes", bytes.len())));
    }
    if &bytes[0..4] != BIN_MAGIC {
        return Err(Error::parse(path, "bad magic at byte offset 0"));
    }
    let version = le_u32(&bytes, 4);
    if version != BIN_VERSION {
        return Err(Error::parse(path, format!("unsupported version {version} at byte offset 4")));
    }
    let n = le_u64(&bytes, 8) as usize;
    let d = le_u64(&bytes, 16) as usize;
    let stored_classes = le_u32(&bytes, 24) as usize;
    if n == 0 || d == 0 {
        return Err(Error::parse(path, format!("empty dataset (n = {n}, d = {d}) at byte offset 8")));
    }
    if stored_classes != num_classes.get() {
        return Err(Error::parse(
            path,
            format!("file declares {stored_classes} classes at byte offset 24, expected {}", num_classes.get()),
        ));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_add(n))
        .and_then(|words| words.checked_mul(4))
        .and_then(|b| b.checked_add(BIN_HEADER_LEN))
        .ok_or_else(|| Error::parse(path, "header sizes overflow"))?;
    if bytes.len() != expected {
        return Err(Error::parse(path, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let feat_end = BIN_HEADER_LEN + 4 * n * d;
    let mut values = Vec::with_capacity(n * d);
    for (i, chunk) in bytes[BIN_HEADER_LEN..feat_end].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::parse(path, format!("non-finite feature at byte offset {}", BIN_HEADER_LEN + 4 * i)));
        }
        values.push(v);
    }
    let mut labels = Vec::with_capacity(n);
    for (i, chunk) in bytes[feat_end..].chunks_exact(4).enumerate() {
        let y = u32::from_le_bytes(chunk.try_into().unwrap());
        if y as usize >= num_classes.get() {
            return Err(Error::parse(path, format!("label {y} out of range at byte offset {}", feat_end + 4 * i)));
        }
        labels.push(y);
    }
    let features = FeatureMatrix::new(n, d, values)?;
    Dataset::new(features, LabelVector::new(labels), num_classes, split)
}

fn load_csv(path: &Path, header: bool, num_classes: ClassCount, split: Split) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let mut d: Option<usize> = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() < 2 {
            return Err(Error::parse(path, format!("row {row}: need at least one feature and a label")));
        }
        let width = record.len() - 1;
        match d {
            None => d = Some(width),
            Some(d) if d != width => {
                return Err(Error::parse(path, format!("row {row}: {width} features, expected {d}")));
            }
            _ => {}
        }
        for (col, field) in record.iter().take(width).enumerate() {
            let v: f32 = field
                .parse()
                .map_err(|_| Error::parse(path, format!("row {row}, column {col}: cannot parse {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, format!("row {row}, column {col}: non-finite value")));
            }
            values.push(v);
        }
        let field = &record[width];
        let y: u32 = field
            .parse()
            .map_err(|_| Error::parse(path, format!("row {row}: label {field:?} is not a non-negative integer")))?;
        if y as usize >= num_classes.get() {
            return Err(Error::parse(
                path,
                format!("row {row}: label {y} out of range for {} classes", num_classes.get()),
            ));
        }
        labels.push(y);
    }
    let d = d.ok_or_else(|| Error::parse(path, "no data rows (n = 0)"))?;
    let features = FeatureMatrix::new(labels.len(), d, values)?;
    Dataset::new(features, LabelVector::new(labels), num_classes, split)
}

/// Companion label file of an IDX image file, following the usual
/// `*-images-idx3-ubyte` / `*-labels-idx1-ubyte` naming.
pub fn idx_labels_path(images: &Path) -> Result<PathBuf> {
    let name = images.file_name().and_then(|n| n.to_str()).ok_or_else(|| Error::parse(images, "not a file name"))?;
    for (from, to) in [("images-idx3", "labels-idx1"), ("images.idx3", "labels.idx1")] {
        if name.contains(from) {
            return Ok(images.with_file_name(name.replacen(from, to, 1)));
        }
    }
    Err(Error::parse(images, "cannot derive the IDX label file name; expected '*-images-idx3-*'"))
}

pub fn load_idx_pair(images: &Path, labels: &Path, num_classes: ClassCount, split: Split) -> Result<Dataset> {
    let img = read_all(images)?;
    if img.len() < 16 {
        return Err(Error::parse(images, "truncated IDX header"));
    }
    let magic = be_u32(&img, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::parse(images, format!("bad IDX image magic {magic:#010x} at byte offset 0")));
    }
    let n = be_u32(&img, 4) as usize;
    let rows = be_u32(&img, 8) as usize;
    let cols = be_u32(&img, 12) as usize;
    let d = rows * cols;
    if n == 0 || d == 0 {
        return Err(Error::parse(images, format!("empty IDX image set ({n} x {rows} x {cols}) at byte offset 4")));
    }
    if img.len() != 16 + n * d {
        return Err(Error::parse(images, format!("expected {} bytes, found {}", 16 + n * d, img.len())));
    }
    let values: Vec<f32> = img[16..].iter().map(|&b| b as f32).collect();

    let lab = read_all(labels)?;
    if lab.len() < 8 {
        return Err(Error::parse(labels, "truncated IDX header"));
    }
    let magic = be_u32(&lab, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::parse(labels, format!("bad IDX label magic {magic:#010x} at byte offset 0")));
    }
    let ln = be_u32(&lab, 4) as usize;
    if ln != n {
        return Err(Error::parse(labels, format!("{ln} labels at byte offset 4 for {n} images")));
    }
    if lab.len() != 8 + n {
        return Err(Error::parse(labels, format!("expected {} bytes, found {}", 8 + n, lab.len())));
    }
    let mut ys = Vec::with_capacity(n);
    for (i, &b) in lab[8..].iter().enumerate() {
        if b as usize >= num_classes.get() {
            return Err(Error::parse(labels, format!("label {b} out of range at byte offset {}", 8 + i)));
        }
        ys.push(b as u32);
    }
    Dataset::new(FeatureMatrix::new(n, d, values)?, LabelVector::new(ys), num_classes, split)
}
