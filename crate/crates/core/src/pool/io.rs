//! IDX and CSV dataset ingestion.
//!
//! IDX layout: a 4-byte big-endian magic whose third byte is the element type
//! (0x08 = unsigned byte) and whose fourth byte is the number of dimensions, then
//! one big-endian `u32` per dimension, then the raw elements.

use std::path::Path;

use super::Dataset;
use crate::diffcore::RealMatrix;
use crate::error::input_err;
use crate::{Error, Real, Result};

pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => format_err("truncated IDX header"),
    }
}

/// Parses an unsigned-byte IDX buffer with the given magic; returns the dimension sizes
/// and the payload.
fn parse_idx(bytes: &[u8], magic: u32) -> Result<(Vec<usize>, &[u8])> {
    let found = read_u32(bytes, 0)?;
    if found != magic {
        return format_err(format!("bad IDX magic {found:#010x}, expected {magic:#010x}"));
    }
    let ndim = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(ndim);
    for k in 0..ndim {
        dims.push(read_u32(bytes, 4 + 4 * k)? as usize);
    }
    let header = 4 + 4 * ndim;
    let expected = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let Some(expected) = expected else {
        return format_err("IDX dimensions overflow");
    };
    let payload = &bytes[header.min(bytes.len())..];
    if payload.len() < expected {
        return format_err(format!("truncated IDX payload: {} of {expected} bytes", payload.len()));
    }
    if payload.len() > expected {
        return format_err(format!("{} trailing bytes after IDX payload", payload.len() - expected));
    }
    Ok((dims, payload))
}

/// Decodes an IDX image buffer into flattened rows scaled to `[0, 1]`.
pub fn decode_idx_images<T: Real>(bytes: &[u8]) -> Result<RealMatrix<T>> {
    let (dims, payload) = parse_idx(bytes, IDX_IMAGES_MAGIC)?;
    let (n, pixels) = (dims[0], dims[1] * dims[2]);
    let max = T::lit(255.0);
    RealMatrix::from_vec(n, pixels, payload.iter().map(|&b| T::from_count(b as usize) / max).collect())
}

pub fn decode_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let (_, payload) = parse_idx(bytes, IDX_LABELS_MAGIC)?;
    Ok(payload.iter().map(|&b| b as usize).collect())
}

/// Encodes an unsigned-byte IDX buffer (used for fixtures and exports).
pub fn encode_idx(magic: u32, dims: &[u32], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + payload.len());
    out.extend_from_slice(&magic.to_be_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}

fn dataset_from_labels<T: Real>(name: String, features: RealMatrix<T>, labels: Vec<usize>) -> Result<Dataset<T>> {
    let classes = labels.iter().max().map_or(0, |&m| m + 1).max(2);
    Dataset::new(name, features, labels, classes)
}

/// Reads an image/label IDX pair into a dataset with pixels scaled by 1/255.
pub fn load_idx_pair<T: Real>(images: &Path, labels: &Path) -> Result<Dataset<T>> {
    let features = decode_idx_images(&std::fs::read(images)?)?;
    let labels = decode_idx_labels(&std::fs::read(labels)?)?;
    if features.rows() != labels.len() {
        return format_err(format!("{} images but {} labels", features.rows(), labels.len()));
    }
    let name = images.file_stem().map_or_else(|| "idx".into(), |s| s.to_string_lossy().into_owned());
    dataset_from_labels(name, features, labels)
}

/// Reads a CSV with a header row, a `label` column of class indices, and numeric
/// feature columns (all other columns, in file order).
pub fn load_csv<T: Real>(path: &Path) -> Result<Dataset<T>> {
    let file = std::fs::File::open(path)?;
    let name = path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    read_csv(file, name)
}

pub fn read_csv<T: Real, R: std::io::Read>(reader: R, name: String) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    let Some(label_col) = headers.iter().position(|h| h == "label") else {
        return format_err("CSV has no `label` column");
    };
    let dim = headers.len() - 1;
    if dim == 0 {
        return format_err("CSV has no feature columns");
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        for (c, field) in rec.iter().enumerate() {
            if c == label_col {
                let y = field
                    .parse::<usize>()
                    .map_err(|_| Error::Format(format!("row {}: label `{field}` is not a class index", line + 1)))?;
                labels.push(y);
            } else {
                let v = field
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: `{field}` is not numeric", line + 1)))?;
                if !v.is_finite() {
                    return format_err(format!("row {}: non-finite feature", line + 1));
                }
                features.push(T::lit(v));
            }
        }
    }
    if labels.is_empty() {
        return input_err("CSV has no data rows");
    }
    let features = RealMatrix::from_vec(labels.len(), dim, features)?;
    dataset_from_labels(name, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_fixture() -> Vec<u8> {
        // two 2x2 images
        encode_idx(IDX_IMAGES_MAGIC, &[2, 2, 2], &[0, 255, 51, 102, 255, 0, 0, 204])
    }

    #[test]
    fn idx_header_is_big_endian() {
        let bytes = image_fixture();
        assert_eq!(&bytes[..16], &[0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2]);
    }

    #[test]
    fn decodes_image_fixture() {
        let m = decode_idx_images::<f64>(&image_fixture()).unwrap();
        assert_eq!(m.shape(), (2, 4));
        assert_eq!(m.as_slice(), &[0.0, 1.0, 0.2, 0.4, 1.0, 0.0, 0.0, 0.8]);
    }

    #[test]
    fn decodes_label_fixture() {
        let bytes = [0u8, 0, 8, 1, 0, 0, 0, 2, 0, 1];
        assert_eq!(decode_idx_labels(&bytes).unwrap(), vec![0, 1]);
    }

    #[test]
    fn rejects_wrong_magic() {
        let mut bytes = image_fixture();
        bytes[3] = 0x01;
        assert!(matches!(decode_idx_images::<f64>(&bytes), Err(Error::Format(_))));
        let labels = encode_idx(IDX_IMAGES_MAGIC, &[1, 1, 1], &[0]);
        assert!(matches!(decode_idx_labels(&labels), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_truncation() {
        let bytes = image_fixture();
        assert!(matches!(decode_idx_images::<f64>(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode_idx_images::<f64>(&bytes[..6]), Err(Error::Format(_))));
    }

    #[test]
    fn pair_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.idx");
        let lab = dir.path().join("lab.idx");
        std::fs::write(&img, image_fixture()).unwrap();
        std::fs::write(&lab, encode_idx(IDX_LABELS_MAGIC, &[3], &[0, 1, 1])).unwrap();
        assert!(matches!(load_idx_pair::<f64>(&img, &lab), Err(Error::Format(_))));
        std::fs::write(&lab, encode_idx(IDX_LABELS_MAGIC, &[2], &[0, 1])).unwrap();
        let d = load_idx_pair::<f64>(&img, &lab).unwrap();
        assert_eq!(d.labels(), &[0, 1]);
        assert_eq!(d.dim(), 4);
    }

    #[test]
    fn csv_label_column_anywhere() {
        let text = "x1,label,x2\n0.5,1,2\n-1,0,3.5\n";
        let d = read_csv::<f64, _>(text.as_bytes(), "t".into()).unwrap();
        assert_eq!(d.labels(), &[1, 0]);
        assert_eq!(d.features().as_slice(), &[0.5, 2.0, -1.0, 3.5]);
        assert_eq!(d.num_classes(), 2);
    }

    #[test]
    fn csv_errors() {
        assert!(read_csv::<f64, _>("a,b\n1,2\n".as_bytes(), "t".into()).is_err());
        assert!(read_csv::<f64, _>("a,label\nx,1\n".as_bytes(), "t".into()).is_err());
        assert!(read_csv::<f64, _>("a,label\n1,-1\n".as_bytes(), "t".into()).is_err());
    }
}
