//! IDX tensors (the MNIST distribution format): a big-endian `u32` magic,
//! one big-endian `u32` per dimension, then the raw unsigned bytes.

use std::collections::BTreeSet;
use std::path::Path;

use super::dataset::Dataset;
use super::schema::{ColumnSpec, FeatureSchema};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, image-major.
    pub pixels: Vec<u8>,
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx(format!("truncated header: missing {what}")))
}

fn check_magic(found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::Idx(format!(
            "bad magic number 0x{found:08X}, expected 0x{expected:08X}"
        )));
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, declared: usize) -> Result<()> {
    let actual = bytes.len() - header;
    if actual < declared {
        return Err(Error::Idx(format!(
            "truncated payload: header declares {declared} bytes, file has {actual}"
        )));
    }
    if actual > declared {
        return Err(Error::Idx(format!(
            "trailing data: header declares {declared} bytes, file has {actual}"
        )));
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(read_u32(bytes, 0, "magic")?, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4, "image count")? as usize;
    let rows = read_u32(bytes, 8, "row count")? as usize;
    let cols = read_u32(bytes, 12, "column count")? as usize;
    let declared = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .ok_or_else(|| Error::Idx("declared size overflows".into()))?;
    check_payload(bytes, 16, declared)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(read_u32(bytes, 0, "magic")?, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4, "label count")? as usize;
    check_payload(bytes, 8, count)?;
    Ok(bytes[8..].to_vec())
}

/// Loads an image file and its label file. Pixels become continuous features
/// `px0..px{rows*cols-1}` scaled to `[0, 1]`; labels become the categorical
/// column `label` whose categories are the distinct label values in numeric
/// order.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(p, e));
    let images = parse_idx_images(&read(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read(labels_path.as_ref())?)?;
    idx_dataset(&images, &labels)
}

pub(crate) fn idx_dataset(images: &IdxImages, labels: &[u8]) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::Idx(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    let width = images.rows * images.cols;
    let mut columns: Vec<ColumnSpec> = (0..width)
        .map(|i| ColumnSpec::continuous(format!("px{i}")))
        .collect();
    let distinct: BTreeSet<u8> = labels.iter().copied().collect();
    columns.push(ColumnSpec::categorical(
        "label",
        distinct.iter().map(|l| l.to_string()),
    ));
    let schema = FeatureSchema::new(columns, Some("label".into()))?;

    let rows = if width == 0 {
        vec![Vec::new(); images.count]
    } else {
        images
            .pixels
            .chunks_exact(width)
            .map(|img| img.iter().map(|&p| f64::from(p) / 255.0).collect())
            .collect()
    };
    let labels = labels.iter().map(|l| l.to_string()).collect();
    Dataset::new(schema, rows, Some(labels), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images_bytes(magic: u32, count: u32, rows: u32, cols: u32, payload: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [magic, count, rows, cols] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(payload);
        out
    }

    fn labels_bytes(labels: &[u8]) -> Vec<u8> {
        let mut out = LABELS_MAGIC.to_be_bytes().to_vec();
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    #[test]
    fn ten_tiny_images() {
        let payload: Vec<u8> = (0..40).map(|i| (i * 6) as u8).collect();
        let images = parse_idx_images(&images_bytes(IMAGES_MAGIC, 10, 2, 2, &payload)).unwrap();
        let labels = parse_idx_labels(&labels_bytes(&(0..10).collect::<Vec<u8>>())).unwrap();
        let ds = idx_dataset(&images, &labels).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(ds.n_features(), 4);
        assert_eq!(ds.row(1)[0], 24.0 / 255.0);
        assert!(ds
            .rows()
            .iter()
            .flatten()
            .all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(ds.labels().unwrap()[9], "9");
    }

    #[test]
    fn wrong_magic_is_named() {
        let err = parse_idx_images(&images_bytes(0x0000_0802, 1, 1, 1, &[0])).unwrap_err();
        assert!(err.to_string().contains("0x00000802"), "{err}");
        let err = parse_idx_labels(&images_bytes(IMAGES_MAGIC, 1, 1, 1, &[0])).unwrap_err();
        assert!(err.to_string().contains("0x00000803"), "{err}");
    }

    #[test]
    fn length_must_match_declaration() {
        assert!(parse_idx_images(&images_bytes(IMAGES_MAGIC, 2, 2, 2, &[0; 7])).is_err());
        assert!(parse_idx_images(&images_bytes(IMAGES_MAGIC, 2, 2, 2, &[0; 9])).is_err());
        assert!(parse_idx_images(&images_bytes(IMAGES_MAGIC, 2, 2, 2, &[0; 8])).is_ok());
        assert!(parse_idx_labels(&[0, 0, 8, 1, 0, 0]).is_err());
        let mut short = labels_bytes(&[1, 2, 3]);
        short.pop();
        assert!(parse_idx_labels(&short).is_err());
    }

    #[test]
    fn count_mismatch() {
        let images = parse_idx_images(&images_bytes(IMAGES_MAGIC, 2, 1, 1, &[0, 1])).unwrap();
        assert!(idx_dataset(&images, &[0, 1, 2]).is_err());
    }
}
