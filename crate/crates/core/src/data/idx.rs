use std::path::{Path, PathBuf};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Mat64;

/// Magic number of an IDX file of unsigned-byte images (3 dimensions).
pub const IDX_IMAGES_MAGIC: u32 = 2051;
/// Magic number of an IDX file of unsigned-byte labels (1 dimension).
pub const IDX_LABELS_MAGIC: u32 = 2049;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < self.pos + n {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                needed: self.pos + n,
                available: self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn expect_magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32_be()?;
        if found != expected {
            return Err(Error::BadMagic {
                path: self.path.to_path_buf(),
                expected,
                found,
            });
        }
        Ok(())
    }
}

/// Parses in-memory IDX image and label payloads. Pixels are scaled to `[0, 1]`.
pub fn parse_idx_bytes(images: &[u8], labels: &[u8], images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let mut img = Reader {
        bytes: images,
        pos: 0,
        path: images_path,
    };
    img.expect_magic(IDX_IMAGES_MAGIC)?;
    let count = img.u32_be()? as usize;
    let rows = img.u32_be()? as usize;
    let cols = img.u32_be()? as usize;
    let dims = rows * cols;

    let mut lab = Reader {
        bytes: labels,
        pos: 0,
        path: labels_path,
    };
    lab.expect_magic(IDX_LABELS_MAGIC)?;
    let label_count = lab.u32_be()? as usize;
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    if count == 0 || dims == 0 {
        return Err(Error::EmptyDataset { context: "IDX file holds no samples" });
    }

    let pixels = img.take(count * dims)?;
    let labels = lab.take(count)?.iter().map(|&b| b as usize).collect();
    let features = Mat64::new(count, dims, pixels.iter().map(|&p| p as f64 / 255.0).collect())?;
    Dataset::new(features, labels)
}

/// Reads an IDX image file and its label file.
pub fn parse_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path: PathBuf = images_path.as_ref().into();
    let labels_path: PathBuf = labels_path.as_ref().into();
    let images = std::fs::read(&images_path)?;
    let labels = std::fs::read(&labels_path)?;
    parse_idx_bytes(&images, &labels, &images_path, &labels_path)
}
