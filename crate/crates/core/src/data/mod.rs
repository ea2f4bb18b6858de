//! Datasets: IDX parsing, class filtering, PCA, normalization and a synthetic fallback.

mod idx;
mod pca;
mod synth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use idx::{parse_idx, parse_idx_bytes, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use pca::{pca_fit, pca_transform, PcaModel};
pub use synth::synth_blobs;

use crate::error::{dim_mismatch, Error, Result};
use crate::numeric::{norm2, Mat64};

/// Environment variable naming the directory that holds the MNIST IDX files.
pub const DATA_DIR_ENV: &str = "PYRAMIDNET_DATA_DIR";

/// Samples as rows of `features`, with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Mat64,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Mat64, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(dim_mismatch("Dataset::new", features.rows(), labels.len()));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        (self.features.row(i), self.labels[i])
    }

    /// Number of distinct classes, taken as `max label + 1`.
    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Rows at the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset { context: "subset" });
        }
        let dims = self.dims();
        let mut data = Vec::with_capacity(indices.len() * dims);
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
        }
        Self::new(
            Mat64::new(indices.len(), dims, data)?,
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// The first `n` rows (or all of them, if fewer).
    pub fn take(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Label histogram.
    pub fn class_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for &l in &self.labels {
            *hist.entry(l).or_insert(0) += 1;
        }
        hist
    }
}

/// Keeps rows whose label is in `classes`, remapping labels to `0..k` in
/// ascending order of the original label.
pub fn filter_classes(ds: &Dataset, classes: &[usize]) -> Result<Dataset> {
    let mut wanted: Vec<usize> = classes.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let keep: Vec<usize> = (0..ds.len())
        .filter(|&i| wanted.binary_search(&ds.labels[i]).is_ok())
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyDataset {
            context: "no rows match the requested classes",
        });
    }
    let mut out = ds.subset(&keep)?;
    for l in out.labels.iter_mut() {
        *l = wanted.binary_search(l).expect("filtered label");
    }
    Ok(out)
}

/// Scales every row to unit Euclidean norm.
pub fn normalize_rows(ds: &Dataset) -> Result<Dataset> {
    let mut features = ds.features.clone();
    for r in 0..features.rows() {
        let norm = norm2(features.row(r));
        if norm == 0.0 {
            return Err(Error::ZeroNormRow { row: r });
        }
        features.row_mut(r).iter_mut().for_each(|v| *v /= norm);
    }
    Dataset::new(features, ds.labels.clone())
}

/// Options for assembling the MNIST train/test pair.
#[derive(Debug, Clone)]
pub struct MnistOptions {
    pub dir: PathBuf,
    pub classes: Vec<usize>,
    pub train_size: usize,
    pub test_size: usize,
    pub pca_k: usize,
}

/// Prepared, PCA-reduced and row-normalized train/test split.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub pca: Option<PcaModel>,
}

const MNIST_FILES: [(&str, &str); 4] = [
    ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
    ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
    ("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
    ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
];

fn locate(dir: &Path, names: (&str, &str)) -> Option<PathBuf> {
    [names.0, names.1]
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

/// Paths of the four uncompressed MNIST IDX files, if all are present in `dir`.
pub fn find_mnist(dir: &Path) -> Option<[PathBuf; 4]> {
    let found: Vec<PathBuf> = MNIST_FILES.iter().filter_map(|&n| locate(dir, n)).collect();
    found.try_into().ok()
}

/// MNIST directory from [`DATA_DIR_ENV`], when it holds all four files.
pub fn mnist_dir_from_env() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os(DATA_DIR_ENV)?);
    find_mnist(&dir).map(|_| dir)
}

/// Filters classes, keeps the first `train_size` / `test_size` rows in file
/// order, fits PCA on the training rows only and normalizes every row.
pub fn prepare_split(train: &Dataset, test: &Dataset, classes: &[usize], train_size: usize, test_size: usize, pca_k: usize) -> Result<PreparedData> {
    let train = filter_classes(train, classes)?.take(train_size)?;
    let test = filter_classes(test, classes)?.take(test_size)?;
    let model = pca_fit(&train, pca_k)?;
    Ok(PreparedData {
        train: normalize_rows(&pca_transform(&model, &train)?)?,
        test: normalize_rows(&pca_transform(&model, &test)?)?,
        pca: Some(model),
    })
}

pub fn load_mnist(opts: &MnistOptions) -> Result<PreparedData> {
    let paths = find_mnist(&opts.dir).ok_or_else(|| {
        Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!(
                "MNIST IDX files not found in {} (expected {})",
                opts.dir.display(),
                MNIST_FILES.iter().map(|f| f.0).collect::<Vec<_>>().join(", ")
            ),
        ))
    })?;
    let train = parse_idx(&paths[0], &paths[1])?;
    let test = parse_idx(&paths[2], &paths[3])?;
    prepare_split(&train, &test, &opts.classes, opts.train_size, opts.test_size, opts.pca_k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[Vec<f64>], labels: &[usize]) -> Dataset {
        Dataset::new(Mat64::from_rows(rows).unwrap(), labels.to_vec()).unwrap()
    }

    #[test]
    fn filter_keeps_requested_classes() {
        let d = ds(
            &[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]],
            &[6, 1, 9, 6, 3],
        );
        let f = filter_classes(&d, &[9, 6]).unwrap();
        assert_eq!(f.features.as_slice(), &[1.0, 3.0, 4.0]);
        assert_eq!(f.labels, vec![0, 1, 0]);
    }

    #[test]
    fn filter_remap_counts_match_histogram() {
        let labels: Vec<usize> = (0..200).map(|i| (i * 7 + i / 3) % 10).collect();
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64]).collect();
        let d = ds(&rows, &labels);
        let raw = d.class_histogram();
        let f = filter_classes(&d, &[2, 5, 8]).unwrap();
        let got = f.class_histogram();
        assert_eq!(got[&0], raw[&2]);
        assert_eq!(got[&1], raw[&5]);
        assert_eq!(got[&2], raw[&8]);
    }

    #[test]
    fn filter_empty_is_error() {
        let d = ds(&[vec![1.0]], &[0]);
        assert!(matches!(filter_classes(&d, &[4]), Err(Error::EmptyDataset { .. })));
    }

    #[test]
    fn normalize_examples() {
        let d = ds(&[vec![3.0, 4.0], vec![0.6, 0.8]], &[0, 1]);
        let n = normalize_rows(&d).unwrap();
        assert!((n.features[(0, 0)] - 0.6).abs() < 1e-15 && (n.features[(0, 1)] - 0.8).abs() < 1e-15);
        assert_eq!(n.features.row(1), d.features.row(1));
    }

    #[test]
    fn normalize_zero_row_is_error() {
        let d = ds(&[vec![1.0, 1.0], vec![0.0, 0.0]], &[0, 1]);
        assert!(matches!(normalize_rows(&d), Err(Error::ZeroNormRow { row: 1 })));
    }

    #[test]
    fn normalized_rows_are_unit() {
        let d = synth_blobs(50, 5, 3.0, 1).unwrap();
        let n = normalize_rows(&d).unwrap();
        for r in 0..n.len() {
            assert!((norm2(n.features.row(r)) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn find_mnist_requires_all_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(find_mnist(dir.path()).is_none());
        for (name, _) in MNIST_FILES {
            std::fs::write(dir.path().join(name), b"").unwrap();
        }
        assert!(find_mnist(dir.path()).is_some());
    }
}
