use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{dim_mismatch, Error, Result};
use crate::numeric::{dot, eigh, Mat64};

/// Principal components fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x dims`, orthonormal rows, largest-variance direction first.
    pub components: Mat64,
    /// Variance captured by each component (covariance eigenvalues).
    pub variances: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn captured_variance(&self) -> f64 {
        self.variances.iter().sum()
    }

    /// Maps reduced coordinates back into the original space.
    pub fn inverse_transform(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.components.matvec_transposed(reduced)?;
        for (v, m) in x.iter_mut().zip(&self.mean) {
            *v += m;
        }
        Ok(x)
    }
}

/// Fits `k` principal components from the sample covariance (divisor `N - 1`).
///
/// Each component is sign-normalized so its largest-magnitude entry is positive.
pub fn pca_fit(ds: &Dataset, k: usize) -> Result<PcaModel> {
    let (n, dims) = ds.features.shape();
    if k == 0 || k > dims || k > n {
        return Err(Error::InvalidArgument(format!(
            "PCA k = {k} must lie in 1..={} (dims {dims}, samples {n})",
            dims.min(n)
        )));
    }
    let mut mean = vec![0.0; dims];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(ds.features.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = Mat64::zeros(dims, dims);
    let mut centered = vec![0.0; dims];
    for r in 0..n {
        for ((c, v), m) in centered.iter_mut().zip(ds.features.row(r)).zip(&mean) {
            *c = v - m;
        }
        for i in 0..dims {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let row = cov.row_mut(i);
            for j in i..dims {
                row[j] += ci * centered[j];
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..dims {
        for j in i..dims {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let (vals, vecs) = eigh(&cov)?;
    let mut components = Mat64::zeros(k, dims);
    for c in 0..k {
        let mut v = vecs.column(c);
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1.abs() { (i, *x) } else { best });
        if pivot.1 < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.row_mut(c).copy_from_slice(&v);
    }
    Ok(PcaModel {
        mean,
        components,
        variances: vals[..k].iter().map(|v| v.max(0.0)).collect(),
    })
}

/// Projects every row onto the fitted components.
pub fn pca_transform(model: &PcaModel, ds: &Dataset) -> Result<Dataset> {
    let dims = model.mean.len();
    if ds.dims() != dims {
        return Err(dim_mismatch("pca_transform", dims, ds.dims()));
    }
    let k = model.k();
    let mut out = Mat64::zeros(ds.len(), k);
    let mut centered = vec![0.0; dims];
    for r in 0..ds.len() {
        for ((c, v), m) in centered.iter_mut().zip(ds.features.row(r)).zip(&model.mean) {
            *c = v - m;
        }
        for c in 0..k {
            out[(r, c)] = dot(model.components.row(c), &centered);
        }
    }
    Dataset::new(out, ds.labels.clone())
}
