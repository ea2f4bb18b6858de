use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numeric::Mat64;

/// Two unit-variance Gaussian blobs centred at `±separation / 2` on the first
/// axis. Rows alternate between class 0 and class 1.
pub fn synth_blobs(n_per_class: usize, dims: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 || dims == 0 {
        return Err(Error::EmptyDataset {
            context: "synth_blobs needs at least one sample per class and one dimension",
        });
    }
    if !separation.is_finite() {
        return Err(Error::NonFinite { context: "synth_blobs separation" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_class;
    let mut data = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let centre = if class == 0 { -separation / 2.0 } else { separation / 2.0 };
        for d in 0..dims {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(if d == 0 { centre + z } else { z });
        }
        labels.push(class);
    }
    Dataset::new(Mat64::new(n, dims, data)?, labels)
}
