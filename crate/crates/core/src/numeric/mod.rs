//! Dense real linear algebra sized for matrices up to about 1024 x 1024.

mod decomp;
mod matrix;

pub use decomp::{
    eigh, qr, random_orthogonal, svd, EIGH_MAX_SWEEPS, QR_PIVOT_TOL, SVD_MAX_SWEEPS, SVD_TOL,
    SYMMETRY_TOL,
};
pub use matrix::{dot, max_abs_diff, norm2, Mat64};

/// Dense vector of reals.
pub type Vec64 = Vec<f64>;
