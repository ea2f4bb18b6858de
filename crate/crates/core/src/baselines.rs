//! Weight updaters that keep a dense matrix (close to) orthogonal: singular
//! value bounding and the Stiefel-manifold projection with QR retraction.

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::numeric::{qr, svd, Mat64};

/// Deviation from orthogonality tolerated on the input of [`stiefel_update`].
pub const STIEFEL_INPUT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvbConfig {
    /// Singular values are clamped into `[1/(1+ε), 1+ε]`.
    pub epsilon: f64,
}

impl Default for SvbConfig {
    fn default() -> Self {
        Self { epsilon: 0.0 }
    }
}

impl SvbConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidArgument(format!("SVB epsilon must be finite and >= 0, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn band(&self) -> (f64, f64) {
        (1.0 / (1.0 + self.epsilon), 1.0 + self.epsilon)
    }
}

fn check_same_shape(op: &'static str, w: &Mat64, g: &Mat64) -> Result<()> {
    if w.shape() != g.shape() {
        return Err(dim_mismatch(
            op,
            format!("{}x{}", w.rows(), w.cols()),
            format!("{}x{}", g.rows(), g.cols()),
        ));
    }
    Ok(())
}

/// Plain gradient step followed by clamping every singular value into the band.
///
/// Rectangular matrices are accepted; the thin SVD is used.
pub fn svb_update(w: &Mat64, g: &Mat64, lr: f64, cfg: SvbConfig) -> Result<Mat64> {
    check_same_shape("svb_update", w, g)?;
    let stepped = w.sub(&g.scale(lr))?;
    svb_project(&stepped, cfg)
}

/// Clamps the singular values of `w` into the SVB band.
pub fn svb_project(w: &Mat64, cfg: SvbConfig) -> Result<Mat64> {
    let (u, s, v) = svd(w)?;
    let (lo, hi) = cfg.band();
    let clamped: Vec<f64> = if cfg.epsilon == 0.0 {
        vec![1.0; s.len()]
    } else {
        s.iter().map(|v| v.clamp(lo, hi)).collect()
    };
    u.matmul(&Mat64::from_diag(&clamped))?.matmul(&v.transpose())
}

/// `Ω = (I - W Wᵀ) G + ½ W (Wᵀ G - Gᵀ W)`, the gradient projected onto the
/// tangent space at `W`.
pub fn projected_gradient(w: &Mat64, g: &Mat64) -> Result<Mat64> {
    check_same_shape("projected_gradient", w, g)?;
    let n = w.rows();
    let wt = w.transpose();
    let normal = Mat64::identity(n).sub(&w.matmul(&wt)?)?.matmul(g)?;
    let wtg = wt.matmul(g)?;
    let skew = wtg.sub(&wtg.transpose())?;
    normal.add(&w.matmul(&skew)?.scale(0.5))
}

/// Stiefel step: `W' = W - lr Ω`, retracted onto the orthogonal group by QR.
pub fn stiefel_update(w: &Mat64, g: &Mat64, lr: f64) -> Result<Mat64> {
    if !w.is_square() {
        return Err(Error::InvalidArgument(format!(
            "stiefel_update needs a square matrix, got {}x{}",
            w.rows(),
            w.cols()
        )));
    }
    let deviation = w.orthogonality_deviation();
    if deviation > STIEFEL_INPUT_TOL {
        return Err(Error::NotOrthogonal { deviation });
    }
    let omega = projected_gradient(w, g)?;
    let (q, _) = qr(&w.sub(&omega.scale(lr))?)?;
    Ok(q)
}
