//! QR, SVD and symmetric eigendecomposition for small dense matrices.
//!
//! All three routines use fixed sweep and accumulation orders, so results are
//! reproducible bit-for-bit for a given input.

use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{dot, Mat64};
use crate::error::{dim_mismatch, Error, Result};

/// Pivot magnitude below which QR reports rank deficiency.
pub const QR_PIVOT_TOL: f64 = 1e-12;
/// Jacobi SVD stops once every column pair has `|cos angle| <= SVD_TOL`.
pub const SVD_TOL: f64 = 1e-12;
pub const SVD_MAX_SWEEPS: usize = 60;
pub const EIGH_MAX_SWEEPS: usize = 100;
/// Maximum `|A - A^T|` accepted by [`eigh`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// QR factorization by modified Gram-Schmidt with one reorthogonalization pass.
///
/// Requires `rows >= cols`. `Q` is `rows x cols` with orthonormal columns and
/// `R` is upper triangular with a strictly positive diagonal.
pub fn qr(a: &Mat64) -> Result<(Mat64, Mat64)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(dim_mismatch("qr", "rows >= cols", format!("{m}x{n}")));
    }
    let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut r = Mat64::zeros(n, n);
    for j in 0..n {
        let mut v = a.column(j);
        for _pass in 0..2 {
            for (i, qi) in q_cols.iter().enumerate() {
                let proj = dot(qi, &v);
                r[(i, j)] += proj;
                for (vk, qk) in v.iter_mut().zip(qi) {
                    *vk -= proj * qk;
                }
            }
        }
        let pivot = dot(&v, &v).sqrt();
        if pivot < QR_PIVOT_TOL {
            return Err(Error::RankDeficient { column: j, pivot });
        }
        r[(j, j)] = pivot;
        v.iter_mut().for_each(|x| *x /= pivot);
        q_cols.push(v);
    }
    Ok((Mat64::from_fn(m, n, |row, col| q_cols[col][row]), r))
}

/// Thin singular value decomposition `a = U diag(s) V^T` by one-sided Jacobi.
///
/// For an `m x n` input with `k = min(m, n)`, `U` is `m x k`, `V` is `n x k`
/// and `s` holds `k` non-negative values in descending order.
pub fn svd(a: &Mat64) -> Result<(Mat64, Vec<f64>, Mat64)> {
    if a.rows() < a.cols() {
        let (u, s, v) = svd_tall(&a.transpose())?;
        return Ok((v, s, u));
    }
    svd_tall(a)
}

fn svd_tall(a: &Mat64) -> Result<(Mat64, Vec<f64>, Mat64)> {
    let (m, n) = a.shape();
    // column-major working copies so rotations touch contiguous memory
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = false;
    for _sweep in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= SVD_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            method: "one-sided Jacobi SVD",
            sweeps: SVD_MAX_SWEEPS,
        });
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let s_max = norms.iter().cloned().fold(0.0, f64::max);
    let degenerate = f64::EPSILON * s_max.max(f64::MIN_POSITIVE) * m.max(n) as f64;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if norms[j] > degenerate {
            u_cols.push(cols[j].iter().map(|x| x / norms[j]).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            missing.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &missing);

    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = Mat64::from_fn(m, n, |r, c| u_cols[c][r]);
    let v = Mat64::from_fn(n, n, |r, c| v[order[c]][r]);
    Ok((u, s, v))
}

#[inline]
fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the listed zero columns with unit vectors orthogonal to all others.
fn complete_orthonormal(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let m = cols[0].len();
    let mut candidate = 0;
    for &slot in missing {
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _pass in 0..2 {
                for (k, other) in cols.iter().enumerate() {
                    if k == slot {
                        continue;
                    }
                    let proj = dot(other, &e);
                    for (ei, oi) in e.iter_mut().zip(other) {
                        *ei -= proj * oi;
                    }
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 0.5 {
                e.iter_mut().for_each(|x| *x /= norm);
                cols[slot] = e;
                break;
            }
        }
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi.
///
/// Returns eigenvalues in descending order; column `k` of the returned matrix
/// is the eigenvector for value `k`.
pub fn eigh(a: &Mat64) -> Result<(Vec<f64>, Mat64)> {
    if !a.is_square() {
        return Err(dim_mismatch("eigh", "square", format!("{:?}", a.shape())));
    }
    let deviation = a.asymmetry();
    if deviation > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { deviation });
    }
    let n = a.rows();
    // symmetrize exactly so the rotations below can update rows only and mirror
    let mut m = Mat64::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    // rows of vt are eigenvectors
    let mut vt = Mat64::identity(n);

    let frob: f64 = m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = f64::EPSILON * frob * n as f64;

    let mut converged = false;
    for _sweep in 0..EIGH_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                if apq.abs() <= f64::EPSILON * 0.5 * (app.abs() + aqq.abs()) * 1e-3 {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                jacobi_rotate(&mut m, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            method: "cyclic Jacobi eigh",
            sweeps: EIGH_MAX_SWEEPS,
        });
    }

    let vals = m.diag();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then(i.cmp(&j)));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let vecs = Mat64::from_fn(n, n, |r, c| vt[(order[c], r)]);
    Ok((sorted_vals, vecs))
}

/// Applies `J^T M J` for the plane rotation on indices (p, q).
fn jacobi_rotate(m: &mut Mat64, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    let app = m[(p, p)];
    let aqq = m[(q, q)];
    let apq = m[(p, q)];
    rotate_rows(m, p, q, c, s);
    for k in 0..n {
        m[(k, p)] = m[(p, k)];
        m[(k, q)] = m[(q, k)];
    }
    m[(p, p)] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
    m[(q, q)] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
}

fn rotate_rows(m: &mut Mat64, p: usize, q: usize, c: f64, s: f64) {
    let n = m.cols();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Random orthogonal matrix: Q factor of a Gaussian matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat64 {
    loop {
        let g = Mat64::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        if let Ok((q, _)) = qr(&g) {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Mat64 {
        Mat64::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn reconstruct(u: &Mat64, s: &[f64], v: &Mat64) -> Mat64 {
        u.matmul(&Mat64::from_diag(s))
            .unwrap()
            .matmul(&v.transpose())
            .unwrap()
    }

    #[test]
    fn qr_of_identity() {
        let (q, r) = qr(&Mat64::identity(4)).unwrap();
        assert_eq!(q, Mat64::identity(4));
        assert_eq!(r, Mat64::identity(4));
    }

    #[test]
    fn qr_of_diagonal() {
        let d = Mat64::from_diag(&[2.0, 3.0]);
        let (q, r) = qr(&d).unwrap();
        assert_eq!(q, Mat64::identity(2));
        assert_eq!(r, d);
    }

    #[test]
    fn qr_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(5, &mut rng);
        let (q, r) = qr(&a).unwrap();
        assert!(q.matmul(&r).unwrap().max_abs_diff(&a) <= 1e-9);
        assert!(q.orthogonality_deviation() <= 1e-10);
        for i in 0..5 {
            assert!(r[(i, i)] > 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn qr_rejects_rank_deficient() {
        let a = Mat64::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(qr(&a), Err(Error::RankDeficient { column: 1, .. })));
    }

    #[test]
    fn svd_trivial_cases() {
        let (_, s, _) = svd(&Mat64::identity(3)).unwrap();
        assert_eq!(s, vec![1.0, 1.0, 1.0]);
        let (u, s, v) = svd(&Mat64::from_diag(&[3.0, 2.0])).unwrap();
        assert_eq!(s, vec![3.0, 2.0]);
        assert!(reconstruct(&u, &s, &v).max_abs_diff(&Mat64::from_diag(&[3.0, 2.0])) < 1e-15);
    }

    #[test]
    fn svd_sorts_descending() {
        let (u, s, v) = svd(&Mat64::from_diag(&[1.0, 5.0, 3.0])).unwrap();
        assert_eq!(s, vec![5.0, 3.0, 1.0]);
        assert!(reconstruct(&u, &s, &v).max_abs_diff(&Mat64::from_diag(&[1.0, 5.0, 3.0])) < 1e-15);
    }

    #[test]
    fn svd_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random(6, &mut rng);
        let (u, s, v) = svd(&a).unwrap();
        assert!(reconstruct(&u, &s, &v).max_abs_diff(&a) <= 1e-8);
        assert!(u.orthogonality_deviation() <= 1e-8);
        assert!(v.orthogonality_deviation() <= 1e-8);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_rank_deficient_completes_basis() {
        let a = Mat64::from_rows(&[vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let (u, s, v) = svd(&a).unwrap();
        assert!(u.orthogonality_deviation() < 1e-12);
        assert!(v.orthogonality_deviation() < 1e-12);
        assert!(reconstruct(&u, &s, &v).max_abs_diff(&a) < 1e-12);
        assert!(s[1].abs() < 1e-12 && s[2].abs() < 1e-12);
    }

    #[test]
    fn svd_rectangular_wide_and_tall() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let wide = Mat64::from_fn(3, 7, |_, _| rng.gen_range(-1.0..1.0));
        let (u, s, v) = svd(&wide).unwrap();
        assert_eq!((u.shape(), s.len(), v.shape()), ((3, 3), 3, (7, 3)));
        assert!(reconstruct(&u, &s, &v).max_abs_diff(&wide) < 1e-12);
        let (u, s, v) = svd(&wide.transpose()).unwrap();
        assert!(reconstruct(&u, &s, &v).max_abs_diff(&wide.transpose()) < 1e-12);
    }

    #[test]
    fn eigh_diagonal() {
        let (vals, _) = eigh(&Mat64::from_diag(&[5.0, 1.0])).unwrap();
        assert_eq!(vals, vec![5.0, 1.0]);
    }

    #[test]
    fn eigh_swap_matrix() {
        let a = Mat64::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (vals, vecs) = eigh(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-15 && (vals[1] + 1.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = vecs.column(0);
        let v1 = vecs.column(1);
        assert!((v0[0].abs() - h).abs() < 1e-15 && (v0[0] - v0[1]).abs() < 1e-15);
        assert!((v1[0].abs() - h).abs() < 1e-15 && (v1[0] + v1[1]).abs() < 1e-15);
    }

    #[test]
    fn eigh_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = random(5, &mut rng);
        let a = b.add(&b.transpose()).unwrap();
        let (vals, vecs) = eigh(&a).unwrap();
        assert!(vecs.orthogonality_deviation() <= 1e-8);
        for k in 0..5 {
            let v = vecs.column(k);
            let av = a.matvec(&v).unwrap();
            for (x, y) in av.iter().zip(&v) {
                assert!((x - vals[k] * y).abs() <= 1e-8);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eigh_rejects_asymmetric() {
        let a = Mat64::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(eigh(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(random_orthogonal(7, &mut rng).orthogonality_deviation() < 1e-13);
    }
}
