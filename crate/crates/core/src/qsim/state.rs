use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{dim_mismatch, Error, Result};
use crate::numeric::{norm2, Mat64};
use crate::pyramid::PyramidLayer;

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 16;
/// Largest layer accepted by [`unary_submatrix`].
pub const MAX_SUBMATRIX_WIRES: usize = 12;
/// Tolerance on `‖x‖ = 1` for loader inputs.
pub const LOADER_NORM_TOL: f64 = 1e-9;
/// Running product below which the loader treats the remaining mass as zero.
pub const LOADER_TAIL_EPS: f64 = 1e-12;

/// Real amplitudes over `2^n` basis states. Bit `w` of a basis index is the
/// value of wire `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<f64>,
}

fn check_cap(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::QubitCap {
            requested: n_qubits,
            cap: MAX_QUBITS,
        });
    }
    Ok(())
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn ground(n_qubits: usize) -> Result<Self> {
        check_cap(n_qubits)?;
        let mut amps = vec![0.0; 1 << n_qubits];
        amps[0] = 1.0;
        Ok(Self { n_qubits, amps })
    }

    /// A single basis state.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::ground(n_qubits)?;
        if index >= s.amps.len() {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        s.amps[0] = 0.0;
        s.amps[index] = 1.0;
        Ok(s)
    }

    /// The unary state `Σ x_j |e_j⟩` on `n_qubits >= x.len()` wires.
    pub fn unary(n_qubits: usize, x: &[f64]) -> Result<Self> {
        if x.len() > n_qubits {
            return Err(dim_mismatch("StateVector::unary", n_qubits, x.len()));
        }
        let mut s = Self::ground(n_qubits)?;
        s.amps[0] = 0.0;
        for (j, v) in x.iter().enumerate() {
            s.amps[1 << j] = *v;
        }
        Ok(s)
    }

    pub fn from_amplitudes(amps: Vec<f64>) -> Result<Self> {
        let n_qubits = amps.len().trailing_zeros() as usize;
        if !amps.len().is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "{} amplitudes is not a power of two",
                amps.len()
            )));
        }
        check_cap(n_qubits)?;
        let norm = norm2(&amps);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.amps)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a * a).collect()
    }

    pub fn is_ground(&self, tol: f64) -> bool {
        (self.amps[0] - 1.0).abs() <= tol && self.amps[1..].iter().all(|a| a.abs() <= tol)
    }

    /// Amplitudes of `|e_0⟩ … |e_{k-1}⟩`.
    pub fn unary_amplitudes(&self, k: usize) -> Vec<f64> {
        (0..k.min(self.n_qubits)).map(|j| self.amps[1 << j]).collect()
    }

    /// Norm of the part of the state outside the unary subspace.
    pub fn leakage(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i.count_ones() != 1)
            .map(|(_, a)| a * a)
            .sum::<f64>()
            .sqrt()
    }

    fn check_wire(&self, wire: usize) -> Result<()> {
        if wire >= self.n_qubits {
            return Err(Error::WireOutOfRange {
                wire,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    pub fn apply_x(&mut self, wire: usize) -> Result<()> {
        self.check_wire(wire)?;
        let bit = 1 << wire;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                self.amps.swap(i, i | bit);
            }
        }
        Ok(())
    }

    pub fn apply_h(&mut self, wire: usize) -> Result<()> {
        self.check_wire(wire)?;
        let bit = 1 << wire;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = FRAC_1_SQRT_2 * (a + b);
                self.amps[i | bit] = FRAC_1_SQRT_2 * (a - b);
            }
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_wire(control)?;
        self.check_wire(target)?;
        if control == target {
            return Err(Error::InvalidArgument("CNOT control and target coincide".into()));
        }
        let (c, t) = (1 << control, 1 << target);
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
        Ok(())
    }

    /// RBS gate on wires `(i, j)`, reading the pair as `|b_i b_j⟩`:
    /// `|01⟩ ↦ cos θ|01⟩ − sin θ|10⟩`, `|10⟩ ↦ sin θ|01⟩ + cos θ|10⟩`,
    /// identity on `|00⟩` and `|11⟩`.
    pub fn apply_rbs(&mut self, i: usize, j: usize, theta: f64) -> Result<()> {
        self.check_wire(i)?;
        self.check_wire(j)?;
        if i == j {
            return Err(Error::InvalidArgument("RBS wires coincide".into()));
        }
        let (s, c) = theta.sin_cos();
        let (bi, bj) = (1 << i, 1 << j);
        for k in 0..self.amps.len() {
            // k has bit j set and bit i clear: the |01⟩ member of a pair
            if k & bj != 0 && k & bi == 0 {
                let k10 = (k & !bj) | bi;
                let (a01, a10) = (self.amps[k], self.amps[k10]);
                self.amps[k] = c * a01 + s * a10;
                self.amps[k10] = -s * a01 + c * a10;
            }
        }
        Ok(())
    }

    /// Applies the gates of `layer` on wires `0..n_in`.
    pub fn apply_pyramid(&mut self, layer: &PyramidLayer) -> Result<()> {
        if layer.n_in() > self.n_qubits {
            return Err(dim_mismatch("apply_pyramid", self.n_qubits, layer.n_in()));
        }
        for (slot, &theta) in layer.schedule().slots().iter().zip(layer.angles()) {
            self.apply_rbs(slot.wire + 1, slot.wire, theta)?;
        }
        Ok(())
    }

    /// The RBS cascade on pairs `(0,1), (1,2), …` without the initial flip.
    pub fn apply_loader_cascade(&mut self, alphas: &LoaderAngles) -> Result<()> {
        for (k, &a) in alphas.alphas.iter().enumerate() {
            self.apply_rbs(k, k + 1, a)?;
        }
        Ok(())
    }

    /// Inverse of [`apply_loader_cascade`](Self::apply_loader_cascade).
    pub fn apply_loader_cascade_adjoint(&mut self, alphas: &LoaderAngles) -> Result<()> {
        for (k, &a) in alphas.alphas.iter().enumerate().rev() {
            self.apply_rbs(k, k + 1, -a)?;
        }
        Ok(())
    }

    /// Flips wire 0 and runs the cascade, turning `|0…0⟩` into `Σ x_j |e_j⟩`.
    pub fn apply_loader(&mut self, alphas: &LoaderAngles) -> Result<()> {
        if !self.is_ground(1e-12) {
            return Err(Error::StateNotGround);
        }
        if alphas.width() > self.n_qubits {
            return Err(dim_mismatch("apply_loader", self.n_qubits, alphas.width()));
        }
        self.apply_x(0)?;
        self.apply_loader_cascade(alphas)
    }
}

/// Angles of the unary loader cascade, one per adjacent wire pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LoaderAngles {
    pub alphas: Vec<f64>,
}

impl LoaderAngles {
    /// Number of wires the loader spans.
    pub fn width(&self) -> usize {
        self.alphas.len() + 1
    }
}

/// Loader angles for a unit vector `x`.
///
/// `α_k = arccos(x_k / Π_{j<k} sin α_j)`, evaluated as
/// `atan2(‖x_{k+1..}‖, x_k)` since the running product equals the tail norm
/// `‖x_{k..}‖`. The last angle is `atan2(x_{n-1}, x_{n-2})` so the final pair
/// can carry either sign. Once the tail norm drops below
/// [`LOADER_TAIL_EPS`] the rest are zero.
pub fn load_angles(x: &[f64]) -> Result<LoaderAngles> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "the loader needs at least two components, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "loader input" });
    }
    let norm = norm2(x);
    if (norm - 1.0).abs() > LOADER_NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    let n = x.len();
    // tail[k] = ‖x_{k..}‖
    let mut tail = vec![0.0f64; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1].hypot(x[k]);
    }
    let mut alphas = vec![0.0; n - 1];
    for k in 0..n - 1 {
        if tail[k] < LOADER_TAIL_EPS {
            break;
        }
        alphas[k] = if k == n - 2 {
            x[n - 1].atan2(x[n - 2])
        } else {
            tail[k + 1].atan2(x[k])
        };
    }
    Ok(LoaderAngles { alphas })
}

/// Loads `x` into a fresh register of `x.len()` qubits.
pub fn load_vector(x: &[f64]) -> Result<StateVector> {
    let alphas = load_angles(x)?;
    let mut s = StateVector::ground(x.len())?;
    s.apply_loader(&alphas)?;
    Ok(s)
}

/// Simulates every `|e_j⟩` through the layer's circuit; column `j` holds the
/// amplitudes on `|e_0⟩ … |e_{n_out-1}⟩`. Also returns the largest leakage
/// out of the unary subspace.
pub fn unary_submatrix_with_leakage(layer: &PyramidLayer) -> Result<(Mat64, f64)> {
    let n = layer.n_in();
    if n > MAX_SUBMATRIX_WIRES {
        return Err(Error::QubitCap {
            requested: n,
            cap: MAX_SUBMATRIX_WIRES,
        });
    }
    let mut m = Mat64::zeros(layer.n_out(), n);
    let mut leak = 0.0f64;
    for j in 0..n {
        let mut s = StateVector::basis(n, 1 << j)?;
        s.apply_pyramid(layer)?;
        m.set_column(j, &s.unary_amplitudes(layer.n_out()));
        leak = leak.max(s.leakage());
    }
    Ok((m, leak))
}

pub fn unary_submatrix(layer: &PyramidLayer) -> Result<Mat64> {
    Ok(unary_submatrix_with_leakage(layer)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::max_abs_diff;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = norm2(&v);
        v.into_iter().map(|x| x / norm).collect()
    }

    #[test]
    fn rbs_fixes_00_and_11() {
        for theta in [0.3, 1.2, -2.0] {
            for idx in [0b00, 0b11] {
                let mut s = StateVector::basis(2, idx).unwrap();
                s.apply_rbs(0, 1, theta).unwrap();
                assert_eq!(s, StateVector::basis(2, idx).unwrap());
            }
        }
    }

    #[test]
    fn rbs_on_10() {
        // |b_0 b_1⟩ = |10⟩ is basis index 1
        let theta = 0.7;
        let mut s = StateVector::basis(2, 0b01).unwrap();
        s.apply_rbs(0, 1, theta).unwrap();
        let a = s.amplitudes();
        assert!((a[0b10] - theta.sin()).abs() < 1e-15);
        assert!((a[0b01] - theta.cos()).abs() < 1e-15);
    }

    #[test]
    fn gates_preserve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_unit(32, &mut rng);
        let mut s = StateVector::from_amplitudes(v).unwrap();
        for _ in 0..50 {
            let i = rng.gen_range(0..5);
            let j = (i + rng.gen_range(1..5)) % 5;
            s.apply_rbs(i, j, rng.gen_range(-3.0..3.0)).unwrap();
            assert!((s.norm() - 1.0).abs() <= 1e-12);
        }
        s.apply_h(2).unwrap();
        s.apply_cnot(2, 4).unwrap();
        s.apply_x(1).unwrap();
        assert!((s.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn wire_errors() {
        let mut s = StateVector::ground(3).unwrap();
        assert!(matches!(s.apply_rbs(0, 3, 0.1), Err(Error::WireOutOfRange { wire: 3, .. })));
        assert!(s.apply_rbs(1, 1, 0.1).is_err());
        assert!(s.apply_cnot(2, 2).is_err());
        assert!(matches!(StateVector::ground(17), Err(Error::QubitCap { .. })));
    }

    #[test]
    fn hadamard_and_cnot() {
        let mut s = StateVector::ground(2).unwrap();
        s.apply_h(0).unwrap();
        s.apply_cnot(0, 1).unwrap();
        let a = s.amplitudes();
        assert!((a[0] - FRAC_1_SQRT_2).abs() < 1e-15 && (a[3] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!((a[1], a[2]), (0.0, 0.0));
    }

    #[test]
    fn loader_angle_examples() {
        let a = load_angles(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(a.alphas, vec![0.0; 3]);
        let a = load_angles(&[0.0, 1.0]).unwrap();
        assert!((a.alphas[0] - FRAC_PI_2).abs() < 1e-15);
        let a = load_angles(&[0.5; 4]).unwrap();
        let expect = [FRAC_PI_3, (1.0 / 3f64.sqrt()).acos(), FRAC_PI_4];
        assert!(max_abs_diff(&a.alphas, &expect) < 1e-15);
        let s = load_vector(&[0.5; 4]).unwrap();
        assert!(max_abs_diff(&s.unary_amplitudes(4), &[0.5; 4]) < 1e-15);
    }

    #[test]
    fn loader_basis_examples() {
        let s = load_vector(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.amplitudes()[1], 1.0);
        let s = load_vector(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((s.amplitudes()[2] - 1.0).abs() < 1e-15);
        assert!(s.leakage() < 1e-15);
    }

    #[test]
    fn loader_roundtrip_with_signs_and_zero_tails() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..=10 {
            for trial in 0..30 {
                let mut x = random_unit(n, &mut rng);
                if trial % 5 == 0 && n > 2 {
                    let keep = rng.gen_range(1..n);
                    x[keep..].iter_mut().for_each(|v| *v = 0.0);
                    let norm = norm2(&x);
                    x.iter_mut().for_each(|v| *v /= norm);
                }
                let s = load_vector(&x).unwrap();
                assert!(max_abs_diff(&s.unary_amplitudes(n), &x) <= 1e-10, "{x:?}");
                assert!(s.leakage() <= 1e-12);
            }
        }
        let s = load_vector(&[-1.0, 0.0, 0.0]).unwrap();
        assert!((s.amplitudes()[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn loader_rejects_bad_input() {
        assert!(matches!(load_angles(&[1.0, 1.0]), Err(Error::NotNormalized { .. })));
        assert!(load_angles(&[1.0]).is_err());
        let mut s = StateVector::basis(2, 1).unwrap();
        let a = load_angles(&[0.6, 0.8]).unwrap();
        assert!(matches!(s.apply_loader(&a), Err(Error::StateNotGround)));
    }

    #[test]
    fn cascade_adjoint_undoes_cascade() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_unit(6, &mut rng);
        let a = load_angles(&x).unwrap();
        let mut s = load_vector(&x).unwrap();
        s.apply_loader_cascade_adjoint(&a).unwrap();
        assert!((s.amplitudes()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn submatrix_matches_classical_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(unary_submatrix(&PyramidLayer::identity(5, 5).unwrap()).unwrap(), Mat64::identity(5));
        for (n_in, n_out) in [(6, 6), (3, 3), (7, 3), (2, 1)] {
            let layer = PyramidLayer::random(n_in, n_out, &mut rng).unwrap();
            let (m, leak) = unary_submatrix_with_leakage(&layer).unwrap();
            assert!(m.max_abs_diff(&layer.matrix()) <= 1e-10);
            assert!(leak <= 1e-12);
            if n_in == n_out {
                assert!(m.orthogonality_deviation() <= 1e-12);
            }
        }
        assert!(matches!(
            unary_submatrix(&PyramidLayer::identity(13, 13).unwrap()),
            Err(Error::QubitCap { .. })
        ));
    }
}
