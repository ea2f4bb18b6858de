//! Pyramidal circuits of planar rotations.
//!
//! A layer on `n` wires is a triangle of two-wire rotations. Timestep `λ`
//! runs from `0` to `2n - 4`; at timestep `λ` a gate sits on wires
//! `(i, i + 1)` for every `i` with `|n - 2 - λ| <= i <= n - 2` and
//! `i ≡ λ + n (mod 2)`. The bottom wire pair is hit first and last, the top
//! pair once, at the apex `λ = n - 2`, for `n(n - 1)/2` gates in total.
//!
//! Every gate applies the block `[[cos θ, sin θ], [-sin θ, cos θ]]` to the
//! pair `(ζ_i, ζ_{i+1})`. Rectangular layers (`n_out < n_in`) read their
//! output on wires `0..n_out` and keep only the gates in the backward light
//! cone of those wires, `(2 n_in - 1 - n_out) n_out / 2` of them.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{dim_mismatch, Error, Result};
use crate::numeric::Mat64;

/// Tolerance on `|W^T W - I|` accepted by [`angles_from_matrix`].
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Position of one rotation: timestep and upper wire of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GateSlot {
    pub timestep: usize,
    pub wire: usize,
}

/// Ordered gate positions of one layer, grouped by timestep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PyramidSchedule {
    n_in: usize,
    n_out: usize,
    slots: Vec<GateSlot>,
    // slot index ranges, one per non-empty timestep, in increasing timestep order
    steps: Vec<Range<usize>>,
}

/// Number of gates in an `n_in -> n_out` pyramid.
pub fn gate_count(n_in: usize, n_out: usize) -> usize {
    (2 * n_in - 1 - n_out) * n_out / 2
}

/// Builds the gate schedule for an `n_in -> n_out` layer.
pub fn build_schedule(n_in: usize, n_out: usize) -> Result<PyramidSchedule> {
    if n_out < 1 || n_out > n_in || n_in < 2 {
        return Err(Error::InvalidShape { n_in, n_out });
    }
    let n = n_in;
    let mut square = Vec::with_capacity(n * (n - 1) / 2);
    for timestep in 0..=(2 * n - 4) {
        let lo = (n - 2).abs_diff(timestep);
        for wire in lo..=(n - 2) {
            if (wire + timestep + n) % 2 == 0 {
                square.push(GateSlot { timestep, wire });
            }
        }
    }

    let slots = if n_out == n_in {
        square
    } else {
        // backward light cone of the first n_out wires
        let mut in_cone = vec![false; n];
        in_cone[..n_out].iter_mut().for_each(|w| *w = true);
        let mut kept = Vec::with_capacity(gate_count(n_in, n_out));
        for slot in square.iter().rev() {
            if in_cone[slot.wire] || in_cone[slot.wire + 1] {
                in_cone[slot.wire] = true;
                in_cone[slot.wire + 1] = true;
                kept.push(*slot);
            }
        }
        kept.reverse();
        kept
    };

    let mut steps = Vec::new();
    let mut start = 0;
    for k in 1..=slots.len() {
        if k == slots.len() || slots[k].timestep != slots[start].timestep {
            steps.push(start..k);
            start = k;
        }
    }
    Ok(PyramidSchedule {
        n_in,
        n_out,
        slots,
        steps,
    })
}

impl PyramidSchedule {
    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn is_square(&self) -> bool {
        self.n_in == self.n_out
    }

    pub fn slots(&self) -> &[GateSlot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Number of non-empty timesteps.
    pub fn timestep_count(&self) -> usize {
        self.steps.len()
    }

    /// Slot index range of the `k`-th non-empty timestep.
    pub fn timestep(&self, k: usize) -> Range<usize> {
        self.steps[k].clone()
    }

    pub fn timesteps(&self) -> impl DoubleEndedIterator<Item = Range<usize>> + ExactSizeIterator + '_ {
        self.steps.iter().cloned()
    }

    pub fn max_timestep(&self) -> usize {
        self.slots.last().map_or(0, |s| s.timestep)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn canonical_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Applies the rotation block `[[c, s], [-s, c]]` to the pair `(u, v)`.
#[inline]
pub fn apply_rotation_pair(theta: f64, u: f64, v: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c * u + s * v, -s * u + c * v)
}

/// Inner layers `ζ^0 ..= ζ^T` recorded during a forward pass, one per
/// timestep boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub inner_layers: Vec<Vec<f64>>,
}

/// One orthogonal layer: a schedule and one angle per gate.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLayer {
    schedule: PyramidSchedule,
    angles: Vec<f64>,
}

impl PyramidLayer {
    /// Layer with all angles zero.
    pub fn identity(n_in: usize, n_out: usize) -> Result<Self> {
        let schedule = build_schedule(n_in, n_out)?;
        let angles = vec![0.0; schedule.len()];
        Ok(Self { schedule, angles })
    }

    /// Layer with the given angles, canonicalized into `(-π, π]`.
    pub fn new(n_in: usize, n_out: usize, angles: Vec<f64>) -> Result<Self> {
        let schedule = build_schedule(n_in, n_out)?;
        Self::from_schedule(schedule, angles)
    }

    pub fn from_schedule(schedule: PyramidSchedule, mut angles: Vec<f64>) -> Result<Self> {
        if angles.len() != schedule.len() {
            return Err(dim_mismatch("PyramidLayer angles", schedule.len(), angles.len()));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite { context: "layer angles" });
        }
        angles.iter_mut().for_each(|a| *a = canonical_angle(*a));
        Ok(Self { schedule, angles })
    }

    /// Layer with angles drawn uniformly from `(-π, π]`.
    pub fn random<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Result<Self> {
        let schedule = build_schedule(n_in, n_out)?;
        let angles = (0..schedule.len())
            .map(|_| canonical_angle(rng.gen_range(-PI..PI)))
            .collect();
        Ok(Self { schedule, angles })
    }

    pub fn schedule(&self) -> &PyramidSchedule {
        &self.schedule
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn n_in(&self) -> usize {
        self.schedule.n_in
    }

    pub fn n_out(&self) -> usize {
        self.schedule.n_out
    }

    /// Sets one angle, canonicalized.
    pub fn set_angle(&mut self, slot: usize, theta: f64) {
        self.angles[slot] = canonical_angle(theta);
    }

    /// `θ ← θ - lr * grad` for every angle, then canonicalization.
    pub fn descend(&mut self, grads: &[f64], lr: f64) -> Result<()> {
        if grads.len() != self.angles.len() {
            return Err(dim_mismatch("PyramidLayer::descend", self.angles.len(), grads.len()));
        }
        for (a, g) in self.angles.iter_mut().zip(grads) {
            *a = canonical_angle(*a - lr * g);
        }
        Ok(())
    }

    /// Applies the layer to `x`, optionally recording every inner layer.
    pub fn forward(&self, x: &[f64], keep_trace: bool) -> Result<(Vec<f64>, Option<ForwardTrace>)> {
        if x.len() != self.n_in() {
            return Err(dim_mismatch("PyramidLayer::forward", self.n_in(), x.len()));
        }
        let mut zeta = x.to_vec();
        let mut trace = keep_trace.then(|| {
            let mut layers = Vec::with_capacity(self.schedule.timestep_count() + 1);
            layers.push(zeta.clone());
            layers
        });
        for step in self.schedule.timesteps() {
            self.apply_timestep(step, &mut zeta);
            if let Some(layers) = trace.as_mut() {
                layers.push(zeta.clone());
            }
        }
        zeta.truncate(self.n_out());
        Ok((zeta, trace.map(|inner_layers| ForwardTrace { inner_layers })))
    }

    /// Applies the layer in place to an `n_in`-wide buffer without truncating.
    pub fn apply_full(&self, zeta: &mut [f64]) {
        debug_assert_eq!(zeta.len(), self.n_in());
        for step in self.schedule.timesteps() {
            self.apply_timestep(step, zeta);
        }
    }

    #[inline]
    fn apply_timestep(&self, step: Range<usize>, zeta: &mut [f64]) {
        for k in step {
            let i = self.schedule.slots[k].wire;
            let (u, v) = apply_rotation_pair(self.angles[k], zeta[i], zeta[i + 1]);
            zeta[i] = u;
            zeta[i + 1] = v;
        }
    }

    /// The equivalent `n_out x n_in` matrix, one pushed basis vector per column.
    pub fn matrix(&self) -> Mat64 {
        let n = self.n_in();
        let mut w = Mat64::zeros(self.n_out(), n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.apply_full(&mut e);
            w.set_column(j, &e[..self.n_out()]);
        }
        w
    }
}

impl Serialize for PyramidLayer {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        LayerRepr {
            n_in: self.n_in(),
            n_out: self.n_out(),
            angles: self.angles.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PyramidLayer {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = LayerRepr::deserialize(deserializer)?;
        PyramidLayer::new(repr.n_in, repr.n_out, repr.angles).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    n_in: usize,
    n_out: usize,
    angles: Vec<f64>,
}

/// The `n_out x n_in` matrix implemented by `layer`.
pub fn matrix_from_angles(layer: &PyramidLayer) -> Mat64 {
    layer.matrix()
}

/// Result of decomposing an orthogonal matrix into pyramid angles.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub layer: PyramidLayer,
    /// Input-side signs: `w = matrix_from_angles(layer) * diag(sign_mask)`.
    /// All ones unless `det(w) = -1`, in which case the last wire carries `-1`.
    pub sign_mask: Vec<f64>,
}

impl Decomposition {
    /// Wires whose sign flips.
    pub fn flipped_wires(&self) -> Vec<usize> {
        self.sign_mask
            .iter()
            .enumerate()
            .filter(|(_, &s)| s < 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// `matrix_from_angles(layer) * diag(sign_mask)`.
    pub fn reconstruct(&self) -> Mat64 {
        let mut w = self.layer.matrix();
        for r in 0..w.rows() {
            for (v, s) in w.row_mut(r).iter_mut().zip(&self.sign_mask) {
                *v *= s;
            }
        }
        w
    }
}

/// Recovers pyramid angles from a square orthogonal matrix by Givens elimination.
///
/// Slots are peeled from the last timestep to the first. The gate at slot
/// `(λ, i)` zeroes entry `(i + 1, c)` with `c = n - 1 - (λ - i + n)/2`, so the
/// peeling order is a column-by-column QR of `w` with adjacent rotations. The
/// remainder is `diag(1, ..., 1, det w)`.
pub fn angles_from_matrix(w: &Mat64) -> Result<Decomposition> {
    if !w.is_square() {
        return Err(dim_mismatch("angles_from_matrix", "square", format!("{:?}", w.shape())));
    }
    let deviation = w.orthogonality_deviation();
    if !(deviation <= ORTHOGONALITY_TOL) {
        return Err(Error::NotOrthogonal { deviation });
    }
    let n = w.rows();
    if n == 1 {
        return Err(Error::InvalidShape { n_in: 1, n_out: 1 });
    }
    let schedule = build_schedule(n, n)?;
    let mut m = w.clone();
    let mut angles = vec![0.0; schedule.len()];
    for (k, slot) in schedule.slots().iter().enumerate().rev() {
        let i = slot.wire;
        let col = n - 1 - (slot.timestep + n - i) / 2;
        let a = m[(i, col)];
        let b = m[(i + 1, col)];
        let theta = if a == 0.0 && b == 0.0 { 0.0 } else { (-b).atan2(a) };
        angles[k] = theta;
        // m <- G(θ)^T m on rows (i, i + 1)
        let (s, c) = theta.sin_cos();
        for j in 0..n {
            let (ri, rj) = (m[(i, j)], m[(i + 1, j)]);
            m[(i, j)] = c * ri - s * rj;
            m[(i + 1, j)] = s * ri + c * rj;
        }
        m[(i + 1, col)] = 0.0;
    }
    let sign_mask = (0..n)
        .map(|j| if m[(j, j)] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let layer = PyramidLayer::from_schedule(schedule, angles)?;
    Ok(Decomposition { layer, sign_mask })
}

/// Writes a matrix as CSV, one row per line, 17 significant digits.
pub fn write_matrix_csv<W: Write>(m: &Mat64, mut out: W) -> Result<()> {
    for r in 0..m.rows() {
        let line = m
            .row(r)
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn export_matrix(m: &Mat64, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_matrix_csv(m, std::io::BufWriter::new(file))
}

/// Parses a matrix written by [`write_matrix_csv`].
pub fn read_matrix_csv(text: &str) -> Result<Mat64> {
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(r, line)| {
            line.split(',')
                .map(|cell| {
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Csv(format!("row {r}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::Csv("no rows".into()));
    }
    Mat64::from_rows(&rows)
}

pub fn import_matrix(path: impl AsRef<Path>) -> Result<Mat64> {
    read_matrix_csv(&std::fs::read_to_string(path)?)
}
