use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::state::{load_angles, LoaderAngles, StateVector, MAX_QUBITS};
use crate::error::{dim_mismatch, Error, Result};
use crate::numeric::{norm2, Vec64};
use crate::pyramid::PyramidLayer;
use crate::train::{network_forward, Network};

/// Exact probabilities below this are rounding residue (amplitude < 1e-12)
/// and are treated as zero.
pub const ANALYTIC_ZERO: f64 = 1e-24;

/// Measurement shots per circuit, or exact outcome probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shots {
    Analytic,
    Count(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyConfig {
    pub shots: Shots,
    pub seed: u64,
    /// Target precision the shot count was chosen for.
    pub delta: f64,
    /// Discard non-unary outcomes before estimating.
    pub mitigate: bool,
}

impl TomographyConfig {
    pub fn analytic() -> Self {
        Self {
            shots: Shots::Analytic,
            seed: 0,
            delta: 0.0,
            mitigate: false,
        }
    }

    /// `shots = ceil(10 n / δ²)`.
    pub fn for_precision(n: usize, delta: f64, seed: u64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("precision δ must be positive, got {delta}")));
        }
        Ok(Self {
            shots: Shots::Count((10.0 * n as f64 / (delta * delta)).ceil() as u64),
            seed,
            delta,
            mitigate: false,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.shots == Shots::Count(0) {
            return Err(Error::InvalidArgument("shots must be at least 1".into()));
        }
        Ok(())
    }
}

/// Independent bit flips on every measured bit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub bitflip_p: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { bitflip_p: 0.0 };

    pub fn bitflip(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("bit-flip probability must lie in [0, 1), got {p}")));
        }
        Ok(Self { bitflip_p: p })
    }

    /// Outcome distribution after the flips, computed exactly.
    pub fn apply(&self, probs: &[f64]) -> Vec<f64> {
        let p = self.bitflip_p;
        let mut out = probs.to_vec();
        if p == 0.0 {
            return out;
        }
        let n = probs.len().trailing_zeros();
        for w in 0..n {
            let bit = 1 << w;
            for i in 0..out.len() {
                if i & bit == 0 {
                    let (a, b) = (out[i], out[i | bit]);
                    out[i] = (1.0 - p) * a + p * b;
                    out[i | bit] = p * a + (1.0 - p) * b;
                }
            }
        }
        out
    }
}

/// Measurement counts keyed by basis index (bit `w` = wire `w`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Counts {
    pub n_qubits: usize,
    pub counts: BTreeMap<usize, u64>,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn get(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    /// Bitstring of a basis index, wire 0 first.
    pub fn bitstring(&self, index: usize) -> String {
        (0..self.n_qubits)
            .map(|w| if index >> w & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Parses a wire-0-first bitstring into a basis index.
    pub fn index_of(bits: &str) -> Result<usize> {
        bits.chars().enumerate().try_fold(0usize, |acc, (w, c)| match c {
            '0' => Ok(acc),
            '1' => Ok(acc | 1 << w),
            _ => Err(Error::InvalidArgument(format!("bad bitstring `{bits}`"))),
        })
    }

    pub fn from_bitstrings(pairs: &[(&str, u64)]) -> Result<Self> {
        let n_qubits = pairs.first().map_or(0, |p| p.0.len());
        let mut counts = BTreeMap::new();
        for &(bits, c) in pairs {
            if bits.len() != n_qubits {
                return Err(dim_mismatch("Counts bitstring", n_qubits, bits.len()));
            }
            *counts.entry(Self::index_of(bits)?).or_insert(0) += c;
        }
        Ok(Self { n_qubits, counts })
    }
}

impl fmt::Display for Counts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (&i, c) in &self.counts {
            writeln!(f, "{} {}", self.bitstring(i), c)?;
        }
        Ok(())
    }
}

fn sample_distribution(probs: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> BTreeMap<usize, u64> {
    // multinomial draw as a chain of conditional binomials
    let mut out = BTreeMap::new();
    let mut remaining = shots;
    let mut mass = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = if mass <= p { 1.0 } else { (p / mass).clamp(0.0, 1.0) };
        let c = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        if c > 0 {
            out.insert(i, c);
        }
        remaining -= c;
        mass -= p;
    }
    if remaining > 0 {
        // rounding left mass unassigned; give it to the most likely outcome
        let best = (0..probs.len()).max_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap_or(0);
        *out.entry(best).or_insert(0) += remaining;
    }
    out
}

fn sample_with(state: &StateVector, shots: u64, noise: NoiseModel, rng: &mut ChaCha8Rng) -> Counts {
    let probs = noise.apply(&state.probabilities());
    Counts {
        n_qubits: state.n_qubits(),
        counts: sample_distribution(&probs, shots, rng),
    }
}

/// Draws `cfg.shots` measurements of every qubit, then flips each measured
/// bit with probability `noise.bitflip_p`. Deterministic given `cfg.seed`.
pub fn sample_shots(state: &StateVector, cfg: &TomographyConfig, noise: NoiseModel) -> Result<Counts> {
    cfg.validate()?;
    let Shots::Count(shots) = cfg.shots else {
        return Err(Error::InvalidArgument("sample_shots needs a finite shot count".into()));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(sample_with(state, shots, noise, &mut rng))
}

/// Counts restricted to Hamming-weight-one outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Mitigated {
    pub counts: Counts,
    pub discard_fraction: f64,
}

fn keep_where(counts: &Counts, keep: impl Fn(usize) -> bool) -> Result<Mitigated> {
    let total = counts.total();
    let kept: BTreeMap<usize, u64> = counts
        .counts
        .iter()
        .filter(|(&i, _)| keep(i))
        .map(|(&i, &c)| (i, c))
        .collect();
    let kept_total: u64 = kept.values().sum();
    if kept_total == 0 {
        return Err(Error::AllShotsDiscarded);
    }
    Ok(Mitigated {
        counts: Counts {
            n_qubits: counts.n_qubits,
            counts: kept,
        },
        discard_fraction: 1.0 - kept_total as f64 / total as f64,
    })
}

/// Drops every outcome that is not a unary state.
pub fn mitigate_unary(counts: &Counts) -> Result<Mitigated> {
    keep_where(counts, |i| i.count_ones() == 1)
}

/// Outcome frequencies of one circuit, either exact or from shots, with
/// optional post-selection on a register mask.
struct Outcomes {
    probs: Vec<f64>,
}

impl Outcomes {
    fn measure(state: &StateVector, cfg: &TomographyConfig, noise: NoiseModel, register_mask: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let keep = |i: usize| (i & register_mask).count_ones() == 1;
        let mut probs = match cfg.shots {
            Shots::Analytic => noise
                .apply(&state.probabilities())
                .into_iter()
                .map(|p| if p < ANALYTIC_ZERO { 0.0 } else { p })
                .collect(),
            Shots::Count(shots) => {
                let counts = sample_with(state, shots, noise, rng);
                let mut p = vec![0.0; 1 << state.n_qubits()];
                for (&i, &c) in &counts.counts {
                    p[i] = c as f64 / shots as f64;
                }
                p
            }
        };
        if cfg.mitigate {
            let kept: f64 = probs.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, p)| p).sum();
            if kept <= 0.0 {
                return Err(Error::AllShotsDiscarded);
            }
            for (i, p) in probs.iter_mut().enumerate() {
                *p = if keep(i) { *p / kept } else { 0.0 };
            }
        }
        Ok(Self { probs })
    }

    fn unary(&self, j: usize) -> f64 {
        self.probs[1 << j]
    }
}

fn check_input(layer: &PyramidLayer, x: &[f64]) -> Result<LoaderAngles> {
    if x.len() != layer.n_in() {
        return Err(dim_mismatch("tomography input", layer.n_in(), x.len()));
    }
    load_angles(x)
}

fn prepared(layer: &PyramidLayer, alphas: &LoaderAngles) -> Result<StateVector> {
    let mut s = StateVector::ground(layer.n_in())?;
    s.apply_loader(alphas)?;
    s.apply_pyramid(layer)?;
    Ok(s)
}

/// Estimates `|W x|` from the unary outcome frequencies of the plain circuit.
pub fn estimate_magnitudes(layer: &PyramidLayer, x: &[f64], cfg: &TomographyConfig, noise: NoiseModel) -> Result<Vec64> {
    cfg.validate()?;
    let alphas = check_input(layer, x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let state = prepared(layer, &alphas)?;
    let out = Outcomes::measure(&state, cfg, noise, usize::MAX, &mut rng)?;
    Ok((0..layer.n_out()).map(|j| out.unary(j).sqrt()).collect())
}

/// Magnitudes `sqrt(count(e_j) / N)` from raw counts, where `N` is the total
/// shot count, or the unary shot count when `mitigate` is set.
pub fn magnitudes_from_counts(counts: &Counts, n_out: usize, mitigate: bool) -> Result<Vec64> {
    let (source, total) = if mitigate {
        let m = mitigate_unary(counts)?;
        let t = m.counts.total();
        (m.counts, t)
    } else {
        (counts.clone(), counts.total())
    };
    if total == 0 {
        return Err(Error::AllShotsDiscarded);
    }
    Ok((0..n_out)
        .map(|j| (source.get(1 << j) as f64 / total as f64).sqrt())
        .collect())
}

/// Sign recovery with comparator gates: magnitudes from the plain circuit,
/// then π/4 rotations on output pairs `(0,1), (2,3), …` and `(1,2), (3,4), …`.
/// A pair has equal signs when the comparator's sum wire is the more likely
/// outcome. Signs are chained from `ŷ_0 ≥ 0`, so the result is `W x` up to a
/// global sign.
pub fn tomography_pairwise(layer: &PyramidLayer, x: &[f64], cfg: &TomographyConfig, noise: NoiseModel) -> Result<Vec64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pairwise_with(layer, x, cfg, noise, &mut rng)
}

fn pairwise_with(layer: &PyramidLayer, x: &[f64], cfg: &TomographyConfig, noise: NoiseModel, rng: &mut ChaCha8Rng) -> Result<Vec64> {
    cfg.validate()?;
    let alphas = check_input(layer, x)?;
    let m = layer.n_out();
    let base = prepared(layer, &alphas)?;
    let plain = Outcomes::measure(&base, cfg, noise, usize::MAX, rng)?;
    let magnitudes: Vec64 = (0..m).map(|j| plain.unary(j).sqrt()).collect();

    // same[i]: sign link between outputs i and i + 1
    let mut same: Vec<Option<bool>> = vec![None; m.saturating_sub(1)];
    for offset in [0, 1] {
        let mut s = base.clone();
        let pairs: Vec<usize> = (offset..m.saturating_sub(1)).step_by(2).collect();
        if pairs.is_empty() {
            continue;
        }
        for &i in &pairs {
            s.apply_rbs(i + 1, i, FRAC_PI_4)?;
        }
        let out = Outcomes::measure(&s, cfg, noise, usize::MAX, rng)?;
        for &i in &pairs {
            let (plus, minus) = (out.unary(i), out.unary(i + 1));
            same[i] = if plus == 0.0 && minus == 0.0 { None } else { Some(plus >= minus) };
        }
    }

    let mut y = magnitudes.clone();
    let mut sign = 1.0;
    let mut unresolved_from = None;
    for i in 0..same.len() {
        match same[i] {
            Some(true) => {}
            Some(false) => sign = -sign,
            None => {
                unresolved_from.get_or_insert(i + 1);
            }
        }
        y[i + 1] *= sign;
    }
    if let Some(start) = unresolved_from {
        let affected: Vec<usize> = (start..m).filter(|&j| magnitudes[j] > 0.0).collect();
        if !affected.is_empty() {
            return Err(Error::UnresolvedSigns { indices: affected });
        }
    }
    Ok(y)
}

/// Sign-exact tomography with one ancilla (wire `n_in`). The register ends
/// in `(|0⟩(|y⟩ + |u⟩) + |1⟩(|y⟩ − |u⟩)) / 2` with `u` uniform over the
/// `n_out` output wires, so `Pr[0,e_j] − Pr[1,e_j] = y_j / √n_out`.
pub fn tomography_ancilla(layer: &PyramidLayer, x: &[f64], cfg: &TomographyConfig, noise: NoiseModel) -> Result<Vec64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    ancilla_with(layer, x, cfg, noise, &mut rng)
}

fn ancilla_with(layer: &PyramidLayer, x: &[f64], cfg: &TomographyConfig, noise: NoiseModel, rng: &mut ChaCha8Rng) -> Result<Vec64> {
    cfg.validate()?;
    let n = layer.n_in();
    if n + 1 > MAX_QUBITS {
        return Err(Error::QubitCap {
            requested: n + 1,
            cap: MAX_QUBITS,
        });
    }
    let alphas = check_input(layer, x)?;
    let m = layer.n_out();
    let u_amp = 1.0 / (m as f64).sqrt();
    let uniform = (m >= 2).then(|| load_angles(&vec![u_amp; m])).transpose()?;
    let anc = n;

    let mut s = StateVector::ground(n + 1)?;
    s.apply_h(anc)?;
    s.apply_cnot(anc, 0)?;
    s.apply_loader_cascade(&alphas)?;
    s.apply_pyramid(layer)?;
    s.apply_x(anc)?;
    if let Some(u) = &uniform {
        s.apply_loader_cascade_adjoint(u)?;
    }
    s.apply_cnot(anc, 0)?;
    if let Some(u) = &uniform {
        s.apply_loader_cascade(u)?;
    }
    s.apply_h(anc)?;

    let out = Outcomes::measure(&s, cfg, noise, (1 << n) - 1, rng)?;
    Ok((0..m)
        .map(|j| {
            let p0 = out.probs[1 << j];
            let p1 = out.probs[(1 << anc) | (1 << j)];
            if p0 >= p1 {
                2.0 * p0.sqrt() - u_amp
            } else {
                u_amp - 2.0 * p1.sqrt()
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TomographyMethod {
    Pairwise,
    #[default]
    Ancilla,
}

impl std::str::FromStr for TomographyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairwise" => Ok(TomographyMethod::Pairwise),
            "ancilla" => Ok(TomographyMethod::Ancilla),
            other => Err(Error::InvalidArgument(format!("unknown tomography method `{other}`"))),
        }
    }
}

/// Runs `net` layer by layer through the simulator: each layer's input is
/// normalized and loaded, its output read back by tomography and rescaled,
/// then bias and activation are applied classically.
pub fn multilayer_quantum_inference(net: &Network, x: &[f64], cfg: &TomographyConfig, noise: NoiseModel, method: TomographyMethod) -> Result<Vec64> {
    if x.len() != net.n_in() {
        return Err(dim_mismatch("multilayer_quantum_inference", net.n_in(), x.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut a = x.to_vec();
    for layer in net.layers() {
        let norm = norm2(&a);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector {
                context: "layer input in quantum inference",
            });
        }
        let unit: Vec64 = a.iter().map(|v| v / norm).collect();
        let y = match method {
            TomographyMethod::Pairwise => pairwise_with(&layer.pyramid, &unit, cfg, noise, &mut rng)?,
            TomographyMethod::Ancilla => ancilla_with(&layer.pyramid, &unit, cfg, noise, &mut rng)?,
        };
        let mut z: Vec64 = y.iter().map(|v| v * norm).collect();
        if let Some(b) = &layer.bias {
            z.iter_mut().zip(b).for_each(|(z, b)| *z += b);
        }
        a = z.into_iter().map(|v| layer.activation.apply(v)).collect();
    }
    Ok(a)
}

/// Largest gap between quantum inference and the classical forward pass.
pub fn quantum_classical_gap(net: &Network, x: &[f64], cfg: &TomographyConfig, method: TomographyMethod) -> Result<f64> {
    let q = multilayer_quantum_inference(net, x, cfg, NoiseModel::NONE, method)?;
    let pass = network_forward(net, x)?;
    Ok(crate::numeric::max_abs_diff(&q, pass.output()))
}
