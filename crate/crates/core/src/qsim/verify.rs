use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::state::{load_vector, unary_submatrix_with_leakage, MAX_SUBMATRIX_WIRES};
use super::tomography::{tomography_ancilla, tomography_pairwise, NoiseModel, TomographyConfig};
use crate::error::{Error, Result};
use crate::numeric::{max_abs_diff, norm2};
use crate::pyramid::PyramidLayer;

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// The measured error the check compared against its tolerance.
    pub value: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "pass" } else { "fail" };
        write!(f, "{}={}:{:.3e}", self.name, verdict, self.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub n_min: usize,
    pub n_max: usize,
    /// Random layers (and input vectors) per size.
    pub trials: usize,
    pub seed: u64,
    /// Perturbs the simulated circuits so the equivalence checks must fail.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_min: 2,
            n_max: 10,
            trials: 20,
            seed: 0,
            inject_fault: false,
        }
    }
}

const EQUIVALENCE_TOL: f64 = 1e-10;
const LEAKAGE_TOL: f64 = 1e-12;
const LOADER_TOL: f64 = 1e-10;
const FAULT_ANGLE: f64 = 1e-3;

fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = norm2(&v);
    v.into_iter().map(|x| x / norm).collect()
}

fn check(name: String, value: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        passed: value <= tol,
        value,
    }
}

/// Quantum/classical equivalence checks for every size in `n_min..=n_max`:
/// unary submatrix vs the classical matrix, unary leakage, loader round trip
/// and both analytic tomography procedures.
pub fn verify_suite(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    if opts.n_min < 2 || opts.n_min > opts.n_max || opts.n_max > MAX_SUBMATRIX_WIRES {
        return Err(Error::InvalidArgument(format!(
            "verify sizes must satisfy 2 <= n_min <= n_max <= {MAX_SUBMATRIX_WIRES}, got {}..={}",
            opts.n_min, opts.n_max
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let analytic = TomographyConfig::analytic();
    let mut out = Vec::new();
    for n in opts.n_min..=opts.n_max {
        let (mut equiv, mut leak, mut loader, mut anc, mut pair) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..opts.trials.max(1) {
            let layer = PyramidLayer::random(n, n, &mut rng)?;
            let mut simulated = layer.clone();
            if opts.inject_fault {
                simulated.set_angle(0, layer.angles()[0] + FAULT_ANGLE);
            }
            let (m, l) = unary_submatrix_with_leakage(&simulated)?;
            equiv = equiv.max(m.max_abs_diff(&layer.matrix()));
            leak = leak.max(l);

            let x = random_unit(n, &mut rng);
            let state = load_vector(&x)?;
            loader = loader.max(max_abs_diff(&state.unary_amplitudes(n), &x));

            let truth = layer.matrix().matvec(&x)?;
            let y = tomography_ancilla(&simulated, &x, &analytic, NoiseModel::NONE)?;
            anc = anc.max(max_abs_diff(&y, &truth));
            let y = tomography_pairwise(&simulated, &x, &analytic, NoiseModel::NONE)?;
            let flipped: Vec<f64> = truth.iter().map(|v| -v).collect();
            pair = pair.max(max_abs_diff(&y, &truth).min(max_abs_diff(&y, &flipped)));
        }
        out.push(check(format!("unary_equivalence_n{n}"), equiv, EQUIVALENCE_TOL));
        out.push(check(format!("unary_leakage_n{n}"), leak, LEAKAGE_TOL));
        out.push(check(format!("loader_roundtrip_n{n}"), loader, LOADER_TOL));
        out.push(check(format!("tomography_ancilla_n{n}"), anc, EQUIVALENCE_TOL));
        out.push(check(format!("tomography_pairwise_n{n}"), pair, EQUIVALENCE_TOL));
    }
    Ok(out)
}
