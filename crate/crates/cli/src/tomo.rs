use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use pyramidnet_core::numeric::{max_abs_diff, norm2};
use pyramidnet_core::qsim::{
    load_vector, mitigate_unary, sample_shots, tomography_ancilla, tomography_pairwise, NoiseModel, Shots,
    TomographyConfig, MAX_QUBITS,
};
use pyramidnet_core::{Error, PyramidLayer};

use crate::config::{layered, ShotsArg};
use crate::failure::Failure;

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoArgs {
    /// Input width of the random layer [default: 8]
    #[arg(long)]
    n: Option<usize>,
    /// Output width [default: n]
    #[arg(long)]
    n_out: Option<usize>,
    /// Shots per circuit, or `analytic` [default: 100000]
    #[arg(long)]
    shots: Option<ShotsArg>,
    /// Bit-flip probability per measured bit [default: 0]
    #[arg(long)]
    noise_p: Option<f64>,
    /// Seeds the layer, the input and the shots [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with a check failure if an estimate is off by more than this
    #[arg(long)]
    max_error: Option<f64>,
}

layered!(TomoArgs {
    n,
    n_out,
    shots,
    noise_p,
    seed,
    max_error,
});

pub fn run(a: TomoArgs) -> Result<(), Failure> {
    let n = a.n.unwrap_or(8);
    let n_out = a.n_out.unwrap_or(n);
    if n < 2 || n_out == 0 || n_out > n || n + 1 > MAX_QUBITS {
        return Err(Failure::config(format!(
            "need 2 <= n <= {} and 1 <= n_out <= n, got n={n} n_out={n_out}",
            MAX_QUBITS - 1
        )));
    }
    let shots = a.shots.unwrap_or(ShotsArg(Shots::Count(100_000)));
    let p = a.noise_p.unwrap_or(0.0);
    let noise = NoiseModel::bitflip(p)?;
    let seed = a.seed.unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer = PyramidLayer::random(n, n_out, &mut rng)?;
    let x: Vec<f64> = {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = norm2(&v);
        v.into_iter().map(|e| e / s).collect()
    };
    let truth = layer.matrix().matvec(&x)?;
    let flipped: Vec<f64> = truth.iter().map(|v| -v).collect();

    let mut state = load_vector(&x)?;
    state.apply_pyramid(&layer)?;
    let cfg = TomographyConfig {
        shots: shots.0,
        seed,
        ..TomographyConfig::analytic()
    };
    let discard = match shots.0 {
        Shots::Analytic => {
            1.0 - noise
                .apply(&state.probabilities())
                .iter()
                .enumerate()
                .filter(|(i, _)| i.count_ones() == 1)
                .map(|(_, q)| q)
                .sum::<f64>()
        }
        Shots::Count(_) => match mitigate_unary(&sample_shots(&state, &cfg, noise)?) {
            Ok(m) => m.discard_fraction,
            Err(Error::AllShotsDiscarded) => 1.0,
            Err(e) => return Err(e.into()),
        },
    };

    println!("n={n} n_out={n_out} shots={shots} noise_p={p} seed={seed}");
    println!("discard_fraction={:.4}", discard.max(0.0));
    let mut worst = 0.0f64;
    for mitigate in [false, true] {
        let cfg = TomographyConfig { mitigate, ..cfg };
        let tag = if mitigate { "on" } else { "off" };
        if n_out == n {
            match tomography_pairwise(&layer, &x, &cfg, noise) {
                Ok(y) => {
                    let e = max_abs_diff(&y, &truth).min(max_abs_diff(&y, &flipped));
                    worst = worst.max(e);
                    println!("pairwise mitigation={tag} linf_error={e:.4e} (up to global sign)");
                }
                Err(e) => {
                    worst = f64::INFINITY;
                    println!("pairwise mitigation={tag} failed: {e}");
                }
            }
        } else {
            println!("pairwise mitigation={tag} skipped: needs a square layer");
        }
        match tomography_ancilla(&layer, &x, &cfg, noise) {
            Ok(y) => {
                let e = max_abs_diff(&y, &truth);
                worst = worst.max(e);
                println!("ancilla mitigation={tag} linf_error={e:.4e}");
            }
            Err(e) => {
                worst = f64::INFINITY;
                println!("ancilla mitigation={tag} failed: {e}");
            }
        }
    }
    if let Some(limit) = a.max_error {
        if !(worst <= limit) {
            return Err(Failure::check(format!("worst error {worst:.4e} exceeds {limit:.4e}")));
        }
    }
    Ok(())
}
