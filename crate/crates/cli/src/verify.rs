use clap::Args;
use serde::Deserialize;

use pyramidnet_core::qsim::{verify_suite, VerifyOptions, MAX_SUBMATRIX_WIRES};

use crate::config::layered;
use crate::failure::Failure;

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    /// Smallest register size [default: 2]
    #[arg(long)]
    n_min: Option<usize>,
    /// Largest register size, at most 12 [default: 10]
    #[arg(long)]
    n_max: Option<usize>,
    /// Random layers and inputs per size [default: 20]
    #[arg(long)]
    trials: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Perturb the simulated circuits so the checks fail
    #[arg(long, num_args = 0..=1, default_missing_value = "true", hide = true)]
    inject_fault: Option<bool>,
}

layered!(VerifyArgs {
    n_min,
    n_max,
    trials,
    seed,
    inject_fault,
});

pub fn run(a: VerifyArgs) -> Result<(), Failure> {
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        n_min: a.n_min.unwrap_or(defaults.n_min),
        n_max: a.n_max.unwrap_or(defaults.n_max),
        trials: a.trials.unwrap_or(defaults.trials),
        seed: a.seed.unwrap_or(defaults.seed),
        inject_fault: a.inject_fault.unwrap_or(false),
    };
    if opts.n_max > MAX_SUBMATRIX_WIRES {
        return Err(Failure::config(format!(
            "--n-max {} exceeds the cap of {MAX_SUBMATRIX_WIRES}",
            opts.n_max
        )));
    }
    let results = verify_suite(&opts)?;
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::check(format!("{failed} of {} checks failed", results.len())));
    }
    Ok(())
}
