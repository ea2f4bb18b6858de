use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use pyramidnet_core::baselines::SvbConfig;
use pyramidnet_core::scaling::{ratio_trend, run_scaling, scaling_csv, ScalingConfig};

use crate::config::layered;
use crate::failure::Failure;
use crate::write_output;

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingArgs {
    /// Layer widths to time [default: 64,128,256,512]
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Timed repetitions per size; the median is reported [default: 5]
    #[arg(long)]
    repeats: Option<usize>,
    /// Untimed steps before timing [default: 1]
    #[arg(long)]
    warmup: Option<usize>,
    /// SVB band half-width [default: 0.05]
    #[arg(long)]
    epsilon: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// CSV path [default: scaling.csv]
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Exit with a check failure if the last/first ratio trend is below this
    #[arg(long)]
    min_trend: Option<f64>,
}

layered!(ScalingArgs {
    sizes,
    repeats,
    warmup,
    epsilon,
    seed,
    out,
    min_trend,
});

pub fn run(a: ScalingArgs) -> Result<(), Failure> {
    let defaults = ScalingConfig::default();
    let cfg = ScalingConfig {
        sizes: a.sizes.unwrap_or(defaults.sizes),
        repeats: a.repeats.unwrap_or(defaults.repeats),
        warmup: a.warmup.unwrap_or(defaults.warmup),
        svb: match a.epsilon {
            Some(e) => SvbConfig::new(e)?,
            None => defaults.svb,
        },
        seed: a.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let rows = run_scaling(&cfg)?;
    let out = a.out.unwrap_or_else(|| PathBuf::from("scaling.csv"));
    write_output(&out, &scaling_csv(&rows))?;
    for r in &rows {
        println!(
            "n={} pyramid_ms={:.3} svb_ms={:.3} ratio={:.2}",
            r.n,
            r.pyramid_ms,
            r.svb_ms,
            r.ratio()
        );
    }
    let trend = ratio_trend(&rows).expect("at least one size");
    println!("ratio trend (last/first): {trend:.2}");
    if let Some(min) = a.min_trend {
        if !(trend >= min) {
            return Err(Failure::check(format!("ratio trend {trend:.2} below {min}")));
        }
    }
    Ok(())
}
