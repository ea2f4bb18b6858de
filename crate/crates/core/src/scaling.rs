//! Wall-clock cost of one training step, pyramid against SVB, as the layer
//! width grows.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::SvbConfig;
use crate::error::{Error, Result};
use crate::numeric::norm2;
use crate::train::{sample_gradient, sgd_step, Activation, DenseNetwork, Loss, Network, Target, Updater};

pub const DEFAULT_SIZES: [usize; 4] = [64, 128, 256, 512];
pub const SCALING_HEADER: &str = "n,pyramid_ms,svb_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub sizes: Vec<usize>,
    /// Timed repetitions per size; the median is reported.
    pub repeats: usize,
    /// Untimed steps run first at each size.
    pub warmup: usize,
    pub learning_rate: f64,
    pub svb: SvbConfig,
    pub seed: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            sizes: DEFAULT_SIZES.to_vec(),
            repeats: 5,
            warmup: 1,
            learning_rate: 0.01,
            svb: SvbConfig::new(0.05).expect("valid epsilon"),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub pyramid_ms: f64,
    pub svb_ms: f64,
}

impl ScalingRow {
    pub fn ratio(&self) -> f64 {
        self.svb_ms / self.pyramid_ms
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn time_ms(mut step: impl FnMut() -> Result<()>, warmup: usize, repeats: usize) -> Result<f64> {
    for _ in 0..warmup {
        step()?;
    }
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        step()?;
        samples.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(median(&mut samples))
}

fn unit<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = norm2(&v);
    v.into_iter().map(|x| x / s).collect()
}

/// One forward + backward + angle update on a single `n x n` pyramid layer.
pub struct PyramidStep {
    net: Network,
    x: Vec<f64>,
    y: Vec<f64>,
    lr: f64,
}

impl PyramidStep {
    pub fn new(n: usize, lr: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = unit(n, &mut rng);
        let y = unit(n, &mut rng);
        let net = Network::random(&[n, n], Activation::Identity, false, Loss::Mse, &mut rng)?;
        Ok(Self { net, x, y, lr })
    }

    pub fn step(&mut self) -> Result<()> {
        let (_, g) = sample_gradient(&self.net, &self.x, &Target::Vector(&self.y))?;
        sgd_step(&mut self.net, &g, self.lr)
    }
}

/// The same step on an explicit `n x n` matrix, followed by the SVB projection.
pub struct SvbStep {
    net: DenseNetwork,
    x: Vec<f64>,
    y: Vec<f64>,
    lr: f64,
    svb: SvbConfig,
}

impl SvbStep {
    pub fn new(n: usize, lr: f64, svb: SvbConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = unit(n, &mut rng);
        let y = unit(n, &mut rng);
        let net = DenseNetwork::random_orthogonal(&[n, n], Activation::Identity, false, Loss::Mse, &mut rng)?;
        Ok(Self { net, x, y, lr, svb })
    }

    pub fn step(&mut self) -> Result<()> {
        let mut acc = self.net.zero_gradients();
        self.net.accumulate_gradient(&self.x, &Target::Vector(&self.y), &mut acc)?;
        self.net.update(&acc, self.lr, Updater::Svb(self.svb))
    }
}

/// Median milliseconds per step at width `n`, pyramid and SVB.
pub fn measure_size(n: usize, cfg: &ScalingConfig) -> Result<ScalingRow> {
    let seed = cfg.seed ^ n as u64;
    let mut pyramid = PyramidStep::new(n, cfg.learning_rate, seed)?;
    let pyramid_ms = time_ms(|| pyramid.step(), cfg.warmup, cfg.repeats)?;
    let mut svb = SvbStep::new(n, cfg.learning_rate, cfg.svb, seed)?;
    let svb_ms = time_ms(|| svb.step(), cfg.warmup, cfg.repeats)?;
    Ok(ScalingRow { n, pyramid_ms, svb_ms })
}

pub fn run_scaling(cfg: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    if cfg.repeats == 0 || cfg.sizes.is_empty() || cfg.sizes.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(
            "scaling needs at least one size >= 2 and one repeat".into(),
        ));
    }
    cfg.sizes.iter().map(|&n| measure_size(n, cfg)).collect()
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut s = String::from(SCALING_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.n, r.pyramid_ms, r.svb_ms));
    }
    s
}

/// `ratio(last) / ratio(first)`; above 1 when SVB falls further behind with width.
pub fn ratio_trend(rows: &[ScalingRow]) -> Option<f64> {
    Some(rows.last()?.ratio() / rows.first()?.ratio())
}
