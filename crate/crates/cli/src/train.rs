use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use pyramidnet_core::baselines::SvbConfig;
use pyramidnet_core::data::{
    load_mnist, mnist_dir_from_env, normalize_rows, synth_blobs, Dataset, MnistOptions, PreparedData, DATA_DIR_ENV,
};
use pyramidnet_core::train::{
    accuracy, check_arch, dense_accuracy, dense_train_baseline, train, Activation, DenseNetwork, Loss, MetricsTable,
    Network, TrainConfig, Updater,
};

use crate::config::layered;
use crate::failure::Failure;
use crate::write_output;

#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    /// Layer widths, input first [default: 4,2]
    #[arg(long, value_delimiter = ',', value_name = "WIDTHS")]
    arch: Option<Vec<usize>>,
    /// `mnist` or `synthetic` [default: synthetic]
    #[arg(long)]
    data: Option<String>,
    /// Directory with the MNIST IDX files [default: $PYRAMIDNET_DATA_DIR]
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// MNIST digits to keep, relabelled 0.. in ascending order [default: 6,9]
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<usize>>,
    /// PCA components; must equal the input width [default: input width]
    #[arg(long)]
    #[serde(alias = "pca_k")]
    pca: Option<usize>,
    /// Training samples after class filtering [default: 5000]
    #[arg(long)]
    train_size: Option<usize>,
    /// Test samples after class filtering [default: 1000]
    #[arg(long)]
    test_size: Option<usize>,
    /// Distance between the synthetic class centres [default: 4]
    #[arg(long)]
    separation: Option<f64>,
    /// `pyramid`, `svb`, `stiefel` or `plain` (the last three train dense matrices) [default: pyramid]
    #[arg(long)]
    updater: Option<String>,
    /// SVB singular-value band half-width [default: 0.05]
    #[arg(long)]
    epsilon: Option<f64>,
    /// [default: 0.1]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// [default: 10]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 50]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Also record test accuracy every this many minibatches; 0 for epoch ends only [default: 0]
    #[arg(long)]
    eval_every: Option<usize>,
    /// Seeds initialisation, shuffling and synthetic data [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden-layer activation: sigmoid, relu or identity [default: sigmoid]
    #[arg(long)]
    activation: Option<String>,
    /// Output-layer activation [default: identity]
    #[arg(long)]
    output_activation: Option<String>,
    /// `ce` (softmax cross-entropy) or `mse` [default: ce]
    #[arg(long)]
    loss: Option<String>,
    /// Drop the per-layer bias
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_bias: Option<bool>,
    /// Metrics CSV path [default: metrics.csv]
    #[arg(long, value_name = "PATH")]
    metrics: Option<PathBuf>,
    /// Write the trained model as JSON
    #[arg(long, value_name = "PATH")]
    save_model: Option<PathBuf>,
}

layered!(TrainArgs {
    arch,
    data,
    data_dir,
    classes,
    pca,
    train_size,
    test_size,
    separation,
    updater,
    epsilon,
    learning_rate,
    epochs,
    batch_size,
    eval_every,
    seed,
    activation,
    output_activation,
    loss,
    no_bias,
    metrics,
    save_model,
});

fn parse<T: std::str::FromStr>(what: &str, value: Option<String>, default: &str) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    let value = value.unwrap_or_else(|| default.to_string());
    value.parse().map_err(|e| Failure::config(format!("--{what}: {e}")))
}

enum Model {
    Pyramid(Network),
    Dense(DenseNetwork, Updater),
}

fn load_data(a: &TrainArgs, arch: &[usize], classes: &[usize], seed: u64) -> Result<PreparedData, Failure> {
    let train_size = a.train_size.unwrap_or(5000);
    let test_size = a.test_size.unwrap_or(1000);
    let width = arch[0];
    match a.data.as_deref().unwrap_or("synthetic") {
        "synthetic" => {
            if classes.len() != 2 {
                return Err(Failure::config("synthetic data has exactly two classes"));
            }
            let sep = a.separation.unwrap_or(4.0);
            let blobs = |n: usize, seed: u64| -> Result<Dataset, Failure> {
                Ok(normalize_rows(&synth_blobs(n.div_ceil(2).max(1), width, sep, seed)?)?)
            };
            Ok(PreparedData {
                train: blobs(train_size, seed)?,
                test: blobs(test_size, seed.wrapping_add(1))?,
                pca: None,
            })
        }
        "mnist" => {
            let dir = match &a.data_dir {
                Some(d) => d.clone(),
                None => mnist_dir_from_env().ok_or_else(|| {
                    Failure::data(format!("MNIST not found: pass --data-dir or set {DATA_DIR_ENV}"))
                })?,
            };
            load_mnist(&MnistOptions {
                dir,
                classes: classes.to_vec(),
                train_size,
                test_size,
                pca_k: width,
            })
            .map_err(|e| Failure::from_data("loading MNIST", e))
        }
        other => Err(Failure::config(format!("--data must be `mnist` or `synthetic`, got `{other}`"))),
    }
}

pub fn run(a: TrainArgs) -> Result<(), Failure> {
    let arch = a.arch.clone().unwrap_or_else(|| vec![4, 2]);
    check_arch(&arch).map_err(|e| Failure::config(format!("--arch: {e}")))?;
    let classes = a.classes.clone().unwrap_or_else(|| vec![6, 9]);
    let n_out = *arch.last().expect("checked arch");
    if classes.len() < 2 || classes.len() > n_out {
        return Err(Failure::config(format!(
            "{} classes do not fit {n_out} outputs (need 2 <= classes <= outputs)",
            classes.len()
        )));
    }
    if let Some(k) = a.pca {
        if k != arch[0] {
            return Err(Failure::config(format!("--pca {k} must equal the input width {}", arch[0])));
        }
    }
    let cfg = TrainConfig {
        learning_rate: a.learning_rate.unwrap_or(0.1),
        epochs: a.epochs.unwrap_or(10),
        batch_size: a.batch_size.unwrap_or(50),
        seed: a.seed.unwrap_or(0),
        shuffle: true,
        eval_every: a.eval_every.unwrap_or(0),
    };
    cfg.validate()?;
    let hidden: Activation = parse("activation", a.activation.clone(), "sigmoid")?;
    let output: Activation = parse("output-activation", a.output_activation.clone(), "identity")?;
    let loss: Loss = parse("loss", a.loss.clone(), "ce")?;
    let bias = !a.no_bias.unwrap_or(false);
    let updater_name = a.updater.clone().unwrap_or_else(|| "pyramid".into());
    let mut model = match updater_name.as_str() {
        "pyramid" => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut net = Network::random(&arch, hidden, bias, loss, &mut rng)?;
            net.layers_mut().last_mut().expect("one layer").activation = output;
            Model::Pyramid(net)
        }
        other => {
            let mut updater: Updater = other.parse().map_err(|e| Failure::config(format!("--updater: {e}")))?;
            if let Updater::Svb(_) = updater {
                updater = Updater::Svb(SvbConfig::new(a.epsilon.unwrap_or(0.05))?);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut net = DenseNetwork::random_orthogonal(&arch, hidden, bias, loss, &mut rng)?;
            net.layers.last_mut().expect("one layer").activation = output;
            Model::Dense(net, updater)
        }
    };
    let data = load_data(&a, &arch, &classes, cfg.seed)?;

    let (metrics, acc, json): (MetricsTable, f64, String) = match &mut model {
        Model::Pyramid(net) => {
            let m = train(net, &data.train, &data.test, &cfg)?;
            (m, accuracy(net, &data.test)?, serde_json::to_string_pretty(net).expect("serializable"))
        }
        Model::Dense(net, updater) => {
            let m = dense_train_baseline(net, *updater, &data.train, &data.test, &cfg)?;
            (m, dense_accuracy(net, &data.test)?, serde_json::to_string_pretty(net).expect("serializable"))
        }
    };
    let metrics_path = a.metrics.clone().unwrap_or_else(|| PathBuf::from("metrics.csv"));
    write_output(&metrics_path, &metrics.to_csv())?;
    if let Some(path) = &a.save_model {
        write_output(path, &json)?;
    }
    println!(
        "arch={} updater={updater_name} train={} test={} metrics={}",
        arch.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","),
        data.train.len(),
        data.test.len(),
        metrics_path.display()
    );
    println!("final test accuracy: {acc:.4}");
    Ok(())
}
