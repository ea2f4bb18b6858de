use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backprop::{sample_gradient, sgd_step, Gradients};
use super::network::{Network, Target};
use crate::data::Dataset;
use crate::error::{dim_mismatch, Error, Result};

pub const METRICS_HEADER: &str = "epoch,minibatch,train_loss,test_accuracy,wall_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Also evaluate test accuracy every this many minibatches (0: only at
    /// the end of each epoch).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 10,
            batch_size: 50,
            seed: 0,
            shuffle: true,
            eval_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub minibatch: usize,
    /// Mean loss over the minibatch, measured before its update.
    pub train_loss: f64,
    pub test_accuracy: Option<f64>,
    /// Milliseconds since training started.
    pub wall_ms: f64,
}

/// Per-minibatch training record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    /// Test accuracy of the last evaluated row.
    pub fn final_test_accuracy(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.test_accuracy)
    }

    /// Test accuracy recorded at the end of each epoch, in order.
    pub fn epoch_accuracies(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            let last_of_epoch = self.rows.get(i + 1).map_or(true, |n| n.epoch != r.epoch);
            if last_of_epoch {
                if let Some(a) = r.test_accuracy {
                    out.push(a);
                }
            }
        }
        out
    }

    /// Copy with every `wall_ms` zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        t.rows.iter_mut().for_each(|r| r.wall_ms = 0.0);
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let acc = r.test_accuracy.map(|a| a.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{:.3}", r.epoch, r.minibatch, r.train_loss, acc, r.wall_ms).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == METRICS_HEADER => {}
            other => {
                return Err(Error::Csv(format!(
                    "expected header `{METRICS_HEADER}`, found `{}`",
                    other.unwrap_or("")
                )))
            }
        }
        let bad = |line: usize, what: &str| Error::Csv(format!("line {}: bad {what}", line + 2));
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(bad(i, "field count"));
            }
            rows.push(MetricsRow {
                epoch: f[0].parse().map_err(|_| bad(i, "epoch"))?,
                minibatch: f[1].parse().map_err(|_| bad(i, "minibatch"))?,
                train_loss: f[2].parse().map_err(|_| bad(i, "train_loss"))?,
                test_accuracy: if f[3].is_empty() {
                    None
                } else {
                    Some(f[3].parse().map_err(|_| bad(i, "test_accuracy"))?)
                },
                wall_ms: f[4].parse().map_err(|_| bad(i, "wall_ms"))?,
            });
        }
        Ok(Self { rows })
    }
}

/// The pieces of a model the shared minibatch loop needs.
pub(crate) trait Trainable {
    type Grad;

    fn n_in(&self) -> usize;
    fn n_out(&self) -> usize;
    fn zero_grad(&self) -> Self::Grad;
    /// Adds one sample's gradient into `acc` and returns its loss.
    fn accumulate(&self, x: &[f64], label: usize, acc: &mut Self::Grad) -> Result<f64>;
    /// Applies the summed gradient of a minibatch of `count` samples.
    fn apply(&mut self, acc: Self::Grad, count: usize, lr: f64) -> Result<()>;
    fn classify(&self, x: &[f64]) -> Result<usize>;
}

impl Trainable for Network {
    type Grad = Gradients;

    fn n_in(&self) -> usize {
        Network::n_in(self)
    }

    fn n_out(&self) -> usize {
        Network::n_out(self)
    }

    fn zero_grad(&self) -> Gradients {
        Gradients::zeros_like(self)
    }

    fn accumulate(&self, x: &[f64], label: usize, acc: &mut Gradients) -> Result<f64> {
        let (loss, g) = sample_gradient(self, x, &Target::Class(label))?;
        acc.accumulate(&g);
        Ok(loss)
    }

    fn apply(&mut self, mut acc: Gradients, count: usize, lr: f64) -> Result<()> {
        acc.scale(1.0 / count as f64);
        sgd_step(self, &acc, lr)
    }

    fn classify(&self, x: &[f64]) -> Result<usize> {
        Network::classify(self, x)
    }
}

fn check_dataset<M: Trainable>(model: &M, ds: &Dataset, name: &'static str) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset { context: name });
    }
    if ds.dims() != model.n_in() {
        return Err(dim_mismatch(name, model.n_in(), ds.dims()));
    }
    if let Some(&bad) = ds.labels.iter().find(|&&l| l >= model.n_out()) {
        return Err(Error::ClassOutOfRange {
            index: bad,
            classes: model.n_out(),
        });
    }
    Ok(())
}

pub(crate) fn model_accuracy<M: Trainable>(model: &M, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset { context: "accuracy" });
    }
    let mut hits = 0usize;
    for i in 0..ds.len() {
        let (x, label) = ds.sample(i);
        if model.classify(x)? == label {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}

/// Fraction of samples whose arg-max output equals the label.
pub fn accuracy(net: &Network, ds: &Dataset) -> Result<f64> {
    model_accuracy(net, ds)
}

pub(crate) fn run_training<M: Trainable>(model: &mut M, train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<MetricsTable> {
    cfg.validate()?;
    check_dataset(model, train_set, "training set")?;
    check_dataset(model, test_set, "test set")?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut table = MetricsTable::default();

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let batches = order.len().div_ceil(cfg.batch_size);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut acc = model.zero_grad();
            let mut loss = 0.0;
            for &i in batch {
                let (x, label) = train_set.sample(i);
                loss += model.accumulate(x, label, &mut acc)?;
            }
            model.apply(acc, batch.len(), cfg.learning_rate)?;
            let minibatch = b + 1;
            let evaluate = minibatch == batches || (cfg.eval_every > 0 && minibatch % cfg.eval_every == 0);
            let test_accuracy = if evaluate {
                Some(model_accuracy(model, test_set)?)
            } else {
                None
            };
            table.rows.push(MetricsRow {
                epoch,
                minibatch,
                train_loss: loss / batch.len() as f64,
                test_accuracy,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    Ok(table)
}

/// Minibatch SGD on the angles (and biases) of `net`.
pub fn train(net: &mut Network, train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<MetricsTable> {
    run_training(net, train_set, test_set, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{normalize_rows, synth_blobs};
    use crate::train::network::{Activation, Loss};
    use rand_chacha::ChaCha8Rng;

    fn blobs(seed: u64) -> (Dataset, Dataset) {
        let train = synth_blobs(200, 2, 6.0, seed).unwrap();
        let test = synth_blobs(100, 2, 6.0, seed + 100).unwrap();
        (train, test)
    }

    fn net(arch: &[usize], seed: u64) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Network::random(arch, Activation::Sigmoid, false, Loss::SoftmaxCrossEntropy, &mut rng).unwrap()
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (train_set, test_set) = blobs(1);
        let mut n = net(&[2, 2], 3);
        let cfg = TrainConfig {
            learning_rate: 0.5,
            epochs: 10,
            batch_size: 10,
            ..TrainConfig::default()
        };
        let table = train(&mut n, &train_set, &test_set, &cfg).unwrap();
        assert!(table.final_test_accuracy().unwrap() >= 0.99, "{:?}", table.epoch_accuracies());
        assert_eq!(table.epoch_accuracies().len(), 10);
        assert_eq!(table.rows.len(), 10 * 40);
    }

    #[test]
    fn zero_learning_rate_freezes_metrics() {
        let (train_set, test_set) = blobs(2);
        let mut n = net(&[2, 2], 4);
        let before = n.clone();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            shuffle: false,
            ..TrainConfig::default()
        };
        let table = train(&mut n, &train_set, &test_set, &cfg).unwrap();
        assert_eq!(n, before);
        let per_epoch = table.rows.len() / 3;
        for r in per_epoch..table.rows.len() {
            assert_eq!(table.rows[r].train_loss, table.rows[r % per_epoch].train_loss);
            assert_eq!(table.rows[r].test_accuracy, table.rows[r % per_epoch].test_accuracy);
        }
    }

    #[test]
    fn same_seed_same_metrics() {
        let (train_set, test_set) = blobs(3);
        let train_set = normalize_rows(&train_set).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            eval_every: 3,
            seed: 77,
            ..TrainConfig::default()
        };
        let (mut a, mut b) = (net(&[2, 2], 5), net(&[2, 2], 5));
        let ta = train(&mut a, &train_set, &test_set, &cfg).unwrap();
        let tb = train(&mut b, &train_set, &test_set, &cfg).unwrap();
        assert_eq!(ta.without_timing(), tb.without_timing());
        assert_eq!(a, b);
        let mut c = net(&[2, 2], 5);
        let tc = train(&mut c, &train_set, &test_set, &TrainConfig { seed: 78, ..cfg }).unwrap();
        assert_ne!(ta.without_timing(), tc.without_timing());
    }

    #[test]
    fn eval_every_marks_rows() {
        let (train_set, test_set) = blobs(4);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 40,
            eval_every: 4,
            ..TrainConfig::default()
        };
        let table = train(&mut net(&[2, 2], 6), &train_set, &test_set, &cfg).unwrap();
        let marked: Vec<usize> = table
            .rows
            .iter()
            .filter(|r| r.test_accuracy.is_some())
            .map(|r| r.minibatch)
            .collect();
        assert_eq!(marked, vec![4, 8, 10]);
    }

    #[test]
    fn csv_roundtrip() {
        let (train_set, test_set) = blobs(5);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let table = train(&mut net(&[2, 2], 7), &train_set, &test_set, &cfg).unwrap();
        let text = table.to_csv();
        assert!(text.starts_with("epoch,minibatch,train_loss,test_accuracy,wall_ms\n"));
        let back = MetricsTable::from_csv(&text).unwrap();
        assert_eq!(back.without_timing(), table.without_timing());
        assert!(MetricsTable::from_csv("epoch,loss\n").is_err());
        assert!(MetricsTable::from_csv(&format!("{METRICS_HEADER}\n1,1,x,,0\n")).is_err());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let (train_set, test_set) = blobs(6);
        let mut n = net(&[2, 2], 8);
        let empty = Dataset::new(crate::numeric::Mat64::zeros(0, 2), vec![]).unwrap();
        assert!(matches!(
            train(&mut n, &empty, &test_set, &TrainConfig::default()),
            Err(Error::EmptyDataset { .. })
        ));
        let wide = synth_blobs(5, 3, 1.0, 0).unwrap();
        assert!(train(&mut n, &wide, &test_set, &TrainConfig::default()).is_err());
        let bad_cfg = TrainConfig {
            learning_rate: f64::NAN,
            ..TrainConfig::default()
        };
        assert!(train(&mut n, &train_set, &test_set, &bad_cfg).is_err());
        let mut three = train_set.clone();
        three.labels[0] = 2;
        assert!(matches!(
            train(&mut n, &three, &test_set, &TrainConfig::default()),
            Err(Error::ClassOutOfRange { index: 2, .. })
        ));
    }
}
