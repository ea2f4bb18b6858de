use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{add_bias, argmax, check_arch, loss_and_delta, Activation, Loss, Target};
use super::trainer::{model_accuracy, run_training, MetricsTable, TrainConfig, Trainable};
use crate::baselines::{stiefel_update, svb_update, SvbConfig};
use crate::data::Dataset;
use crate::error::{dim_mismatch, Error, Result};
use crate::numeric::{random_orthogonal, Mat64, Vec64};

/// An explicit `n_out x n_in` weight matrix with optional bias and activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Mat64,
    pub bias: Option<Vec64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNetwork {
    pub layers: Vec<DenseLayer>,
    pub loss: Loss,
}

/// How the dense baseline turns a gradient into new weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Updater {
    Plain,
    Svb(SvbConfig),
    Stiefel,
}

impl std::str::FromStr for Updater {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Updater::Plain),
            "svb" => Ok(Updater::Svb(SvbConfig::default())),
            "stiefel" => Ok(Updater::Stiefel),
            other => Err(Error::InvalidArgument(format!("unknown updater `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGradients {
    pub weights: Vec<Mat64>,
    pub biases: Vec<Option<Vec64>>,
}

impl DenseNetwork {
    /// Weights are the first `n_out` rows of random orthogonal matrices.
    pub fn random_orthogonal<R: Rng + ?Sized>(arch: &[usize], activation: Activation, bias: bool, loss: Loss, rng: &mut R) -> Result<Self> {
        check_arch(arch)?;
        let layers = arch
            .windows(2)
            .map(|w| {
                let q = random_orthogonal(w[0], rng);
                DenseLayer {
                    weights: Mat64::from_fn(w[1], w[0], |r, c| q[(r, c)]),
                    bias: bias.then(|| vec![0.0; w[1]]),
                    activation,
                }
            })
            .collect();
        Ok(Self { layers, loss })
    }

    /// Dense counterpart of [`Network::classifier`](super::Network::classifier).
    pub fn classifier<R: Rng + ?Sized>(arch: &[usize], hidden: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::random_orthogonal(arch, hidden, true, Loss::SoftmaxCrossEntropy, rng)?;
        if let Some(last) = net.layers.last_mut() {
            last.activation = Activation::Identity;
        }
        Ok(net)
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.rows()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec64> {
        let mut a = x.to_vec();
        for l in &self.layers {
            let mut z = l.weights.matvec(&a)?;
            add_bias(&mut z, l.bias.as_deref());
            a = z.iter().map(|&v| l.activation.apply(v)).collect();
        }
        Ok(a)
    }

    pub fn zero_gradients(&self) -> DenseGradients {
        DenseGradients {
            weights: self.layers.iter().map(|l| Mat64::zeros(l.weights.rows(), l.weights.cols())).collect(),
            biases: self.layers.iter().map(|l| l.bias.as_ref().map(|b| vec![0.0; b.len()])).collect(),
        }
    }

    /// Loss of one sample; its gradient `∂C/∂W_jk = Δ_j a_k` is added into `acc`.
    pub fn accumulate_gradient(&self, x: &[f64], target: &Target, acc: &mut DenseGradients) -> Result<f64> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for l in &self.layers {
            let mut z = l.weights.matvec(&a)?;
            add_bias(&mut z, l.bias.as_deref());
            let next = z.iter().map(|&v| l.activation.apply(v)).collect();
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(z);
        }
        let (loss, out_delta) = loss_and_delta(self.loss, &a, target)?;
        let last = self.layers.len() - 1;
        let mut delta: Vec64 = out_delta
            .iter()
            .zip(&pre[last])
            .map(|(d, &z)| d * self.layers[last].activation.derivative(z))
            .collect();
        for l in (0..self.layers.len()).rev() {
            let gw = &mut acc.weights[l];
            for (j, dj) in delta.iter().enumerate() {
                for (g, ak) in gw.row_mut(j).iter_mut().zip(&inputs[l]) {
                    *g += dj * ak;
                }
            }
            if let Some(gb) = acc.biases[l].as_mut() {
                gb.iter_mut().zip(&delta).for_each(|(g, d)| *g += d);
            }
            if l > 0 {
                let back = self.layers[l].weights.matvec_transposed(&delta)?;
                let act = self.layers[l - 1].activation;
                delta = back.iter().zip(&pre[l - 1]).map(|(d, &z)| d * act.derivative(z)).collect();
            }
        }
        Ok(loss)
    }

    /// Applies a (mean) gradient with the chosen updater; biases take a plain step.
    pub fn update(&mut self, grads: &DenseGradients, lr: f64, updater: Updater) -> Result<()> {
        if grads.weights.len() != self.layers.len() {
            return Err(dim_mismatch("DenseNetwork::update", self.layers.len(), grads.weights.len()));
        }
        if !grads.weights.iter().all(Mat64::is_finite) {
            return Err(Error::NonFinite { context: "dense gradient" });
        }
        let mut next = Vec::with_capacity(self.layers.len());
        for (l, g) in self.layers.iter().zip(&grads.weights) {
            next.push(match updater {
                Updater::Plain => l.weights.sub(&g.scale(lr))?,
                Updater::Svb(cfg) => svb_update(&l.weights, g, lr, cfg)?,
                Updater::Stiefel => stiefel_update(&l.weights, g, lr)?,
            });
        }
        for ((l, w), gb) in self.layers.iter_mut().zip(next).zip(&grads.biases) {
            l.weights = w;
            if let (Some(b), Some(g)) = (l.bias.as_mut(), gb) {
                b.iter_mut().zip(g).for_each(|(b, g)| *b -= lr * g);
            }
        }
        Ok(())
    }
}

struct WithUpdater<'a> {
    net: &'a mut DenseNetwork,
    updater: Updater,
}

impl Trainable for WithUpdater<'_> {
    type Grad = DenseGradients;

    fn n_in(&self) -> usize {
        self.net.n_in()
    }

    fn n_out(&self) -> usize {
        self.net.n_out()
    }

    fn zero_grad(&self) -> DenseGradients {
        self.net.zero_gradients()
    }

    fn accumulate(&self, x: &[f64], label: usize, acc: &mut DenseGradients) -> Result<f64> {
        self.net.accumulate_gradient(x, &Target::Class(label), acc)
    }

    fn apply(&mut self, mut acc: DenseGradients, count: usize, lr: f64) -> Result<()> {
        let f = 1.0 / count as f64;
        for w in acc.weights.iter_mut() {
            *w = w.scale(f);
        }
        acc.biases.iter_mut().flatten().flatten().for_each(|v| *v *= f);
        self.net.update(&acc, lr, self.updater)
    }

    fn classify(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.net.predict(x)?))
    }
}

/// The same minibatch loop as [`train`](super::train) on explicit weight
/// matrices, with `updater` applied after every minibatch.
pub fn dense_train_baseline(net: &mut DenseNetwork, updater: Updater, train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<MetricsTable> {
    if updater == Updater::Stiefel {
        if let Some(l) = net.layers.iter().find(|l| !l.weights.is_square()) {
            return Err(Error::InvalidArgument(format!(
                "the Stiefel updater needs square layers, got {}x{}",
                l.weights.rows(),
                l.weights.cols()
            )));
        }
    }
    run_training(&mut WithUpdater { net, updater }, train_set, test_set, cfg)
}

pub fn dense_accuracy(net: &DenseNetwork, ds: &Dataset) -> Result<f64> {
    let mut wrapped = net.clone();
    model_accuracy(
        &WithUpdater {
            net: &mut wrapped,
            updater: Updater::Plain,
        },
        ds,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::numeric::svd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(arch: &[usize], seed: u64) -> (DenseNetwork, Dataset, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = DenseNetwork::random_orthogonal(arch, Activation::Sigmoid, false, Loss::SoftmaxCrossEntropy, &mut rng).unwrap();
        let dims = arch[0];
        (net, synth_blobs(200, dims, 6.0, seed).unwrap(), synth_blobs(100, dims, 6.0, seed + 1).unwrap())
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.5,
            epochs: 10,
            batch_size: 10,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn plain_updater_learns_blobs() {
        let (mut net, train_set, test_set) = setup(&[2, 2], 1);
        let table = dense_train_baseline(&mut net, Updater::Plain, &train_set, &test_set, &cfg()).unwrap();
        assert!(table.final_test_accuracy().unwrap() >= 0.99);
        assert_eq!(dense_accuracy(&net, &test_set).unwrap(), table.final_test_accuracy().unwrap());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = DenseNetwork::random_orthogonal(&[5, 4, 3], Activation::Sigmoid, true, Loss::SoftmaxCrossEntropy, &mut rng).unwrap();
        for l in net.layers.iter_mut() {
            l.bias = Some((0..l.weights.rows()).map(|_| rng.gen_range(-0.5..0.5)).collect());
        }
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = Target::Class(1);
        let mut g = net.zero_gradients();
        net.accumulate_gradient(&x, &target, &mut g).unwrap();
        let loss = |n: &DenseNetwork| loss_and_delta(n.loss, &n.predict(&x).unwrap(), &target).unwrap().0;
        let h = 1e-6;
        for l in 0..2 {
            let (r, c) = net.layers[l].weights.shape();
            for j in 0..r {
                for k in 0..c {
                    let (mut p, mut m) = (net.clone(), net.clone());
                    p.layers[l].weights.row_mut(j)[k] += h;
                    m.layers[l].weights.row_mut(j)[k] -= h;
                    let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                    assert!((fd - g.weights[l][(j, k)]).abs() <= 1e-8);
                }
                let (mut p, mut m) = (net.clone(), net.clone());
                p.layers[l].bias.as_mut().unwrap()[j] += h;
                m.layers[l].bias.as_mut().unwrap()[j] -= h;
                let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                assert!((fd - g.biases[l].as_ref().unwrap()[j]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn svb_updater_keeps_singular_values_in_band() {
        let (mut net, train_set, test_set) = setup(&[4, 4], 3);
        let svb = SvbConfig::new(0.05).unwrap();
        let (lo, hi) = svb.band();
        let c = TrainConfig { epochs: 1, ..cfg() };
        for seed in 0..3 {
            dense_train_baseline(&mut net, Updater::Svb(svb), &train_set, &test_set, &TrainConfig { seed, ..c.clone() }).unwrap();
            let (_, s, _) = svd(&net.layers[0].weights).unwrap();
            assert!(s.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }

    #[test]
    fn stiefel_updater_stays_orthogonal() {
        let (mut net, train_set, test_set) = setup(&[2, 2], 4);
        for i in 0..train_set.len() {
            let (x, label) = train_set.sample(i);
            let mut acc = net.zero_gradients();
            net.accumulate_gradient(x, &Target::Class(label), &mut acc).unwrap();
            net.update(&acc, 0.3, Updater::Stiefel).unwrap();
            assert!(net.layers[0].weights.orthogonality_deviation() <= 1e-8);
        }
        let table = dense_train_baseline(&mut net, Updater::Stiefel, &train_set, &test_set, &cfg()).unwrap();
        assert!(net.layers[0].weights.orthogonality_deviation() <= 1e-8);
        assert!(table.final_test_accuracy().unwrap() >= 0.95, "{:?}", table.epoch_accuracies());
    }

    #[test]
    fn stiefel_rejects_rectangular_layers() {
        let (mut net, train_set, test_set) = setup(&[4, 2], 5);
        assert!(dense_train_baseline(&mut net, Updater::Stiefel, &train_set, &test_set, &cfg()).is_err());
    }

    #[test]
    fn updater_names() {
        assert_eq!("stiefel".parse::<Updater>().unwrap(), Updater::Stiefel);
        assert_eq!("svb".parse::<Updater>().unwrap(), Updater::Svb(SvbConfig { epsilon: 0.0 }));
        assert!("adam".parse::<Updater>().is_err());
    }
}
