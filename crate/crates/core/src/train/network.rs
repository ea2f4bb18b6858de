use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::numeric::Vec64;
use crate::pyramid::{ForwardTrace, PyramidLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// `σ'(z)`. The ReLU derivative at zero is taken as zero.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = self.apply(z);
                s * (1.0 - s)
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    #[default]
    SoftmaxCrossEntropy,
    /// `½ Σ (o - t)²`
    Mse,
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax-cross-entropy" | "ce" => Ok(Loss::SoftmaxCrossEntropy),
            "mse" => Ok(Loss::Mse),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

/// Training target: a class index (one-hot) or an explicit vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Target<'a> {
    Class(usize),
    Vector(&'a [f64]),
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

/// Loss value and its gradient with respect to `output`.
///
/// For softmax cross-entropy with a vector target, the target is read as a
/// probability distribution.
pub fn loss_and_delta(loss: Loss, output: &[f64], target: &Target) -> Result<(f64, Vec64)> {
    let n = output.len();
    let dense;
    let t: &[f64] = match *target {
        Target::Class(c) => {
            if c >= n {
                return Err(Error::ClassOutOfRange { index: c, classes: n });
            }
            let mut v = vec![0.0; n];
            v[c] = 1.0;
            dense = v;
            &dense
        }
        Target::Vector(t) => {
            if t.len() != n {
                return Err(dim_mismatch("loss_and_delta", n, t.len()));
            }
            t
        }
    };
    match loss {
        Loss::Mse => {
            let delta: Vec64 = output.iter().zip(t).map(|(o, t)| o - t).collect();
            let value = 0.5 * delta.iter().map(|d| d * d).sum::<f64>();
            Ok((value, delta))
        }
        Loss::SoftmaxCrossEntropy => {
            let m = output.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_z = m + output.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            let value = output
                .iter()
                .zip(t)
                .filter(|(_, &t)| t != 0.0)
                .map(|(o, t)| -t * (o - log_z))
                .sum();
            let delta = softmax(output).into_iter().zip(t).map(|(p, t)| p - t).collect();
            Ok((value, delta))
        }
    }
}

/// Index of the largest entry (first one on ties).
pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

/// A pyramid layer followed by an optional bias and an activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetLayer {
    pub pyramid: PyramidLayer,
    #[serde(default)]
    pub bias: Option<Vec64>,
    #[serde(default)]
    pub activation: Activation,
}

impl NetLayer {
    pub fn n_in(&self) -> usize {
        self.pyramid.n_in()
    }

    pub fn n_out(&self) -> usize {
        self.pyramid.n_out()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr")]
pub struct Network {
    layers: Vec<NetLayer>,
    pub loss: Loss,
}

#[derive(Deserialize)]
struct NetworkRepr {
    layers: Vec<NetLayer>,
    #[serde(default)]
    loss: Loss,
}

impl TryFrom<NetworkRepr> for Network {
    type Error = Error;

    fn try_from(r: NetworkRepr) -> Result<Self> {
        Network::new(r.layers, r.loss)
    }
}

/// Checks an architecture such as `[8, 4, 2]`: at least two widths, each
/// layer narrowing or keeping the width, at least two input wires per layer.
pub fn check_arch(arch: &[usize]) -> Result<()> {
    if arch.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "an architecture needs at least two widths, got {arch:?}"
        )));
    }
    for w in arch.windows(2) {
        if w[1] < 1 || w[1] > w[0] || w[0] < 2 {
            return Err(Error::InvalidShape { n_in: w[0], n_out: w[1] });
        }
    }
    Ok(())
}

impl Network {
    pub fn new(layers: Vec<NetLayer>, loss: Loss) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(dim_mismatch("Network layer chain", pair[0].n_out(), pair[1].n_in()));
            }
        }
        for l in &layers {
            if let Some(b) = &l.bias {
                if b.len() != l.n_out() {
                    return Err(dim_mismatch("Network bias", l.n_out(), b.len()));
                }
            }
        }
        Ok(Self { layers, loss })
    }

    /// Random angles for every layer, zero biases when `bias` is set.
    pub fn random<R: Rng + ?Sized>(arch: &[usize], activation: Activation, bias: bool, loss: Loss, rng: &mut R) -> Result<Self> {
        check_arch(arch)?;
        let layers = arch
            .windows(2)
            .map(|w| {
                Ok(NetLayer {
                    pyramid: PyramidLayer::random(w[0], w[1], rng)?,
                    bias: bias.then(|| vec![0.0; w[1]]),
                    activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, loss)
    }

    /// Classification net: `hidden` after every layer but the last, identity
    /// logits at the output, biases, softmax cross-entropy.
    pub fn classifier<R: Rng + ?Sized>(arch: &[usize], hidden: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::random(arch, hidden, true, Loss::SoftmaxCrossEntropy, rng)?;
        if let Some(last) = net.layers.last_mut() {
            last.activation = Activation::Identity;
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[NetLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [NetLayer] {
        &mut self.layers
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    /// Layer widths, input first.
    pub fn arch(&self) -> Vec<usize> {
        std::iter::once(self.n_in()).chain(self.layers.iter().map(|l| l.n_out())).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.pyramid.angles().len() + l.bias.as_ref().map_or(0, |b| b.len()))
            .sum()
    }

    /// Output without recording traces.
    pub fn predict(&self, x: &[f64]) -> Result<Vec64> {
        let mut a = x.to_vec();
        for l in &self.layers {
            let (mut z, _) = l.pyramid.forward(&a, false)?;
            add_bias(&mut z, l.bias.as_deref());
            z.iter_mut().for_each(|v| *v = l.activation.apply(*v));
            a = z;
        }
        Ok(a)
    }

    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict(x)?))
    }
}

pub(crate) fn add_bias(z: &mut [f64], bias: Option<&[f64]>) {
    if let Some(b) = bias {
        z.iter_mut().zip(b).for_each(|(z, b)| *z += b);
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub traces: Vec<ForwardTrace>,
    /// `z^ℓ`, before the activation.
    pub pre_activations: Vec<Vec64>,
    /// `a^ℓ = σ(z^ℓ)`; the last one is the network output.
    pub post_activations: Vec<Vec64>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.post_activations.last().expect("at least one layer")
    }
}

pub fn network_forward(net: &Network, x: &[f64]) -> Result<ForwardPass> {
    let count = net.layers.len();
    let mut pass = ForwardPass {
        traces: Vec::with_capacity(count),
        pre_activations: Vec::with_capacity(count),
        post_activations: Vec::with_capacity(count),
    };
    let mut a = x.to_vec();
    for l in &net.layers {
        let (mut z, trace) = l.pyramid.forward(&a, true)?;
        add_bias(&mut z, l.bias.as_deref());
        a = z.iter().map(|&v| l.activation.apply(v)).collect();
        pass.traces.push(trace.expect("trace requested"));
        pass.pre_activations.push(z);
        pass.post_activations.push(a.clone());
    }
    Ok(pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyramid::matrix_from_angles;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    fn single(layer: PyramidLayer, activation: Activation) -> Network {
        Network::new(
            vec![NetLayer {
                pyramid: layer,
                bias: None,
                activation,
            }],
            Loss::Mse,
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = single(PyramidLayer::identity(5, 5).unwrap(), Activation::Identity);
        let x = [0.3, -1.0, 2.0, 0.0, 5.5];
        assert_eq!(network_forward(&net, &x).unwrap().output(), &x);
    }

    #[test]
    fn quarter_turn_on_two_wires() {
        let net = single(PyramidLayer::new(2, 2, vec![FRAC_PI_2]).unwrap(), Activation::Identity);
        let out = net.predict(&[1.0, 0.0]).unwrap();
        assert!(out[0].abs() < 1e-15 && (out[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn forward_matches_dense_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = Network::random(&[4, 4, 2], Activation::Sigmoid, true, Loss::Mse, &mut rng).unwrap();
        for l in net.layers_mut() {
            l.bias = Some((0..l.n_out()).map(|_| rng.gen_range(-0.5..0.5)).collect());
        }
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = x.clone();
        for l in net.layers() {
            let w = matrix_from_angles(&l.pyramid);
            let mut z = vec![0.0; w.rows()];
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = (0..w.cols()).map(|k| w[(j, k)] * a[k]).sum::<f64>() + l.bias.as_ref().unwrap()[j];
            }
            a = z.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        }
        let pass = network_forward(&net, &x).unwrap();
        assert!(crate::numeric::max_abs_diff(pass.output(), &a) <= 1e-10);
        assert_eq!(pass.traces.len(), 2);
        assert_eq!(net.predict(&x).unwrap(), pass.output());
    }

    #[test]
    fn chain_violation_is_error() {
        let layers = vec![
            NetLayer {
                pyramid: PyramidLayer::identity(4, 3).unwrap(),
                bias: None,
                activation: Activation::Identity,
            },
            NetLayer {
                pyramid: PyramidLayer::identity(4, 2).unwrap(),
                bias: None,
                activation: Activation::Identity,
            },
        ];
        assert!(matches!(Network::new(layers, Loss::Mse), Err(Error::DimensionMismatch { .. })));
        let bad_bias = vec![NetLayer {
            pyramid: PyramidLayer::identity(3, 2).unwrap(),
            bias: Some(vec![0.0; 3]),
            activation: Activation::Identity,
        }];
        assert!(Network::new(bad_bias, Loss::Mse).is_err());
    }

    #[test]
    fn arch_checks() {
        assert!(check_arch(&[4]).is_err());
        assert!(check_arch(&[4, 5]).is_err());
        assert!(check_arch(&[1, 1]).is_err());
        assert!(check_arch(&[16, 16, 4]).is_ok());
    }

    #[test]
    fn mse_at_target_is_zero() {
        let (l, d) = loss_and_delta(Loss::Mse, &[0.2, 0.7], &Target::Vector(&[0.2, 0.7])).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(d, vec![0.0, 0.0]);
    }

    #[test]
    fn softmax_symmetric_case() {
        let (l, d) = loss_and_delta(Loss::SoftmaxCrossEntropy, &[0.0, 0.0], &Target::Class(0)).unwrap();
        assert!((l - LN_2).abs() < 1e-15);
        assert_eq!(d, vec![-0.5, 0.5]);
    }

    #[test]
    fn losses_match_scalar_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let o: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let c = rng.gen_range(0..5);
            let (l, d) = loss_and_delta(Loss::SoftmaxCrossEntropy, &o, &Target::Class(c)).unwrap();
            let denom: f64 = o.iter().map(|v| v.exp()).sum();
            assert!((l - (denom.ln() - o[c])).abs() <= 1e-12);
            for j in 0..5 {
                let expect = o[j].exp() / denom - if j == c { 1.0 } else { 0.0 };
                assert!((d[j] - expect).abs() <= 1e-12);
            }
            let (l, d) = loss_and_delta(Loss::Mse, &o, &Target::Class(c)).unwrap();
            let mut expect = 0.0;
            for j in 0..5 {
                let t = if j == c { 1.0 } else { 0.0 };
                expect += 0.5 * (o[j] - t) * (o[j] - t);
                assert!((d[j] - (o[j] - t)).abs() <= 1e-12);
            }
            assert!((l - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn class_out_of_range() {
        assert!(matches!(
            loss_and_delta(Loss::Mse, &[0.0, 1.0], &Target::Class(2)),
            Err(Error::ClassOutOfRange { index: 2, classes: 2 })
        ));
        assert!(loss_and_delta(Loss::Mse, &[0.0, 1.0], &Target::Vector(&[1.0])).is_err());
    }

    #[test]
    fn activation_derivatives() {
        for z in [-2.0, -0.1, 0.3, 1.7] {
            for act in [Activation::Sigmoid, Activation::Identity, Activation::Relu] {
                let h = 1e-6;
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!((fd - act.derivative(z)).abs() < 1e-8);
            }
        }
        assert_eq!("relu".parse::<Activation>().unwrap(), Activation::Relu);
        assert!("tanh".parse::<Activation>().is_err());
    }

    #[test]
    fn network_serde_roundtrip_validates() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let net = Network::random(&[6, 4, 2], Activation::Relu, true, Loss::SoftmaxCrossEntropy, &mut rng).unwrap();
        let text = serde_json::to_string(&net).unwrap();
        assert_eq!(serde_json::from_str::<Network>(&text).unwrap(), net);
        let broken = text.replacen("\"n_in\":4", "\"n_in\":5", 1);
        assert!(serde_json::from_str::<Network>(&broken).is_err());
    }
}
