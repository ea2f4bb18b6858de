use super::network::{loss_and_delta, network_forward, ForwardPass, Network, Target};
use crate::error::{dim_mismatch, Error, Result};
use crate::numeric::Vec64;
use crate::pyramid::{ForwardTrace, PyramidLayer};

/// Inner errors `δ^0 ..= δ^T`, aligned with the inner layers of a
/// [`ForwardTrace`].
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardTrace {
    pub inner_errors: Vec<Vec64>,
}

/// Result of one layer's backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBackward {
    pub angle_grads: Vec64,
    /// `δ^0`, the error with respect to the layer input.
    pub delta_in: Vec64,
    pub trace: Option<BackwardTrace>,
    /// Gate evaluations performed: one for the angle gradient and one for
    /// the transposed rotation, per gate.
    pub gate_visits: usize,
}

fn check_trace(layer: &PyramidLayer, trace: &ForwardTrace) -> Result<()> {
    let steps = layer.schedule().timestep_count() + 1;
    if trace.inner_layers.len() != steps {
        return Err(dim_mismatch("layer_backward trace length", steps, trace.inner_layers.len()));
    }
    if let Some(bad) = trace.inner_layers.iter().find(|z| z.len() != layer.n_in()) {
        return Err(dim_mismatch("layer_backward inner layer", layer.n_in(), bad.len()));
    }
    Ok(())
}

/// Backpropagates `delta_out` through one pyramid layer, timestep by timestep.
pub fn layer_backward_full(layer: &PyramidLayer, trace: &ForwardTrace, delta_out: &[f64], keep_trace: bool) -> Result<LayerBackward> {
    check_trace(layer, trace)?;
    if delta_out.len() != layer.n_out() {
        return Err(dim_mismatch("layer_backward delta", layer.n_out(), delta_out.len()));
    }
    let schedule = layer.schedule();
    let slots = schedule.slots();
    let angles = layer.angles();
    let mut delta = delta_out.to_vec();
    // discarded wires carry no loss
    delta.resize(layer.n_in(), 0.0);
    let mut errors = keep_trace.then(|| vec![delta.clone()]);
    let mut grads = vec![0.0; slots.len()];
    let mut visits = 0;

    for (k, step) in schedule.timesteps().enumerate().rev() {
        let zeta = &trace.inner_layers[k];
        for g in step.clone() {
            let i = slots[g].wire;
            let (s, c) = angles[g].sin_cos();
            grads[g] = delta[i] * (-s * zeta[i] + c * zeta[i + 1]) + delta[i + 1] * (-c * zeta[i] - s * zeta[i + 1]);
            visits += 1;
        }
        for g in step {
            let i = slots[g].wire;
            let (s, c) = angles[g].sin_cos();
            let (di, dj) = (delta[i], delta[i + 1]);
            delta[i] = c * di - s * dj;
            delta[i + 1] = s * di + c * dj;
            visits += 1;
        }
        if let Some(e) = errors.as_mut() {
            e.push(delta.clone());
        }
    }
    let trace = errors.map(|mut inner_errors| {
        inner_errors.reverse();
        BackwardTrace { inner_errors }
    });
    Ok(LayerBackward {
        angle_grads: grads,
        delta_in: delta,
        trace,
        gate_visits: visits,
    })
}

/// Angle gradients and input error of one layer.
pub fn layer_backward(layer: &PyramidLayer, trace: &ForwardTrace, delta_out: &[f64]) -> Result<(Vec64, Vec64)> {
    let b = layer_backward_full(layer, trace, delta_out, false)?;
    Ok((b.angle_grads, b.delta_in))
}

/// Per-layer angle and bias gradients of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub angles: Vec<Vec64>,
    pub biases: Vec<Option<Vec64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            angles: net.layers().iter().map(|l| vec![0.0; l.pyramid.angles().len()]).collect(),
            biases: net.layers().iter().map(|l| l.bias.as_ref().map(|b| vec![0.0; b.len()])).collect(),
        }
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.angles
            .iter_mut()
            .flatten()
            .chain(self.biases.iter_mut().flatten().flatten())
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.angles.iter().flatten().chain(self.biases.iter().flatten().flatten())
    }

    /// `self += other`; shapes must agree.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gradients from a recorded forward pass and `∂C/∂a^L`.
pub fn network_backward(net: &Network, pass: &ForwardPass, output_delta: &[f64]) -> Result<Gradients> {
    let layers = net.layers();
    if pass.traces.len() != layers.len() {
        return Err(dim_mismatch("network_backward", layers.len(), pass.traces.len()));
    }
    let last = layers.len() - 1;
    if output_delta.len() != layers[last].n_out() {
        return Err(dim_mismatch("network_backward delta", layers[last].n_out(), output_delta.len()));
    }
    let mut grads = Gradients::zeros_like(net);
    let mut delta: Vec64 = output_delta
        .iter()
        .zip(&pass.pre_activations[last])
        .map(|(d, &z)| d * layers[last].activation.derivative(z))
        .collect();
    for l in (0..layers.len()).rev() {
        if let Some(b) = grads.biases[l].as_mut() {
            b.copy_from_slice(&delta);
        }
        let (angle_grads, delta_in) = layer_backward(&layers[l].pyramid, &pass.traces[l], &delta)?;
        grads.angles[l] = angle_grads;
        if l > 0 {
            let act = layers[l - 1].activation;
            delta = delta_in
                .iter()
                .zip(&pass.pre_activations[l - 1])
                .map(|(d, &z)| d * act.derivative(z))
                .collect();
        }
    }
    Ok(grads)
}

/// Loss and gradients for one sample.
pub fn sample_gradient(net: &Network, x: &[f64], target: &Target) -> Result<(f64, Gradients)> {
    let pass = network_forward(net, x)?;
    let (loss, delta) = loss_and_delta(net.loss, pass.output(), target)?;
    Ok((loss, network_backward(net, &pass, &delta)?))
}

/// `θ ← θ - lr ∂C/∂θ` and `b ← b - lr ∂C/∂b`. Nothing is changed when any
/// gradient is non-finite.
pub fn sgd_step(net: &mut Network, grads: &Gradients, lr: f64) -> Result<()> {
    if grads.angles.len() != net.layers().len() || grads.biases.len() != net.layers().len() {
        return Err(dim_mismatch("sgd_step layers", net.layers().len(), grads.angles.len()));
    }
    for (l, (a, b)) in net.layers().iter().zip(grads.angles.iter().zip(&grads.biases)) {
        if a.len() != l.pyramid.angles().len() {
            return Err(dim_mismatch("sgd_step angles", l.pyramid.angles().len(), a.len()));
        }
        if b.as_ref().map(|b| b.len()) != l.bias.as_ref().map(|b| b.len()) {
            return Err(Error::InvalidArgument("sgd_step bias gradient does not match the network".into()));
        }
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite { context: "gradient" });
    }
    for (l, (a, b)) in net.layers_mut().iter_mut().zip(grads.angles.iter().zip(&grads.biases)) {
        l.pyramid.descend(a, lr)?;
        if let (Some(bias), Some(g)) = (l.bias.as_mut(), b) {
            bias.iter_mut().zip(g).for_each(|(b, g)| *b -= lr * g);
        }
    }
    Ok(())
}
