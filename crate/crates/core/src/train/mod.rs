//! Networks of pyramid layers, angle-space backpropagation and the
//! minibatch trainers (angle SGD and the dense-matrix baseline).

mod backprop;
mod dense;
mod network;
mod trainer;

pub use backprop::{
    layer_backward, layer_backward_full, network_backward, sample_gradient, sgd_step, BackwardTrace, Gradients,
    LayerBackward,
};
pub use dense::{dense_accuracy, dense_train_baseline, DenseGradients, DenseLayer, DenseNetwork, Updater};
pub use network::{
    argmax, check_arch, loss_and_delta, network_forward, Activation, ForwardPass, Loss, NetLayer, Network, Target,
};
pub use trainer::{accuracy, train, MetricsRow, MetricsTable, TrainConfig, METRICS_HEADER};
