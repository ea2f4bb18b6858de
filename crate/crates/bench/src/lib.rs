//! Criterion benchmarks of one training update step, pyramid angles against
//! SVB on a dense matrix. Run with `cargo bench -p pyramidnet-bench`; the step
//! fixtures are `pyramidnet_core::scaling::{PyramidStep, SvbStep}`.
