//! Statevector simulation of unary-basis circuits: vector loaders, RBS
//! pyramids, shot sampling with bit-flip noise, post-selection onto unary
//! outcomes and the two tomography procedures that recover signed outputs.

mod state;
mod tomography;
mod verify;

pub use state::{
    load_angles, load_vector, unary_submatrix, unary_submatrix_with_leakage, LoaderAngles, StateVector,
    LOADER_NORM_TOL, LOADER_TAIL_EPS, MAX_QUBITS, MAX_SUBMATRIX_WIRES,
};
pub use tomography::{
    estimate_magnitudes, magnitudes_from_counts, mitigate_unary, multilayer_quantum_inference,
    quantum_classical_gap, sample_shots, tomography_ancilla, tomography_pairwise, Counts, Mitigated, NoiseModel,
    Shots, TomographyConfig, TomographyMethod, ANALYTIC_ZERO,
};
pub use verify::{verify_suite, CheckResult, VerifyOptions};
