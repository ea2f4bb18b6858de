//! Orthogonal neural-network layers built from pyramids of planar rotations.
//!
//! The crate covers the full pipeline: the rotation schedule and its matrix
//! equivalence ([`pyramid`]), angle-space backpropagation and training
//! ([`train`]), the SVB and Stiefel comparison updaters ([`baselines`]), a
//! unary-basis statevector simulator for the quantum version of the same
//! circuits ([`qsim`]), dataset handling ([`data`]) and the per-step scaling
//! measurement ([`scaling`]).

pub mod baselines;
pub mod data;
pub mod error;
pub mod numeric;
pub mod pyramid;
pub mod qsim;
pub mod scaling;
pub mod train;

pub use error::{Error, Result};
pub use numeric::{Mat64, Vec64};
pub use pyramid::{
    angles_from_matrix, apply_rotation_pair, build_schedule, matrix_from_angles, ForwardTrace,
    GateSlot, PyramidLayer, PyramidSchedule,
};
