//! Deterministic numeric primitives shared by every stage.

mod adam;
pub mod fastmath;
mod gradcheck;
mod init;
mod matrix;
mod rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use init::xavier_init;
pub use matrix::{gemm_nn, gemm_tn, Matrix};
pub use rng::{streams, Rng};
