//! Trajectory-coherent Gaussian packets for the bilinearly controlled
//! Schrödinger equation `i∂ₜψ = (−½Δ + V(x) − ⟨E(t), x⟩)ψ`, with a
//! split-step reference solver and a small-time reachability obstruction.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod error;
pub mod linalg;
pub mod obstruction;
pub mod optimize;
pub mod pde;
pub mod potentials;
pub mod riccati;
pub mod runner;
pub mod scenario;
pub mod tcs;

pub use classical::{energy, integrate_newton, ClassicalTrajectory, ControlPiece, ControlSignal, VectorFn};
pub use error::{Error, Result};
pub use pde::{ComplexField, Grid};
pub use potentials::{PotentialConfig, PotentialSpec};
pub use riccati::{compute_t_star, integrate_riccati, BandReport, RiccatiTrajectory};
pub use tcs::{constant_c_star, constant_cn, error_bound, evaluate_packet, packet_at, residual_field, WavePacket};
