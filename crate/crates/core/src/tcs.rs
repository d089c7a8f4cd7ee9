//! Trajectory-coherent states.
//!
//! A packet is the Gaussian
//!
//! ```text
//! ψ̃(t,x) = b^{N/4}/C_N · exp( i·S(t,x) + (i/2)⟨Q(x−x_c), x−x_c⟩
//!                             + i∫⟨x_c,E⟩ − ½∫Tr Q )
//! ```
//!
//! with `S(t,x) = ∫(½‖ẋ_c‖² − V(x_c)) + ⟨ẋ_c, x−x_c⟩`. It solves the
//! Schrödinger equation exactly when V is quadratic and up to the residual
//! `r = −(V − T₂V)ψ̃` otherwise, where `T₂V` is the second-order Taylor
//! polynomial of V at `x_c`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::classical::ClassicalTrajectory;
use crate::error::{Error, Result};
use crate::pde::{ComplexField, Grid};
use crate::potentials::PotentialSpec;
use crate::riccati::RiccatiTrajectory;

/// `C_N = (∫ e^{−‖y‖²} dy)^{1/2} = π^{N/4}`.
pub fn constant_cn(dim: usize) -> f64 {
    PI.powf(dim as f64 / 4.0)
}

/// `C_* = (1/(3!·C_N))·(∫ ‖y‖⁶ e^{−‖y‖²} dy)^{1/2} = (1/6)·√(N(N+2)(N+4)/8)`.
pub fn constant_c_star(dim: usize) -> f64 {
    let n = dim as f64;
    (n * (n + 2.0) * (n + 4.0) / 8.0).sqrt() / 6.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub dim: usize,
    pub b: f64,
    pub t: f64,
    pub x_c: DVector<f64>,
    pub v_c: DVector<f64>,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub action_free: f64,
    pub action_control: f64,
    pub int_tr_q1: f64,
    pub int_tr_q2: f64,
}

impl WavePacket {
    /// The initial state `ψ₀` as a packet.
    pub fn initial(b: f64, x0: DVector<f64>, v0: DVector<f64>) -> Self {
        let n = x0.len();
        Self {
            dim: n,
            b,
            t: 0.0,
            x_c: x0,
            v_c: v0,
            q1: DMatrix::zeros(n, n),
            q2: DMatrix::identity(n, n) * b,
            action_free: 0.0,
            action_control: 0.0,
            int_tr_q1: 0.0,
            int_tr_q2: 0.0,
        }
    }

    /// Closed-form L² norm `b^{N/4}·e^{−½∫Tr Q₁}/det(Q₂)^{1/4}`.
    pub fn analytic_norm(&self) -> f64 {
        self.b.powf(self.dim as f64 / 4.0) * (-0.5 * self.int_tr_q1).exp() / self.q2.determinant().powf(0.25)
    }

    fn displacement(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dim, x.iter().zip(self.x_c.iter()).map(|(a, c)| a - c))
    }

    /// `ψ̃(t, x)` at one point.
    pub fn value_at(&self, x: &[f64]) -> Complex64 {
        let d = self.displacement(x);
        let q1d = (&self.q1 * &d).dot(&d);
        let q2d = (&self.q2 * &d).dot(&d);
        let phase = self.action_free + self.v_c.dot(&d) + 0.5 * q1d + self.action_control - 0.5 * self.int_tr_q2;
        let log_amp = -0.5 * q2d - 0.5 * self.int_tr_q1;
        let pref = self.b.powf(self.dim as f64 / 4.0) / constant_cn(self.dim);
        Complex64::from_polar(pref * log_amp.exp(), phase)
    }

    /// `|ψ̃|² = det(Q₂)^{1/2}/C_N² · e^{−⟨Q₂(x−x_c), x−x_c⟩}`, which relies on the
    /// determinant identity.
    pub fn modulus_sq_at(&self, x: &[f64]) -> f64 {
        let d = self.displacement(x);
        let cn = constant_cn(self.dim);
        self.q2.determinant().sqrt() / (cn * cn) * (-(&self.q2 * &d).dot(&d)).exp()
    }
}

/// Assembles the packet at sample `i` of the two trajectories.
pub fn packet_at(traj: &ClassicalTrajectory, ric: &RiccatiTrajectory, i: usize) -> Result<WavePacket> {
    if traj.dim != ric.dim {
        return Err(Error::GridMismatch(format!("dimensions differ ({} vs {})", traj.dim, ric.dim)));
    }
    if i >= traj.len() {
        return Err(Error::GridMismatch(format!("sample {i} beyond classical trajectory ({})", traj.len())));
    }
    if i >= ric.len() {
        return match ric.blow_up_at {
            Some(t) => Err(Error::BlownUp { t, index: i }),
            None => Err(Error::GridMismatch(format!("sample {i} beyond Riccati trajectory ({})", ric.len()))),
        };
    }
    if traj.times[i] != ric.times[i] {
        return Err(Error::GridMismatch(format!(
            "time grids differ at sample {i}: {} vs {}",
            traj.times[i], ric.times[i]
        )));
    }
    Ok(WavePacket {
        dim: traj.dim,
        b: ric.b,
        t: traj.times[i],
        x_c: traj.x[i].clone(),
        v_c: traj.v[i].clone(),
        q1: ric.q1[i].clone(),
        q2: ric.q2[i].clone(),
        action_free: traj.action_free[i],
        action_control: traj.action_control[i],
        int_tr_q1: ric.int_tr_q1[i],
        int_tr_q2: ric.int_tr_q2[i],
    })
}

fn check_dim(w: &WavePacket, grid: &Grid) -> Result<()> {
    if grid.dim() != w.dim {
        return Err(Error::GridMismatch(format!("packet is {}-D, grid is {}-D", w.dim, grid.dim())));
    }
    Ok(())
}

pub fn evaluate_packet(w: &WavePacket, grid: &Grid) -> Result<ComplexField> {
    check_dim(w, grid)?;
    Ok(ComplexField::from_fn(grid, |x| w.value_at(x)))
}

/// `ψ₀` sampled on a grid.
pub fn initial_state(grid: &Grid, b: f64, x0: &DVector<f64>, v0: &DVector<f64>) -> Result<ComplexField> {
    evaluate_packet(&WavePacket::initial(b, x0.clone(), v0.clone()), grid)
}

/// `r(t,·) = −(V(x) − V(x_c) − ⟨∇V(x_c), x−x_c⟩ − ½⟨V''(x_c)(x−x_c), x−x_c⟩)·ψ̃`.
pub fn residual_field(w: &WavePacket, potential: &PotentialSpec, grid: &Grid) -> Result<ComplexField> {
    check_dim(w, grid)?;
    if potential.dim() != w.dim {
        return Err(Error::DimensionMismatch { expected: w.dim, got: potential.dim() });
    }
    let c = w.x_c.as_slice();
    Ok(ComplexField::from_fn(grid, |x| -potential.taylor2_remainder(x, c) * w.value_at(x)))
}

/// `C_*·‖V⁽³⁾‖∞·∫₀ᵗ ‖Q₂(s)⁻¹‖^{3/2} ds`, spectral norm.
pub fn error_bound(ric: &RiccatiTrajectory, potential: &PotentialSpec, t: f64) -> Result<f64> {
    let integral = ric.integral_inv_q2_pow(t)?;
    if potential.third_sup() == 0.0 {
        return Ok(0.0);
    }
    Ok(constant_c_star(ric.dim) * potential.third_sup() * integral)
}

/// The band-based bound `C_*·‖V⁽³⁾‖∞·t/(b/2)^{3/2}`.
pub fn coarse_error_bound(dim: usize, b: f64, potential: &PotentialSpec, t: f64) -> f64 {
    constant_c_star(dim) * potential.third_sup() * t / (b / 2.0).powf(1.5)
}
