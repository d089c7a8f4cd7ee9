//! Smooth subquadratic potentials with exact derivatives.
//!
//! Every admissible potential carries the two global constants the
//! semiclassical bounds consume: the sup over space of the operator norm of
//! the Hessian and of the third differential. The catalog is closed-form so
//! both constants are exact.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `V(x) = ½⟨Ωx, x⟩`.
    Harmonic {
        omega_sq: DMatrix<f64>,
    },
    /// `V(x) = ½⟨Ωx, x⟩ + a·cos⟨k, x⟩`.
    CosinePerturbedHarmonic {
        omega_sq: DMatrix<f64>,
        amplitude: f64,
        wavevector: DVector<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    dim: usize,
    kind: PotentialKind,
    hess_sup: f64,
    third_sup: f64,
}

/// Serialized form of a potential, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero {
        dim: usize,
    },
    Harmonic {
        omega_sq: Vec<Vec<f64>>,
    },
    CosineHarmonic {
        omega_sq: Vec<Vec<f64>>,
        amplitude: f64,
        wavevector: Vec<f64>,
    },
    Tabulated {
        #[serde(default)]
        x: Vec<f64>,
        #[serde(default)]
        v: Vec<f64>,
    },
}

fn check_omega(omega_sq: &DMatrix<f64>) -> Result<()> {
    if omega_sq.nrows() == 0 || !omega_sq.is_square() {
        return Err(Error::InvalidInput("omega_sq must be a non-empty square matrix".into()));
    }
    if omega_sq.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("omega_sq has non-finite entries".into()));
    }
    let asym = (omega_sq - omega_sq.transpose()).amax();
    if asym > 1e-12 * (1.0 + omega_sq.amax()) {
        return Err(Error::InvalidInput("omega_sq must be symmetric".into()));
    }
    let (lo, _) = linalg::eig_range(omega_sq);
    if lo < -1e-12 * (1.0 + omega_sq.amax()) {
        return Err(Error::InvalidInput(format!("omega_sq must be positive semidefinite (min eigenvalue {lo})")));
    }
    Ok(())
}

impl PotentialSpec {
    pub fn zero(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        Ok(Self { dim, kind: PotentialKind::Zero, hess_sup: 0.0, third_sup: 0.0 })
    }

    pub fn harmonic(omega_sq: DMatrix<f64>) -> Result<Self> {
        check_omega(&omega_sq)?;
        let hess_sup = linalg::sym_op_norm(&omega_sq);
        Ok(Self { dim: omega_sq.nrows(), kind: PotentialKind::Harmonic { omega_sq }, hess_sup, third_sup: 0.0 })
    }

    /// Isotropic harmonic well `½ω²‖x‖²`.
    pub fn isotropic_harmonic(dim: usize, omega_sq: f64) -> Result<Self> {
        Self::harmonic(DMatrix::identity(dim, dim) * omega_sq)
    }

    pub fn cosine_harmonic(omega_sq: DMatrix<f64>, amplitude: f64, wavevector: DVector<f64>) -> Result<Self> {
        check_omega(&omega_sq)?;
        if wavevector.len() != omega_sq.nrows() {
            return Err(Error::DimensionMismatch { expected: omega_sq.nrows(), got: wavevector.len() });
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidInput("amplitude must be finite and >= 0".into()));
        }
        if wavevector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("wavevector has non-finite entries".into()));
        }
        let k = wavevector.norm();
        let hess_sup = linalg::sym_op_norm(&omega_sq) + amplitude * k * k;
        let third_sup = amplitude * k * k * k;
        Ok(Self {
            dim: omega_sq.nrows(),
            kind: PotentialKind::CosinePerturbedHarmonic { omega_sq, amplitude, wavevector },
            hess_sup,
            third_sup,
        })
    }

    pub fn from_config(cfg: &PotentialConfig) -> Result<Self> {
        match cfg {
            PotentialConfig::Zero { dim } => Self::zero(*dim),
            PotentialConfig::Harmonic { omega_sq } => Self::harmonic(linalg::matrix_from_rows(omega_sq)?),
            PotentialConfig::CosineHarmonic { omega_sq, amplitude, wavevector } => Self::cosine_harmonic(
                linalg::matrix_from_rows(omega_sq)?,
                *amplitude,
                DVector::from_column_slice(wavevector),
            ),
            PotentialConfig::Tabulated { .. } => {
                Err(Error::Unsupported("tabulated potentials are not implemented".into()))
            }
        }
    }

    pub fn to_config(&self) -> PotentialConfig {
        match &self.kind {
            PotentialKind::Zero => PotentialConfig::Zero { dim: self.dim },
            PotentialKind::Harmonic { omega_sq } => {
                PotentialConfig::Harmonic { omega_sq: linalg::matrix_to_rows(omega_sq) }
            }
            PotentialKind::CosinePerturbedHarmonic { omega_sq, amplitude, wavevector } => {
                PotentialConfig::CosineHarmonic {
                    omega_sq: linalg::matrix_to_rows(omega_sq),
                    amplitude: *amplitude,
                    wavevector: wavevector.iter().copied().collect(),
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// ‖V''‖∞.
    pub fn hess_sup(&self) -> f64 {
        self.hess_sup
    }

    /// ‖V⁽³⁾‖∞.
    pub fn third_sup(&self) -> f64 {
        self.third_sup
    }

    /// True when V is a polynomial of degree at most two, in which case the
    /// Gaussian packet is an exact solution.
    pub fn is_quadratic(&self) -> bool {
        match &self.kind {
            PotentialKind::Zero | PotentialKind::Harmonic { .. } => true,
            PotentialKind::CosinePerturbedHarmonic { amplitude, wavevector, .. } => {
                *amplitude == 0.0 || wavevector.iter().all(|k| *k == 0.0)
            }
        }
    }

    /// Largest eigenvalue of the quadratic part, used for resonant driving.
    pub fn omega_sq_norm(&self) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Harmonic { omega_sq } | PotentialKind::CosinePerturbedHarmonic { omega_sq, .. } => {
                linalg::sym_op_norm(omega_sq)
            }
        }
    }

    pub fn eval_potential(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Harmonic { omega_sq } => 0.5 * quad_form(omega_sq, x),
            PotentialKind::CosinePerturbedHarmonic { omega_sq, amplitude, wavevector } => {
                0.5 * quad_form(omega_sq, x) + amplitude * dot(wavevector.as_slice(), x).cos()
            }
        }
    }

    pub fn eval_gradient(&self, x: &[f64]) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let xv = DVector::from_column_slice(x);
        match &self.kind {
            PotentialKind::Zero => DVector::zeros(self.dim),
            PotentialKind::Harmonic { omega_sq } => omega_sq * xv,
            PotentialKind::CosinePerturbedHarmonic { omega_sq, amplitude, wavevector } => {
                let s = dot(wavevector.as_slice(), x).sin();
                omega_sq * xv - wavevector * (amplitude * s)
            }
        }
    }

    pub fn eval_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            PotentialKind::Zero => DMatrix::zeros(self.dim, self.dim),
            PotentialKind::Harmonic { omega_sq } => omega_sq.clone(),
            PotentialKind::CosinePerturbedHarmonic { omega_sq, amplitude, wavevector } => {
                let c = dot(wavevector.as_slice(), x).cos();
                omega_sq - (wavevector * wavevector.transpose()) * (amplitude * c)
            }
        }
    }

    /// `V(x) − V(c) − ⟨∇V(c), x−c⟩ − ½⟨V''(c)(x−c), x−c⟩`, the remainder of
    /// the second-order Taylor expansion of V around `c`.
    pub fn taylor2_remainder(&self, x: &[f64], c: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Zero | PotentialKind::Harmonic { .. } => 0.0,
            PotentialKind::CosinePerturbedHarmonic { amplitude, wavevector, .. } => {
                // the quadratic part cancels exactly; expand only the cosine
                let k = wavevector.as_slice();
                let phase_c = dot(k, c);
                let s: f64 = k.iter().zip(x.iter().zip(c)).map(|(ki, (xi, ci))| ki * (xi - ci)).sum();
                amplitude * ((phase_c + s).cos() - phase_c.cos() + phase_c.sin() * s + 0.5 * phase_c.cos() * s * s)
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += x[i] * m[(i, j)] * x[j];
        }
    }
    acc
}
