//! Width dynamics of the Gaussian packet.
//!
//! `Q = Q₁ + iQ₂` solves `Q̇ + Q² + V''(x_c(t)) = 0` with `Q(0) = ibI`. This
//! module integrates the equivalent real system for `(Q₁, Q₂)`, computes the
//! control-independent horizon `T*` on which `Q₂` stays in `[b/2, 3b/2]`,
//! and checks that band together with the determinant identity
//! `det Q₂(t) = bᴺ exp(−2∫₀ᵗ Tr Q₁)`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classical::ClassicalTrajectory;
use crate::error::{Error, Result};
use crate::linalg;
use crate::potentials::PotentialSpec;

pub const T_STAR_CAP: f64 = 10.0;
pub const DEFAULT_BLOW_UP_GUARD: f64 = 1e6;
pub const BAND_SLACK: f64 = 1e-9;

const G1_MARGIN: f64 = 1e-12;
const BISECTION_TOL: f64 = 1e-12;

/// `g₁(t) = t·(1 + max(b, b²)·e^{4t} + ‖V''‖∞)`.
pub fn g1(b: f64, hess_sup: f64, t: f64) -> f64 {
    t * (1.0 + b.max(b * b) * (4.0 * t).exp() + hess_sup)
}

/// `g₂(t) = 2t·e^{2t}`.
pub fn g2(t: f64) -> f64 {
    2.0 * t * (2.0 * t).exp()
}

// largest t in [0, cap] with g(t) <= bound, for increasing g with g(0) < bound
fn largest_feasible(g: impl Fn(f64) -> f64, bound: f64) -> f64 {
    if g(T_STAR_CAP) <= bound {
        return T_STAR_CAP;
    }
    let (mut lo, mut hi) = (0.0, T_STAR_CAP);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= bound {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Guaranteed horizon `T*(b, ‖V''‖∞)`: the largest `t ≤ 10` with
/// `g₁(t) ≤ 1 − 1e-12` and `g₂(t) ≤ ½`.
pub fn compute_t_star(b: f64, hess_sup: f64) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidInput(format!("b must be positive, got {b}")));
    }
    if !(hess_sup >= 0.0 && hess_sup.is_finite()) {
        return Err(Error::InvalidInput(format!("hess_sup must be >= 0, got {hess_sup}")));
    }
    let t1 = largest_feasible(|t| g1(b, hess_sup, t), 1.0 - G1_MARGIN);
    let t2 = largest_feasible(g2, 0.5);
    Ok(t1.min(t2))
}

/// Signed residuals `(g₁(t) − (1 − 1e-12), g₂(t) − ½)` at `t`; both are `≤ 0`
/// on `[0, T*]` and the binding one is `≈ 0` at `T*` unless `T*` is capped.
pub fn t_star_residuals(b: f64, hess_sup: f64, t: f64) -> (f64, f64) {
    (g1(b, hess_sup, t) - (1.0 - G1_MARGIN), g2(t) - 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiTrajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub q1: Vec<DMatrix<f64>>,
    pub q2: Vec<DMatrix<f64>>,
    pub int_tr_q1: Vec<f64>,
    pub int_tr_q2: Vec<f64>,
    pub b: f64,
    pub blow_up_at: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub min_eig: f64,
    pub max_eig: f64,
    pub holds: bool,
}

impl RiccatiTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `|det Q₂ − bᴺ e^{−2∫Tr Q₁}| / det Q₂` at sample `i`.
    pub fn det_residual(&self, i: usize) -> f64 {
        let det = self.q2[i].determinant();
        let predicted = self.b.powi(self.dim as i32) * (-2.0 * self.int_tr_q1[i]).exp();
        (det - predicted).abs() / det.abs()
    }

    pub fn max_det_residual(&self, t_max: f64) -> f64 {
        self.indices_up_to(t_max).map(|i| self.det_residual(i)).fold(0.0, f64::max)
    }

    /// Largest relative asymmetry of `Q₁`, `Q₂` over all samples.
    pub fn max_asymmetry(&self) -> f64 {
        self.q1.iter().chain(&self.q2).map(|m| linalg::asymmetry(m) / (1.0 + m.amax())).fold(0.0, f64::max)
    }

    pub(crate) fn indices_up_to(&self, t_max: f64) -> impl Iterator<Item = usize> + '_ {
        let tol = 1e-12 * t_max.abs().max(1.0);
        self.times.iter().enumerate().take_while(move |(_, t)| **t <= t_max + tol).map(|(i, _)| i)
    }

    fn ensure_covers(&self, t: f64) -> Result<()> {
        let tol = 1e-12 * t.abs().max(1.0);
        let covered = match self.blow_up_at {
            Some(tb) => tb.min(self.last_time()),
            None => self.last_time(),
        };
        if self.blow_up_at.is_some_and(|tb| tb <= t) || self.last_time() < t - tol {
            return Err(Error::HorizonNotCovered { requested: t, covered });
        }
        Ok(())
    }

    /// Eigenvalue band of `Q₂` on `[0, t_star]`.
    pub fn check_q2_band(&self, t_star: f64) -> Result<BandReport> {
        self.ensure_covers(t_star)?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in self.indices_up_to(t_star) {
            let (a, c) = linalg::eig_range(&self.q2[i]);
            lo = lo.min(a);
            hi = hi.max(c);
        }
        let holds = lo >= self.b / 2.0 - BAND_SLACK && hi <= 1.5 * self.b + BAND_SLACK;
        Ok(BandReport { min_eig: lo, max_eig: hi, holds })
    }

    /// `∫₀ᵗ ‖Q₂(s)⁻¹‖^{3/2} ds` on the sample grid.
    ///
    /// Simpson's rule on each step, with the interior value taken from the
    /// cubic Hermite interpolant of `Q₂` (its derivative is known exactly from
    /// the Riccati right-hand side); fourth order like the integrator.
    pub fn integral_inv_q2_pow(&self, t: f64) -> Result<f64> {
        self.ensure_covers(t)?;
        let mut acc = 0.0;
        for i in 0..self.len().saturating_sub(1) {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            if t0 >= t {
                break;
            }
            let h = t1.min(t) - t0;
            acc += self.step_integral(i, h / (t1 - t0));
        }
        Ok(acc)
    }

    /// Running values of [`RiccatiTrajectory::integral_inv_q2_pow`] at every sample.
    pub fn cumulative_inv_q2_pow(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(acc);
        for i in 0..self.len().saturating_sub(1) {
            acc += self.step_integral(i, 1.0);
            out.push(acc);
        }
        out
    }

    // Simpson on the first fraction `s` of step i
    fn step_integral(&self, i: usize, s: f64) -> f64 {
        let f = |m: &DMatrix<f64>| linalg::eig_range(m).0.recip().powf(1.5);
        let full = self.times[i + 1] - self.times[i];
        let d0 = q2_dot(&self.q1[i], &self.q2[i]);
        let d1 = q2_dot(&self.q1[i + 1], &self.q2[i + 1]);
        let hermite = |s: f64| {
            let (s2, s3) = (s * s, s * s * s);
            &self.q2[i] * (2.0 * s3 - 3.0 * s2 + 1.0)
                + &d0 * ((s3 - 2.0 * s2 + s) * full)
                + &self.q2[i + 1] * (-2.0 * s3 + 3.0 * s2)
                + &d1 * ((s3 - s2) * full)
        };
        let end = if s < 1.0 { f(&hermite(s)) } else { f(&self.q2[i + 1]) };
        s * full / 6.0 * (f(&self.q2[i]) + 4.0 * f(&hermite(0.5 * s)) + end)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.dim;
        let mut header = vec!["t".to_string()];
        for name in ["q1", "q2"] {
            for i in 1..=n {
                for j in 1..=n {
                    header.push(format!("{name}_{i}{j}"));
                }
            }
        }
        header.push("int_tr_q1".into());
        header.push("int_tr_q2".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(linalg::vec_row_major(&self.q1[k]).map(|v| v.to_string()));
            row.extend(linalg::vec_row_major(&self.q2[k]).map(|v| v.to_string()));
            row.push(self.int_tr_q1[k].to_string());
            row.push(self.int_tr_q2[k].to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn q2_dot(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> DMatrix<f64> {
    -(q1 * q2 + q2 * q1)
}

struct RiccatiState {
    q1: DMatrix<f64>,
    q2: DMatrix<f64>,
    tr1: f64,
    tr2: f64,
}

impl RiccatiState {
    fn rhs(&self, hess: &DMatrix<f64>) -> RiccatiState {
        RiccatiState {
            q1: &self.q2 * &self.q2 - &self.q1 * &self.q1 - hess,
            q2: q2_dot(&self.q1, &self.q2),
            tr1: self.q1.trace(),
            tr2: self.q2.trace(),
        }
    }

    fn axpy(&self, h: f64, k: &RiccatiState) -> RiccatiState {
        RiccatiState {
            q1: &self.q1 + &k.q1 * h,
            q2: &self.q2 + &k.q2 * h,
            tr1: self.tr1 + h * k.tr1,
            tr2: self.tr2 + h * k.tr2,
        }
    }
}

/// Integrates the Riccati system along `traj` with RK4 on the same steps.
pub fn integrate_riccati(potential: &PotentialSpec, traj: &ClassicalTrajectory, b: f64) -> Result<RiccatiTrajectory> {
    integrate_riccati_with_guard(potential, traj, b, DEFAULT_BLOW_UP_GUARD)
}

pub fn integrate_riccati_with_guard(
    potential: &PotentialSpec,
    traj: &ClassicalTrajectory,
    b: f64,
    guard: f64,
) -> Result<RiccatiTrajectory> {
    if traj.is_empty() {
        return Err(Error::GridMismatch("classical trajectory has no samples".into()));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidInput(format!("b must be positive, got {b}")));
    }
    let n = potential.dim();
    if traj.dim != n {
        return Err(Error::DimensionMismatch { expected: n, got: traj.dim });
    }
    let mut state = RiccatiState { q1: DMatrix::zeros(n, n), q2: DMatrix::identity(n, n) * b, tr1: 0.0, tr2: 0.0 };
    let m = traj.len();
    let mut out = RiccatiTrajectory {
        dim: n,
        times: Vec::with_capacity(m),
        q1: Vec::with_capacity(m),
        q2: Vec::with_capacity(m),
        int_tr_q1: Vec::with_capacity(m),
        int_tr_q2: Vec::with_capacity(m),
        b,
        blow_up_at: None,
    };
    let push = |out: &mut RiccatiTrajectory, s: &RiccatiState, t: f64| {
        out.times.push(t);
        out.q1.push(s.q1.clone());
        out.q2.push(s.q2.clone());
        out.int_tr_q1.push(s.tr1);
        out.int_tr_q2.push(s.tr2);
    };
    push(&mut out, &state, traj.times[0]);

    let mut hess_start = potential.eval_hessian(traj.x[0].as_slice());
    for i in 0..m - 1 {
        let h = traj.times[i + 1] - traj.times[i];
        let hess_mid = potential.eval_hessian(traj.midpoint_position(i).as_slice());
        let hess_end = potential.eval_hessian(traj.x[i + 1].as_slice());

        let k1 = state.rhs(&hess_start);
        let k2 = state.axpy(0.5 * h, &k1).rhs(&hess_mid);
        let k3 = state.axpy(0.5 * h, &k2).rhs(&hess_mid);
        let k4 = state.axpy(h, &k3).rhs(&hess_end);
        let w = h / 6.0;
        state.q1 += (&k1.q1 + &k2.q1 * 2.0 + &k3.q1 * 2.0 + &k4.q1) * w;
        state.q2 += (&k1.q2 + &k2.q2 * 2.0 + &k3.q2 * 2.0 + &k4.q2) * w;
        state.tr1 += w * (k1.tr1 + 2.0 * k2.tr1 + 2.0 * k3.tr1 + k4.tr1);
        state.tr2 += w * (k1.tr2 + 2.0 * k2.tr2 + 2.0 * k3.tr2 + k4.tr2);
        linalg::symmetrize(&mut state.q1);
        linalg::symmetrize(&mut state.q2);

        let finite = state.q1.iter().chain(state.q2.iter()).all(|v| v.is_finite());
        if !finite || linalg::sym_op_norm(&state.q1) + linalg::sym_op_norm(&state.q2) > guard {
            out.blow_up_at = Some(traj.times[i + 1]);
            break;
        }
        push(&mut out, &state, traj.times[i + 1]);
        hess_start = hess_end;
    }
    Ok(out)
}
