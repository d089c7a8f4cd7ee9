//! Controlled Newton dynamics for the packet centre.
//!
//! The centre `x_c` solves `ẍ + ∇V(x) = E(t)` with a piecewise-continuous
//! field `E`. The two scalar action integrals that enter the packet phase are
//! carried as extra components of the same RK4 state, so they are integrated
//! with the same order on the same steps.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

/// Closed-form field on one piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorFn {
    Constant {
        value: Vec<f64>,
    },
    /// `amplitude · sin(angular_freq · t + phase)`, with `t` the absolute time.
    Sinusoid {
        amplitude: Vec<f64>,
        angular_freq: f64,
        phase: f64,
    },
    /// `value0 + slope · (t − t_start)`.
    Linear {
        value0: Vec<f64>,
        slope: Vec<f64>,
    },
}

impl VectorFn {
    fn dim(&self) -> Result<usize> {
        match self {
            VectorFn::Constant { value } => Ok(value.len()),
            VectorFn::Sinusoid { amplitude, .. } => Ok(amplitude.len()),
            VectorFn::Linear { value0, slope } => {
                if value0.len() != slope.len() {
                    return Err(Error::DimensionMismatch { expected: value0.len(), got: slope.len() });
                }
                Ok(value0.len())
            }
        }
    }

    fn is_finite(&self) -> bool {
        let fin = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            VectorFn::Constant { value } => fin(value),
            VectorFn::Sinusoid { amplitude, angular_freq, phase } => {
                fin(amplitude) && angular_freq.is_finite() && phase.is_finite()
            }
            VectorFn::Linear { value0, slope } => fin(value0) && fin(slope),
        }
    }

    fn eval_into(&self, t: f64, t_start: f64, out: &mut [f64]) {
        match self {
            VectorFn::Constant { value } => out.copy_from_slice(value),
            VectorFn::Sinusoid { amplitude, angular_freq, phase } => {
                let s = (angular_freq * t + phase).sin();
                out.iter_mut().zip(amplitude).for_each(|(o, a)| *o = a * s);
            }
            VectorFn::Linear { value0, slope } => {
                let dt = t - t_start;
                out.iter_mut().zip(value0.iter().zip(slope)).for_each(|(o, (v, s))| *o = v + s * dt);
            }
        }
    }

    /// Upper bound of the Euclidean norm on `[t0, t1]`.
    fn sup_norm(&self, t0: f64, t1: f64) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        match self {
            VectorFn::Constant { value } => norm(value),
            VectorFn::Sinusoid { amplitude, .. } => norm(amplitude),
            VectorFn::Linear { value0, slope } => {
                let end: Vec<f64> = value0.iter().zip(slope).map(|(v, s)| v + s * (t1 - t0)).collect();
                norm(value0).max(norm(&end))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPiece {
    pub t_start: f64,
    pub t_end: f64,
    #[serde(flatten)]
    pub field: VectorFn,
}

/// Piecewise-continuous control `E : [0, T] → ℝᴺ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    dim: usize,
    pieces: Vec<ControlPiece>,
}

fn abut_tol(t: f64) -> f64 {
    1e-15 * t.abs().max(1.0)
}

impl ControlSignal {
    pub fn new(pieces: Vec<ControlPiece>) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| Error::InvalidInput("control needs at least one piece".into()))?;
        if first.t_start.abs() > abut_tol(0.0) {
            return Err(Error::InvalidInput(format!("control must start at t = 0, got {}", first.t_start)));
        }
        let dim = first.field.dim()?;
        if dim == 0 {
            return Err(Error::InvalidInput("control dimension must be positive".into()));
        }
        for (i, p) in pieces.iter().enumerate() {
            if !(p.t_start.is_finite() && p.t_end.is_finite() && p.t_end > p.t_start) {
                return Err(Error::InvalidInput(format!("piece {i} has an empty or invalid interval")));
            }
            if !p.field.is_finite() {
                return Err(Error::InvalidInput(format!("piece {i} has non-finite parameters")));
            }
            let d = p.field.dim()?;
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: d });
            }
            if i > 0 && (pieces[i - 1].t_end - p.t_start).abs() > abut_tol(p.t_start) {
                return Err(Error::InvalidInput(format!(
                    "pieces {} and {i} do not abut ({} vs {})",
                    i - 1,
                    pieces[i - 1].t_end,
                    p.t_start
                )));
            }
        }
        Ok(Self { dim, pieces })
    }

    /// Identically zero control on `[0, horizon]`.
    pub fn zero(dim: usize, horizon: f64) -> Result<Self> {
        Self::constant(vec![0.0; dim], horizon)
    }

    pub fn constant(value: Vec<f64>, horizon: f64) -> Result<Self> {
        Self::new(vec![ControlPiece { t_start: 0.0, t_end: horizon, field: VectorFn::Constant { value } }])
    }

    pub fn sinusoid(amplitude: Vec<f64>, angular_freq: f64, phase: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![ControlPiece {
            t_start: 0.0,
            t_end: horizon,
            field: VectorFn::Sinusoid { amplitude, angular_freq, phase },
        }])
    }

    /// Piecewise-constant control with equal-length pieces.
    pub fn piecewise_constant(values: Vec<Vec<f64>>, horizon: f64) -> Result<Self> {
        let n = values.len();
        let pieces = values
            .into_iter()
            .enumerate()
            .map(|(i, value)| ControlPiece {
                t_start: horizon * i as f64 / n as f64,
                t_end: if i + 1 == n { horizon } else { horizon * (i + 1) as f64 / n as f64 },
                field: VectorFn::Constant { value },
            })
            .collect();
        Self::new(pieces)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.pieces.last().map(|p| p.t_end).unwrap_or(0.0)
    }

    pub fn pieces(&self) -> &[ControlPiece] {
        &self.pieces
    }

    /// Interior breakpoints, i.e. the jump locations strictly inside `(0, T)`.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().skip(1).map(|p| p.t_start)
    }

    /// Index of the piece whose closed interval contains `t`, preferring the
    /// later piece at a breakpoint.
    pub fn piece_index(&self, t: f64) -> usize {
        self.pieces.iter().rposition(|p| p.t_start <= t).unwrap_or_default()
    }

    /// Value of piece `piece` at `t`, using its closed-form extension.
    pub fn eval_piece_into(&self, piece: usize, t: f64, out: &mut [f64]) {
        let p = &self.pieces[piece];
        p.field.eval_into(t, p.t_start, out);
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        self.eval_piece_into(self.piece_index(t), t, out.as_mut_slice());
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.pieces.iter().map(|p| p.field.sup_norm(p.t_start, p.t_end)).fold(0.0, f64::max)
    }

    /// Restriction to `[0, t_end]`.
    pub fn truncated(&self, t_end: f64) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::InvalidInput(format!("truncation time must be positive, got {t_end}")));
        }
        if t_end > self.horizon() + abut_tol(t_end) {
            return Err(Error::HorizonNotCovered { requested: t_end, covered: self.horizon() });
        }
        let mut pieces = Vec::new();
        for p in &self.pieces {
            if p.t_start >= t_end {
                break;
            }
            let mut q = p.clone();
            q.t_end = q.t_end.min(t_end);
            pieces.push(q);
        }
        if let Some(last) = pieces.last_mut() {
            last.t_end = t_end;
        }
        Self::new(pieces)
    }
}

/// The step sequence on `[0, t_end]`: uniform multiples of `dt` merged with
/// the control breakpoints, so that no step straddles a jump of `E`.
pub fn step_grid(control: &ControlSignal, dt: f64, t_end: f64) -> Result<Vec<f64>> {
    step_grid_between(control, dt, 0.0, t_end)
}

/// [`step_grid`] on `[t_start, t_end]`, with uniform points `t_start + k·dt`.
pub fn step_grid_between(control: &ControlSignal, dt: f64, t_start: f64, t_end: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if !(t_end > t_start && t_end.is_finite() && t_start >= 0.0) {
        return Err(Error::InvalidInput(format!("invalid time interval [{t_start}, {t_end}]")));
    }
    let snap = 1e-9 * dt;
    let mut candidates: Vec<(f64, bool)> = Vec::new();
    let steps = ((t_end - t_start) / dt).ceil() as usize;
    candidates.extend((0..=steps).map(|k| (t_start + k as f64 * dt, false)).filter(|(t, _)| *t < t_end));
    candidates.extend(control.breakpoints().filter(|t| *t > t_start && *t < t_end).map(|t| (t, true)));
    candidates.push((t_end, true));
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut grid: Vec<f64> = Vec::with_capacity(candidates.len());
    let mut last_is_break = false;
    for (t, is_break) in candidates {
        match grid.last_mut() {
            Some(last) if t - *last <= snap => {
                // a breakpoint wins over a nearby uniform point
                if is_break && !last_is_break && *last != t_start {
                    *last = t;
                    last_is_break = true;
                }
            }
            _ => {
                grid.push(t);
                last_is_break = is_break;
            }
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTrajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    /// ∫₀ᵗ (½‖ẋ_c‖² − V(x_c)) ds.
    pub action_free: Vec<f64>,
    /// ∫₀ᵗ ⟨x_c, E⟩ ds.
    pub action_control: Vec<f64>,
}

impl ClassicalTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Cubic Hermite interpolant of `x_c` at the midpoint of step `i`.
    ///
    /// Uses position and velocity at both ends; the error is O(h⁴), which
    /// keeps the coupled Riccati stepping fourth order.
    pub fn midpoint_position(&self, i: usize) -> DVector<f64> {
        let h = self.times[i + 1] - self.times[i];
        (&self.x[i] + &self.x[i + 1]) * 0.5 + (&self.v[i] - &self.v[i + 1]) * (h / 8.0)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.dim;
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=n).map(|i| format!("v_{i}")));
        header.push("action_free".into());
        header.push("action_control".into());
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![self.times[i].to_string()];
            row.extend(self.x[i].iter().map(|v| v.to_string()));
            row.extend(self.v[i].iter().map(|v| v.to_string()));
            row.push(self.action_free[i].to_string());
            row.push(self.action_control[i].to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct NewtonRhs<'a> {
    potential: &'a PotentialSpec,
    control: &'a ControlSignal,
    piece: usize,
    field: Vec<f64>,
}

impl NewtonRhs<'_> {
    // state layout: [x (n), v (n), action_free, action_control]
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.potential.dim();
        let (x, rest) = y.split_at(n);
        let v = &rest[..n];
        self.control.eval_piece_into(self.piece, t, &mut self.field);
        let grad = self.potential.eval_gradient(x);
        dy[..n].copy_from_slice(v);
        for i in 0..n {
            dy[n + i] = self.field[i] - grad[i];
        }
        let kinetic: f64 = 0.5 * v.iter().map(|vi| vi * vi).sum::<f64>();
        dy[2 * n] = kinetic - self.potential.eval_potential(x);
        dy[2 * n + 1] = x.iter().zip(&self.field).map(|(a, b)| a * b).sum();
    }
}

/// One classic RK4 step of `y' = f(t, y)` in place.
pub(crate) fn rk4_step(y: &mut [f64], t: f64, h: f64, mut f: impl FnMut(f64, &[f64], &mut [f64])) {
    let m = y.len();
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    f(t, y, &mut k1);
    for j in 0..m {
        tmp[j] = y[j] + 0.5 * h * k1[j];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for j in 0..m {
        tmp[j] = y[j] + 0.5 * h * k2[j];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for j in 0..m {
        tmp[j] = y[j] + h * k3[j];
    }
    f(t + h, &tmp, &mut k4);
    for j in 0..m {
        y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
}

/// Integrates the controlled Newton equation on `[0, control.horizon()]`.
pub fn integrate_newton(
    potential: &PotentialSpec,
    control: &ControlSignal,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    dt: f64,
) -> Result<ClassicalTrajectory> {
    let n = potential.dim();
    for got in [x0.len(), v0.len(), control.dim()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let times = step_grid(control, dt, control.horizon())?;
    let mut y = vec![0.0; 2 * n + 2];
    y[..n].copy_from_slice(x0.as_slice());
    y[n..2 * n].copy_from_slice(v0.as_slice());

    let mut traj = ClassicalTrajectory {
        dim: n,
        times: times.clone(),
        x: Vec::with_capacity(times.len()),
        v: Vec::with_capacity(times.len()),
        action_free: Vec::with_capacity(times.len()),
        action_control: Vec::with_capacity(times.len()),
    };
    let push = |traj: &mut ClassicalTrajectory, y: &[f64]| {
        traj.x.push(DVector::from_column_slice(&y[..n]));
        traj.v.push(DVector::from_column_slice(&y[n..2 * n]));
        traj.action_free.push(y[2 * n]);
        traj.action_control.push(y[2 * n + 1]);
    };
    push(&mut traj, &y);

    let mut rhs = NewtonRhs { potential, control, piece: 0, field: vec![0.0; n] };
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        rhs.piece = control.piece_index(0.5 * (t0 + t1));
        rk4_step(&mut y, t0, t1 - t0, |t, y, dy| rhs.eval(t, y, dy));
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: t1 });
        }
        push(&mut traj, &y);
    }
    Ok(traj)
}

/// `½‖v_i‖² + V(x_i)`.
pub fn energy(potential: &PotentialSpec, traj: &ClassicalTrajectory, i: usize) -> f64 {
    0.5 * traj.v[i].norm_squared() + potential.eval_potential(traj.x[i].as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn free_flight_is_exact() {
        let p = PotentialSpec::zero(1).unwrap();
        let u = ControlSignal::zero(1, 0.5).unwrap();
        let tr = integrate_newton(&p, &u, &v1(1.0), &v1(2.0), 1e-3).unwrap();
        let last = tr.len() - 1;
        assert_eq!(tr.times[last], 0.5);
        assert!((tr.x[last][0] - 2.0).abs() < 1e-13);
        assert_eq!(tr.v[last][0], 2.0);
        for i in 0..tr.len() {
            assert_eq!(energy(&p, &tr, i), 2.0);
        }
    }

    #[test]
    fn constant_force_closed_form() {
        let c = 3.0;
        let p = PotentialSpec::zero(1).unwrap();
        let u = ControlSignal::constant(vec![c], 1.0).unwrap();
        let tr = integrate_newton(&p, &u, &v1(0.0), &v1(0.0), 1e-3).unwrap();
        for (i, t) in tr.times.iter().enumerate() {
            assert!((tr.x[i][0] - 0.5 * c * t * t).abs() < 1e-10);
            assert!((tr.v[i][0] - c * t).abs() < 1e-10);
            // ∫⟨x,E⟩ = c²t³/6
            assert!((tr.action_control[i] - c * c * t.powi(3) / 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn oscillator_closed_form_and_energy() {
        let p = PotentialSpec::isotropic_harmonic(1, 1.0).unwrap();
        let u = ControlSignal::zero(1, 2.0).unwrap();
        let tr = integrate_newton(&p, &u, &v1(1.0), &v1(0.0), 1e-3).unwrap();
        for (i, t) in tr.times.iter().enumerate() {
            assert!((tr.x[i][0] - t.cos()).abs() < 1e-8);
            assert!((energy(&p, &tr, i) - 0.5).abs() < 1e-9);
            // ∫ (½ sin² − ½ cos²) = −¼ sin 2t
            assert!((tr.action_free[i] + 0.25 * (2.0 * t).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn work_energy_theorem_under_constant_field() {
        let p = PotentialSpec::isotropic_harmonic(1, 1.0).unwrap();
        let u = ControlSignal::constant(vec![1.0], 2.0).unwrap();
        let tr = integrate_newton(&p, &u, &v1(0.0), &v1(0.0), 1e-3).unwrap();
        let e0 = energy(&p, &tr, 0);
        let mut moved = false;
        for i in 0..tr.len() {
            // for constant E the work ∫⟨E,ẋ⟩ is ⟨E, x(t) − x₀⟩
            let work = tr.x[i][0];
            let de = energy(&p, &tr, i) - e0;
            moved |= de.abs() > 1e-3;
            assert!((de - work).abs() <= 1e-8);
        }
        assert!(moved);
    }

    #[test]
    fn fourth_order_convergence() {
        let p = PotentialSpec::isotropic_harmonic(1, 1.0).unwrap();
        let u = ControlSignal::zero(1, 2.0).unwrap();
        let err = |dt: f64| {
            let tr = integrate_newton(&p, &u, &v1(1.0), &v1(0.0), dt).unwrap();
            tr.times.iter().zip(&tr.x).map(|(t, x)| (x[0] - t.cos()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 / e2 >= 12.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn energy_drift_scales_like_dt4() {
        // regression constant: drift <= 0.05 · dt⁴ · t for this catalog at dt = 0.02
        let dt = 0.02;
        let pots = [
            PotentialSpec::isotropic_harmonic(2, 1.0).unwrap(),
            PotentialSpec::cosine_harmonic(DMatrix::identity(1, 1), 0.1, v1(2.0)).unwrap(),
            PotentialSpec::cosine_harmonic(DMatrix::identity(2, 2) * 2.0, 0.3, DVector::from_column_slice(&[1.0, 1.0]))
                .unwrap(),
        ];
        for p in &pots {
            let n = p.dim();
            let u = ControlSignal::zero(n, 2.0).unwrap();
            let tr =
                integrate_newton(p, &u, &DVector::from_element(n, 1.0), &DVector::from_element(n, 0.5), dt).unwrap();
            let e0 = energy(p, &tr, 0);
            for i in 1..tr.len() {
                let drift = (energy(p, &tr, i) - e0).abs();
                assert!(drift <= 0.05 * dt.powi(4) * tr.times[i], "{drift}");
            }
        }
    }

    #[test]
    fn breakpoints_split_steps_and_keep_c1() {
        let p = PotentialSpec::isotropic_harmonic(1, 1.0).unwrap();
        let u = ControlSignal::piecewise_constant(vec![vec![5.0], vec![-5.0], vec![2.0]], 0.1).unwrap();
        let tr = integrate_newton(&p, &u, &v1(0.0), &v1(0.0), 0.03).unwrap();
        for b in u.breakpoints() {
            assert!(tr.times.iter().any(|t| (t - b).abs() < 1e-15), "breakpoint {b} missing");
        }
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*tr.times.last().unwrap(), 0.1);
    }

    #[test]
    fn equal_almost_everywhere_controls_give_identical_trajectories() {
        let p = PotentialSpec::cosine_harmonic(DMatrix::identity(1, 1), 0.1, v1(2.0)).unwrap();
        let a = ControlSignal::constant(vec![4.0], 1.0).unwrap();
        let b = ControlSignal::new(vec![
            ControlPiece { t_start: 0.0, t_end: 0.5, field: VectorFn::Constant { value: vec![4.0] } },
            ControlPiece { t_start: 0.5, t_end: 1.0, field: VectorFn::Linear { value0: vec![4.0], slope: vec![0.0] } },
        ])
        .unwrap();
        let dt = 1.0 / 64.0;
        let ta = integrate_newton(&p, &a, &v1(0.3), &v1(0.0), dt).unwrap();
        let tb = integrate_newton(&p, &b, &v1(0.3), &v1(0.0), dt).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn rejects_gaps_and_bad_steps() {
        let gap = vec![
            ControlPiece { t_start: 0.0, t_end: 0.5, field: VectorFn::Constant { value: vec![1.0] } },
            ControlPiece { t_start: 0.6, t_end: 1.0, field: VectorFn::Constant { value: vec![1.0] } },
        ];
        assert!(ControlSignal::new(gap).is_err());
        let u = ControlSignal::zero(1, 1.0).unwrap();
        assert!(step_grid(&u, 0.0, 1.0).is_err());
        let p = PotentialSpec::zero(2).unwrap();
        assert!(matches!(integrate_newton(&p, &u, &v1(0.0), &v1(0.0), 0.1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn truncation_and_evaluation() {
        let u = ControlSignal::piecewise_constant(vec![vec![1.0], vec![2.0], vec![3.0]], 3.0).unwrap();
        assert_eq!(u.eval(0.5)[0], 1.0);
        assert_eq!(u.eval(1.0)[0], 2.0);
        assert_eq!(u.eval(3.0)[0], 3.0);
        let t = u.truncated(1.5).unwrap();
        assert_eq!(t.pieces().len(), 2);
        assert_eq!(t.horizon(), 1.5);
        assert!(u.truncated(4.0).is_err());
        let s = ControlSignal::sinusoid(vec![2.0], 1.0, 0.0, 1.0).unwrap();
        assert!((s.eval(0.3)[0] - 2.0 * 0.3f64.sin()).abs() < 1e-15);
        assert_eq!(s.sup_norm(), 2.0);
    }

    #[test]
    fn csv_has_expected_columns() {
        let p = PotentialSpec::zero(2).unwrap();
        let u = ControlSignal::zero(2, 0.01).unwrap();
        let tr = integrate_newton(&p, &u, &DVector::zeros(2), &DVector::zeros(2), 0.005).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,x_2,v_1,v_2,action_free,action_control");
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn control_pieces_deserialize_from_tagged_records() {
        let json = r#"[{"t_start":0.0,"t_end":0.5,"kind":"constant","value":[1.0]},
                      {"t_start":0.5,"t_end":1.0,"kind":"sinusoid","amplitude":[2.0],"angular_freq":1.0,"phase":0.0}]"#;
        let pieces: Vec<ControlPiece> = serde_json::from_str(json).unwrap();
        let u = ControlSignal::new(pieces).unwrap();
        assert_eq!(u.horizon(), 1.0);
    }
}
