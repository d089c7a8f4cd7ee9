//! Small-time obstruction: distance of a target to the Gaussian-profile set,
//! the certified horizon `T**`, and the adversarial control experiment.
//!
//! The Gaussian-profile set contains every unit state whose modulus is
//! `g_{q,α}(x) = det(q)^{1/2}/C_N · e^{−½‖q(x−α)‖²}` with
//! `√(b/2)·I ≼ q ≼ √(3b/2)·I`. Because the phase of a set element is free,
//! the L² distance from `ψ_f` to the set equals `min ‖|ψ_f| − g_{q,α}‖`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{integrate_newton, ClassicalTrajectory, ControlPiece, ControlSignal};
use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::pde::{ComplexField, Grid, PropagateOptions, SpectralPlan, SplitStep};
use crate::potentials::PotentialSpec;
use crate::riccati::{compute_t_star, integrate_riccati};
use crate::tcs::{constant_c_star, constant_cn, evaluate_packet, initial_state, packet_at};

/// Coarse-stage resolution along each eigenvalue axis for `N = 1`.
pub const COARSE_EIG_POINTS_1D: usize = 64;
/// Coarse-stage resolution per eigenvalue axis and rotation angle for `N = 2`.
pub const COARSE_EIG_POINTS_2D: usize = 16;
pub const COARSE_ANGLES_2D: usize = 16;
/// Targets with `δ₀` at or below this are treated as Gaussian-profile.
pub const DEGENERATE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub delta0: f64,
    pub coarse_delta0: f64,
    pub q: DMatrix<f64>,
    pub alpha: DVector<f64>,
}

/// Band `[√(b/2), √(3b/2)]` for the eigenvalues of `q`.
pub fn q_band(b: f64) -> (f64, f64) {
    ((b / 2.0).sqrt(), (1.5 * b).sqrt())
}

/// `g_{q,α}` sampled on `grid`.
pub fn gaussian_amplitude(grid: &Grid, q: &DMatrix<f64>, alpha: &DVector<f64>) -> Vec<f64> {
    let n = grid.dim();
    let pref = q.determinant().sqrt() / constant_cn(n);
    grid.points_iter()
        .map(|x| {
            let d = DVector::from_iterator(n, x.iter().zip(alpha.iter()).map(|(a, c)| a - c));
            pref * (-0.5 * (q * d).norm_squared()).exp()
        })
        .collect()
}

fn rotation_q(l1: f64, l2: f64, theta: f64) -> DMatrix<f64> {
    let (c, s) = (theta.cos(), theta.sin());
    DMatrix::from_row_slice(
        2,
        2,
        &[c * c * l1 + s * s * l2, c * s * (l1 - l2), c * s * (l1 - l2), s * s * l1 + c * c * l2],
    )
}

struct Objective<'a> {
    grid: &'a Grid,
    amp: Vec<f64>,
    band: (f64, f64),
}

impl Objective<'_> {
    fn eig_of(&self, u: f64) -> f64 {
        let (lo, hi) = self.band;
        0.5 * (lo + hi) + 0.5 * (hi - lo) * u.sin()
    }

    fn u_of(&self, lambda: f64) -> f64 {
        let (lo, hi) = self.band;
        ((lambda - 0.5 * (lo + hi)) / (0.5 * (hi - lo))).clamp(-1.0, 1.0).asin()
    }

    fn unpack(&self, p: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        match self.grid.dim() {
            1 => (DMatrix::from_element(1, 1, self.eig_of(p[0])), DVector::from_element(1, p[1])),
            _ => (rotation_q(self.eig_of(p[0]), self.eig_of(p[1]), p[2]), DVector::from_column_slice(&p[3..5])),
        }
    }

    fn sq_distance(&self, q: &DMatrix<f64>, alpha: &DVector<f64>) -> f64 {
        let g = gaussian_amplitude(self.grid, q, alpha);
        g.iter().zip(&self.amp).map(|(g, a)| (a - g).powi(2)).sum::<f64>() * self.grid.cell_volume()
    }

    fn eval(&self, p: &[f64]) -> f64 {
        let (q, a) = self.unpack(p);
        self.sq_distance(&q, &a)
    }
}

/// Distance of `target` to the Gaussian-profile set for width parameter `b`.
///
/// Coarse stage: for every `q` on a grid of in-band eigenvalues (and
/// rotations for `N = 2`) the overlap with all grid-point centres `α` is
/// computed at once as an FFT cross-correlation. Refinement: Nelder–Mead on
/// the exact discrete objective from the best coarse candidate.
pub fn gaussian_set_distance(target: &ComplexField, b: f64) -> Result<GaussianFit> {
    let norm = target.l2_norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm });
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidInput(format!("b must be positive, got {b}")));
    }
    let grid = &target.grid;
    let dim = grid.dim();
    let obj = Objective { grid, amp: target.values.iter().map(|v| v.norm()).collect(), band: q_band(b) };
    let (lo, hi) = obj.band;

    // candidate widths
    let eig_axis = |m: usize| -> Vec<f64> { (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect() };
    let candidates: Vec<(DMatrix<f64>, Vec<f64>)> = match dim {
        1 => eig_axis(COARSE_EIG_POINTS_1D).into_iter().map(|l| (DMatrix::from_element(1, 1, l), vec![l])).collect(),
        _ => {
            let ax = eig_axis(COARSE_EIG_POINTS_2D);
            let mut out = Vec::new();
            for (i, &l1) in ax.iter().enumerate() {
                for &l2 in &ax[..=i] {
                    let angles = if l1 == l2 { 1 } else { COARSE_ANGLES_2D };
                    for k in 0..angles {
                        let th = PI * k as f64 / COARSE_ANGLES_2D as f64;
                        out.push((rotation_q(l1, l2, th), vec![l1, l2, th]));
                    }
                }
            }
            out
        }
    };

    let plan = SpectralPlan::new(grid);
    let total = grid.len();
    let vol = grid.cell_volume();
    let mut amp_hat: Vec<Complex64> = obj.amp.iter().map(|a| Complex64::new(*a, 0.0)).collect();
    plan.forward(&mut amp_hat);
    let amp_sq: f64 = obj.amp.iter().map(|a| a * a).sum::<f64>() * vol;

    // minimal-image displacement of flat index
    let disp = |idx: usize| -> Vec<f64> {
        let wrap = |m: usize, n: usize, h: f64| if m < n / 2 { m as f64 * h } else { (m as f64 - n as f64) * h };
        match dim {
            1 => vec![wrap(idx, grid.points[0], grid.spacing(0))],
            _ => vec![
                wrap(idx / grid.points[1], grid.points[0], grid.spacing(0)),
                wrap(idx % grid.points[1], grid.points[1], grid.spacing(1)),
            ],
        }
    };
    let displacements: Vec<DVector<f64>> = (0..total).map(|i| DVector::from_vec(disp(i))).collect();

    let scored: Vec<(f64, usize, usize)> = candidates
        .par_iter()
        .enumerate()
        .map(|(ci, (q, _))| {
            let pref = q.determinant().sqrt() / constant_cn(dim);
            let kernel: Vec<f64> = displacements.iter().map(|d| pref * (-0.5 * (q * d).norm_squared()).exp()).collect();
            let k_sq: f64 = kernel.iter().map(|k| k * k).sum::<f64>() * vol;
            let mut k_hat: Vec<Complex64> = kernel.iter().map(|k| Complex64::new(*k, 0.0)).collect();
            plan.forward(&mut k_hat);
            let mut corr: Vec<Complex64> = amp_hat.iter().zip(&k_hat).map(|(a, k)| a * k.conj()).collect();
            plan.inverse(&mut corr);
            let (best_s, best_c) = corr
                .iter()
                .enumerate()
                .map(|(s, c)| (s, c.re / total as f64 * vol))
                .fold((0, f64::NEG_INFINITY), |acc, (s, c)| if c > acc.1 { (s, c) } else { acc });
            (amp_sq + k_sq - 2.0 * best_c, ci, best_s)
        })
        .collect();
    let &(_, ci, si) =
        scored.iter().min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))).expect("candidate set is non-empty");

    let (_, params) = &candidates[ci];
    let alpha0 = grid.point(si);
    let start: Vec<f64> = match dim {
        1 => vec![obj.u_of(params[0]), alpha0[0]],
        _ => vec![obj.u_of(params[0]), obj.u_of(params[1]), params[2], alpha0[0], alpha0[1]],
    };
    let coarse_sq = obj.eval(&start);
    let h = grid.spacing(0);
    let steps: Vec<f64> = match dim {
        1 => vec![0.2, 2.0 * h],
        _ => vec![0.2, 0.2, 0.2, 2.0 * h, 2.0 * grid.spacing(1)],
    };
    let f = |p: &[f64]| obj.eval(p);
    let first = nelder_mead(f, &start, &steps, NelderMeadOptions::default());
    let fine_steps: Vec<f64> = steps.iter().map(|s| 0.05 * s).collect();
    let second = nelder_mead(f, &first.x, &fine_steps, NelderMeadOptions::default());
    let best = if second.f <= first.f { second } else { first };
    let (best_x, best_f) = if best.f <= coarse_sq { (best.x, best.f) } else { (start, coarse_sq) };
    let (q, alpha) = obj.unpack(&best_x);
    Ok(GaussianFit { delta0: best_f.max(0.0).sqrt(), coarse_delta0: coarse_sq.max(0.0).sqrt(), q, alpha })
}

/// `(T**, δ)` with `T** = min{T*, δ₀(b/2)^{3/2}/(2C_*‖V⁽³⁾‖∞)}` and `δ = δ₀/2`.
pub fn compute_t_double_star(delta0: f64, b: f64, potential: &PotentialSpec, t_star: f64) -> Result<(f64, f64)> {
    if !(delta0 > 0.0) {
        return Err(Error::DegenerateTarget { delta0 });
    }
    let third = potential.third_sup();
    let t_bound = if third == 0.0 {
        f64::INFINITY
    } else {
        delta0 * (b / 2.0).powf(1.5) / (2.0 * constant_c_star(potential.dim()) * third)
    };
    Ok((t_star.min(t_bound), delta0 / 2.0))
}

/// Equal-weight superposition of unit Gaussians of width `b`, renormalized,
/// flat phase.
pub fn multi_bump_target(grid: &Grid, b: f64, centers: &[Vec<f64>]) -> Result<ComplexField> {
    if centers.is_empty() {
        return Err(Error::InvalidInput("target needs at least one bump".into()));
    }
    let n = grid.dim();
    if let Some(c) = centers.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: c.len() });
    }
    let pref = (b / PI).powf(n as f64 / 4.0);
    let f = ComplexField::from_fn(grid, |x| {
        let s: f64 = centers
            .iter()
            .map(|c| {
                let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
                pref * (-0.5 * b * d2).exp()
            })
            .sum();
        Complex64::new(s, 0.0)
    });
    Ok(f.normalized())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    /// Bound on `‖E‖` for every control in the battery.
    pub a_max: f64,
    /// Total number of controls. The 12 structured controls are always
    /// included; random piecewise-constant controls fill the remaining slots.
    pub size: usize,
    /// Pieces per random control.
    pub random_pieces: usize,
    /// Direction for the one-switch "push then brake" control; defaults to `e₁`.
    pub toward: Option<Vec<f64>>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self { a_max: 100.0, size: 32, random_pieces: 8, toward: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledControl {
    pub label: String,
    pub control: ControlSignal,
}

fn alternating(dir: &[f64], a: f64, pieces: usize, first_sign: f64, horizon: f64) -> Result<ControlSignal> {
    let values = (0..pieces)
        .map(|i| {
            let s = if i % 2 == 0 { first_sign } else { -first_sign };
            dir.iter().map(|d| s * a * d).collect()
        })
        .collect();
    ControlSignal::piecewise_constant(values, horizon)
}

/// The seeded control battery on `[0, horizon]`. Random control `i` (its
/// position in the battery) draws from a ChaCha8 stream seeded with `seed ^ i`.
pub fn control_battery(
    cfg: &BatteryConfig,
    dim: usize,
    omega_sq_norm: f64,
    horizon: f64,
    seed: u64,
) -> Result<Vec<LabeledControl>> {
    if !(cfg.a_max >= 0.0 && cfg.a_max.is_finite()) {
        return Err(Error::InvalidInput(format!("a_max must be finite and >= 0, got {}", cfg.a_max)));
    }
    let a = cfg.a_max;
    let mut e1 = vec![0.0; dim];
    e1[0] = 1.0;
    let toward = match &cfg.toward {
        Some(t) if t.len() != dim => return Err(Error::DimensionMismatch { expected: dim, got: t.len() }),
        Some(t) => {
            let n = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                return Err(Error::InvalidInput("battery direction must be non-zero".into()));
            }
            t.iter().map(|v| v / n).collect()
        }
        None => e1.clone(),
    };
    let mut out = vec![
        LabeledControl { label: "zero".into(), control: ControlSignal::zero(dim, horizon)? },
        LabeledControl {
            label: format!("constant(+{a})"),
            control: ControlSignal::constant(e1.iter().map(|d| a * d).collect(), horizon)?,
        },
        LabeledControl {
            label: format!("constant(-{a})"),
            control: ControlSignal::constant(e1.iter().map(|d| -a * d).collect(), horizon)?,
        },
        LabeledControl { label: format!("push_brake({a})"), control: alternating(&toward, a, 2, 1.0, horizon)? },
    ];
    for switches in [2usize, 4, 8] {
        for (sign, tag) in [(1.0, '+'), (-1.0, '-')] {
            out.push(LabeledControl {
                label: format!("bang_bang(switches={switches},start={tag}{a})"),
                control: alternating(&e1, a, switches + 1, sign, horizon)?,
            });
        }
    }
    let omega = if omega_sq_norm > 0.0 { omega_sq_norm.sqrt() } else { PI / horizon };
    for (phase, tag) in [(0.0, "sin"), (0.5 * PI, "cos")] {
        out.push(LabeledControl {
            label: format!("resonant_{tag}(amplitude={a},omega={omega})"),
            control: ControlSignal::sinusoid(e1.iter().map(|d| a * d).collect(), omega, phase, horizon)?,
        });
    }
    let pieces = cfg.random_pieces.max(1);
    while out.len() < cfg.size {
        let i = out.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i);
        let values: Vec<Vec<f64>> = (0..pieces)
            .map(|_| {
                if dim == 1 {
                    vec![rng.random_range(-a..=a)]
                } else {
                    let th: f64 = rng.random_range(0.0..2.0 * PI);
                    let r: f64 = rng.random_range(0.0..=a);
                    let mut v = vec![0.0; dim];
                    v[0] = r * th.cos();
                    v[1] = r * th.sin();
                    v
                }
            })
            .collect();
        out.push(LabeledControl {
            label: format!("random_pwc(index={i},pieces={pieces})"),
            control: ControlSignal::piecewise_constant(values, horizon)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSetup {
    pub potential: PotentialSpec,
    pub b: f64,
    pub x0: DVector<f64>,
    pub v0: DVector<f64>,
    pub dt_ode: f64,
    pub dt_pde: f64,
    pub tail_budget: f64,
    /// Slack `ε_solver` allowed when comparing the measured TCS error to the bound.
    pub bound_slack: f64,
    pub min_points: usize,
    /// Fixed grid for analytic targets instead of the sized one. It must
    /// still satisfy the sizing rule.
    pub grid: Option<Grid>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// Equal-weight bumps of width `b` at the given centres.
    Bumps(Vec<Vec<f64>>),
    Field(ComplexField),
}

#[derive(Debug, Clone)]
pub enum ControlSet {
    Battery { config: BatteryConfig, seed: u64 },
    Explicit(Vec<LabeledControl>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub distance: f64,
    /// Measured `‖ψ − ψ̃‖`.
    pub tcs_distance: f64,
    pub error_bound: f64,
    /// `‖ψ̃ − ψ_f‖`.
    pub tcs_target_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub control: String,
    pub pieces: Vec<ControlPiece>,
    pub min_distance: f64,
    pub argmin_t: f64,
    pub initial_distance: f64,
    pub max_tcs_error: f64,
    pub max_error_bound: f64,
    pub bound_ok: bool,
    pub band_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub delta0: f64,
    pub coarse_delta0: f64,
    pub q: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub t_star: f64,
    pub t_double_star: f64,
    pub delta: f64,
    pub grid: Grid,
    pub trials: Vec<TrialReport>,
    pub bounds_ok: bool,
    pub verdict: bool,
}

#[derive(Debug, Clone)]
pub struct ObstructionRun {
    pub report: ObstructionReport,
    pub traces: Vec<Vec<TraceRow>>,
}

/// Checks that `grid` covers the padded hull at the spacing required by the sizing rule.
pub fn check_sizing(grid: &Grid, hull_lo: &[f64], hull_hi: &[f64], b: f64, p_max: f64) -> Result<()> {
    if grid.dim() != hull_lo.len() {
        return Err(Error::DimensionMismatch { expected: hull_lo.len(), got: grid.dim() });
    }
    let pad = Grid::sizing_pad(b);
    let h_max = Grid::sizing_spacing(b, p_max);
    for a in 0..grid.dim() {
        let (lo, hi) = (hull_lo[a] - pad, hull_hi[a] + pad);
        if grid.lo[a] > lo || grid.hi[a] < hi || grid.spacing(a) > h_max {
            return Err(Error::InvalidInput(format!(
                "grid axis {a} ([{}, {}], h = {}) must cover [{lo}, {hi}] with h <= {h_max}",
                grid.lo[a],
                grid.hi[a],
                grid.spacing(a),
            )));
        }
    }
    Ok(())
}

/// Hull of the centre positions and the largest speed over `trajs`.
pub fn hull_and_speed(trajs: &[ClassicalTrajectory], dim: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    let mut p_max: f64 = 0.0;
    for tr in trajs {
        for (x, v) in tr.x.iter().zip(&tr.v) {
            for a in 0..dim {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
            p_max = p_max.max(v.norm());
        }
    }
    (lo, hi, p_max)
}

/// Runs the battery (or explicit controls) against `target` on `[0, T**]`.
pub fn run_obstruction_experiment(
    setup: &ExperimentSetup,
    target: &TargetSpec,
    controls: &ControlSet,
) -> Result<ObstructionRun> {
    let p = &setup.potential;
    let dim = p.dim();
    let t_star = compute_t_star(setup.b, p.hess_sup())?;

    let build = |horizon: f64, sizing: bool| -> Result<Vec<LabeledControl>> {
        match controls {
            ControlSet::Battery { config, seed } => control_battery(config, dim, p.omega_sq_norm(), horizon, *seed),
            ControlSet::Explicit(list) => {
                if list.is_empty() {
                    return Err(Error::EmptyControlSet);
                }
                list.iter()
                    .map(|c| {
                        let t = if sizing { horizon.min(c.control.horizon()) } else { horizon };
                        Ok(LabeledControl { label: c.label.clone(), control: c.control.truncated(t)? })
                    })
                    .collect()
            }
        }
    };

    // size the box on [0, T*], which contains [0, T**]
    let sizing: Vec<ClassicalTrajectory> = build(t_star, true)?
        .iter()
        .map(|c| integrate_newton(p, &c.control, &setup.x0, &setup.v0, setup.dt_ode))
        .collect::<Result<_>>()?;
    if sizing.is_empty() {
        return Err(Error::EmptyControlSet);
    }
    let (mut hull_lo, mut hull_hi, p_max) = hull_and_speed(&sizing, dim);
    if let TargetSpec::Bumps(centers) = target {
        for c in centers {
            for a in 0..dim.min(c.len()) {
                hull_lo[a] = hull_lo[a].min(c[a]);
                hull_hi[a] = hull_hi[a].max(c[a]);
            }
        }
    }
    let given = match target {
        TargetSpec::Field(f) => Some(&f.grid),
        TargetSpec::Bumps(_) => setup.grid.as_ref(),
    };
    let grid = match given {
        Some(g) => {
            check_sizing(g, &hull_lo, &hull_hi, setup.b, p_max)?;
            g.clone()
        }
        None => Grid::sized_for(&hull_lo, &hull_hi, setup.b, p_max, setup.min_points)?,
    };
    let target_field = match target {
        TargetSpec::Bumps(centers) => multi_bump_target(&grid, setup.b, centers)?,
        TargetSpec::Field(f) => f.clone(),
    };

    let fit = gaussian_set_distance(&target_field, setup.b)?;
    if fit.delta0 <= DEGENERATE_THRESHOLD {
        return Err(Error::DegenerateTarget { delta0: fit.delta0 });
    }
    let (t_double_star, delta) = compute_t_double_star(fit.delta0, setup.b, p, t_star)?;
    let trial_controls = build(t_double_star, false)?;

    let solver = SplitStep::new(&grid, p, PropagateOptions { tail_budget: setup.tail_budget })?;
    let psi0 = initial_state(&grid, setup.b, &setup.x0, &setup.v0)?;
    let c_star = constant_c_star(dim);

    let results: Vec<(TrialReport, Vec<TraceRow>)> = trial_controls
        .par_iter()
        .map(|lc| -> Result<(TrialReport, Vec<TraceRow>)> {
            let traj = integrate_newton(p, &lc.control, &setup.x0, &setup.v0, setup.dt_ode)?;
            let ric = integrate_riccati(p, &traj, setup.b)?;
            let band_ok = ric.check_q2_band(t_double_star)?.holds;
            let cum = ric.cumulative_inv_q2_pow();
            let mut rows = Vec::new();
            let mut j = 0usize;
            solver.propagate_with(&psi0, &lc.control, 0.0, t_double_star, setup.dt_pde, |t, psi| {
                let distance = psi.l2_distance(&target_field)?;
                let tol = 1e-12 * t.max(1.0);
                while j + 1 < ric.len() && ric.times[j] < t - tol {
                    j += 1;
                }
                let (tcs_distance, error_bound, tcs_target_distance) = if (ric.times[j] - t).abs() <= tol {
                    let packet = evaluate_packet(&packet_at(&traj, &ric, j)?, &grid)?;
                    let eb = if p.third_sup() == 0.0 { 0.0 } else { c_star * p.third_sup() * cum[j] };
                    (psi.l2_distance(&packet)?, eb, packet.l2_distance(&target_field)?)
                } else {
                    (f64::NAN, f64::NAN, f64::NAN)
                };
                rows.push(TraceRow { t, distance, tcs_distance, error_bound, tcs_target_distance });
                Ok(())
            })?;
            let (argmin_t, min_distance) = rows
                .iter()
                .map(|r| (r.t, r.distance))
                .fold((0.0, f64::INFINITY), |acc, (t, d)| if d < acc.1 { (t, d) } else { acc });
            let matched: Vec<&TraceRow> = rows.iter().filter(|r| !r.tcs_distance.is_nan()).collect();
            let max_tcs_error = matched.iter().map(|r| r.tcs_distance).fold(0.0, f64::max);
            let max_error_bound = matched.iter().map(|r| r.error_bound).fold(0.0, f64::max);
            let bound_ok = matched.iter().all(|r| r.tcs_distance <= r.error_bound + setup.bound_slack);
            let report = TrialReport {
                control: lc.label.clone(),
                pieces: lc.control.pieces().to_vec(),
                min_distance,
                argmin_t,
                initial_distance: rows[0].distance,
                max_tcs_error,
                max_error_bound,
                bound_ok,
                band_ok,
            };
            Ok((report, rows))
        })
        .collect::<Result<_>>()?;

    let (trials, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let verdict = trials.iter().all(|t| t.min_distance > delta);
    let bounds_ok = trials.iter().all(|t| t.bound_ok && t.band_ok);
    let report = ObstructionReport {
        delta0: fit.delta0,
        coarse_delta0: fit.coarse_delta0,
        q: crate::linalg::matrix_to_rows(&fit.q),
        alpha: fit.alpha.iter().copied().collect(),
        t_star,
        t_double_star,
        delta,
        grid,
        trials,
        bounds_ok,
        verdict,
    };
    Ok(ObstructionRun { report, traces })
}

pub fn write_trace_csv<W: std::io::Write>(rows: &[TraceRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,distance,tcs_distance,error_bound,tcs_target_distance")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.t, r.distance, r.tcs_distance, r.error_bound, r.tcs_target_distance)?;
    }
    Ok(())
}
