//! Scenario runner behind the `tcs` subcommands.
//!
//! Every command writes its artifacts into one output directory. Reports are
//! deterministic for a fixed scenario and seed; wall-clock times only go to
//! `run.log`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::classical::{integrate_newton, ControlSignal};
use crate::error::{Error, Result};
use crate::obstruction::{
    gaussian_set_distance, hull_and_speed, multi_bump_target, run_obstruction_experiment, write_trace_csv, ControlSet,
    ExperimentSetup, LabeledControl, ObstructionReport, TargetSpec,
};
use crate::pde::{write_snapshots, ComplexField, Grid, PropagateOptions, Snapshot, SplitStep};
use crate::potentials::PotentialSpec;
use crate::riccati::{compute_t_star, integrate_riccati, t_star_residuals, BandReport, T_STAR_CAP};
use crate::scenario::{Horizon, HorizonMode, ResolvedScenario, ResolvedTarget};
use crate::tcs::{constant_c_star, constant_cn, evaluate_packet, initial_state, packet_at};

/// Process exit status for a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    PropertyViolation,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::PropertyViolation => 2,
        }
    }
}

/// 4 for numerical guards, 3 for everything else (configuration, input, io).
pub fn error_exit_code(e: &Error) -> u8 {
    if e.is_numerical_guard() {
        4
    } else {
        3
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

struct RunLog {
    start: Instant,
    lines: Vec<String>,
}

impl RunLog {
    fn new(command: &str) -> Self {
        Self { start: Instant::now(), lines: vec![format!("{:.3} start {command}", unix_now())] }
    }

    fn note(&mut self, msg: impl AsRef<str>) {
        self.lines.push(format!("{:.3} +{:.3}s {}", unix_now(), self.start.elapsed().as_secs_f64(), msg.as_ref()));
    }

    fn finish(mut self, out: &Path) -> Result<()> {
        self.note("done");
        let path = out.join("run.log");
        fs::write(&path, self.lines.join("\n") + "\n").map_err(|e| Error::io(&path, e))
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn setup_of(rs: &ResolvedScenario) -> ExperimentSetup {
    let n = &rs.scenario.numerics;
    ExperimentSetup {
        potential: rs.potential.clone(),
        b: rs.b,
        x0: rs.x0.clone(),
        v0: rs.v0.clone(),
        dt_ode: n.dt_ode,
        dt_pde: n.dt_pde,
        tail_budget: n.tail_budget,
        bound_slack: n.bound_slack,
        min_points: n.min_points,
        grid: rs.scenario.grid.clone(),
    }
}

fn target_spec(rs: &ResolvedScenario) -> Result<TargetSpec> {
    match &rs.target {
        Some(ResolvedTarget::Bumps(c)) => Ok(TargetSpec::Bumps(c.clone())),
        Some(ResolvedTarget::Field(f)) => Ok(TargetSpec::Field(f.clone())),
        None => Err(Error::Config("this command needs a [target]".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub dim: usize,
    pub b: f64,
    pub hess_sup: f64,
    pub c_n: f64,
    pub c_star: f64,
    pub t_star: f64,
}

pub fn constants(dim: usize, b: f64, hess_sup: f64) -> Result<ConstantsReport> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    Ok(ConstantsReport {
        dim,
        b,
        hess_sup,
        c_n: constant_cn(dim),
        c_star: constant_c_star(dim),
        t_star: compute_t_star(b, hess_sup)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagateSummary {
    pub horizon: f64,
    pub t_star: f64,
    pub grid: Grid,
    pub band_report: BandReport,
    pub det_residual_max: f64,
    pub riccati_asymmetry_max: f64,
    /// Largest `|‖ψ̃(t)‖ − 1|` of the analytic packet norm.
    pub tcs_norm_drift: f64,
    /// Largest change of the discrete PDE norm over one step.
    pub pde_step_norm_drift: f64,
    pub max_measured_error: f64,
    pub max_error_bound: f64,
    pub bound_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_min_distance: Option<f64>,
}

impl PropagateSummary {
    pub fn status(&self) -> Status {
        if self.bound_ok && self.band_report.holds {
            Status::Ok
        } else {
            Status::PropertyViolation
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagateRow {
    pub t: f64,
    pub pde_norm: f64,
    pub tcs_distance: f64,
    pub error_bound: f64,
    pub tcs_norm: f64,
    pub target_distance: f64,
}

/// Everything computed by [`propagate_scenario`].
#[derive(Debug, Clone)]
pub struct PropagateRun {
    pub summary: PropagateSummary,
    pub control: ControlSignal,
    pub classical: crate::classical::ClassicalTrajectory,
    pub riccati: crate::riccati::RiccatiTrajectory,
    pub rows: Vec<PropagateRow>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: ComplexField,
}

/// Horizon, grid and (optionally) target for a single-control run.
fn plan_single(rs: &ResolvedScenario, t_star: f64) -> Result<(f64, Grid, Option<ComplexField>)> {
    let sc = &rs.scenario;
    let n = &sc.numerics;
    let p = &rs.potential;
    let dim = p.dim();
    let first = match n.horizon {
        Horizon::Fixed(t) => t,
        Horizon::Mode(_) => t_star,
    };
    let control = sc.control_on(first)?;
    let traj = integrate_newton(p, &control, &rs.x0, &rs.v0, n.dt_ode)?;
    let (mut lo, mut hi, p_max) = hull_and_speed(std::slice::from_ref(&traj), dim);
    if let Some(ResolvedTarget::Bumps(centers)) = &rs.target {
        for c in centers {
            for a in 0..dim {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
    }
    // an explicit grid is used as given; the tail guard catches boxes that are too small
    let grid = match (&sc.grid, &rs.target) {
        (_, Some(ResolvedTarget::Field(f))) => f.grid.clone(),
        (Some(g), _) => g.clone(),
        (None, _) => Grid::sized_for(&lo, &hi, rs.b, p_max, n.min_points)?,
    };
    let target = match &rs.target {
        None => None,
        Some(ResolvedTarget::Bumps(c)) => Some(multi_bump_target(&grid, rs.b, c)?),
        Some(ResolvedTarget::Field(f)) => Some(f.clone()),
    };
    let horizon = match n.horizon {
        Horizon::Mode(HorizonMode::TDoubleStar) => {
            let t = target.as_ref().ok_or_else(|| Error::Config("t_double_star needs a [target]".into()))?;
            let fit = gaussian_set_distance(t, rs.b)?;
            crate::obstruction::compute_t_double_star(fit.delta0, rs.b, p, t_star)?.0
        }
        _ => first,
    };
    Ok((horizon, grid, target))
}

/// Runs classical, Riccati, packet and PDE for the configured control.
pub fn propagate_scenario(rs: &ResolvedScenario) -> Result<PropagateRun> {
    let n = &rs.scenario.numerics;
    let p = &rs.potential;
    let t_star = compute_t_star(rs.b, p.hess_sup())?;
    let (horizon, grid, target) = plan_single(rs, t_star)?;
    let control = rs.scenario.control_on(horizon)?;
    let traj = integrate_newton(p, &control, &rs.x0, &rs.v0, n.dt_ode)?;
    let ric = integrate_riccati(p, &traj, rs.b)?;
    let band_report = ric.check_q2_band(horizon.min(t_star))?;
    let cum = ric.cumulative_inv_q2_pow();
    let c3 = constant_c_star(p.dim()) * p.third_sup();

    let solver = SplitStep::new(&grid, p, PropagateOptions { tail_budget: n.tail_budget })?;
    let psi0 = initial_state(&grid, rs.b, &rs.x0, &rs.v0)?;
    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut j = 0usize;
    let mut step = 0usize;
    let mut prev_norm = psi0.l2_norm();
    let mut step_drift: f64 = 0.0;
    let mut tcs_norm_drift: f64 = 0.0;
    let final_state = solver.propagate_with(&psi0, &control, 0.0, horizon, n.dt_pde, |t, psi| {
        let norm = psi.l2_norm();
        step_drift = step_drift.max((norm - prev_norm).abs());
        prev_norm = norm;
        if n.snapshot_every > 0 && step.is_multiple_of(n.snapshot_every) {
            snapshots.push(Snapshot { t, field: psi.clone(), norm, tail_mass: psi.tail_mass() });
        }
        step += 1;
        let tol = 1e-12 * t.max(1.0);
        while j + 1 < ric.len() && ric.times[j] < t - tol {
            j += 1;
        }
        if (ric.times[j] - t).abs() > tol {
            return Ok(());
        }
        let w = packet_at(&traj, &ric, j)?;
        tcs_norm_drift = tcs_norm_drift.max((w.analytic_norm() - 1.0).abs());
        let packet = evaluate_packet(&w, &grid)?;
        let target_distance = match &target {
            Some(f) => psi.l2_distance(f)?,
            None => f64::NAN,
        };
        rows.push(PropagateRow {
            t,
            pde_norm: norm,
            tcs_distance: psi.l2_distance(&packet)?,
            error_bound: if c3 == 0.0 { 0.0 } else { c3 * cum[j] },
            tcs_norm: w.analytic_norm(),
            target_distance,
        });
        Ok(())
    })?;
    if n.snapshot_every > 0 && snapshots.last().map(|s| s.t) != rows.last().map(|r| r.t) {
        snapshots.push(Snapshot {
            t: horizon,
            field: final_state.clone(),
            norm: final_state.l2_norm(),
            tail_mass: final_state.tail_mass(),
        });
    }
    let max_measured_error = rows.iter().map(|r| r.tcs_distance).fold(0.0, f64::max);
    let max_error_bound = rows.iter().map(|r| r.error_bound).fold(0.0, f64::max);
    let bound_ok = rows.iter().all(|r| r.tcs_distance <= r.error_bound + n.bound_slack);
    let target_min_distance =
        target.as_ref().map(|_| rows.iter().map(|r| r.target_distance).fold(f64::INFINITY, f64::min));
    let summary = PropagateSummary {
        horizon,
        t_star,
        grid,
        band_report,
        det_residual_max: ric.max_det_residual(horizon.min(t_star)),
        riccati_asymmetry_max: ric.max_asymmetry(),
        tcs_norm_drift,
        pde_step_norm_drift: step_drift,
        max_measured_error,
        max_error_bound,
        bound_ok,
        target_min_distance,
    };
    Ok(PropagateRun { summary, control, classical: traj, riccati: ric, rows, snapshots, final_state })
}

/// `propagate`: writes `classical.csv`, `riccati.csv`, `trace.csv`,
/// `final_state.csv`, optional `snapshots/`, `summary.json` and `run.log`.
pub fn cmd_propagate(rs: &ResolvedScenario, out: &Path) -> Result<PropagateSummary> {
    ensure_dir(out)?;
    let mut log = RunLog::new("propagate");
    let run = propagate_scenario(rs)?;
    log.note(format!("propagated to t = {} on {:?} points", run.summary.horizon, run.summary.grid.points));
    write_with(&out.join("classical.csv"), |w| run.classical.write_csv(w))?;
    write_with(&out.join("riccati.csv"), |w| run.riccati.write_csv(w))?;
    write_with(&out.join("trace.csv"), |w| {
        writeln!(w, "t,pde_norm,tcs_distance,error_bound,tcs_norm,target_distance")?;
        for r in &run.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.t, r.pde_norm, r.tcs_distance, r.error_bound, r.tcs_norm, r.target_distance
            )?;
        }
        Ok(())
    })?;
    write_with(&out.join("final_state.csv"), |w| run.final_state.write_csv(w))?;
    if !run.snapshots.is_empty() {
        write_snapshots(&out.join("snapshots"), &run.snapshots)?;
    }
    write_json(&out.join("summary.json"), &run.summary)?;
    log.finish(out)?;
    Ok(run.summary)
}

fn control_set(rs: &ResolvedScenario, t_star: f64) -> Result<ControlSet> {
    let sc = &rs.scenario;
    match &sc.control {
        Some(c) => {
            let control = match &c.field {
                Some(_) => sc.control_on(t_star)?,
                None => ControlSignal::new(c.pieces.clone())?,
            };
            Ok(ControlSet::Explicit(vec![LabeledControl { label: "configured".into(), control }]))
        }
        None => Ok(ControlSet::Battery { config: sc.battery_config(), seed: sc.seed }),
    }
}

/// Runs the obstruction experiment without writing anything.
pub fn obstruct_scenario(rs: &ResolvedScenario) -> Result<crate::obstruction::ObstructionRun> {
    let t_star = compute_t_star(rs.b, rs.potential.hess_sup())?;
    run_obstruction_experiment(&setup_of(rs), &target_spec(rs)?, &control_set(rs, t_star)?)
}

/// `obstruct`: writes `report.json`, `traces/trial_XXX.csv` and `run.log`.
pub fn cmd_obstruct(rs: &ResolvedScenario, out: &Path) -> Result<ObstructionReport> {
    ensure_dir(out)?;
    let mut log = RunLog::new("obstruct");
    let run = obstruct_scenario(rs)?;
    log.note(format!(
        "delta0 = {}, T** = {}, {} trials, verdict = {}",
        run.report.delta0,
        run.report.t_double_star,
        run.report.trials.len(),
        run.report.verdict
    ));
    let traces = out.join("traces");
    ensure_dir(&traces)?;
    for (i, rows) in run.traces.iter().enumerate() {
        write_with(&traces.join(format!("trial_{i:03}.csv")), |w| write_trace_csv(rows, w))?;
    }
    write_json(&out.join("report.json"), &run.report)?;
    log.finish(out)?;
    Ok(run.report)
}

pub fn obstruct_status(report: &ObstructionReport) -> Status {
    if report.verdict && report.bounds_ok {
        Status::Ok
    } else {
        Status::PropertyViolation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<CheckItem>,
    pub all_pass: bool,
}

impl CheckReport {
    pub fn status(&self) -> Status {
        if self.all_pass {
            Status::Ok
        } else {
            Status::PropertyViolation
        }
    }
}

fn item(name: &str, value: f64, tolerance: f64) -> CheckItem {
    CheckItem { name: name.into(), value, tolerance, pass: value <= tolerance }
}

/// Invariant suite on one scenario: T* residuals, Riccati symmetry, band and
/// determinant identity on `[0, min(T, T*)]`, per-step unitarity, the TCS
/// error bound, and exactness for quadratic potentials.
pub fn check_scenario(rs: &ResolvedScenario) -> Result<CheckReport> {
    let p: &PotentialSpec = &rs.potential;
    let t_star = compute_t_star(rs.b, p.hess_sup())?;
    let (r1, r2) = t_star_residuals(rs.b, p.hess_sup(), t_star);
    let binding = if t_star >= T_STAR_CAP { 0.0 } else { r1.max(r2).abs() };
    let run = propagate_scenario(rs)?;
    let s = &run.summary;
    let slack = rs.scenario.numerics.bound_slack;
    let mut checks = vec![
        item("t_star_residual", binding, 1e-10),
        item("t_star_constraints_hold", r1.max(r2).max(0.0), 1e-10),
        item("riccati_asymmetry", s.riccati_asymmetry_max, 1e-12),
        CheckItem {
            name: "q2_band_violation".into(),
            value: (rs.b / 2.0 - s.band_report.min_eig).max(s.band_report.max_eig - 1.5 * rs.b).max(0.0),
            tolerance: 1e-9,
            pass: s.band_report.holds,
        },
        item("det_identity_residual", s.det_residual_max, 1e-8),
        item("pde_step_norm_drift", s.pde_step_norm_drift, 1e-13),
        item(
            "tcs_error_over_bound",
            run.rows.iter().map(|r| r.tcs_distance - r.error_bound).fold(f64::NEG_INFINITY, f64::max).max(0.0),
            slack,
        ),
    ];
    if p.is_quadratic() {
        checks.push(item("quadratic_exactness", s.max_measured_error, slack));
    }
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(CheckReport { checks, all_pass })
}

/// `check`: writes `check.json` and `run.log`.
pub fn cmd_check(rs: &ResolvedScenario, out: &Path) -> Result<CheckReport> {
    ensure_dir(out)?;
    let mut log = RunLog::new("check");
    let report = check_scenario(rs)?;
    log.note(format!("{} checks, all pass = {}", report.checks.len(), report.all_pass));
    write_json(&out.join("check.json"), &report)?;
    log.finish(out)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    #[test]
    fn exit_codes() {
        assert_eq!(error_exit_code(&Error::TailMassExceeded { t: 0.0, mass: 1.0, budget: 0.0 }), 4);
        assert_eq!(error_exit_code(&Error::Config("x".into())), 3);
        assert_eq!(error_exit_code(&Error::DegenerateTarget { delta0: 0.0 }), 3);
        assert_eq!(Status::PropertyViolation.code(), 2);
    }

    #[test]
    fn constants_report() {
        let c = constants(1, 1.0, 1.0).unwrap();
        assert!((c.c_n - std::f64::consts::PI.powf(0.25)).abs() < 1e-15);
        assert!((c.t_star - 0.175_866_855_624_551_3).abs() < 1e-12);
        assert!(constants(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn harmonic_propagation_is_exact() {
        let s = Scenario::parse(
            "[potential]\nkind = \"harmonic\"\nomega_sq = [[1.0]]\n[initial]\nb = 1.0\nx0 = [0.5]\nv0 = [0.0]\n\
             [numerics]\nhorizon = 0.5\ndt_pde = 0.001\n\
             [control]\nfield = { kind = \"sinusoid\", amplitude = [10.0], angular_freq = 1.0, phase = 0.0 }\n",
        )
        .unwrap();
        let run = propagate_scenario(&s.resolve().unwrap()).unwrap();
        assert_eq!(run.summary.max_error_bound, 0.0);
        assert!(run.summary.max_measured_error <= 5e-6, "{}", run.summary.max_measured_error);
        assert!(run.summary.bound_ok && run.summary.band_report.holds);
        assert_eq!(run.rows.len(), 501);
    }
}
