//! Periodic split-step Fourier solver for
//! `i∂ₜψ = (−½Δ + V(x) − ⟨E(t), x⟩)ψ` in one or two dimensions.
//!
//! Transform convention: the forward transform uses `e^{−ikx}`, wavenumbers
//! are `k = 2π·m/L` with `m` in standard FFT order (`0, 1, …, n/2−1, −n/2,
//! …, −1`). Fields are stored row-major with axis 0 slowest.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::classical::{step_grid_between, ControlSignal};
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

pub const DEFAULT_TAIL_BUDGET: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        let n = lo.len();
        if !(1..=2).contains(&n) || hi.len() != n || points.len() != n {
            return Err(Error::InvalidInput("grid must be 1-D or 2-D with matching lo/hi/points".into()));
        }
        for a in 0..n {
            if !(lo[a].is_finite() && hi[a].is_finite() && hi[a] > lo[a]) {
                return Err(Error::InvalidInput(format!("grid axis {a}: need hi > lo")));
            }
            if points[a] < 2 || !points[a].is_power_of_two() {
                return Err(Error::InvalidInput(format!("grid axis {a}: points must be a power of two >= 2")));
            }
        }
        Ok(Self { lo, hi, points })
    }

    pub fn uniform_1d(lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![points])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.points[axis] as f64
    }

    /// Volume element `hᴺ`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        (0..self.points[axis]).map(|j| self.lo[axis] + j as f64 * h).collect()
    }

    /// Coordinates of flat index `idx`.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        match self.dim() {
            1 => vec![self.lo[0] + idx as f64 * self.spacing(0)],
            _ => {
                let (i, j) = (idx / self.points[1], idx % self.points[1]);
                vec![self.lo[0] + i as f64 * self.spacing(0), self.lo[1] + j as f64 * self.spacing(1)]
            }
        }
    }

    /// All grid points, flat order.
    pub fn points_iter(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Wavenumbers along `axis` in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let dk = 2.0 * PI / (self.hi[axis] - self.lo[axis]);
        (0..n).map(|m| if m < n / 2 { m as f64 * dk } else { (m as f64 - n as f64) * dk }).collect()
    }

    /// Flat indices of the boundary frame, `max(1, n/32)` cells deep on every side.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let depth: Vec<usize> = self.points.iter().map(|n| (n / 32).max(1)).collect();
        let edge = |a: usize, j: usize| j < depth[a] || j >= self.points[a] - depth[a];
        (0..self.len())
            .map(|idx| match self.dim() {
                1 => edge(0, idx),
                _ => edge(0, idx / self.points[1]) || edge(1, idx % self.points[1]),
            })
            .collect()
    }

    /// Padding added on each side of the trajectory hull.
    pub fn sizing_pad(b: f64) -> f64 {
        8.0 / (b / 2.0).sqrt()
    }

    /// Largest admissible spacing for width parameter `b` and momentum bound `p_max`.
    pub fn sizing_spacing(b: f64, p_max: f64) -> f64 {
        let sigma_min = 1.0 / (1.5 * b).sqrt();
        let sigma_k = ((1.0 + 2.25 * b * b) / b).sqrt();
        (sigma_min / 6.0).min(PI / (p_max + 8.0 * sigma_k))
    }

    /// Box sizing from an a-priori width band and a momentum bound.
    ///
    /// The box is the hull `[hull_lo, hull_hi]` padded by `8·(b/2)^{−1/2}` per
    /// side and rounded outward to integers. The spacing satisfies
    /// `h ≤ σ_min/6` with `σ_min = (3b/2)^{−1/2}` and resolves momenta up to
    /// `p_max + 8σ_k`, where `σ_k² = (1 + (3b/2)²)/b` bounds the momentum
    /// variance of a packet with `‖Q₁‖ ≤ 1` and `Q₂` in the band.
    /// Points per axis are rounded up to a power of two, at least `min_points`.
    pub fn sized_for(hull_lo: &[f64], hull_hi: &[f64], b: f64, p_max: f64, min_points: usize) -> Result<Self> {
        let pad = Self::sizing_pad(b);
        let h_max = Self::sizing_spacing(b, p_max);
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut points = Vec::new();
        for (a, c) in hull_lo.iter().zip(hull_hi) {
            let l = (a - pad).floor();
            let u = (c + pad).ceil();
            let n = ((u - l) / h_max).ceil() as usize;
            lo.push(l);
            hi.push(u);
            points.push(n.max(min_points).next_power_of_two());
        }
        Self::new(lo, hi, points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for a {}-point grid", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = grid.points_iter().map(|x| f(&x)).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn l2_distance(&self, other: &ComplexField) -> Result<f64> {
        self.ensure_same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    /// `⟨self, other⟩ = Σ conj(self)·other·hᴺ`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.ensure_same_grid(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn ensure_same_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Self {
        let n = self.l2_norm();
        if n > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= n);
        }
        self
    }

    /// Pointwise modulus as a real-valued complex field.
    pub fn modulus(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect(),
        }
    }

    /// Probability mass in the boundary frame of the grid.
    pub fn tail_mass(&self) -> f64 {
        let mask = self.grid.boundary_mask();
        self.values.iter().zip(mask).filter(|(_, m)| *m).map(|(v, _)| v.norm_sqr()).sum::<f64>()
            * self.grid.cell_volume()
    }

    /// CSV with columns `x` (or `x_1,x_2`), `re`, `im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        match self.grid.dim() {
            1 => writeln!(w, "x,re,im")?,
            _ => writeln!(w, "x_1,x_2,re,im")?,
        }
        for (idx, v) in self.values.iter().enumerate() {
            let x = self.grid.point(idx);
            let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{},{}", coords.join(","), v.re, v.im)?;
        }
        Ok(())
    }

    /// Reads the format written by [`ComplexField::write_csv`]; the grid is
    /// reconstructed from the coordinate columns (periodic, so `hi = lo + n·h`).
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty field file".into()))?
            .map_err(|e| Error::Config(e.to_string()))?;
        let dim = match header.trim() {
            "x,re,im" => 1,
            "x_1,x_2,re,im" => 2,
            other => return Err(Error::Config(format!("unrecognized field header '{other}'"))),
        };
        let mut coords: Vec<Vec<f64>> = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let nums = nums.map_err(|e| Error::Config(format!("field file line {}: {e}", lineno + 2)))?;
            if nums.len() != dim + 2 {
                return Err(Error::Config(format!("field file line {}: expected {} columns", lineno + 2, dim + 2)));
            }
            coords.push(nums[..dim].to_vec());
            values.push(Complex64::new(nums[dim], nums[dim + 1]));
        }
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut points = Vec::new();
        for a in 0..dim {
            let mut axis: Vec<f64> = coords.iter().map(|c| c[a]).collect();
            axis.sort_by(f64::total_cmp);
            axis.dedup();
            let n = axis.len();
            if n < 2 {
                return Err(Error::Config("field file needs at least two points per axis".into()));
            }
            let h = (axis[n - 1] - axis[0]) / (n - 1) as f64;
            lo.push(axis[0]);
            hi.push(axis[0] + n as f64 * h);
            points.push(n);
        }
        let grid = Grid::new(lo, hi, points)?;
        // the file must be in the canonical row-major order
        for (idx, c) in coords.iter().enumerate().take(grid.len()) {
            let p = grid.point(idx);
            let tol = 1e-9 * (1.0 + p.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            if c.iter().zip(&p).any(|(a, b)| (a - b).abs() > tol) {
                return Err(Error::Config(format!("field file row {} is out of grid order", idx + 2)));
            }
        }
        ComplexField::new(grid, values)
    }
}

/// Forward/inverse transforms over all axes of a grid (unnormalized).
#[derive(Clone)]
pub struct SpectralPlan {
    points: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl SpectralPlan {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.points.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.points.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self { points: grid.points.clone(), forward, inverse }
    }

    fn apply(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        match self.points.len() {
            1 => plans[0].process(data),
            _ => {
                let (n0, n1) = (self.points[0], self.points[1]);
                // rows are contiguous
                plans[1].process(data);
                let mut col = vec![Complex64::new(0.0, 0.0); n0];
                for j in 0..n1 {
                    for i in 0..n0 {
                        col[i] = data[i * n1 + j];
                    }
                    plans[0].process(&mut col);
                    for i in 0..n0 {
                        data[i * n1 + j] = col[i];
                    }
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
    }
}

/// `‖k‖²` at every spectral index.
pub fn k_squared(grid: &Grid) -> Vec<f64> {
    let ks: Vec<Vec<f64>> = (0..grid.dim()).map(|a| grid.wavenumbers(a)).collect();
    (0..grid.len())
        .map(|idx| match grid.dim() {
            1 => ks[0][idx] * ks[0][idx],
            _ => {
                let (i, j) = (idx / grid.points[1], idx % grid.points[1]);
                ks[0][i] * ks[0][i] + ks[1][j] * ks[1][j]
            }
        })
        .collect()
}

/// Spectral Laplacian of a field.
pub fn laplacian(f: &ComplexField) -> ComplexField {
    let plan = SpectralPlan::new(&f.grid);
    let k2 = k_squared(&f.grid);
    let scale = 1.0 / f.grid.len() as f64;
    let mut data = f.values.clone();
    plan.forward(&mut data);
    data.iter_mut().zip(&k2).for_each(|(d, k)| *d *= -k * scale);
    plan.inverse(&mut data);
    ComplexField { grid: f.grid.clone(), values: data }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateOptions {
    /// Abort when the boundary-frame mass exceeds this at any observed step.
    pub tail_budget: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self { tail_budget: DEFAULT_TAIL_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: ComplexField,
    pub norm: f64,
    pub tail_mass: f64,
}

/// Split-step propagator bound to one grid and one potential.
pub struct SplitStep {
    grid: Grid,
    plan: SpectralPlan,
    potential: Vec<f64>,
    coords: Vec<Vec<f64>>,
    k2: Vec<f64>,
    boundary: Vec<bool>,
    options: PropagateOptions,
}

impl SplitStep {
    pub fn new(grid: &Grid, potential: &PotentialSpec, options: PropagateOptions) -> Result<Self> {
        if potential.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: potential.dim() });
        }
        let coords: Vec<Vec<f64>> = grid.points_iter().collect();
        let values = coords.iter().map(|x| potential.eval_potential(x)).collect();
        Ok(Self {
            grid: grid.clone(),
            plan: SpectralPlan::new(grid),
            potential: values,
            coords,
            k2: k_squared(grid),
            boundary: grid.boundary_mask(),
            options,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn tail_mass(&self, values: &[Complex64]) -> f64 {
        values.iter().zip(&self.boundary).filter(|(_, m)| **m).map(|(v, _)| v.norm_sqr()).sum::<f64>()
            * self.grid.cell_volume()
    }

    fn potential_phase(&self, values: &mut [Complex64], tau: f64, field: &[f64]) {
        for ((v, pot), x) in values.iter_mut().zip(&self.potential).zip(&self.coords) {
            let dipole: f64 = x.iter().zip(field).map(|(a, b)| a * b).sum();
            *v *= Complex64::from_polar(1.0, -tau * (pot - dipole));
        }
    }

    /// One Strang step of length `h` with the field frozen at `field`.
    pub fn step(&self, values: &mut [Complex64], h: f64, field: &[f64]) {
        let scale = 1.0 / self.grid.len() as f64;
        self.potential_phase(values, 0.5 * h, field);
        self.plan.forward(values);
        for (v, k2) in values.iter_mut().zip(&self.k2) {
            *v *= Complex64::from_polar(scale, -0.5 * h * k2);
        }
        self.plan.inverse(values);
        self.potential_phase(values, 0.5 * h, field);
    }

    /// Propagates `f0` from `t0` to `t1`, calling `observe(t, field)` at
    /// `t0` and after every step. Steps never straddle control breakpoints
    /// and use the midpoint value of the field.
    pub fn propagate_with(
        &self,
        f0: &ComplexField,
        control: &ControlSignal,
        t0: f64,
        t1: f64,
        dt: f64,
        mut observe: impl FnMut(f64, &ComplexField) -> Result<()>,
    ) -> Result<ComplexField> {
        if f0.grid != self.grid {
            return Err(Error::GridMismatch("initial field is not on the propagator grid".into()));
        }
        if control.dim() != self.grid.dim() {
            return Err(Error::DimensionMismatch { expected: self.grid.dim(), got: control.dim() });
        }
        let times = step_grid_between(control, dt, t0, t1)?;
        let mut state = f0.clone();
        let mut field = vec![0.0; control.dim()];
        self.guard(t0, &state.values)?;
        observe(t0, &state)?;
        for w in times.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            control.eval_piece_into(control.piece_index(mid), mid, &mut field);
            self.step(&mut state.values, w[1] - w[0], &field);
            self.guard(w[1], &state.values)?;
            observe(w[1], &state)?;
        }
        Ok(state)
    }

    fn guard(&self, t: f64, values: &[Complex64]) -> Result<()> {
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        let mass = self.tail_mass(values);
        if mass > self.options.tail_budget {
            return Err(Error::TailMassExceeded { t, mass, budget: self.options.tail_budget });
        }
        Ok(())
    }
}

/// Propagates and records a snapshot every `snapshot_every` steps (and at the end).
#[allow(clippy::too_many_arguments)]
pub fn propagate(
    f0: &ComplexField,
    potential: &PotentialSpec,
    control: &ControlSignal,
    t0: f64,
    t1: f64,
    dt: f64,
    snapshot_every: Option<usize>,
    options: PropagateOptions,
) -> Result<(ComplexField, Vec<Snapshot>)> {
    let solver = SplitStep::new(&f0.grid, potential, options)?;
    let mut snaps = Vec::new();
    let mut count = 0usize;
    let total = step_grid_between(control, dt, t0, t1)?.len();
    let last = solver.propagate_with(f0, control, t0, t1, dt, |t, f| {
        if let Some(every) = snapshot_every {
            if count.is_multiple_of(every.max(1)) || count + 1 == total {
                snaps.push(Snapshot { t, field: f.clone(), norm: f.l2_norm(), tail_mass: f.tail_mass() });
            }
        }
        count += 1;
        Ok(())
    })?;
    Ok((last, snaps))
}

/// Writes each snapshot as `snap_XXXXX.csv` plus `index.csv`
/// (`t,filename,norm,tail_mass`) into `dir`.
pub fn write_snapshots(dir: &std::path::Path, snaps: &[Snapshot]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let index_path = dir.join("index.csv");
    let mut index = std::io::BufWriter::new(std::fs::File::create(&index_path).map_err(|e| Error::io(&index_path, e))?);
    writeln!(index, "t,filename,norm,tail_mass").map_err(|e| Error::io(&index_path, e))?;
    for (i, s) in snaps.iter().enumerate() {
        let name = format!("snap_{i:05}.csv");
        let path = dir.join(&name);
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        s.field.write_csv(std::io::BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
        writeln!(index, "{},{},{},{}", s.t, name, s.norm, s.tail_mass).map_err(|e| Error::io(&index_path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &Grid, center: f64, b: f64, p: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| {
            let d = x[0] - center;
            (b / PI).powf(0.25) * Complex64::from_polar((-0.5 * b * d * d).exp(), p * d)
        })
    }

    // free spreading Gaussian (x₀ = 0)
    fn free_packet(x: f64, t: f64, b: f64, p: f64) -> Complex64 {
        let denom = Complex64::new(1.0, b * t);
        let arg = -0.5 * b * (x - p * t).powi(2) / denom + Complex64::i() * (p * x - 0.5 * p * p * t);
        (b / PI).powf(0.25) / denom.sqrt() * arg.exp()
    }

    #[test]
    fn norm_and_distance_basics() {
        let grid = Grid::uniform_1d(-12.0, 12.0, 1024).unwrap();
        let g = gaussian(&grid, 0.0, 1.0, 0.0);
        assert!((g.l2_norm() - 1.0).abs() < 1e-12);
        assert_eq!(g.l2_distance(&g).unwrap(), 0.0);

        let wide = Grid::uniform_1d(-20.0, 30.0, 2048).unwrap();
        let (a, c) = (gaussian(&wide, 0.0, 1.0, 0.0), gaussian(&wide, 10.0, 1.0, 0.0));
        assert!((a.l2_distance(&c).unwrap() - 2f64.sqrt()).abs() < 1e-6);

        let other = Grid::uniform_1d(-12.0, 12.0, 512).unwrap();
        assert!(matches!(g.l2_distance(&gaussian(&other, 0.0, 1.0, 0.0)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn grid_validation_and_wavenumbers() {
        assert!(Grid::uniform_1d(0.0, 1.0, 100).is_err());
        assert!(Grid::uniform_1d(1.0, 0.0, 64).is_err());
        let g = Grid::uniform_1d(0.0, 2.0 * PI, 8).unwrap();
        assert_eq!(g.wavenumbers(0), vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
        let s = Grid::sized_for(&[-1.0], &[2.0], 1.0, 0.0, 0).unwrap();
        assert!(s.lo[0] <= -1.0 - 8.0 * 2f64.sqrt() && s.hi[0] >= 2.0 + 8.0 * 2f64.sqrt());
        assert!(s.spacing(0) <= (1.0 / 1.5f64.sqrt()) / 6.0);
    }

    #[test]
    fn free_propagation_matches_closed_form() {
        let grid = Grid::uniform_1d(-20.0, 30.0, 1024).unwrap();
        let p = PotentialSpec::zero(1).unwrap();
        let u = ControlSignal::zero(1, 1.0).unwrap();
        let f0 = gaussian(&grid, 0.0, 1.0, 2.0);
        let (f1, _) = propagate(&f0, &p, &u, 0.0, 1.0, 1e-3, None, PropagateOptions::default()).unwrap();
        let exact = ComplexField::from_fn(&grid, |x| free_packet(x[0], 1.0, 1.0, 2.0));
        assert!(f1.l2_distance(&exact).unwrap() < 1e-6);
    }

    #[test]
    fn harmonic_ground_state_is_stationary_in_modulus() {
        let grid = Grid::uniform_1d(-12.0, 12.0, 256).unwrap();
        let p = PotentialSpec::isotropic_harmonic(1, 1.0).unwrap();
        let u = ControlSignal::zero(1, 1.0).unwrap();
        let f0 = gaussian(&grid, 0.0, 1.0, 0.0);
        let (f1, _) = propagate(&f0, &p, &u, 0.0, 1.0, 1e-3, None, PropagateOptions::default()).unwrap();
        assert!(f1.modulus().l2_distance(&f0.modulus()).unwrap() <= 1e-6);
    }

    #[test]
    fn steps_are_unitary() {
        let grid = Grid::new(vec![-10.0, -10.0], vec![10.0, 10.0], vec![64, 64]).unwrap();
        let p = PotentialSpec::cosine_harmonic(
            nalgebra::DMatrix::identity(2, 2),
            0.2,
            nalgebra::DVector::from_column_slice(&[1.0, 0.5]),
        )
        .unwrap();
        let solver = SplitStep::new(&grid, &p, PropagateOptions::default()).unwrap();
        let mut f = ComplexField::from_fn(&grid, |x| {
            Complex64::from_polar((-0.5 * (x[0] * x[0] + (x[1] - 1.0).powi(2))).exp(), 1.5 * x[0])
        })
        .normalized();
        let mut prev = f.l2_norm();
        for _ in 0..50 {
            solver.step(&mut f.values, 1e-2, &[30.0, -10.0]);
            let n = f.l2_norm();
            assert!(((n - prev) / prev).abs() <= 1e-13);
            prev = n;
        }
    }

    #[test]
    fn tail_guard_trips_on_small_box() {
        let grid = Grid::uniform_1d(-3.0, 3.0, 128).unwrap();
        let p = PotentialSpec::zero(1).unwrap();
        let u = ControlSignal::zero(1, 0.1).unwrap();
        let f0 = gaussian(&grid, 0.0, 1.0, 0.0).normalized();
        let res = propagate(&f0, &p, &u, 0.0, 0.1, 1e-2, None, PropagateOptions::default());
        assert!(matches!(res, Err(Error::TailMassExceeded { .. })));
    }

    #[test]
    fn spectral_laplacian_of_gaussian() {
        let grid = Grid::uniform_1d(-15.0, 15.0, 512).unwrap();
        let f = gaussian(&grid, 0.0, 1.0, 0.0);
        let lap = laplacian(&f);
        for (idx, v) in lap.values.iter().enumerate() {
            let x = grid.point(idx)[0];
            let exact = (x * x - 1.0) * f.values[idx].re;
            assert!((v.re - exact).abs() < 1e-10 && v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn field_csv_roundtrip_2d() {
        let grid = Grid::new(vec![-2.0, -1.0], vec![2.0, 3.0], vec![8, 4]).unwrap();
        let f = ComplexField::from_fn(&grid, |x| Complex64::new(x[0], x[1] * 0.5));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = ComplexField::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(g.grid.points, grid.points);
        assert!((g.grid.hi[0] - 2.0).abs() < 1e-12 && (g.grid.hi[1] - 3.0).abs() < 1e-12);
        assert_eq!(g.values, f.values);
    }

    #[test]
    fn snapshots_index_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::uniform_1d(-12.0, 12.0, 64).unwrap();
        let p = PotentialSpec::isotropic_harmonic(1, 1.0).unwrap();
        let u = ControlSignal::zero(1, 0.1).unwrap();
        let f0 = gaussian(&grid, 0.0, 1.0, 0.0);
        let (_, snaps) = propagate(&f0, &p, &u, 0.0, 0.1, 0.01, Some(5), PropagateOptions::default()).unwrap();
        assert_eq!(snaps.len(), 3);
        write_snapshots(dir.path(), &snaps).unwrap();
        let index = std::fs::read_to_string(dir.path().join("index.csv")).unwrap();
        assert_eq!(index.lines().count(), 4);
        assert!(dir.path().join("snap_00002.csv").exists());
    }
}
