use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use tcs_core::classical::{integrate_newton, step_grid};
use tcs_core::obstruction::{compute_t_double_star, gaussian_set_distance, multi_bump_target};
use tcs_core::pde::{laplacian, ComplexField, Grid, PropagateOptions, SplitStep};
use tcs_core::riccati::{compute_t_star, integrate_riccati};
use tcs_core::tcs::{evaluate_packet, initial_state, packet_at, residual_field};
use tcs_core::{ControlSignal, PotentialSpec};

fn cosine(a: f64, k: f64) -> PotentialSpec {
    PotentialSpec::cosine_harmonic(DMatrix::identity(1, 1), a, DVector::from_element(1, k)).unwrap()
}

fn field_values() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-100.0..100.0f64, 1), 1..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn step_grid_is_sorted_and_hits_breakpoints(values in field_values(), horizon in 0.05..2.0f64, dt in 1e-3..0.05f64) {
        let u = ControlSignal::piecewise_constant(values, horizon).unwrap();
        let g = step_grid(&u, dt, horizon).unwrap();
        prop_assert_eq!(g[0], 0.0);
        prop_assert_eq!(*g.last().unwrap(), horizon);
        prop_assert!(g.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= dt * (1.0 + 1e-9)));
        for b in u.breakpoints() {
            prop_assert!(g.contains(&b));
        }
    }

    #[test]
    fn control_values_respect_sup_norm(values in field_values(), t in 0.0..1.0f64) {
        let u = ControlSignal::piecewise_constant(values, 1.0).unwrap();
        prop_assert!(u.eval(t).norm() <= u.sup_norm() + 1e-12);
    }

    #[test]
    fn riccati_stays_symmetric_and_in_band(
        values in prop::collection::vec(prop::collection::vec(-100.0..100.0f64, 2), 1..6),
        b in prop::sample::select(vec![0.5, 1.0, 2.0]),
        a in 0.0..0.5f64,
        x0 in prop::collection::vec(-2.0..2.0f64, 2),
    ) {
        let p = PotentialSpec::cosine_harmonic(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
            a,
            DVector::from_column_slice(&[1.0, -0.7]),
        ).unwrap();
        let t_star = compute_t_star(b, p.hess_sup()).unwrap();
        let u = ControlSignal::piecewise_constant(values, t_star).unwrap();
        let traj = integrate_newton(&p, &u, &DVector::from_vec(x0), &DVector::zeros(2), 2e-3).unwrap();
        let ric = integrate_riccati(&p, &traj, b).unwrap();
        prop_assert!(ric.max_asymmetry() <= 1e-12);
        prop_assert!(ric.check_q2_band(t_star).unwrap().holds);
        prop_assert!(ric.max_det_residual(t_star) <= 1e-8);
    }

    #[test]
    fn t_star_is_monotone(b in 0.1..4.0f64, h in 0.0..10.0f64, db in 0.0..1.0f64, dh in 0.0..5.0f64) {
        let t = compute_t_star(b, h).unwrap();
        prop_assert!(compute_t_star(b + db, h).unwrap() <= t);
        prop_assert!(compute_t_star(b, h + dh).unwrap() <= t);
    }

    #[test]
    fn t_double_star_is_monotone(d in 0.01..1.5f64, dd in 0.0..1.0f64, a in 0.01..2.0f64, da in 0.0..2.0f64) {
        let t_star = compute_t_star(1.0, 1.0 + 4.0 * (a + da)).unwrap();
        let (t, delta) = compute_t_double_star(d, 1.0, &cosine(a, 2.0), t_star).unwrap();
        prop_assert_eq!(delta, d / 2.0);
        prop_assert!(t <= t_star);
        prop_assert!(compute_t_double_star(d + dd, 1.0, &cosine(a, 2.0), t_star).unwrap().0 >= t);
        prop_assert!(compute_t_double_star(d, 1.0, &cosine(a + da, 2.0), t_star).unwrap().0 <= t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn split_step_is_unitary(e in -100.0..100.0f64, x0 in -3.0..3.0f64, v0 in -3.0..3.0f64) {
        let grid = Grid::uniform_1d(-20.0, 20.0, 512).unwrap();
        let p = cosine(0.3, 1.5);
        let psi0 = initial_state(&grid, 1.0, &DVector::from_element(1, x0), &DVector::from_element(1, v0)).unwrap();
        let u = ControlSignal::constant(vec![e], 0.05).unwrap();
        let solver = SplitStep::new(&grid, &p, PropagateOptions::default()).unwrap();
        let mut prev = psi0.l2_norm();
        let mut worst: f64 = 0.0;
        solver.propagate_with(&psi0, &u, 0.0, 0.05, 1e-3, |_, f| {
            let n = f.l2_norm();
            worst = worst.max((n - prev).abs());
            prev = n;
            Ok(())
        }).unwrap();
        prop_assert!(worst <= 1e-13);
    }

    #[test]
    fn distance_ignores_global_phase(c in 2.0..5.0f64, phase in 0.0..std::f64::consts::TAU) {
        let grid = Grid::uniform_1d(-16.0, 16.0, 256).unwrap();
        let f = multi_bump_target(&grid, 1.0, &[vec![-c], vec![c * 0.5]]).unwrap();
        let g = ComplexField::new(grid.clone(), f.values.iter().map(|v| v * Complex64::from_polar(1.0, phase)).collect()).unwrap();
        let a = gaussian_set_distance(&f, 1.0).unwrap();
        let b = gaussian_set_distance(&g, 1.0).unwrap();
        prop_assert!((a.delta0 - b.delta0).abs() <= 1e-8);
        prop_assert!(a.delta0 <= a.coarse_delta0);
    }
}

/// `(i∂ₜ − H)ψ̃` from central differences in time and a spectral Laplacian
/// equals the remainder field `r`.
#[test]
fn packet_residual_matches_schrodinger_defect() {
    let p = cosine(0.1, 2.0);
    let e = 10.0;
    let u = ControlSignal::constant(vec![e], 0.2).unwrap();
    let zero = DVector::zeros(1);
    let dt = 1e-4;
    let traj = integrate_newton(&p, &u, &DVector::from_element(1, 0.3), &zero, dt).unwrap();
    let ric = integrate_riccati(&p, &traj, 1.0).unwrap();
    let grid = Grid::uniform_1d(-16.0, 16.0, 1024).unwrap();
    for i in [500, 1500] {
        let h = traj.times[i + 1] - traj.times[i];
        let at = |j: usize| evaluate_packet(&packet_at(&traj, &ric, j).unwrap(), &grid).unwrap();
        let (prev, here, next) = (at(i - 1), at(i), at(i + 1));
        let lap = laplacian(&here);
        let w = packet_at(&traj, &ric, i).unwrap();
        let r = residual_field(&w, &p, &grid).unwrap();
        let mut defect = 0.0;
        for k in 0..grid.len() {
            let x = grid.point(k)[0];
            let dpsi = (next.values[k] - prev.values[k]) / (2.0 * h);
            let hpsi = -0.5 * lap.values[k] + (p.eval_potential(&[x]) - e * x) * here.values[k];
            defect += (Complex64::i() * dpsi - hpsi - r.values[k]).norm_sqr();
        }
        let defect = (defect * grid.cell_volume()).sqrt();
        let scale = r.l2_norm();
        assert!(scale > 1e-3, "remainder should be non-trivial, got {scale}");
        assert!(defect <= 1e-5 * scale.max(1.0), "defect {defect:e} vs |r| = {scale:e}");
    }
}

#[test]
fn quadratic_potentials_have_zero_residual_along_the_flow() {
    let p = PotentialSpec::harmonic(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap();
    let u = ControlSignal::sinusoid(vec![20.0, -5.0], 1.3, 0.2, 0.3).unwrap();
    let traj = integrate_newton(&p, &u, &DVector::from_column_slice(&[0.5, -0.5]), &DVector::zeros(2), 1e-3).unwrap();
    let ric = integrate_riccati(&p, &traj, 1.0).unwrap();
    let grid = Grid::new(vec![-10.0, -10.0], vec![10.0, 10.0], vec![64, 64]).unwrap();
    for i in [0, 100, traj.len() - 1] {
        let r = residual_field(&packet_at(&traj, &ric, i).unwrap(), &p, &grid).unwrap();
        assert!(r.l2_norm() <= 1e-12);
    }
}
