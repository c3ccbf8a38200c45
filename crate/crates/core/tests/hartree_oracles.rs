//! Hartree flow against eigenmodes, dense exponentials and self-refinement.

use std::sync::Arc;

use magmf_core::dense;
use magmf_core::hartree::{regularity_trace, regularization_gap_against};
use magmf_core::lattice::{GaugeField, GaugePreset, Grid, LatticeOperators, WaveFunction};
use magmf_core::potentials::InteractionParams;
use magmf_core::{HartreeSolver, KrylovConfig, C64};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn solver(ops: LatticeOperators, lambda: f64, alpha: f64) -> HartreeSolver {
    HartreeSolver::new(
        Arc::new(ops),
        InteractionParams::new(lambda, alpha).unwrap(),
        KrylovConfig::default(),
    )
    .unwrap()
}

fn flat_1d(points: usize, l: f64) -> LatticeOperators {
    LatticeOperators::flat(Grid::new(1, points, l).unwrap())
}

/// Coulomb-like field by a double sum over nodes, floor at one spacing.
fn direct_field(grid: &Grid, lambda: f64, alpha: f64, rho: &[f64]) -> Vec<f64> {
    let pos = grid.positions();
    let h = grid.spacing();
    pos.iter()
        .map(|x| {
            pos.iter()
                .zip(rho)
                .map(|(y, r)| {
                    let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
                    let d = if d < 0.5 * h { h } else { d };
                    lambda / (d + alpha) * r * grid.cell_volume()
                })
                .sum()
        })
        .collect()
}

#[test]
fn lowest_box_mode_only_acquires_a_phase() {
    let ops = flat_1d(30, 4.0);
    let grid = *ops.grid();
    let hmat = ops.kinetic().matrix().to_dense();
    let eig = nalgebra::SymmetricEigen::new(hmat.map(|z| z.re));
    let (i0, e1) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
    let mode: Vec<C64> = eig.eigenvectors.column(i0).iter().map(|x| C64::new(*x, 0.0)).collect();
    let mut phi = WaveFunction::new(grid, mode).unwrap();
    phi.normalize();
    let s = solver(ops, 0.0, 0.0);
    let dt = 0.05;
    let (out, _) = s.step(&s.initial_state(phi.clone()), dt).unwrap();
    let want = phi.scaled(C64::from_polar(1.0, -e1 * dt));
    assert!(out.phi.max_abs_diff(&want) < 1e-10);
    let moduli = out.phi.modulus().max_abs_diff(&phi.modulus());
    assert!(moduli < 1e-10);
}

#[test]
fn free_steps_compose_to_one_exponential() {
    let grid = Grid::new(2, 10, 2.0).unwrap();
    let ops = LatticeOperators::new(GaugeField::sample(&GaugePreset::ConstantB { b0: [0.0, 0.0, 1.5] }, grid).unwrap());
    let hmat = ops.kinetic().matrix().to_dense();
    let s = solver(ops, 0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let phi = WaveFunction::random_smooth(grid, &mut rng);
    let traj = s.evolve(&s.initial_state(phi.clone()), 0.6, 0.02, 30).unwrap();
    let want = dense::hermitian_expm_apply(&hmat, phi.values(), 0.6);
    let got = traj.final_state().phi.values();
    let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-9, "{err}");
}

#[test]
fn strang_error_is_second_order() {
    let ops = flat_1d(32, 5.0);
    let grid = *ops.grid();
    let s = solver(ops, 1.0, 0.2);
    let phi = WaveFunction::gaussian(grid, [0.2, 0.0, 0.0], 0.8, [1.0, 0.0, 0.0]);
    let t = 1.0;
    let run = |dt: f64| {
        let steps = (t / dt).round() as usize;
        s.evolve_with(&s.initial_state(phi.clone()), t, dt, steps, false)
            .unwrap()
            .final_state()
            .phi
            .clone()
    };
    let dt = 0.02;
    let reference = run(dt / 8.0);
    let e1 = run(dt).sub(&reference).unwrap().norm();
    let e2 = run(dt / 2.0).sub(&reference).unwrap().norm();
    let ratio = e1 / e2;
    assert!((ratio - 4.0).abs() <= 0.8, "ratio {ratio}");
}

#[test]
fn free_gaussian_conserves_mass_and_energy() {
    let ops = flat_1d(60, 8.0);
    let grid = *ops.grid();
    let s = solver(ops, 0.0, 0.0);
    let phi = WaveFunction::gaussian(grid, [0.0; 3], 1.0, [1.5, 0.0, 0.0]);
    let traj = s.evolve(&s.initial_state(phi), 1.0, 0.01, 10).unwrap();
    assert!(traj.max_mass_defect() < 1e-10);
    assert!(traj.max_energy_drift() < 1e-10);
}

#[test]
fn magnetic_energy_drift_is_second_order() {
    let grid = Grid::new(2, 16, 4.0).unwrap();
    let ops = LatticeOperators::new(GaugeField::sample(&GaugePreset::ConstantB { b0: [0.0, 0.0, 1.0] }, grid).unwrap());
    let s = solver(ops, 1.0, 0.1);
    let phi = WaveFunction::gaussian(grid, [0.3, 0.0, 0.0], 0.9, [0.5, -0.3, 0.0]);
    let drift = |dt: f64| s.evolve(&s.initial_state(phi.clone()), 1.0, dt, 5).unwrap().max_energy_drift();
    let (d1, d2) = (drift(0.02), drift(0.01));
    let ratio = d1 / d2;
    assert!((3.0..=5.0).contains(&ratio), "drifts {d1:e} {d2:e} ratio {ratio}");
}

#[test]
fn flat_energy_is_half_squared_central_gradient() {
    let ops = flat_1d(40, 5.0);
    let grid = *ops.grid();
    let phi = WaveFunction::gaussian(grid, [0.0; 3], 0.7, [0.0; 3]);
    let v = phi.values();
    let h = grid.spacing();
    let at = |i: isize| if i < 0 || i as usize >= v.len() { C64::default() } else { v[i as usize] };
    let grad: f64 = (0..v.len() as isize)
        .map(|i| ((at(i + 1) - at(i - 1)) / (2.0 * h)).norm_sqr())
        .sum::<f64>()
        * h;
    let s = solver(ops.clone(), 0.0, 0.0);
    let e = s.energy(&phi).unwrap();
    assert!((e - 0.5 * grad).abs() < 1e-12);
    let hphi = ops.kinetic_apply(&phi).unwrap();
    assert!((e - 0.5 * phi.inner(&hphi).unwrap().re).abs() < 1e-12);
}

#[test]
fn interacting_energy_matches_dense_quadrature() {
    let grid = Grid::new(2, 10, 2.5).unwrap();
    let ops = LatticeOperators::new(GaugeField::sample(&GaugePreset::ConstantB { b0: [0.0, 0.0, 0.7] }, grid).unwrap());
    let hmat = ops.kinetic().matrix().to_dense();
    let s = solver(ops, 1.0, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let phi = WaveFunction::random_smooth(grid, &mut rng);
    let v = DVector::from_column_slice(phi.values());
    let w = grid.cell_volume();
    let kinetic = (v.adjoint() * &hmat * &v)[(0, 0)].re * w;
    let rho = phi.density();
    let field = direct_field(&grid, 1.0, 0.3, &rho);
    let potential: f64 = field.iter().zip(&rho).map(|(f, r)| f * r).sum::<f64>() * w;
    let want = 0.5 * kinetic + 0.25 * potential;
    let got = s.energy(&phi).unwrap();
    assert!((got - want).abs() < 1e-11 * want.abs().max(1.0), "{got} vs {want}");
}

#[test]
fn equal_regularizations_have_no_gap() {
    let ops = flat_1d(30, 4.0);
    let grid = *ops.grid();
    let phi = WaveFunction::gaussian(grid, [0.0; 3], 0.8, [0.0; 3]);
    let s = solver(ops.clone(), 1.0, 0.0);
    let rows = regularization_gap_against(&s, &phi, 0.2, &[0.2], 0.5, 0.01, 10).unwrap();
    assert!(rows[0].l2_gap < 1e-12 && rows[0].h1a_gap < 1e-12);
    let free = solver(ops, 0.0, 0.0);
    let rows = regularization_gap_against(&free, &phi, 0.0, &[0.4, 0.1], 0.5, 0.01, 10).unwrap();
    assert!(rows.iter().all(|r| r.l2_gap < 1e-12 && r.h1a_gap < 1e-12));
}

#[test]
fn free_flat_flow_keeps_h2_norm() {
    let ops = flat_1d(40, 5.0);
    let grid = *ops.grid();
    let s = solver(ops, 0.0, 0.0);
    let phi = WaveFunction::gaussian(grid, [0.5, 0.0, 0.0], 0.9, [0.8, 0.0, 0.0]);
    let series = regularity_trace(&s, &phi, 1.0, 0.01, 10).unwrap();
    let h0 = series[0].h2a_norm;
    assert!(series.iter().all(|r| (r.h2a_norm - h0).abs() < 1e-9));
}

#[test]
fn regularity_suprema_stay_comparable_across_alpha() {
    let ops = flat_1d(48, 6.0);
    let grid = *ops.grid();
    let phi = WaveFunction::gaussian(grid, [0.0; 3], 1.0, [0.0; 3]);
    let sup = |alpha: f64| {
        let s = solver(ops.clone(), 1.0, alpha);
        regularity_trace(&s, &phi, 1.0, 0.01, 10)
            .unwrap()
            .iter()
            .fold((0.0f64, 0.0f64), |(a, b), r| (a.max(r.h2a_norm), b.max(r.dphi_dt_h1a)))
    };
    let (h_a, d_a) = sup(0.5);
    let (h_b, d_b) = sup(0.05);
    assert!(h_a.is_finite() && h_b.is_finite() && d_a.is_finite() && d_b.is_finite());
    assert!(h_b.max(h_a) / h_b.min(h_a) <= 3.0);
    assert!(d_b.max(d_a) / d_b.min(d_a) <= 3.0);
}

#[test]
fn initial_time_derivative_matches_explicit_right_side() {
    let grid = Grid::new(1, 30, 4.0).unwrap();
    let ops = flat_1d(30, 4.0);
    let hmat: DMatrix<C64> = ops.kinetic().matrix().to_dense();
    let s = solver(ops.clone(), 1.0, 0.2);
    let phi = WaveFunction::gaussian(grid, [0.1, 0.0, 0.0], 0.6, [0.4, 0.0, 0.0]);
    let field = direct_field(&grid, 1.0, 0.2, &phi.density());
    let hv = &hmat * DVector::from_column_slice(phi.values());
    let rhs: Vec<C64> = hv
        .iter()
        .zip(phi.values())
        .zip(&field)
        .map(|((k, v), f)| C64::new(0.0, -1.0) * (k + v * f))
        .collect();
    let want = ops.sobolev_norm(&WaveFunction::new(grid, rhs).unwrap(), 1).unwrap();
    let series = regularity_trace(&s, &phi, 0.1, 0.01, 10).unwrap();
    assert!((series[0].dphi_dt_h1a - want).abs() < 1e-10 * want);
}
