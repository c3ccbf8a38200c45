//! Invariant suites run by `magmf check`.
//!
//! The gauge and Hermiticity suites use the configured grid and gauge. The
//! others need particular geometries (a magnetic field needs two dimensions,
//! the sharp Hardy constant needs three) and run on fixed stock grids.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Suite};
use crate::dense;
use crate::error::Result;
use crate::hartree::HartreeSolver;
use crate::krylov::{self, HermitianOperator, KrylovConfig};
use crate::lattice::{
    commutator_residual, diamagnetic_residual, hardy_residual, FaultInjection, GaugeField, GaugePreset, Grid,
    LatticeOperators, WaveFunction,
};
use crate::manybody::{FockState, ManyBodyHamiltonian, MemoryBudget};
use crate::marginals::{self, DensityMatrix};
use crate::potentials::{kp_a3_bound_check, ConvolutionMethod, InteractionParams, SampledKernel};
use crate::C64;

pub const GAUGE_TOL: f64 = 1e-10;
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const INEQUALITY_SLACK: f64 = 1e-8;
pub const COMMUTATOR_RATIO: (f64, f64) = (3.0, 5.0);
pub const ORACLE_TOL: f64 = 1e-8;
pub const MARGINAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub pass: bool,
    /// The worst observed value of the suite's metric.
    pub metric: f64,
    pub detail: String,
}

fn outcome(suite: Suite, pass: bool, metric: f64, detail: String) -> SuiteOutcome {
    SuiteOutcome {
        suite,
        pass,
        metric,
        detail,
    }
}

fn fault(cfg: &ExperimentConfig) -> FaultInjection {
    if cfg.check.inject_link_sign_fault {
        FaultInjection::LinkSign
    } else {
        FaultInjection::None
    }
}

fn random_states(grid: Grid, count: usize, rng: &mut ChaCha8Rng) -> Vec<WaveFunction> {
    (0..count).map(|_| WaveFunction::random_smooth(grid, rng)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn run_suite(cfg: &ExperimentConfig, suite: Suite) -> Result<SuiteOutcome> {
    let mut rng = cfg.rng();
    match suite {
        Suite::Gauge => gauge_suite(cfg, &mut rng),
        Suite::Hermiticity => hermiticity_suite(cfg, &mut rng),
        Suite::Diamagnetic => inequality_suite(cfg, &mut rng, Suite::Diamagnetic),
        Suite::Hardy => inequality_suite(cfg, &mut rng, Suite::Hardy),
        Suite::KpA3 => inequality_suite(cfg, &mut rng, Suite::KpA3),
        Suite::Commutator => commutator_suite(),
        Suite::Oracle => oracle_suite(&mut rng),
    }
}

/// Gauge-invariant quantities of the configured problem, for comparison across gauges.
fn invariants(ops: &LatticeOperators, states: &[WaveFunction], params: InteractionParams) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let solver = HartreeSolver::new(std::sync::Arc::new(ops.clone()), params, KrylovConfig::default())?;
    for phi in states {
        for a in 0..ops.grid().dim() {
            out.push(ops.covariant_apply(a, phi)?.norm());
        }
        for k in 1..=3 {
            out.push(ops.sobolev_norm(phi, k)?);
        }
        out.push(solver.energy(phi)?);
    }
    if let [a, b, ..] = states {
        let gamma = DensityMatrix::projector(b, 1);
        out.push(marginals::trace_distance(&gamma, a)?);
        out.push(marginals::energy_distance(&gamma, a, ops)?);
    }
    if ops.grid().dof() <= 600 {
        out.extend(dense::hermitian_eigenvalues(&ops.kinetic().matrix().to_dense()));
        let n = out.len();
        // Eigenvalues come unsorted from the solver.
        out[n - ops.grid().dof()..].sort_by(f64::total_cmp);
    }
    Ok(out)
}

fn gauge_suite(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let gauge = cfg.gauge_field()?;
    let grid = *gauge.grid();
    let params = cfg.interaction()?;
    let states = random_states(grid, cfg.check.n_states.min(10), rng);
    let ops = LatticeOperators::with_fault(gauge.clone(), fault(cfg));
    let base = invariants(&ops, &states, params)?;
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.check.n_gauges {
        let chi: Vec<f64> = (0..grid.dof()).map(|_| rng.random_range(-PI..PI)).collect();
        let ops_chi = LatticeOperators::with_fault(gauge.gauge_transformed(&chi)?, fault(cfg));
        let moved: Vec<WaveFunction> = states.iter().map(|s| s.gauge_transformed(&chi)).collect::<Result<_>>()?;
        for (a, b) in base.iter().zip(invariants(&ops_chi, &moved, params)?) {
            worst = worst.max(rel(*a, b));
        }
    }
    Ok(outcome(
        Suite::Gauge,
        worst <= GAUGE_TOL,
        worst,
        format!("{} gauges, {} states, worst relative change {worst:e}", cfg.check.n_gauges, states.len()),
    ))
}

fn hermiticity_suite(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let ops = LatticeOperators::with_fault(cfg.gauge_field()?, fault(cfg));
    let mut worst = ops.operator_hermiticity_defect();
    let mut lowest = f64::NAN;
    if ops.grid().dof() <= 600 {
        lowest = dense::hermitian_eigenvalues(&ops.kinetic().matrix().to_dense())
            .into_iter()
            .fold(f64::INFINITY, f64::min);
    }
    // Matrix-free two-body Hamiltonian: <u, H v> = <H u, v> on random vectors.
    let mut h_defect = 0.0;
    if ops.grid().dof() <= 64 {
        let h = ManyBodyHamiltonian::build(&ops, cfg.interaction()?, 2, &MemoryBudget::default())?;
        let n = h.dim();
        let random = |rng: &mut ChaCha8Rng| -> Vec<C64> {
            (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
        };
        let (u, v) = (random(rng), random(rng));
        let (mut hu, mut hv) = (vec![C64::default(); n], vec![C64::default(); n]);
        h.apply_into(&u, &mut hu);
        h.apply_into(&v, &mut hv);
        let lhs = krylov::dot(&u, &hv);
        let rhs = krylov::dot(&hu, &v);
        h_defect = (lhs - rhs).norm() / lhs.norm().max(1.0);
    }
    worst = worst.max(h_defect);
    let psd = lowest.is_nan() || lowest >= -1e-10;
    Ok(outcome(
        Suite::Hermiticity,
        worst <= HERMITICITY_TOL && psd,
        worst,
        format!("operator defect {worst:e}, lowest kinetic eigenvalue {lowest:e}"),
    ))
}

fn stock_gauges(dim: usize) -> Result<Vec<LatticeOperators>> {
    let (points, l) = if dim == 3 { (12, 4.0) } else { (16, 4.0) };
    let grid = Grid::new(dim, points, l)?;
    Ok(vec![
        LatticeOperators::flat(grid),
        LatticeOperators::new(GaugeField::sample(&GaugePreset::ConstantB { b0: [0.0, 0.0, 1.0] }, grid)?),
    ])
}

fn inequality_suite(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, suite: Suite) -> Result<SuiteOutcome> {
    let dim = if suite == Suite::Diamagnetic { 2 } else { 3 };
    let params = InteractionParams::new(cfg.interaction.lambda.abs().max(1.0), 0.0)?;
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for ops in stock_gauges(dim)? {
        let mut local = rng.clone();
        for phi in random_states(*ops.grid(), cfg.check.n_states, &mut local) {
            let r = match suite {
                Suite::Diamagnetic => diamagnetic_residual(&ops, &phi)?,
                Suite::Hardy => hardy_residual(&ops, &phi)?,
                _ => {
                    let (lhs, rhs) = kp_a3_bound_check(&phi, params, &ops)?;
                    lhs - rhs
                }
            };
            worst = worst.max(r);
            count += 1;
        }
        *rng = local;
    }
    Ok(outcome(
        suite,
        worst <= INEQUALITY_SLACK,
        worst,
        format!("{count} states in flat and constant-field gauges, largest residual {worst:e}"),
    ))
}

/// Commutator residual on a grid and on its refinement; the ratio should be near 4.
pub fn commutator_refinement() -> Result<(f64, f64)> {
    let preset = GaugePreset::ConstantB { b0: [0.0, 0.0, 1.0] };
    let coarse = Grid::new(2, 21, 4.0)?;
    let mut out = [0.0; 2];
    for (i, grid) in [coarse, coarse.refined()].into_iter().enumerate() {
        let ops = LatticeOperators::new(GaugeField::sample(&preset, grid)?);
        let states = [
            WaveFunction::gaussian(grid, [0.3, -0.2, 0.0], 0.9, [0.5, 0.2, 0.0]),
            WaveFunction::gaussian(grid, [-0.5, 0.4, 0.0], 1.1, [0.0, -0.4, 0.0]),
        ];
        out[i] = commutator_residual(&ops, 0, 1, &states)?;
    }
    Ok((out[0], out[1]))
}

fn commutator_suite() -> Result<SuiteOutcome> {
    let (coarse, fine) = commutator_refinement()?;
    let ratio = coarse / fine;
    Ok(outcome(
        Suite::Commutator,
        ratio >= COMMUTATOR_RATIO.0 && ratio <= COMMUTATOR_RATIO.1,
        ratio,
        format!("residual {coarse:e} at h, {fine:e} at h/2, ratio {ratio}"),
    ))
}

fn oracle_suite(rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut worst: f64 = 0.0;
    // One-body Krylov propagation against the dense exponential.
    let g = Grid::new(1, 16, 3.0)?;
    let ops = LatticeOperators::new(GaugeField::sample(
        &GaugePreset::Custom(std::sync::Arc::new(|x: [f64; 3]| [0.3 + 0.1 * x[0], 0.0, 0.0])),
        g,
    )?);
    let phi = WaveFunction::random_smooth(g, rng);
    let (v, _) = krylov::expm_apply(ops.kinetic().matrix(), phi.values(), 0.7, &KrylovConfig::default())?;
    let e = dense::hermitian_expm_apply(&ops.kinetic().matrix().to_dense(), phi.values(), 0.7);
    worst = worst.max(max_diff(&v, &e));
    // Two-body propagation against the dense exponential of the assembled matrix.
    let g = Grid::new(1, 8, 2.0)?;
    let ops = LatticeOperators::flat(g);
    let h = ManyBodyHamiltonian::build(&ops, InteractionParams::new(1.0, 0.3)?, 2, &MemoryBudget::default())?;
    let phi = WaveFunction::random_smooth(g, rng);
    let psi = FockState::product(&phi, 2, &MemoryBudget::default())?;
    let out = h.propagate(&psi, 0.5, 0.1, &KrylovConfig::default())?.0;
    let n = h.dim();
    let mut dense_h = DMatrix::<C64>::zeros(n, n);
    let mut e = vec![C64::default(); n];
    let mut col = vec![C64::default(); n];
    for j in 0..n {
        e.iter_mut().for_each(|z| *z = C64::default());
        e[j] = C64::new(1.0, 0.0);
        h.apply_into(&e, &mut col);
        dense_h.set_column(j, &nalgebra::DVector::from_column_slice(&col));
    }
    let exact = dense::hermitian_expm_apply(&dense_h, psi.amplitudes(), 0.5);
    let scale = psi.amplitudes().iter().map(|z| z.norm()).fold(0.0, f64::max);
    worst = worst.max(max_diff(out.amplitudes(), &exact) / scale);
    // Transform convolution against the direct sum.
    let g = Grid::new(2, 14, 3.0)?;
    let phi = WaveFunction::random_smooth(g, rng);
    let params = InteractionParams::new(1.0, 0.1)?;
    let fast = SampledKernel::build_with(params, g, ConvolutionMethod::Fft, false)?.convolve(&phi.density())?;
    let slow = SampledKernel::build_with(params, g, ConvolutionMethod::Direct, false)?.convolve(&phi.density())?;
    let conv = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    worst = worst.max(conv);
    let marginal = marginal_oracle(rng)?;
    Ok(outcome(
        Suite::Oracle,
        worst <= ORACLE_TOL && marginal <= MARGINAL_TOL,
        worst,
        format!("propagation and convolution deviate by {worst:e}, marginals by {marginal:e}"),
    ))
}

/// Largest entry of `reduce` minus the partial trace of the full projector,
/// over `k = 1, 2` of a random three-particle state on four nodes.
pub fn marginal_oracle(rng: &mut ChaCha8Rng) -> Result<f64> {
    let g = Grid::new(1, 4, 1.0)?;
    let m = g.dof();
    let n = 3;
    let len = m.pow(n as u32);
    let amps: Vec<C64> = (0..len)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let psi = FockState::new(g, n, amps.clone())?;
    let w = psi.cell_volume();
    let full = DMatrix::from_fn(len, len, |i, j| w * amps[i] * amps[j].conj());
    let mut worst: f64 = 0.0;
    for k in 1..=2 {
        let rows = m.pow(k as u32);
        let cols = len / rows;
        let brute = DMatrix::from_fn(rows, rows, |a, b| {
            (0..cols).map(|c| full[(a * cols + c, b * cols + c)]).sum::<C64>()
        });
        let got = marginals::reduce(&psi, k, &MemoryBudget::default())?;
        let diff = (got.matrix() - &brute).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    Ok(worst)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
