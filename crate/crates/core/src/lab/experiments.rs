//! The three convergence studies. Cells of the `(N, alpha)` table run on a
//! bounded worker pool; the report is assembled after all cells join.

use std::sync::Arc;

use rayon::prelude::*;

use super::config::{DistanceKind, ExperimentConfig};
use super::report::{kinds, RateReport, RawPoint, ReportMeta, Study};
use crate::error::{Error, Result};
use crate::hartree::{regularity_trace, regularization_gap_against, HartreeSolver, Trajectory};
use crate::lattice::{LatticeOperators, WaveFunction};
use crate::manybody::{self, FockState, ManyBodyHamiltonian};
use crate::marginals::{self, DensityMatrix};
use crate::potentials::InteractionParams;

/// A study that stopped early. `partial` holds every point computed before the failure.
#[derive(Debug)]
pub struct StudyFailure {
    pub error: Error,
    pub partial: RateReport,
}

pub type StudyResult = std::result::Result<RateReport, Box<StudyFailure>>;

/// One `(N, alpha)` cell with its memory estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct CellPlan {
    pub n: usize,
    pub alpha: f64,
    pub amplitudes: u128,
    pub bytes: u128,
}

fn marginal_bytes(dof: usize, k: usize) -> u128 {
    let rows = (dof as u128).pow(k as u32);
    // Density matrix, difference and eigensolver workspace.
    rows * rows * 16 * 3
}

/// Cells of a trace or energy study with their working-set estimates.
pub fn plan_cells(cfg: &ExperimentConfig, study: Study) -> Result<Vec<CellPlan>> {
    let grid = cfg.grid()?;
    let alphas = match study {
        Study::Trace => vec![cfg.interaction.alpha; cfg.experiment.n_list.len()],
        Study::Energy => cfg.alpha_schedule(),
        Study::Regularization => return Ok(Vec::new()),
    };
    let wants_k2 = cfg.experiment.distances.contains(&DistanceKind::TraceK2);
    Ok(cfg
        .experiment
        .n_list
        .iter()
        .zip(alphas)
        .map(|(&n, alpha)| {
            let k = if wants_k2 && n >= 2 { 2 } else { 1 };
            CellPlan {
                n,
                alpha,
                amplitudes: manybody::tensor_len(&grid, n).unwrap_or(u128::MAX),
                bytes: manybody::propagation_bytes(&grid, n, cfg.solver.nbody_krylov_max_dim)
                    .saturating_add(marginal_bytes(grid.dof(), k)),
            }
        })
        .collect())
}

/// Refuses the run when the `jobs` largest cells cannot be resident together.
pub fn precheck(cfg: &ExperimentConfig, plans: &[CellPlan], jobs: usize) -> Result<()> {
    let budget = cfg.budget();
    for p in plans {
        budget.check(&format!("cell N = {}", p.n), p.bytes)?;
    }
    let mut sizes: Vec<u128> = plans.iter().map(|p| p.bytes).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let concurrent: u128 = sizes.iter().take(jobs.max(1)).fold(0u128, |a, b| a.saturating_add(*b));
    budget.check(&format!("{} concurrent cells", jobs.max(1).min(sizes.len())), concurrent)
}

pub fn worker_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

struct Setup {
    ops: Arc<LatticeOperators>,
    phi0: WaveFunction,
    params: InteractionParams,
    interval: f64,
    samples: usize,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let (interval, samples) = cfg.sampling()?;
    Ok(Setup {
        ops: Arc::new(cfg.operators()?),
        phi0: cfg.initial_state()?,
        params: cfg.interaction()?,
        interval,
        samples,
    })
}

fn hartree(cfg: &ExperimentConfig, s: &Setup, alpha: f64) -> Result<Trajectory> {
    let mut solver = HartreeSolver::with_method(
        s.ops.clone(),
        s.params.with_alpha(alpha),
        cfg.krylov(),
        cfg.solver.convolution,
    )?;
    if let Some(c) = cfg.solver.dt_ceiling {
        solver = solver.with_dt_ceiling(c);
    }
    solver.evolve_with(
        &solver.initial_state(s.phi0.clone()),
        cfg.solver.t_final,
        cfg.solver.dt,
        cfg.solver.sample_stride,
        false,
    )
}

/// `16 K sup_t ||phi_t||^2_{H^1_A}` with `K = max(1, 4 lambda^2)`.
pub fn analytic_trace_constant(ops: &LatticeOperators, traj: &Trajectory, lambda: f64) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for (s, _) in &traj.samples {
        sup = sup.max(ops.sobolev_norm(&s.phi, 1)?);
    }
    Ok(16.0 * (4.0 * lambda * lambda).max(1.0) * sup * sup)
}

/// `k * interval` rounded to twelve significant digits, so report keys read `t=0.3`.
pub fn sample_time(interval: f64, k: usize) -> f64 {
    format!("{:.11e}", k as f64 * interval).parse().expect("formatted float parses")
}

/// Propagates `phi0^{(x) N}` and calls `measure` at every sample time after `t = 0`.
fn propagate_cell(
    cfg: &ExperimentConfig,
    s: &Setup,
    n: usize,
    alpha: f64,
    mut measure: impl FnMut(usize, f64, &FockState) -> Result<Vec<RawPoint>>,
) -> (Vec<RawPoint>, Option<Error>) {
    let mut out = Vec::new();
    let run = (|| -> Result<()> {
        let budget = cfg.budget();
        let h = ManyBodyHamiltonian::build(&s.ops, s.params.with_alpha(alpha), n, &budget)?;
        let mut psi = FockState::product(&s.phi0, n, &budget)?;
        let step = cfg.solver.nbody_dt.unwrap_or(s.interval).min(s.interval);
        let krylov = cfg.nbody_krylov();
        for k in 1..=s.samples {
            psi = h.propagate(&psi, s.interval, step, &krylov)?.0;
            out.extend(measure(k, sample_time(s.interval, k), &psi)?);
        }
        Ok(())
    })();
    (out, run.err())
}

fn finish(meta: ReportMeta, cells: Vec<(Vec<RawPoint>, Option<Error>)>) -> StudyResult {
    let mut raw = Vec::new();
    let mut first_error = None;
    for (points, err) in cells {
        raw.extend(points);
        if first_error.is_none() {
            first_error = err;
        }
    }
    let report = RateReport {
        meta,
        raw,
        failure: first_error.as_ref().map(|e| e.to_string()),
    };
    match first_error {
        None => Ok(report),
        Some(error) => Err(Box::new(StudyFailure { error, partial: report })),
    }
}

fn fail(meta: ReportMeta, error: Error) -> Box<StudyFailure> {
    Box::new(StudyFailure {
        partial: RateReport {
            meta,
            raw: Vec::new(),
            failure: Some(error.to_string()),
        },
        error,
    })
}

fn point(n: usize, alpha: f64, t: f64, kind: &str, value: f64) -> RawPoint {
    RawPoint {
        n,
        alpha,
        t,
        kind: kind.to_string(),
        value,
    }
}

fn kernel_note(alpha: f64) -> (String, String) {
    let v = if alpha == 0.0 {
        "lambda/(r+alpha) with alpha = 0 and the origin at one lattice spacing".to_string()
    } else {
        format!("lambda/(r+alpha) with fixed alpha = {alpha}")
    };
    ("kernel".into(), v)
}

/// One sample of a single `(N, alpha)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSample {
    pub t: f64,
    pub trace_k1: f64,
    pub hs: f64,
    pub energy_k1: f64,
    pub norm_defect: f64,
}

#[derive(Clone, Debug)]
pub struct CellRun {
    pub n: usize,
    pub alpha: f64,
    pub samples: Vec<CellSample>,
    pub final_state: FockState,
}

/// Runs the single cell `N = experiment.n_particles`, `alpha = interaction.alpha`
/// against the Hartree flow with the same `alpha`.
pub fn run_nbody_cell(cfg: &ExperimentConfig, jobs: usize) -> Result<CellRun> {
    let n = cfg.experiment.n_particles;
    let alpha = cfg.interaction.alpha;
    let grid = cfg.grid()?;
    let plan = CellPlan {
        n,
        alpha,
        amplitudes: manybody::tensor_len(&grid, n).unwrap_or(u128::MAX),
        bytes: manybody::propagation_bytes(&grid, n, cfg.solver.nbody_krylov_max_dim)
            .saturating_add(marginal_bytes(grid.dof(), 1)),
    };
    precheck(cfg, std::slice::from_ref(&plan), 1)?;
    let s = setup(cfg)?;
    let pool = worker_pool(jobs)?;
    pool.install(|| {
        let traj = hartree(cfg, &s, alpha)?;
        let budget = cfg.budget();
        let h = ManyBodyHamiltonian::build(&s.ops, s.params.with_alpha(alpha), n, &budget)?;
        let mut psi = FockState::product(&s.phi0, n, &budget)?;
        let step = cfg.solver.nbody_dt.unwrap_or(s.interval).min(s.interval);
        let krylov = cfg.nbody_krylov();
        let mut samples = Vec::with_capacity(s.samples);
        for k in 1..=s.samples {
            psi = h.propagate(&psi, s.interval, step, &krylov)?.0;
            let phi_t = &traj.samples[k].0.phi;
            let gamma = marginals::reduce(&psi, 1, &budget)?;
            samples.push(CellSample {
                t: sample_time(s.interval, k),
                trace_k1: marginals::trace_distance(&gamma, phi_t)?,
                hs: marginals::hilbert_schmidt_distance(&gamma, phi_t)?,
                energy_k1: marginals::energy_distance(&gamma, phi_t, &s.ops)?,
                norm_defect: (psi.norm() - 1.0).abs(),
            });
        }
        Ok(CellRun {
            n,
            alpha,
            samples,
            final_state: psi,
        })
    })
}

/// Trace-norm convergence of the one- (and optionally two-) particle marginals.
pub fn run_trace_convergence(cfg: &ExperimentConfig, jobs: usize) -> StudyResult {
    let alpha = cfg.interaction.alpha;
    let mut meta = ReportMeta {
        study: Study::Trace,
        lambda: cfg.interaction.lambda,
        analytic_c: None,
        notes: vec![kernel_note(alpha)],
    };
    let prepared = (|| -> Result<_> {
        let plans = plan_cells(cfg, Study::Trace)?;
        precheck(cfg, &plans, jobs)?;
        let s = setup(cfg)?;
        let pool = worker_pool(jobs)?;
        let traj = pool.install(|| hartree(cfg, &s, alpha))?;
        let c = analytic_trace_constant(&s.ops, &traj, s.params.lambda)?;
        Ok((plans, s, pool, traj, c))
    })();
    let (plans, s, pool, traj, c) = match prepared {
        Ok(v) => v,
        Err(e) => return Err(fail(meta, e)),
    };
    meta.analytic_c = Some(c);
    let distances = &cfg.experiment.distances;
    let budget = cfg.budget();
    let cells = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| {
                propagate_cell(cfg, &s, plan.n, plan.alpha, |k, t, psi| {
                    let phi_t = &traj.samples[k].0.phi;
                    let mut pts = Vec::new();
                    let gamma1 = marginals::reduce(psi, 1, &budget)?;
                    for d in distances {
                        let v = match d {
                            DistanceKind::TraceK1 => marginals::trace_distance(&gamma1, phi_t)?,
                            DistanceKind::Hs => marginals::hilbert_schmidt_distance(&gamma1, phi_t)?,
                            DistanceKind::EnergyK1 => marginals::energy_distance(&gamma1, phi_t, &s.ops)?,
                            DistanceKind::TraceK2 => {
                                if plan.n < 2 {
                                    continue;
                                }
                                marginals::trace_distance(&marginals::reduce(psi, 2, &budget)?, phi_t)?
                            }
                        };
                        pts.push(point(plan.n, plan.alpha, t, d.name(), v));
                    }
                    Ok(pts)
                })
            })
            .collect::<Vec<_>>()
    });
    finish(meta, cells)
}

/// Energy-norm convergence with the regularization `alpha_N` of each cell.
pub fn run_energy_convergence(cfg: &ExperimentConfig, jobs: usize) -> StudyResult {
    let reference_alpha = cfg.experiment.reference_alpha;
    let meta = ReportMeta {
        study: Study::Energy,
        lambda: cfg.interaction.lambda,
        analytic_c: None,
        notes: vec![
            ("reference".into(), format!("Hartree flow with alpha = {reference_alpha}")),
            ("alpha_schedule".into(), format!("{:?}", cfg.alpha_schedule())),
        ],
    };
    let prepared = (|| -> Result<_> {
        let schedule = cfg.alpha_schedule();
        if schedule.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config(format!(
                "energy convergence needs a strictly positive alpha schedule, got {schedule:?}"
            )));
        }
        let plans = plan_cells(cfg, Study::Energy)?;
        precheck(cfg, &plans, jobs)?;
        let s = setup(cfg)?;
        let pool = worker_pool(jobs)?;
        let reference = pool.install(|| hartree(cfg, &s, reference_alpha))?;
        Ok((plans, s, pool, reference))
    })();
    let (plans, s, pool, reference) = match prepared {
        Ok(v) => v,
        Err(e) => return Err(fail(meta, e)),
    };
    let extra: Vec<DistanceKind> = cfg
        .experiment
        .distances
        .iter()
        .copied()
        .filter(|d| matches!(d, DistanceKind::TraceK1 | DistanceKind::Hs))
        .collect();
    let budget = cfg.budget();
    let cells = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| {
                let regularized = match hartree(cfg, &s, plan.alpha) {
                    Ok(t) => t,
                    Err(e) => return (Vec::new(), Some(e)),
                };
                propagate_cell(cfg, &s, plan.n, plan.alpha, |k, t, psi| {
                    let phi_ref = &reference.samples[k].0.phi;
                    let phi_reg = &regularized.samples[k].0.phi;
                    let gamma1 = marginals::reduce(psi, 1, &budget)?;
                    let cross = marginals::energy_distance(&DensityMatrix::projector(phi_reg, 1), phi_ref, &s.ops)?;
                    let mut pts = vec![
                        point(plan.n, plan.alpha, t, kinds::ENERGY_K1, marginals::energy_distance(&gamma1, phi_ref, &s.ops)?),
                        point(plan.n, plan.alpha, t, kinds::ENERGY_K1_REG, marginals::energy_distance(&gamma1, phi_reg, &s.ops)?),
                        point(plan.n, plan.alpha, t, kinds::ENERGY_BRIDGE, cross),
                    ];
                    for d in &extra {
                        let v = match d {
                            DistanceKind::TraceK1 => marginals::trace_distance(&gamma1, phi_ref)?,
                            _ => marginals::hilbert_schmidt_distance(&gamma1, phi_ref)?,
                        };
                        pts.push(point(plan.n, plan.alpha, t, d.name(), v));
                    }
                    Ok(pts)
                })
            })
            .collect::<Vec<_>>()
    });
    finish(meta, cells)
}

/// One-body study of the gap between regularized and reference Hartree flows,
/// plus the regularity sweep over `regularity_alphas`.
pub fn run_regularization_study(cfg: &ExperimentConfig, jobs: usize) -> StudyResult {
    let e = &cfg.experiment;
    let meta = ReportMeta {
        study: Study::Regularization,
        lambda: cfg.interaction.lambda,
        analytic_c: None,
        notes: vec![("reference".into(), format!("Hartree flow with alpha = {}", e.reference_alpha))],
    };
    let run = (|| -> Result<Vec<RawPoint>> {
        let s = setup(cfg)?;
        let pool = worker_pool(jobs)?;
        let mut solver = HartreeSolver::with_method(s.ops.clone(), s.params, cfg.krylov(), cfg.solver.convolution)?;
        if let Some(c) = cfg.solver.dt_ceiling {
            solver = solver.with_dt_ceiling(c);
        }
        let (t, dt, stride) = (cfg.solver.t_final, cfg.solver.dt, cfg.solver.sample_stride);
        pool.install(|| {
            let mut raw = Vec::new();
            for row in regularization_gap_against(&solver, &s.phi0, e.reference_alpha, &e.alpha_study, t, dt, stride)? {
                raw.push(point(1, row.alpha, t, kinds::L2_GAP, row.l2_gap));
                raw.push(point(1, row.alpha, t, kinds::H1A_GAP, row.h1a_gap));
            }
            let sweeps = e
                .regularity_alphas
                .par_iter()
                .map(|&a| {
                    let series = regularity_trace(&solver.with_alpha(a)?, &s.phi0, t, dt, stride)?;
                    let h2 = series.iter().map(|x| x.h2a_norm).fold(0.0, f64::max);
                    let d1 = series.iter().map(|x| x.dphi_dt_h1a).fold(0.0, f64::max);
                    Ok([point(1, a, t, kinds::H2A_SUP, h2), point(1, a, t, kinds::DPHI_DT_H1A_SUP, d1)])
                })
                .collect::<Result<Vec<_>>>()?;
            raw.extend(sweeps.into_iter().flatten());
            Ok(raw)
        })
    })();
    match run {
        Ok(raw) => Ok(RateReport {
            meta,
            raw,
            failure: None,
        }),
        Err(e) => Err(fail(meta, e)),
    }
}

pub fn run_study(cfg: &ExperimentConfig, study: Study, jobs: usize) -> StudyResult {
    match study {
        Study::Trace => run_trace_convergence(cfg, jobs),
        Study::Energy => run_energy_convergence(cfg, jobs),
        Study::Regularization => run_regularization_study(cfg, jobs),
    }
}
