//! Magnetic Hartree flow `i d_t phi = H_A phi + (V_alpha * |phi|^2) phi` by Strang
//! splitting: exact half-step phases for the mean field around a Krylov step of
//! the magnetic kinetic operator.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::krylov::{self, KrylovConfig, KrylovStats};
use crate::lattice::{LatticeOperators, WaveFunction};
use crate::potentials::{ConvolutionMethod, InteractionParams, SampledKernel};

#[derive(Clone, Debug, PartialEq)]
pub struct HartreeState {
    pub phi: WaveFunction,
    pub t: f64,
    pub params: InteractionParams,
}

impl HartreeState {
    pub fn new(phi: WaveFunction, params: InteractionParams) -> Self {
        HartreeState { phi, t: 0.0, params }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observables {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub h1a_norm: f64,
    pub h2a_norm: f64,
    pub h3a_norm: f64,
    pub dphi_dt_h1a: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub samples: Vec<(HartreeState, Observables)>,
    pub krylov: KrylovStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &HartreeState {
        &self.samples.last().expect("trajectory has at least the initial sample").0
    }

    pub fn observables(&self) -> impl Iterator<Item = &Observables> {
        self.samples.iter().map(|(_, o)| o)
    }

    pub fn max_mass_defect(&self) -> f64 {
        self.observables().map(|o| (o.mass - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `max_t |E(t) - E(0)|`.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.samples[0].1.energy;
        self.observables().map(|o| (o.energy - e0).abs()).fold(0.0, f64::max)
    }

    pub const CSV_HEADER: &'static str = "t,mass,energy,h1a_norm,h2a_norm,h3a_norm,dphi_dt_h1a";

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{}", Self::CSV_HEADER)?;
        for o in self.observables() {
            writeln!(
                f,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                o.t, o.mass, o.energy, o.h1a_norm, o.h2a_norm, o.h3a_norm, o.dphi_dt_h1a
            )?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Number of uniform steps of size `dt` covering `t_final`.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be non-negative, got {t_final}")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "final time {t_final} is not a multiple of the step {dt}"
        )));
    }
    Ok(n as usize)
}

#[derive(Clone, Debug)]
pub struct HartreeSolver {
    ops: Arc<LatticeOperators>,
    kernel: SampledKernel,
    krylov: KrylovConfig,
    method: ConvolutionMethod,
    dt_ceiling: Option<f64>,
}

impl HartreeSolver {
    pub fn new(ops: Arc<LatticeOperators>, params: InteractionParams, krylov: KrylovConfig) -> Result<Self> {
        HartreeSolver::with_method(ops, params, krylov, ConvolutionMethod::Auto)
    }

    pub fn with_method(
        ops: Arc<LatticeOperators>,
        params: InteractionParams,
        krylov: KrylovConfig,
        method: ConvolutionMethod,
    ) -> Result<Self> {
        let kernel = SampledKernel::build_with(params, *ops.grid(), method, false)?;
        Ok(HartreeSolver {
            ops,
            kernel,
            krylov,
            method,
            dt_ceiling: None,
        })
    }

    /// Rejects steps with `|dt|` above `ceiling`.
    pub fn with_dt_ceiling(mut self, ceiling: f64) -> Self {
        self.dt_ceiling = Some(ceiling);
        self
    }

    /// Same solver with a different regularization.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let params = self.kernel.params().with_alpha(alpha);
        Ok(HartreeSolver {
            ops: self.ops.clone(),
            kernel: self.kernel_for(params)?,
            krylov: self.krylov,
            method: self.method,
            dt_ceiling: self.dt_ceiling,
        })
    }

    fn kernel_for(&self, params: InteractionParams) -> Result<SampledKernel> {
        SampledKernel::build_with(params, *self.ops.grid(), self.method, false)
    }

    pub fn ops(&self) -> &Arc<LatticeOperators> {
        &self.ops
    }

    pub fn kernel(&self) -> &SampledKernel {
        &self.kernel
    }

    pub fn params(&self) -> InteractionParams {
        self.kernel.params()
    }

    pub fn krylov(&self) -> &KrylovConfig {
        &self.krylov
    }

    pub fn initial_state(&self, phi: WaveFunction) -> HartreeState {
        HartreeState::new(phi, self.params())
    }

    fn apply_mean_field_phase(&self, phi: &mut WaveFunction, tau: f64) -> Result<()> {
        if self.params().lambda == 0.0 {
            return Ok(());
        }
        let field = self.kernel.convolve(&phi.density())?;
        phi.values_mut()
            .iter_mut()
            .zip(&field)
            .for_each(|(v, f)| *v *= C64::from_polar(1.0, -tau * f));
        Ok(())
    }

    /// One Strang step. Negative `dt` runs the flow backwards.
    pub fn step(&self, state: &HartreeState, dt: f64) -> Result<(HartreeState, KrylovStats)> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be nonzero, got {dt}")));
        }
        if let Some(ceiling) = self.dt_ceiling {
            if dt.abs() > ceiling {
                return Err(Error::StepTooLarge { dt, ceiling });
            }
        }
        if state.phi.grid() != self.ops.grid() {
            return Err(Error::GridMismatch);
        }
        let mut phi = state.phi.clone();
        self.apply_mean_field_phase(&mut phi, 0.5 * dt)?;
        let (values, stats) = krylov::expm_apply(self.ops.kinetic().matrix(), phi.values(), dt, &self.krylov)?;
        let mut phi = WaveFunction::new(*self.ops.grid(), values)?;
        self.apply_mean_field_phase(&mut phi, 0.5 * dt)?;
        Ok((
            HartreeState {
                phi,
                t: state.t + dt,
                params: self.params(),
            },
            stats,
        ))
    }

    /// Uniform propagation to `t_final`, sampling every `stride` steps and at the end.
    pub fn evolve(&self, state: &HartreeState, t_final: f64, dt: f64, stride: usize) -> Result<Trajectory> {
        self.evolve_with(state, t_final, dt, stride, true)
    }

    /// As [`evolve`](Self::evolve); `with_observables = false` records states only.
    pub fn evolve_with(
        &self,
        state: &HartreeState,
        t_final: f64,
        dt: f64,
        stride: usize,
        with_observables: bool,
    ) -> Result<Trajectory> {
        let steps = step_count(t_final, dt)?;
        let stride = stride.max(1);
        let record = |s: &HartreeState| -> Result<Observables> {
            if with_observables {
                self.observables(s)
            } else {
                Ok(Observables {
                    t: s.t,
                    mass: s.phi.norm(),
                    energy: f64::NAN,
                    h1a_norm: f64::NAN,
                    h2a_norm: f64::NAN,
                    h3a_norm: f64::NAN,
                    dphi_dt_h1a: f64::NAN,
                })
            }
        };
        let mut traj = Trajectory::default();
        let mut cur = state.clone();
        traj.samples.push((cur.clone(), record(&cur)?));
        let t0 = state.t;
        for n in 1..=steps {
            let (mut next, stats) = self.step(&cur, dt)?;
            // Avoid accumulating round-off in the clock.
            next.t = t0 + n as f64 * dt;
            traj.krylov.merge(&stats);
            cur = next;
            if n % stride == 0 || n == steps {
                traj.samples.push((cur.clone(), record(&cur)?));
            }
        }
        Ok(traj)
    }

    pub fn mean_field(&self, phi: &WaveFunction) -> Result<Vec<f64>> {
        self.kernel.convolve(&phi.density())
    }

    /// `E = 1/2 ||(-i grad + A) phi||^2 + 1/4 int (V * |phi|^2) |phi|^2`.
    pub fn energy(&self, phi: &WaveFunction) -> Result<f64> {
        let kinetic = self.ops.covariant_gradient_norm_sqr(phi)?;
        let field = self.mean_field(phi)?;
        let potential: f64 = field.iter().zip(phi.values()).map(|(f, v)| f * v.norm_sqr()).sum::<f64>()
            * phi.grid().cell_volume();
        Ok(0.5 * kinetic + 0.25 * potential)
    }

    /// Right side of the equation, `-i (H_A phi + (V * |phi|^2) phi)`.
    pub fn time_derivative(&self, phi: &WaveFunction) -> Result<WaveFunction> {
        let kin = self.ops.kinetic_apply(phi)?;
        let field = self.mean_field(phi)?;
        let values = kin
            .values()
            .iter()
            .zip(phi.values())
            .zip(&field)
            .map(|((k, v), f)| C64::new(0.0, -1.0) * (k + v * f))
            .collect();
        WaveFunction::new(*phi.grid(), values)
    }

    pub fn observables(&self, state: &HartreeState) -> Result<Observables> {
        let phi = &state.phi;
        Ok(Observables {
            t: state.t,
            mass: phi.norm(),
            energy: self.energy(phi)?,
            h1a_norm: self.ops.sobolev_norm(phi, 1)?,
            h2a_norm: self.ops.sobolev_norm(phi, 2)?,
            h3a_norm: self.ops.sobolev_norm(phi, 3)?,
            dphi_dt_h1a: self.ops.sobolev_norm(&self.time_derivative(phi)?, 1)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapRow {
    pub alpha: f64,
    pub l2_gap: f64,
    pub h1a_gap: f64,
}

/// For each `alpha`, the largest distance over the sampled times between the flow
/// with `reference_alpha` and the flow with `alpha`, both started from `phi0`.
pub fn regularization_gap_against(
    solver: &HartreeSolver,
    phi0: &WaveFunction,
    reference_alpha: f64,
    alphas: &[f64],
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<Vec<GapRow>> {
    let reference = solver
        .with_alpha(reference_alpha)?
        .evolve_with(&solver.initial_state(phi0.clone()), t_final, dt, stride, false)?;
    alphas
        .par_iter()
        .map(|&alpha| {
            let s = solver.with_alpha(alpha)?;
            let traj = s.evolve_with(&s.initial_state(phi0.clone()), t_final, dt, stride, false)?;
            let mut row = GapRow {
                alpha,
                l2_gap: 0.0,
                h1a_gap: 0.0,
            };
            for ((a, _), (b, _)) in reference.samples.iter().zip(&traj.samples) {
                let diff = a.phi.sub(&b.phi)?;
                row.l2_gap = row.l2_gap.max(diff.norm());
                row.h1a_gap = row.h1a_gap.max(solver.ops().sobolev_norm(&diff, 1)?);
            }
            Ok(row)
        })
        .collect()
}

/// Gaps against the unregularized (lattice-floor) flow.
pub fn regularization_gap(
    solver: &HartreeSolver,
    phi0: &WaveFunction,
    alphas: &[f64],
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<Vec<GapRow>> {
    if alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidArgument("regularization parameters must be positive".into()));
    }
    if alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("regularization parameters must be strictly descending".into()));
    }
    regularization_gap_against(solver, phi0, 0.0, alphas, t_final, dt, stride)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularitySample {
    pub t: f64,
    pub h2a_norm: f64,
    pub dphi_dt_h1a: f64,
}

/// Time series of `||phi_t||_{H^2_A}` and `||d_t phi_t||_{H^1_A}`.
pub fn regularity_trace(
    solver: &HartreeSolver,
    phi0: &WaveFunction,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<Vec<RegularitySample>> {
    let traj = solver.evolve_with(&solver.initial_state(phi0.clone()), t_final, dt, stride, false)?;
    traj.samples
        .iter()
        .map(|(s, _)| {
            Ok(RegularitySample {
                t: s.t,
                h2a_norm: solver.ops().sobolev_norm(&s.phi, 2)?,
                dphi_dt_h1a: solver.ops().sobolev_norm(&solver.time_derivative(&s.phi)?, 1)?,
            })
        })
        .collect()
}
