//! Exact N-boson dynamics on the full tensor space `(interior nodes)^N`.
//!
//! Amplitudes are stored particle-1-major (particle 1 is the slowest index).
//! The Hamiltonian is applied matrix-free: a Kronecker sum of the one-body
//! magnetic kinetic operator over the particle slots plus the diagonal
//! `(1/N) sum_{i<j} V_alpha(x_i - x_j)`.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::krylov::{self, HermitianOperator, KrylovConfig, KrylovStats};
use crate::lattice::{Grid, LatticeOperators, WaveFunction};
use crate::potentials::{InteractionParams, SampledKernel};
use crate::sparse::CsrMatrix;

const BYTES_PER_AMPLITUDE: u128 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryBudget {
    pub bytes: u128,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        MemoryBudget { bytes: 4 << 30 }
    }
}

impl MemoryBudget {
    pub fn from_gib(gib: f64) -> Self {
        MemoryBudget {
            bytes: (gib * (1u64 << 30) as f64) as u128,
        }
    }

    pub fn check(&self, what: &str, required: u128) -> Result<()> {
        if required > self.bytes {
            return Err(Error::MemoryBudget {
                what: what.to_string(),
                required,
                budget: self.bytes,
            });
        }
        Ok(())
    }
}

/// Amplitude count `dof^N`, or `None` on overflow.
pub fn tensor_len(grid: &Grid, n_particles: usize) -> Option<u128> {
    (grid.dof() as u128).checked_pow(n_particles as u32)
}

/// Bytes needed for one N-body state.
pub fn state_bytes(grid: &Grid, n_particles: usize) -> u128 {
    tensor_len(grid, n_particles)
        .and_then(|l| l.checked_mul(BYTES_PER_AMPLITUDE))
        .unwrap_or(u128::MAX)
}

/// Working-set estimate for a Krylov propagation: basis vectors, the state,
/// two scratch vectors and the interaction diagonal.
pub fn propagation_bytes(grid: &Grid, n_particles: usize, krylov_dim: usize) -> u128 {
    let s = state_bytes(grid, n_particles);
    s.saturating_mul(krylov_dim as u128 + 3).saturating_add(s / 2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    grid: Grid,
    n_particles: usize,
    amplitudes: Vec<C64>,
}

impl FockState {
    pub fn new(grid: Grid, n_particles: usize, amplitudes: Vec<C64>) -> Result<Self> {
        let len = tensor_len(&grid, n_particles).unwrap_or(u128::MAX);
        if n_particles == 0 || amplitudes.len() as u128 != len {
            return Err(Error::InvalidArgument(format!(
                "{} amplitudes do not form a {n_particles}-particle state on {} nodes",
                amplitudes.len(),
                grid.dof()
            )));
        }
        Ok(FockState {
            grid,
            n_particles,
            amplitudes,
        })
    }

    /// `phi^{(x) N}`.
    pub fn product(phi: &WaveFunction, n_particles: usize, budget: &MemoryBudget) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::InvalidArgument("need at least one particle".into()));
        }
        let grid = *phi.grid();
        budget.check(
            &format!("{n_particles}-particle state on {} nodes", grid.dof()),
            state_bytes(&grid, n_particles),
        )?;
        let mut amps = phi.values().to_vec();
        for _ in 1..n_particles {
            let mut next = Vec::with_capacity(amps.len() * phi.values().len());
            for a in &amps {
                next.extend(phi.values().iter().map(|b| a * b));
            }
            amps = next;
        }
        Ok(FockState {
            grid,
            n_particles,
            amplitudes: amps,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    /// Quadrature weight `h^{N d}` of one tensor-grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.grid.cell_volume().powi(self.n_particles as i32)
    }

    pub fn norm(&self) -> f64 {
        (self.cell_volume() * krylov::norm_sqr(&self.amplitudes)).sqrt()
    }

    pub fn inner(&self, other: &FockState) -> C64 {
        self.cell_volume() * krylov::dot(&self.amplitudes, &other.amplitudes)
    }

    /// Largest amplitude change under any transposition of two particle slots.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n_particles;
        let m = self.grid.dof();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let si = m.pow((n - 1 - i) as u32);
                let sj = m.pow((n - 1 - j) as u32);
                let r = self
                    .amplitudes
                    .par_iter()
                    .enumerate()
                    .map(|(k, a)| {
                        let di = (k / si) % m;
                        let dj = (k / sj) % m;
                        let swapped = k + dj * si + di * sj - di * si - dj * sj;
                        (a - self.amplitudes[swapped]).norm()
                    })
                    .reduce(|| 0.0, f64::max);
                worst = worst.max(r);
            }
        }
        worst
    }

    /// `psi -> prod_i e^{-i chi(x_i)} psi`, the N-body image of a one-body gauge change.
    pub fn gauge_transformed(&self, chi: &[f64]) -> Result<FockState> {
        let m = self.grid.dof();
        if chi.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: chi.len(),
            });
        }
        let phases: Vec<C64> = chi.iter().map(|c| C64::from_polar(1.0, -c)).collect();
        let n = self.n_particles;
        let amplitudes = self
            .amplitudes
            .par_iter()
            .enumerate()
            .map(|(mut k, a)| {
                let mut out = *a;
                for _ in 0..n {
                    out *= phases[k % m];
                    k /= m;
                }
                out
            })
            .collect();
        Ok(FockState {
            grid: self.grid,
            n_particles: n,
            amplitudes,
        })
    }

    pub fn max_abs_diff(&self, other: &FockState) -> f64 {
        self.amplitudes
            .par_iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .reduce(|| 0.0, f64::max)
    }

    const MAGIC: &'static [u8; 8] = b"MAGMFCK1";

    /// Binary checkpoint: magic, then `dim, points_per_axis, N` as u32, `h`,
    /// `box_half_width`, `time` as f64, amplitude count as u64, then the
    /// amplitudes as (re, im) f64 pairs. All little-endian.
    pub fn write_checkpoint<W: Write>(&self, mut w: W, time: f64) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_u32::<LittleEndian>(self.grid.dim() as u32)?;
        w.write_u32::<LittleEndian>(self.grid.points_per_axis() as u32)?;
        w.write_u32::<LittleEndian>(self.n_particles as u32)?;
        w.write_f64::<LittleEndian>(self.grid.spacing())?;
        w.write_f64::<LittleEndian>(self.grid.box_half_width())?;
        w.write_f64::<LittleEndian>(time)?;
        w.write_u64::<LittleEndian>(self.amplitudes.len() as u64)?;
        for a in &self.amplitudes {
            w.write_f64::<LittleEndian>(a.re)?;
            w.write_f64::<LittleEndian>(a.im)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(FockState, f64)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let points = r.read_u32::<LittleEndian>()? as usize;
        let n = r.read_u32::<LittleEndian>()? as usize;
        let h = r.read_f64::<LittleEndian>()?;
        let half_width = r.read_f64::<LittleEndian>()?;
        let time = r.read_f64::<LittleEndian>()?;
        let len = r.read_u64::<LittleEndian>()? as usize;
        let grid = Grid::new(dim, points, half_width).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if (grid.spacing() - h).abs() > 1e-12 * h {
            return Err(Error::Checkpoint(format!("spacing {h} inconsistent with grid")));
        }
        if tensor_len(&grid, n) != Some(len as u128) {
            return Err(Error::Checkpoint(format!("{len} amplitudes for N = {n}")));
        }
        let mut amps = Vec::with_capacity(len);
        for _ in 0..len {
            let re = r.read_f64::<LittleEndian>()?;
            let im = r.read_f64::<LittleEndian>()?;
            amps.push(C64::new(re, im));
        }
        Ok((FockState::new(grid, n, amps)?, time))
    }

    pub fn save(&self, path: &Path, time: f64) -> Result<()> {
        self.write_checkpoint(std::io::BufWriter::new(std::fs::File::create(path)?), time)
    }

    pub fn load(path: &Path) -> Result<(FockState, f64)> {
        FockState::read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Matrix-free N-body Hamiltonian.
#[derive(Clone, Debug)]
pub struct ManyBodyHamiltonian {
    grid: Grid,
    n_particles: usize,
    params: InteractionParams,
    kinetic: CsrMatrix,
    interaction: Vec<f64>,
}

impl ManyBodyHamiltonian {
    pub fn build(
        ops: &LatticeOperators,
        params: InteractionParams,
        n_particles: usize,
        budget: &MemoryBudget,
    ) -> Result<Self> {
        if n_particles < 1 {
            return Err(Error::InvalidArgument("need at least one particle".into()));
        }
        let grid = *ops.grid();
        let len = tensor_len(&grid, n_particles).ok_or_else(|| Error::MemoryBudget {
            what: "interaction diagonal".into(),
            required: u128::MAX,
            budget: budget.bytes,
        })?;
        budget.check("interaction diagonal", len * 8)?;
        let kernel = SampledKernel::build(params, grid)?;
        let m = grid.dof();
        let pair: Vec<f64> = (0..m * m).map(|k| kernel.between(k / m, k % m)).collect();
        let scale = 1.0 / n_particles as f64;
        let n = n_particles;
        let interaction = if params.lambda == 0.0 || n == 1 {
            vec![0.0; len as usize]
        } else {
            (0..len as usize)
                .into_par_iter()
                .map(|mut k| {
                    let mut digits = [0usize; 16];
                    for slot in (0..n).rev() {
                        digits[slot] = k % m;
                        k /= m;
                    }
                    let mut v = 0.0;
                    for i in 0..n {
                        for j in (i + 1)..n {
                            v += pair[digits[i] * m + digits[j]];
                        }
                    }
                    v * scale
                })
                .collect()
        };
        Ok(ManyBodyHamiltonian {
            grid,
            n_particles,
            params,
            kinetic: ops.kinetic().matrix().clone(),
            interaction,
        })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn params(&self) -> InteractionParams {
        self.params
    }

    pub fn interaction_diagonal(&self) -> &[f64] {
        &self.interaction
    }

    pub fn apply(&self, psi: &FockState) -> Result<FockState> {
        self.check(psi)?;
        let mut out = vec![C64::default(); psi.amplitudes.len()];
        self.apply_into(&psi.amplitudes, &mut out);
        FockState::new(self.grid, self.n_particles, out)
    }

    fn check(&self, psi: &FockState) -> Result<()> {
        if psi.grid != self.grid || psi.n_particles != self.n_particles {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `<psi, H psi>`.
    pub fn energy(&self, psi: &FockState) -> Result<f64> {
        Ok(psi.inner(&self.apply(psi)?).re)
    }

    /// `exp(-i H t) psi` by Krylov steps of at most `dt`.
    pub fn propagate(&self, psi: &FockState, t: f64, dt: f64, cfg: &KrylovConfig) -> Result<(FockState, KrylovStats)> {
        self.check(psi)?;
        let mut stats = KrylovStats::default();
        if t == 0.0 {
            return Ok((psi.clone(), stats));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let steps = (t.abs() / dt - 1e-9).ceil().max(1.0) as usize;
        let tau = t / steps as f64;
        let mut cur = psi.amplitudes.clone();
        for _ in 0..steps {
            let (next, s) = krylov::expm_apply(self, &cur, tau, cfg)?;
            stats.merge(&s);
            cur = next;
        }
        Ok((FockState::new(self.grid, self.n_particles, cur)?, stats))
    }
}

impl HermitianOperator for ManyBodyHamiltonian {
    fn dim(&self) -> usize {
        self.interaction.len()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.par_iter_mut()
            .zip(x.par_iter())
            .zip(self.interaction.par_iter())
            .for_each(|((yi, xi), v)| *yi = xi * v);
        let m = self.grid.dof();
        for slot in 0..self.n_particles {
            let stride = m.pow((self.n_particles - 1 - slot) as u32);
            let block = m * stride;
            y.par_chunks_mut(block)
                .zip(x.par_chunks(block))
                .for_each(|(yb, xb)| {
                    for r in 0..m {
                        let yr = &mut yb[r * stride..(r + 1) * stride];
                        for (c, v) in self.kinetic.row(r) {
                            let xc = &xb[c * stride..(c + 1) * stride];
                            yr.iter_mut().zip(xc).for_each(|(a, b)| *a += v * b);
                        }
                    }
                });
        }
    }
}

/// `exp(-i H t) psi`.
pub fn propagate_exact(
    psi: &FockState,
    hamiltonian: &ManyBodyHamiltonian,
    t: f64,
    dt: f64,
    cfg: &KrylovConfig,
) -> Result<FockState> {
    hamiltonian.propagate(psi, t, dt, cfg).map(|(s, _)| s)
}
