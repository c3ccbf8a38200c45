//! Reduced density matrices and the distances between them and Hartree
//! projectors.
//!
//! Matrices are stored in the orthonormal nodal basis `e_x = h^{-d/2} 1_x`,
//! so the plain matrix trace is the operator trace and eigenvalues are the
//! operator eigenvalues. The integral kernel is `matrix / h^{kd}`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dense;
use crate::error::{Error, Result};
use crate::lattice::{Grid, LatticeOperators, WaveFunction};
use crate::manybody::{FockState, MemoryBudget};

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    order: usize,
    grid: Grid,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(order: usize, grid: Grid, matrix: DMatrix<C64>) -> Result<Self> {
        let n = grid.dof().pow(order as u32);
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        Ok(DensityMatrix { order, grid, matrix })
    }

    /// `|phi><phi|^{(x) k}` for a normalized `phi`.
    pub fn projector(phi: &WaveFunction, k: usize) -> Self {
        let c = tensor_power(&phi.coefficients(), k);
        DensityMatrix {
            order: k,
            grid: *phi.grid(),
            matrix: dense::outer(&c, &c),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        dense::hermiticity_defect(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        dense::hermitian_eigenvalues(&self.matrix)
    }

    /// Kernel value `gamma(x; x')` at multi-indices into the DOF space.
    pub fn kernel(&self, x: usize, x_prime: usize) -> C64 {
        self.matrix[(x, x_prime)] / self.grid.cell_volume().powi(self.order as i32)
    }

    /// Trace over the last particle slot.
    pub fn partial_trace_last(&self) -> Result<DensityMatrix> {
        if self.order < 2 {
            return Err(Error::InvalidArgument("cannot trace out the only particle".into()));
        }
        let m = self.grid.dof();
        let n = self.matrix.nrows() / m;
        let out = DMatrix::from_fn(n, n, |a, b| (0..m).map(|c| self.matrix[(a * m + c, b * m + c)]).sum());
        DensityMatrix::new(self.order - 1, self.grid, out)
    }

    fn check_against(&self, other: &DensityMatrix) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.order != other.order {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                found: other.matrix.nrows(),
            });
        }
        Ok(())
    }
}

/// `c^{(x) k}`, first factor slowest.
pub fn tensor_power(c: &[C64], k: usize) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for _ in 0..k {
        out = dense::kron_vec(&out, c);
    }
    out
}

/// The `k`-particle marginal of `psi`.
pub fn reduce(psi: &FockState, k: usize, budget: &MemoryBudget) -> Result<DensityMatrix> {
    let n = psi.n_particles();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "marginal order {k} outside 1..={n}"
        )));
    }
    let grid = *psi.grid();
    let m = grid.dof();
    let rows = (m as u128).pow(k as u32);
    budget.check(&format!("{k}-particle density matrix"), rows * rows * 16)?;
    let rows = rows as usize;
    let cols = m.pow((n - k) as u32);
    let amps = psi.amplitudes();
    let w = psi.cell_volume();
    let upper: Vec<Vec<C64>> = (0..rows)
        .into_par_iter()
        .map(|a| {
            let ra = &amps[a * cols..(a + 1) * cols];
            (a..rows)
                .map(|b| {
                    let rb = &amps[b * cols..(b + 1) * cols];
                    w * ra.iter().zip(rb).map(|(x, y)| x * y.conj()).sum::<C64>()
                })
                .collect()
        })
        .collect();
    let mut g = DMatrix::<C64>::zeros(rows, rows);
    for (a, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let b = a + off;
            g[(a, b)] = v;
            g[(b, a)] = v.conj();
        }
        g[(a, a)].im = 0.0;
    }
    DensityMatrix::new(k, grid, g)
}

/// `tr|gamma - |phi><phi|^{(x) k}|`.
pub fn trace_distance(gamma: &DensityMatrix, phi: &WaveFunction) -> Result<f64> {
    let p = DensityMatrix::projector(phi, gamma.order);
    gamma.check_against(&p)?;
    Ok(dense::trace_norm(&(&gamma.matrix - &p.matrix)))
}

/// `||gamma - |phi><phi|^{(x) k}||_HS`.
pub fn hilbert_schmidt_distance(gamma: &DensityMatrix, phi: &WaveFunction) -> Result<f64> {
    let p = DensityMatrix::projector(phi, gamma.order);
    gamma.check_against(&p)?;
    Ok((&gamma.matrix - &p.matrix).norm())
}

/// Trace norm of the `d x d` block operator `[D_j (gamma - P) D_l]`.
pub fn energy_distance(gamma: &DensityMatrix, phi: &WaveFunction, ops: &LatticeOperators) -> Result<f64> {
    if gamma.order != 1 {
        return Err(Error::InvalidArgument(format!(
            "energy distance is defined for one-particle marginals, got order {}",
            gamma.order
        )));
    }
    if ops.grid() != gamma.grid() {
        return Err(Error::GridMismatch);
    }
    let p = DensityMatrix::projector(phi, 1);
    gamma.check_against(&p)?;
    let delta = &gamma.matrix - &p.matrix;
    Ok(dense::trace_norm(&sandwich_blocks(&delta, ops)))
}

/// Assembles `[D_j X D_l]_{j,l}` as a dense `(d n) x (d n)` matrix.
pub fn sandwich_blocks(x: &DMatrix<C64>, ops: &LatticeOperators) -> DMatrix<C64> {
    let n = x.nrows();
    let d = ops.grid().dim();
    let ds: Vec<DMatrix<C64>> = ops.stencils().iter().map(|s| s.matrix().to_dense()).collect();
    let left: Vec<DMatrix<C64>> = ds.iter().map(|dj| dj * x).collect();
    let mut out = DMatrix::<C64>::zeros(d * n, d * n);
    for j in 0..d {
        for l in 0..d {
            out.view_mut((j * n, l * n), (n, n)).copy_from(&(&left[j] * &ds[l]));
        }
    }
    out
}
