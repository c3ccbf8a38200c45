//! Regularized Coulomb-type kernel `lambda / (|x| + alpha)` on the lattice and
//! the Hartree convolution `V * |phi|^2`.
//!
//! The lattice distance of the zero displacement is taken to be one spacing,
//! so the kernel at the origin is `lambda / (h + alpha)`. This keeps the kernel
//! finite at `alpha = 0` and makes it depend continuously on `alpha`.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Grid, LatticeOperators, WaveFunction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionParams {
    pub lambda: f64,
    pub alpha: f64,
}

impl InteractionParams {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        let p = InteractionParams { lambda, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() {
            return Err(Error::InvalidInteraction(format!("lambda must be finite, got {}", self.lambda)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInteraction(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        InteractionParams { alpha, ..self }
    }

    /// Kernel value at lattice distance `r`, with the zero displacement mapped to `h`.
    pub fn potential(&self, r: f64, h: f64) -> f64 {
        let r = if r == 0.0 { h } else { r };
        self.lambda / (r + self.alpha)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMethod {
    Direct,
    Fft,
    #[default]
    Auto,
}

/// Above this many degrees of freedom `Auto` uses the transform path.
const AUTO_FFT_THRESHOLD: usize = 400;

struct FftPlan {
    padded: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<C64>,
}

/// Kernel sampled on every displacement between interior nodes.
#[derive(Clone)]
pub struct SampledKernel {
    grid: Grid,
    params: InteractionParams,
    squared: bool,
    /// Displacements per axis run over `-(m-1)..=(m-1)`; stored with offset `m-1`.
    values: Vec<f64>,
    method: ConvolutionMethod,
    fft: Option<Arc<FftPlan>>,
}

impl std::fmt::Debug for SampledKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampledKernel")
            .field("grid", &self.grid)
            .field("params", &self.params)
            .field("squared", &self.squared)
            .field("method", &self.method)
            .finish()
    }
}

impl SampledKernel {
    pub fn build(params: InteractionParams, grid: Grid) -> Result<Self> {
        SampledKernel::build_with(params, grid, ConvolutionMethod::Auto, false)
    }

    pub fn build_with(
        params: InteractionParams,
        grid: Grid,
        method: ConvolutionMethod,
        squared: bool,
    ) -> Result<Self> {
        params.validate()?;
        let m = grid.interior_per_axis();
        let w = 2 * m - 1;
        let dim = grid.dim();
        let h = grid.spacing();
        let total = w.pow(dim as u32);
        let mut values = Vec::with_capacity(total);
        for mut k in 0..total {
            let mut r2 = 0.0;
            for _ in 0..dim {
                let d = (k % w) as f64 - (m - 1) as f64;
                k /= w;
                r2 += (d * h).powi(2);
            }
            let v = params.potential(r2.sqrt(), h);
            values.push(if squared { v * v } else { v });
        }
        let mut kernel = SampledKernel {
            grid,
            params,
            squared,
            values,
            method,
            fft: None,
        };
        if kernel.uses_fft() {
            kernel.fft = Some(Arc::new(kernel.plan_fft()));
        }
        Ok(kernel)
    }

    /// The kernel `V^2`, as needed by the Knowles–Pickl type bound.
    pub fn squared(&self) -> SampledKernel {
        SampledKernel::build_with(self.params, self.grid, self.method, true).expect("params already validated")
    }

    pub fn with_method(&self, method: ConvolutionMethod) -> SampledKernel {
        SampledKernel::build_with(self.params, self.grid, method, self.squared).expect("params already validated")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> InteractionParams {
        self.params
    }

    fn uses_fft(&self) -> bool {
        match self.method {
            ConvolutionMethod::Direct => false,
            ConvolutionMethod::Fft => true,
            ConvolutionMethod::Auto => self.grid.dof() > AUTO_FFT_THRESHOLD,
        }
    }

    /// Kernel value at the integer displacement `d` (entries in `-(m-1)..=(m-1)`).
    pub fn value(&self, d: [isize; 3]) -> f64 {
        let m = self.grid.interior_per_axis() as isize;
        let w = 2 * m - 1;
        let mut idx = 0isize;
        for a in 0..self.grid.dim() {
            assert!(d[a].abs() < m, "displacement {d:?} outside the difference lattice");
            idx = idx * w + d[a] + m - 1;
        }
        self.values[idx as usize]
    }

    /// Kernel value between two interior nodes.
    pub fn between(&self, x: usize, y: usize) -> f64 {
        let ix = self.grid.dof_multi_index(x);
        let iy = self.grid.dof_multi_index(y);
        let mut d = [0isize; 3];
        for a in 0..self.grid.dim() {
            d[a] = ix[a] as isize - iy[a] as isize;
        }
        self.value(d)
    }

    /// `(V * rho)(x) = h^d sum_y V(x - y) rho(y)`.
    pub fn convolve(&self, rho: &[f64]) -> Result<Vec<f64>> {
        if rho.len() != self.grid.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.dof(),
                found: rho.len(),
            });
        }
        if self.params.lambda == 0.0 {
            return Ok(vec![0.0; rho.len()]);
        }
        Ok(match &self.fft {
            Some(plan) => self.convolve_fft(plan, rho),
            None => self.convolve_direct(rho),
        })
    }

    /// Reference O(n^2) summation.
    pub fn convolve_direct(&self, rho: &[f64]) -> Vec<f64> {
        let n = self.grid.dof();
        let cell = self.grid.cell_volume();
        let dim = self.grid.dim();
        let m = self.grid.interior_per_axis();
        let w = 2 * m - 1;
        let idx: Vec<[usize; 3]> = (0..n).map(|k| self.grid.dof_multi_index(k)).collect();
        (0..n)
            .into_par_iter()
            .map(|x| {
                let ix = idx[x];
                let mut acc = 0.0;
                for (y, iy) in idx.iter().enumerate() {
                    let mut flat = 0usize;
                    for a in 0..dim {
                        flat = flat * w + (ix[a] + m - 1 - iy[a]);
                    }
                    acc += self.values[flat] * rho[y];
                }
                acc * cell
            })
            .collect()
    }

    fn plan_fft(&self) -> FftPlan {
        let m = self.grid.interior_per_axis();
        let padded = 2 * m;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        let dim = self.grid.dim();
        let total = padded.pow(dim as u32);
        let mut kernel = vec![C64::default(); total];
        let w = 2 * m - 1;
        for (k, v) in self.values.iter().enumerate() {
            let mut rem = k;
            let mut target = 0usize;
            let mut digits = [0usize; 3];
            for a in (0..dim).rev() {
                digits[a] = rem % w;
                rem /= w;
            }
            for a in 0..dim {
                let d = digits[a] as isize - (m as isize - 1);
                target = target * padded + d.rem_euclid(padded as isize) as usize;
            }
            kernel[target] = C64::new(*v, 0.0);
        }
        let mut plan = FftPlan {
            padded,
            forward,
            inverse,
            kernel_hat: Vec::new(),
        };
        fft_nd(&mut kernel, dim, padded, &plan.forward);
        plan.kernel_hat = kernel;
        plan
    }

    fn convolve_fft(&self, plan: &FftPlan, rho: &[f64]) -> Vec<f64> {
        let dim = self.grid.dim();
        let p = plan.padded;
        let mut buf = vec![C64::default(); p.pow(dim as u32)];
        for (k, r) in rho.iter().enumerate() {
            buf[padded_index(&self.grid.dof_multi_index(k), dim, p)] = C64::new(*r, 0.0);
        }
        fft_nd(&mut buf, dim, p, &plan.forward);
        buf.iter_mut().zip(&plan.kernel_hat).for_each(|(b, k)| *b *= k);
        fft_nd(&mut buf, dim, p, &plan.inverse);
        let scale = self.grid.cell_volume() / (p.pow(dim as u32) as f64);
        (0..rho.len())
            .map(|k| buf[padded_index(&self.grid.dof_multi_index(k), dim, p)].re * scale)
            .collect()
    }
}

fn padded_index(idx: &[usize; 3], dim: usize, p: usize) -> usize {
    (0..dim).fold(0, |acc, a| acc * p + idx[a])
}

/// In-place separable transform of a row-major `p^dim` array.
fn fft_nd(buf: &mut [C64], dim: usize, p: usize, fft: &Arc<dyn Fft<f64>>) {
    let total = buf.len();
    let mut line = vec![C64::default(); p];
    for axis in 0..dim {
        let stride = p.pow((dim - 1 - axis) as u32);
        for start in 0..total {
            // Visit each line once: its first element has a zero digit on `axis`.
            if !(start / stride).is_multiple_of(p) {
                continue;
            }
            for (i, l) in line.iter_mut().enumerate() {
                *l = buf[start + i * stride];
            }
            fft.process(&mut line);
            for (i, l) in line.iter().enumerate() {
                buf[start + i * stride] = *l;
            }
        }
    }
}

/// Hartree mean field `(V_alpha * |phi|^2)(x)`.
pub fn hartree_field(kernel: &SampledKernel, phi: &WaveFunction) -> Result<Vec<f64>> {
    if phi.grid() != kernel.grid() {
        return Err(Error::GridMismatch);
    }
    kernel.convolve(&phi.density())
}

/// Returns `(||V^2 * |phi|^2||_inf, 4 lambda^2 ||phi||_{H^1_A}^2)`.
pub fn kp_a3_bound_check(
    phi: &WaveFunction,
    params: InteractionParams,
    ops: &LatticeOperators,
) -> Result<(f64, f64)> {
    if params.lambda == 0.0 {
        return Ok((0.0, 0.0));
    }
    let kernel = SampledKernel::build_with(params, *phi.grid(), ConvolutionMethod::Auto, true)?;
    let field = hartree_field(&kernel, phi)?;
    let lhs = field.iter().copied().fold(0.0, f64::max);
    let h1 = ops.sobolev_norm(phi, 1)?;
    Ok((lhs, 4.0 * params.lambda * params.lambda * h1 * h1))
}
