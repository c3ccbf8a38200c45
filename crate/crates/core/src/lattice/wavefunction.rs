use num_complex::Complex64 as C64;
use rand::Rng;

use super::Grid;
use crate::error::{Error, Result};

/// One-body lattice function on the interior nodes of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    values: Vec<C64>,
}

impl WaveFunction {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.dof() {
            return Err(Error::DimensionMismatch {
                expected: grid.dof(),
                found: values.len(),
            });
        }
        Ok(WaveFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        WaveFunction {
            values: vec![C64::new(0.0, 0.0); grid.dof()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> C64) -> Self {
        let values = (0..grid.dof()).map(|k| f(grid.dof_position(k))).collect();
        WaveFunction { grid, values }
    }

    /// Normalized Gaussian packet `exp(-|x-c|^2/(2 w^2) + i k.x)`.
    pub fn gaussian(grid: Grid, center: [f64; 3], width: f64, momentum: [f64; 3]) -> Self {
        let mut psi = WaveFunction::from_fn(grid, |x| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for a in 0..grid.dim() {
                r2 += (x[a] - center[a]).powi(2);
                phase += momentum[a] * x[a];
            }
            C64::from_polar((-r2 / (2.0 * width * width)).exp(), phase)
        });
        psi.normalize();
        psi
    }

    /// Random smooth normalized state: a superposition of a few Gaussian packets
    /// with random centers, widths, momenta and complex weights, kept away from
    /// the walls.
    pub fn random_smooth<R: Rng + ?Sized>(grid: Grid, rng: &mut R) -> Self {
        let l = grid.box_half_width();
        let h = grid.spacing();
        let dim = grid.dim();
        let terms = rng.random_range(1..=3);
        let mut packets = Vec::with_capacity(terms);
        let min_width = (2.0 * h).max(0.12 * l);
        for _ in 0..terms {
            let width = rng.random_range(min_width..(0.25 * l).max(min_width * 1.01));
            let mut center = [0.0; 3];
            let mut momentum = [0.0; 3];
            for a in 0..dim {
                center[a] = rng.random_range(-0.3 * l..0.3 * l);
                momentum[a] = rng.random_range(-0.5..0.5) / width;
            }
            let weight = C64::from_polar(rng.random_range(0.3..1.0), rng.random_range(0.0..std::f64::consts::TAU));
            packets.push((center, width, momentum, weight));
        }
        let mut psi = WaveFunction::from_fn(grid, |x| {
            packets
                .iter()
                .map(|(c, w, p, amp)| {
                    let mut r2 = 0.0;
                    let mut phase = 0.0;
                    for a in 0..dim {
                        r2 += (x[a] - c[a]).powi(2);
                        phase += p[a] * x[a];
                    }
                    amp * C64::from_polar((-r2 / (2.0 * w * w)).exp(), phase)
                })
                .sum()
        });
        psi.normalize();
        psi
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Weighted inner product `h^d sum conj(a) b`.
    pub fn inner(&self, other: &WaveFunction) -> Result<C64> {
        self.check_grid(other)?;
        Ok(self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.conj() * b)
                .sum::<C64>())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// L^2 norm with quadrature weight h^d.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero function");
        self.values.iter_mut().for_each(|v| *v /= n);
    }

    pub fn scaled(&self, s: C64) -> WaveFunction {
        WaveFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &WaveFunction) -> Result<WaveFunction> {
        self.check_grid(other)?;
        Ok(WaveFunction {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Pointwise modulus as a real-valued lattice function.
    pub fn modulus(&self) -> WaveFunction {
        WaveFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| C64::new(v.norm(), 0.0)).collect(),
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Gauge image `e^{-i chi} phi` for a node-sampled `chi`.
    pub fn gauge_transformed(&self, chi: &[f64]) -> Result<WaveFunction> {
        if chi.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: chi.len(),
            });
        }
        Ok(WaveFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(chi)
                .map(|(v, c)| v * C64::from_polar(1.0, -c))
                .collect(),
        })
    }

    /// Orthonormal-basis coefficients `h^{d/2} phi(x)`.
    pub fn coefficients(&self) -> Vec<C64> {
        let s = self.grid.cell_volume().sqrt();
        self.values.iter().map(|v| v * s).collect()
    }

    pub fn from_coefficients(grid: Grid, coeffs: Vec<C64>) -> Result<Self> {
        let s = 1.0 / grid.cell_volume().sqrt();
        WaveFunction::new(grid, coeffs.into_iter().map(|c| c * s).collect())
    }

    pub fn max_abs_diff(&self, other: &WaveFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_grid(&self, other: &WaveFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_is_normalized() {
        let g = Grid::new(2, 20, 5.0).unwrap();
        let psi = WaveFunction::gaussian(g, [0.3, -0.2, 0.0], 1.0, [0.5, 0.0, 0.0]);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_smooth_is_normalized_and_seeded() {
        let g = Grid::new(3, 10, 5.0).unwrap();
        let a = WaveFunction::random_smooth(g, &mut ChaCha8Rng::seed_from_u64(7));
        let b = WaveFunction::random_smooth(g, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_wrong_length() {
        let g = Grid::new(1, 6, 1.0).unwrap();
        assert!(WaveFunction::new(g, vec![C64::new(1.0, 0.0); 6]).is_err());
    }
}
