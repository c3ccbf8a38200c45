//! Numerical residuals of the diamagnetic, magnetic Hardy and commutator
//! identities. Each residual is nonpositive (or vanishing) in the continuum.

use num_complex::Complex64 as C64;

use super::{LatticeOperators, WaveFunction};
use crate::error::{Error, Result};

/// `||grad |phi| ||_2 - ||(-i grad + A) phi||_2`, with the same central
/// differences on both sides.
pub fn diamagnetic_residual(ops: &LatticeOperators, phi: &WaveFunction) -> Result<f64> {
    let flat = LatticeOperators::flat(*ops.grid());
    let lhs = flat.covariant_gradient_norm_sqr(&phi.modulus())?.sqrt();
    let rhs = ops.covariant_gradient_norm_sqr(phi)?.sqrt();
    Ok(lhs - rhs)
}

/// `1/4 int |phi|^2 / (|x| + h)^2 - ||(-i grad + A) phi||_2^2`.
pub fn hardy_residual(ops: &LatticeOperators, phi: &WaveFunction) -> Result<f64> {
    let grid = ops.grid();
    if phi.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let h = grid.spacing();
    let weighted: f64 = phi
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let x = grid.dof_position(k);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            v.norm_sqr() / (r + h).powi(2)
        })
        .sum::<f64>()
        * grid.cell_volume();
    Ok(0.25 * weighted - ops.covariant_gradient_norm_sqr(phi)?)
}

/// `max_phi ||([D_j, D_k] + i B_jk) phi||_2 / ||phi||_2`.
pub fn commutator_residual(
    ops: &LatticeOperators,
    j: usize,
    k: usize,
    test_states: &[WaveFunction],
) -> Result<f64> {
    let dim = ops.grid().dim();
    if j == k || j >= dim || k >= dim {
        return Err(Error::InvalidArgument(format!(
            "commutator needs distinct axes below {dim}, got ({j}, {k})"
        )));
    }
    let dj = ops.stencil(j).matrix();
    let dk = ops.stencil(k).matrix();
    let b = ops.gauge().b_samples();
    let mut worst: f64 = 0.0;
    for phi in test_states {
        if phi.grid() != ops.grid() {
            return Err(Error::GridMismatch);
        }
        let jk = dj.apply(&dk.apply(phi.values()));
        let kj = dk.apply(&dj.apply(phi.values()));
        let res: f64 = (0..phi.values().len())
            .map(|x| (jk[x] - kj[x] + C64::new(0.0, b[x][j][k]) * phi.values()[x]).norm_sqr())
            .sum();
        let norm = phi.values().iter().map(|v| v.norm_sqr()).sum::<f64>();
        worst = worst.max((res / norm).sqrt());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GaugeField, GaugePreset, Grid};

    #[test]
    fn diamagnetic_equality_for_positive_flat_state() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let ops = LatticeOperators::flat(g);
        let phi = WaveFunction::gaussian(g, [0.1, 0.0, 0.0], 1.0, [0.0; 3]);
        assert!(diamagnetic_residual(&ops, &phi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn diamagnetic_spike_is_nonpositive() {
        let g = Grid::new(2, 12, 3.0).unwrap();
        let gauge = GaugeField::sample(&GaugePreset::ConstantB { b0: [0.0, 0.0, 2.0] }, g).unwrap();
        let ops = LatticeOperators::new(gauge);
        let mut phi = WaveFunction::zeros(g);
        phi.values_mut()[g.dof() / 2 + 3] = C64::new(1.0, 0.0);
        phi.normalize();
        assert!(diamagnetic_residual(&ops, &phi).unwrap() <= 1e-10);
    }

    #[test]
    fn hardy_is_strongly_negative_far_from_origin() {
        let g = Grid::new(3, 14, 6.0).unwrap();
        let ops = LatticeOperators::flat(g);
        let phi = WaveFunction::gaussian(g, [3.0, 3.0, 3.0], 0.6, [0.0; 3]);
        let r = hardy_residual(&ops, &phi).unwrap();
        assert!(r < -1.0, "{r}");
    }

    #[test]
    fn flat_commutator_vanishes() {
        let g = Grid::new(2, 10, 3.0).unwrap();
        let ops = LatticeOperators::flat(g);
        let phi = WaveFunction::gaussian(g, [0.0; 3], 0.8, [0.4, -0.2, 0.0]);
        assert!(commutator_residual(&ops, 0, 1, std::slice::from_ref(&phi)).unwrap() < 1e-12);
        assert!(commutator_residual(&ops, 0, 0, &[phi]).is_err());
    }
}
