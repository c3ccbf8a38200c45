use num_complex::Complex64 as C64;

use super::{GaugeField, Grid, WaveFunction};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Deliberate defects, used to prove that the invariant checks can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FaultInjection {
    #[default]
    None,
    /// The forward pull of one edge per axis uses `U` instead of `conj(U)`.
    LinkSign,
}

/// Covariant difference `D_j = -i d_j + A_j` along one axis:
/// `(D_j phi)(x) = -i (conj(U_{x->x+e}) phi(x+e) - U_{x-e->x} phi(x-e)) / (2h)`.
#[derive(Clone, Debug)]
pub struct CovariantStencil {
    axis: usize,
    matrix: CsrMatrix,
}

impl CovariantStencil {
    pub fn build(gauge: &GaugeField, axis: usize) -> Self {
        CovariantStencil::build_with_fault(gauge, axis, FaultInjection::None)
    }

    pub fn build_with_fault(gauge: &GaugeField, axis: usize, fault: FaultInjection) -> Self {
        let grid = gauge.grid();
        assert!(axis < grid.dim());
        let m = grid.interior_per_axis();
        let n = grid.dof();
        let stride = grid.dof_stride(axis);
        let scale = 1.0 / (2.0 * grid.spacing());
        let faulty_row = n / 2;
        let mut t = Vec::with_capacity(2 * n);
        for k in 0..n {
            let idx = grid.dof_multi_index(k);
            if idx[axis] + 1 < m {
                let u = gauge.link(k, axis);
                let pull = if fault == FaultInjection::LinkSign && k == faulty_row { u } else { u.conj() };
                t.push((k, k + stride, C64::new(0.0, -scale) * pull));
            }
            if idx[axis] > 0 {
                let u = gauge.link(k - stride, axis);
                t.push((k, k - stride, C64::new(0.0, scale) * u));
            }
        }
        CovariantStencil {
            axis,
            matrix: CsrMatrix::from_triplets(n, t),
        }
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

/// Magnetic kinetic operator `H_A = sum_l D_l^2`, composed from the stencils.
#[derive(Clone, Debug)]
pub struct MagneticKinetic {
    matrix: CsrMatrix,
}

impl MagneticKinetic {
    pub fn from_stencils(stencils: &[CovariantStencil]) -> Self {
        let n = stencils[0].matrix.dim();
        let mut acc = CsrMatrix::from_triplets(n, Vec::new());
        for s in stencils {
            acc = acc.add(&s.matrix.matmul(&s.matrix));
        }
        MagneticKinetic { matrix: acc }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

/// All lattice operators attached to one gauge field.
#[derive(Clone, Debug)]
pub struct LatticeOperators {
    gauge: GaugeField,
    stencils: Vec<CovariantStencil>,
    kinetic: MagneticKinetic,
}

impl LatticeOperators {
    pub fn new(gauge: GaugeField) -> Self {
        LatticeOperators::with_fault(gauge, FaultInjection::None)
    }

    pub fn with_fault(gauge: GaugeField, fault: FaultInjection) -> Self {
        let stencils: Vec<_> = (0..gauge.grid().dim())
            .map(|a| CovariantStencil::build_with_fault(&gauge, a, fault))
            .collect();
        let kinetic = MagneticKinetic::from_stencils(&stencils);
        LatticeOperators {
            gauge,
            stencils,
            kinetic,
        }
    }

    /// Flat-gauge operators on the same grid.
    pub fn flat(grid: Grid) -> Self {
        LatticeOperators::new(GaugeField::zero(grid))
    }

    pub fn grid(&self) -> &Grid {
        self.gauge.grid()
    }

    pub fn gauge(&self) -> &GaugeField {
        &self.gauge
    }

    pub fn stencil(&self, axis: usize) -> &CovariantStencil {
        &self.stencils[axis]
    }

    pub fn stencils(&self) -> &[CovariantStencil] {
        &self.stencils
    }

    pub fn kinetic(&self) -> &MagneticKinetic {
        &self.kinetic
    }

    fn check(&self, phi: &WaveFunction) -> Result<()> {
        if phi.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `D_axis phi`.
    pub fn covariant_apply(&self, axis: usize, phi: &WaveFunction) -> Result<WaveFunction> {
        self.check(phi)?;
        if axis >= self.grid().dim() {
            return Err(Error::InvalidArgument(format!(
                "axis {axis} out of range for dimension {}",
                self.grid().dim()
            )));
        }
        WaveFunction::new(*self.grid(), self.stencils[axis].matrix.apply(phi.values()))
    }

    /// `H_A phi`.
    pub fn kinetic_apply(&self, phi: &WaveFunction) -> Result<WaveFunction> {
        self.check(phi)?;
        WaveFunction::new(*self.grid(), self.kinetic.matrix.apply(phi.values()))
    }

    /// `||(-i grad + A) phi||_2^2 = sum_j ||D_j phi||^2`.
    pub fn covariant_gradient_norm_sqr(&self, phi: &WaveFunction) -> Result<f64> {
        self.check(phi)?;
        let mut total = 0.0;
        for s in &self.stencils {
            let v = s.matrix.apply(phi.values());
            total += v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        Ok(total * self.grid().cell_volume())
    }

    /// Magnetic Sobolev norm `(sum_{|a| <= k} ||D_1^{a_1} D_2^{a_2} D_3^{a_3} phi||^2)^{1/2}`.
    pub fn sobolev_norm(&self, phi: &WaveFunction, k: usize) -> Result<f64> {
        self.check(phi)?;
        if k > 3 {
            return Err(Error::InvalidArgument(format!(
                "magnetic Sobolev order {k} not supported (maximum 3)"
            )));
        }
        let dim = self.grid().dim();
        let mut total = 0.0;
        self.accumulate_multi_index(dim, phi.values().to_vec(), k, &mut total);
        Ok((total * self.grid().cell_volume()).sqrt())
    }

    // Applies D_{axis-1}^p for every p within the remaining budget, innermost axis first.
    fn accumulate_multi_index(&self, axis: usize, v: Vec<C64>, budget: usize, total: &mut f64) {
        if axis == 0 {
            *total += v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            return;
        }
        let d = &self.stencils[axis - 1].matrix;
        let mut cur = v;
        for p in 0..=budget {
            if p > 0 {
                cur = d.apply(&cur);
            }
            self.accumulate_multi_index(axis - 1, cur.clone(), budget - p, total);
        }
    }

    pub fn operator_hermiticity_defect(&self) -> f64 {
        self.stencils
            .iter()
            .map(|s| s.matrix.hermiticity_defect())
            .fold(self.kinetic.matrix.hermiticity_defect(), f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::GaugePreset;
    use std::sync::Arc;

    fn flat_central_difference(g: &Grid, phi: &WaveFunction, axis: usize) -> Vec<C64> {
        let m = g.interior_per_axis();
        let s = g.dof_stride(axis);
        let h = g.spacing();
        (0..g.dof())
            .map(|k| {
                let idx = g.dof_multi_index(k);
                let f = if idx[axis] + 1 < m { phi.values()[k + s] } else { C64::default() };
                let b = if idx[axis] > 0 { phi.values()[k - s] } else { C64::default() };
                C64::new(0.0, -1.0) * (f - b) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn flat_stencil_is_central_difference() {
        let g = Grid::new(2, 9, 2.0).unwrap();
        let ops = LatticeOperators::flat(g);
        let phi = WaveFunction::gaussian(g, [0.2, -0.1, 0.0], 0.7, [0.3, 0.1, 0.0]);
        for axis in 0..2 {
            let d = ops.covariant_apply(axis, &phi).unwrap();
            let expect = flat_central_difference(&g, &phi, axis);
            for (a, b) in d.values().iter().zip(&expect) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn constant_is_annihilated_away_from_walls() {
        let g = Grid::new(1, 12, 3.0).unwrap();
        let ops = LatticeOperators::flat(g);
        let phi = WaveFunction::new(g, vec![C64::new(1.0, 0.0); g.dof()]).unwrap();
        let d = ops.covariant_apply(0, &phi).unwrap();
        for v in &d.values()[1..g.dof() - 1] {
            assert_eq!(*v, C64::default());
        }
    }

    #[test]
    fn gauge_shift_identity_in_one_dimension() {
        let a = 0.8;
        let mut errs = Vec::new();
        for points in [41, 81] {
            let g = Grid::new(1, points, 6.0).unwrap();
            let gauge = GaugeField::sample(&GaugePreset::Custom(Arc::new(move |_| [a, 0.0, 0.0])), g).unwrap();
            let ops = LatticeOperators::new(gauge);
            let gfun = |x: f64| (-x * x / 2.0).exp();
            let gprime = |x: f64| -x * (-x * x / 2.0).exp();
            let phi = WaveFunction::from_fn(g, |x| C64::from_polar(gfun(x[0]), -a * x[0]));
            let d = ops.covariant_apply(0, &phi).unwrap();
            let err = (0..g.dof())
                .map(|k| {
                    let x = g.dof_position(k)[0];
                    let expect = C64::new(0.0, -1.0) * C64::from_polar(1.0, -a * x) * gprime(x);
                    (d.values()[k] - expect).norm()
                })
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] < 0.05);
        let ratio = errs[0] / errs[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn kinetic_is_hermitian_and_nonnegative() {
        let g = Grid::new(2, 8, 2.0).unwrap();
        let gauge = GaugeField::sample(&GaugePreset::ConstantB { b0: [0.0, 0.0, 1.3] }, g).unwrap();
        let ops = LatticeOperators::new(gauge);
        assert!(ops.operator_hermiticity_defect() < 1e-12);
        let dense = ops.kinetic().matrix().to_dense();
        let eig = nalgebra::linalg::SymmetricEigen::new(dense);
        assert!(eig.eigenvalues.min() > -1e-10);
    }

    #[test]
    fn sobolev_order_zero_is_l2_and_order_four_rejected() {
        let g = Grid::new(1, 20, 4.0).unwrap();
        let ops = LatticeOperators::flat(g);
        let phi = WaveFunction::gaussian(g, [0.0; 3], 1.0, [0.0; 3]);
        assert!((ops.sobolev_norm(&phi, 0).unwrap() - 1.0).abs() < 1e-10);
        assert!(ops.sobolev_norm(&phi, 4).is_err());
    }

    #[test]
    fn fault_breaks_hermiticity() {
        let g = Grid::new(2, 8, 2.0).unwrap();
        let gauge = GaugeField::sample(&GaugePreset::ConstantB { b0: [0.0, 0.0, 1.0] }, g).unwrap();
        let ops = LatticeOperators::with_fault(gauge, FaultInjection::LinkSign);
        assert!(ops.operator_hermiticity_defect() > 1e-3);
    }
}
