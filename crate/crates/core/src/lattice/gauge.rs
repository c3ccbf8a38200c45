use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::Grid;
use crate::error::{Error, Result};

pub type VectorPotentialFn = Arc<dyn Fn([f64; 3]) -> [f64; 3] + Send + Sync>;

/// Vector potential presets.
#[derive(Clone)]
pub enum GaugePreset {
    Zero,
    /// Symmetric gauge `A = B0 x x / 2`. In two dimensions only `b0[2]` matters.
    ConstantB { b0: [f64; 3] },
    /// Symmetric gauge plus a Gaussian vortex `amplitude * g(x) * (-(y - cy), x - cx, 0)`.
    LinearPlusBump {
        b0: [f64; 3],
        amplitude: f64,
        width: f64,
        center: [f64; 3],
    },
    Custom(VectorPotentialFn),
}

impl fmt::Debug for GaugePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaugePreset::Zero => write!(f, "Zero"),
            GaugePreset::ConstantB { b0 } => write!(f, "ConstantB {{ b0: {b0:?} }}"),
            GaugePreset::LinearPlusBump {
                b0,
                amplitude,
                width,
                center,
            } => write!(
                f,
                "LinearPlusBump {{ b0: {b0:?}, amplitude: {amplitude}, width: {width}, center: {center:?} }}"
            ),
            GaugePreset::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

fn cross_half(b: &[f64; 3], x: &[f64; 3]) -> [f64; 3] {
    [
        0.5 * (b[1] * x[2] - b[2] * x[1]),
        0.5 * (b[2] * x[0] - b[0] * x[2]),
        0.5 * (b[0] * x[1] - b[1] * x[0]),
    ]
}

impl GaugePreset {
    pub fn name(&self) -> &'static str {
        match self {
            GaugePreset::Zero => "zero",
            GaugePreset::ConstantB { .. } => "constant_b",
            GaugePreset::LinearPlusBump { .. } => "linear_plus_bump",
            GaugePreset::Custom(_) => "custom",
        }
    }

    pub fn vector_potential(&self, x: [f64; 3]) -> [f64; 3] {
        match self {
            GaugePreset::Zero => [0.0; 3],
            GaugePreset::ConstantB { b0 } => cross_half(b0, &x),
            GaugePreset::LinearPlusBump {
                b0,
                amplitude,
                width,
                center,
            } => {
                let mut a = cross_half(b0, &x);
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let g = amplitude * (-r2 / (2.0 * width * width)).exp();
                a[0] -= g * d[1];
                a[1] += g * d[0];
                a
            }
            GaugePreset::Custom(f) => f(x),
        }
    }

    fn is_magnetic(&self) -> bool {
        matches!(
            self,
            GaugePreset::ConstantB { .. } | GaugePreset::LinearPlusBump { .. }
        )
    }
}

/// Antisymmetric field-strength tensor at one node.
pub type FieldTensor = [[f64; 3]; 3];

/// Sampled vector potential, field tensor and Peierls link phases.
///
/// `links[k][a]` is the phase `exp(-i A_a(midpoint) h)` of the directed edge
/// from interior node `k` to its `+e_a` neighbour. The covariant difference
/// pulls `phi(x + e_a)` with the conjugate of that phase and `phi(x - e_a)` with
/// the phase of the edge arriving at `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeField {
    grid: Grid,
    preset: String,
    a_samples: Vec<[f64; 3]>,
    b_samples: Vec<FieldTensor>,
    links: Vec<[C64; 3]>,
}

impl GaugeField {
    pub fn sample(preset: &GaugePreset, grid: Grid) -> Result<Self> {
        if grid.dim() == 1 && preset.is_magnetic() {
            return Err(Error::InvalidGauge(
                "a magnetic field is gauge-trivial in one dimension; use a custom potential".into(),
            ));
        }
        let dim = grid.dim();
        let h = grid.spacing();
        let n = grid.dof();
        let mut a_samples = Vec::with_capacity(n);
        let mut b_samples = Vec::with_capacity(n);
        let mut links = Vec::with_capacity(n);
        for k in 0..n {
            let x = grid.dof_position(k);
            let mut a = preset.vector_potential(x);
            for comp in a.iter_mut().skip(dim) {
                *comp = 0.0;
            }
            a_samples.push(a);

            let shifted = |axis: usize, s: f64| {
                let mut y = x;
                y[axis] += s;
                preset.vector_potential(y)
            };
            let mut b = [[0.0; 3]; 3];
            for j in 0..dim {
                for l in (j + 1)..dim {
                    let dj_al = (shifted(j, h)[l] - shifted(j, -h)[l]) / (2.0 * h);
                    let dl_aj = (shifted(l, h)[j] - shifted(l, -h)[j]) / (2.0 * h);
                    b[j][l] = dj_al - dl_aj;
                    b[l][j] = -b[j][l];
                }
            }
            b_samples.push(b);

            let mut link = [C64::new(1.0, 0.0); 3];
            for (axis, u) in link.iter_mut().enumerate().take(dim) {
                let mid = shifted(axis, 0.5 * h);
                *u = C64::from_polar(1.0, -mid[axis] * h);
            }
            links.push(link);
        }
        Ok(GaugeField {
            grid,
            preset: preset.name().to_string(),
            a_samples,
            b_samples,
            links,
        })
    }

    pub fn zero(grid: Grid) -> Self {
        GaugeField::sample(&GaugePreset::Zero, grid).expect("zero gauge is always valid")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn preset_name(&self) -> &str {
        &self.preset
    }

    pub fn a_samples(&self) -> &[[f64; 3]] {
        &self.a_samples
    }

    pub fn b_samples(&self) -> &[FieldTensor] {
        &self.b_samples
    }

    /// Forward link phase from interior node `k` along `axis`.
    pub fn link(&self, k: usize, axis: usize) -> C64 {
        self.links[k][axis]
    }

    pub fn links(&self) -> &[[C64; 3]] {
        &self.links
    }

    /// True when every link is exactly one.
    pub fn is_flat(&self) -> bool {
        self.links
            .iter()
            .all(|l| l.iter().all(|u| *u == C64::new(1.0, 0.0)))
    }

    /// Gauge image under `U_{x->y} -> e^{i chi(x)} U_{x->y} e^{-i chi(y)}`, matching
    /// `phi -> e^{-i chi} phi`. Boundary nodes carry `chi = 0`.
    pub fn gauge_transformed(&self, chi: &[f64]) -> Result<GaugeField> {
        let n = self.grid.dof();
        if chi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: chi.len(),
            });
        }
        let m = self.grid.interior_per_axis();
        let h = self.grid.spacing();
        let mut out = self.clone();
        for k in 0..n {
            let idx = self.grid.dof_multi_index(k);
            for axis in 0..self.grid.dim() {
                let stride = self.grid.dof_stride(axis);
                let chi_fwd = if idx[axis] + 1 < m { chi[k + stride] } else { 0.0 };
                let chi_bwd = if idx[axis] > 0 { chi[k - stride] } else { 0.0 };
                out.links[k][axis] *= C64::from_polar(1.0, chi[k] - chi_fwd);
                out.a_samples[k][axis] += (chi_fwd - chi_bwd) / (2.0 * h);
            }
        }
        out.preset = format!("{}+gauge", self.preset);
        Ok(out)
    }

    /// Largest deviation of a link modulus from one.
    pub fn max_link_modulus_defect(&self) -> f64 {
        self.links
            .iter()
            .flat_map(|l| l.iter().take(self.grid.dim()))
            .map(|u| (u.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
