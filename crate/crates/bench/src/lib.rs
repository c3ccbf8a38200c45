//! Shared fixtures for the benchmarks.

use magmf_core::{FockState, GaugeField, GaugePreset, Grid, LatticeOperators, MemoryBudget, WaveFunction};

/// Constant-field operators in two or three dimensions, flat in one.
pub fn operators(dim: usize, points: usize) -> LatticeOperators {
    let grid = Grid::new(dim, points, 4.0).expect("bench grid");
    if dim == 1 {
        return LatticeOperators::flat(grid);
    }
    let gauge = GaugeField::sample(&GaugePreset::ConstantB { b0: [0.0, 0.0, 1.0] }, grid).expect("bench gauge");
    LatticeOperators::new(gauge)
}

pub fn packet(grid: Grid) -> WaveFunction {
    let mut phi = WaveFunction::gaussian(grid, [0.2, -0.1, 0.0], 1.0, [0.5, 0.0, 0.0]);
    phi.normalize();
    phi
}

pub fn product(grid: Grid, n: usize) -> FockState {
    FockState::product(&packet(grid), n, &MemoryBudget::default()).expect("bench state")
}
