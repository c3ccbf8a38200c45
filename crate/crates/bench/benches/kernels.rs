use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use magmf_bench::{operators, packet, product};
use magmf_core::krylov::{expm_apply, HermitianOperator};
use magmf_core::marginals::reduce;
use magmf_core::potentials::ConvolutionMethod;
use magmf_core::{InteractionParams, KrylovConfig, ManyBodyHamiltonian, MemoryBudget, SampledKernel, C64};

fn matvec(c: &mut Criterion) {
    let mut g = c.benchmark_group("matvec");
    for (dim, points) in [(2, 64), (3, 24)] {
        let ops = operators(dim, points);
        let x = packet(*ops.grid()).into_values();
        let mut y = vec![C64::default(); x.len()];
        g.bench_with_input(BenchmarkId::new("kinetic", format!("{dim}d_{points}")), &x, |b, x| {
            b.iter(|| ops.kinetic().matrix().apply_into(black_box(x), &mut y))
        });
    }
    for n in [2, 3, 4] {
        let ops = operators(1, 24);
        let h = ManyBodyHamiltonian::build(&ops, InteractionParams::new(1.0, 0.0).unwrap(), n, &MemoryBudget::default()).unwrap();
        let psi = product(*ops.grid(), n);
        let mut y = vec![C64::default(); psi.amplitudes().len()];
        g.bench_function(BenchmarkId::new("many_body", n), |b| {
            b.iter(|| h.apply_into(black_box(psi.amplitudes()), &mut y))
        });
    }
    g.finish();
}

fn krylov(c: &mut Criterion) {
    let mut g = c.benchmark_group("krylov");
    let ops = operators(2, 48);
    let x = packet(*ops.grid()).into_values();
    for reorthogonalize in [true, false] {
        let cfg = KrylovConfig {
            reorthogonalize,
            ..KrylovConfig::default()
        };
        g.bench_function(BenchmarkId::new("expm_2d_48", reorthogonalize), |b| {
            b.iter(|| expm_apply(ops.kinetic().matrix(), black_box(&x), 0.05, &cfg).unwrap())
        });
    }
    g.finish();
}

fn reduction(c: &mut Criterion) {
    let mut g = c.benchmark_group("reduce");
    g.sample_size(20);
    let grid = *operators(1, 24).grid();
    for (n, k) in [(3, 1), (4, 1), (4, 2)] {
        let psi = product(grid, n);
        g.bench_function(BenchmarkId::new(format!("n{n}"), k), |b| {
            b.iter(|| reduce(black_box(&psi), k, &MemoryBudget::default()).unwrap())
        });
    }
    g.finish();
}

fn convolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("convolution");
    let params = InteractionParams::new(1.0, 0.1).unwrap();
    for (dim, points) in [(2, 34), (3, 18)] {
        let grid = *operators(dim, points).grid();
        let rho = packet(grid).density();
        for method in [ConvolutionMethod::Fft, ConvolutionMethod::Direct] {
            let kernel = SampledKernel::build_with(params, grid, method, false).unwrap();
            g.bench_function(BenchmarkId::new(format!("{method:?}"), format!("{dim}d_{points}")), |b| {
                b.iter(|| kernel.convolve(black_box(&rho)).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, matvec, krylov, reduction, convolution);
criterion_main!(benches);
