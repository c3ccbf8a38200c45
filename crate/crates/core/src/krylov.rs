//! Lanczos approximation of `exp(-i t H) v` for Hermitian `H`.
//!
//! The projected tridiagonal matrix is exponentiated through its symmetric
//! eigendecomposition, so each accepted step is unitary on the Krylov space.
//! When `max_dim` vectors do not reach the tolerance, the step is halved on
//! the basis already built, which costs no further matvecs.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const PAR_LEN: usize = 1 << 15;

pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[C64], y: &mut [C64]);
}

impl HermitianOperator for CsrMatrix {
    fn dim(&self) -> usize {
        CsrMatrix::dim(self)
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        CsrMatrix::apply_into(self, x, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovConfig {
    /// Absolute error target on the action, relative to `||v||`.
    pub tol: f64,
    pub max_dim: usize,
    /// Maximum number of step halvings before giving up.
    pub max_halvings: u32,
    /// Full Gram-Schmidt pass against the whole basis on every iteration.
    /// Short subspaces keep orthogonality well enough without it, and on
    /// large tensors it costs more than the matvecs.
    pub reorthogonalize: bool,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            tol: 1e-10,
            max_dim: 40,
            max_halvings: 12,
            reorthogonalize: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KrylovStats {
    pub matvecs: usize,
    pub substeps: usize,
    pub max_error_estimate: f64,
}

impl KrylovStats {
    pub fn merge(&mut self, other: &KrylovStats) {
        self.matvecs += other.matvecs;
        self.substeps += other.substeps;
        self.max_error_estimate = self.max_error_estimate.max(other.max_error_estimate);
    }
}

const CHUNK: usize = 1 << 13;

/// `sum_i conj(a_i) b_i`. Partial sums are taken over fixed chunks and added
/// in order, so the result does not depend on the thread schedule.
pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    if a.len() >= PAR_LEN {
        a.par_chunks(CHUNK)
            .zip(b.par_chunks(CHUNK))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.conj() * q).sum::<C64>())
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    } else {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }
}

fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    if y.len() >= PAR_LEN {
        y.par_iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
    } else {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
    }
}

pub(crate) fn norm_sqr(a: &[C64]) -> f64 {
    if a.len() >= PAR_LEN {
        a.par_chunks(CHUNK)
            .map(|x| x.iter().map(|p| p.norm_sqr()).sum::<f64>())
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    } else {
        a.iter().map(|x| x.norm_sqr()).sum()
    }
}

fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `exp(-i tau T) e_1` for the real symmetric tridiagonal `T`.
fn tridiagonal_expm_e1(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let q = eig.eigenvectors[(i, j)] * eig.eigenvectors[(0, j)];
                    C64::from_polar(q, -tau * eig.eigenvalues[j])
                })
                .sum()
        })
        .collect()
}

enum Attempt {
    /// Result, matvecs, error estimate, step actually taken, halvings used.
    Converged(Vec<C64>, usize, f64, f64, u32),
    Failed(usize, f64),
}

fn lanczos_attempt<H: HermitianOperator + ?Sized>(
    op: &H,
    v: &[C64],
    tau: f64,
    cfg: &KrylovConfig,
    halvings_left: u32,
) -> Attempt {
    let n = v.len();
    let beta0 = norm(v);
    if beta0 == 0.0 {
        return Attempt::Converged(vec![C64::default(); n], 0, 0.0, tau, 0);
    }
    let max_dim = cfg.max_dim.min(n).max(1);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_dim);
    basis.push(v.iter().map(|x| x / beta0).collect());
    let mut alpha = Vec::with_capacity(max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
    let mut w = vec![C64::default(); n];
    let mut last_err = f64::INFINITY;
    for j in 0..max_dim {
        op.apply_into(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        axpy(C64::new(-a, 0.0), &basis[j], &mut w);
        if j > 0 {
            axpy(C64::new(-beta[j - 1], 0.0), &basis[j - 1], &mut w);
        }
        // One full reorthogonalization pass on top of the three-term recurrence.
        for q in basis.iter().filter(|_| cfg.reorthogonalize) {
            let c = dot(q, &w);
            axpy(-c, q, &mut w);
        }
        let b = norm(&w);
        let mut step = tau;
        let mut coeffs = tridiagonal_expm_e1(&alpha, &beta, step);
        let mut err = beta0 * b * coeffs[j].norm();
        let breakdown = b <= 1e-13 * alpha.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut used = 0;
        if !(breakdown || err <= cfg.tol * beta0 || j + 1 == n) && j + 1 == max_dim {
            while err > cfg.tol * beta0 && used < halvings_left {
                used += 1;
                step *= 0.5;
                coeffs = tridiagonal_expm_e1(&alpha, &beta, step);
                err = beta0 * b * coeffs[j].norm();
            }
            if err > cfg.tol * beta0 {
                return Attempt::Failed(max_dim, last_err.min(err));
            }
        }
        if breakdown || err <= cfg.tol * beta0 || j + 1 == n {
            let mut out = vec![C64::default(); n];
            for (q, c) in basis.iter().zip(&coeffs) {
                axpy(c * beta0, q, &mut out);
            }
            return Attempt::Converged(out, j + 1, err, step, used);
        }
        last_err = err;
        if j + 1 < max_dim {
            beta.push(b);
            let next: Vec<C64> = w.iter().map(|x| x / b).collect();
            basis.push(next);
        }
    }
    Attempt::Failed(max_dim, last_err)
}

/// `exp(-i t H) v`.
pub fn expm_apply<H: HermitianOperator + ?Sized>(
    op: &H,
    v: &[C64],
    t: f64,
    cfg: &KrylovConfig,
) -> Result<(Vec<C64>, KrylovStats)> {
    if v.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: v.len(),
        });
    }
    let mut stats = KrylovStats::default();
    if t == 0.0 {
        return Ok((v.to_vec(), stats));
    }
    let mut state = v.to_vec();
    let mut remaining = t;
    let mut tau = t;
    let mut halvings = 0u32;
    while remaining != 0.0 {
        if tau.abs() > remaining.abs() {
            tau = remaining;
        }
        match lanczos_attempt(op, &state, tau, cfg, cfg.max_halvings - halvings) {
            Attempt::Converged(next, matvecs, err, step, used) => {
                halvings += used;
                tau = step;
                state = next;
                stats.matvecs += matvecs;
                stats.substeps += 1;
                stats.max_error_estimate = stats.max_error_estimate.max(err);
                remaining -= step;
                if remaining.abs() <= 1e-14 * t.abs() {
                    remaining = 0.0;
                }
            }
            Attempt::Failed(matvecs, err) => {
                stats.matvecs += matvecs;
                return Err(Error::KrylovNotConverged {
                    residual: err,
                    iterations: stats.matvecs,
                    substeps: stats.substeps,
                });
            }
        }
    }
    Ok((state, stats))
}
