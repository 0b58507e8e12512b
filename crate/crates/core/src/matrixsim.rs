//! Eigenvalues of `A(t) A(t)*` for an `N × (N + α)` matrix of independent
//! complex Brownian motions, and the hard-edge rescaling of that process.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bridge::LineEnsemble;
use crate::eigen::{hermitian_eigenvalues, hermitian_eigenvalues_tridiagonal, HermitianMatrix};
use crate::error::{domain, Result};
use crate::rng::replica_rng;

/// Which Hermitian eigensolver to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSolver {
    #[default]
    Jacobi,
    /// Householder reduction followed by implicit QL; same spectrum, faster.
    Tridiagonal,
}

impl std::str::FromStr for EigenSolver {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(EigenSolver::Jacobi),
            "tridiagonal" => Ok(EigenSolver::Tridiagonal),
            _ => Err(domain(format!("unknown eigensolver {s:?} (expected jacobi or tridiagonal)"))),
        }
    }
}

impl EigenSolver {
    pub fn eigenvalues(self, m: &HermitianMatrix) -> Result<Vec<f64>> {
        match self {
            EigenSolver::Jacobi => hermitian_eigenvalues(m),
            EigenSolver::Tridiagonal => hermitian_eigenvalues_tridiagonal(m),
        }
    }
}

/// One sampled path: `eigenvalues[j]` holds the sorted spectrum at `times[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LuePath {
    pub n: usize,
    pub alpha: u32,
    pub times: Vec<f64>,
    pub eigenvalues: Vec<Vec<f64>>,
    pub seed: u64,
}

impl LuePath {
    /// `Σ_i Y_i(t)` at each sampled time.
    pub fn traces(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e.iter().sum()).collect()
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty()
        || !(times[0] > 0.0)
        || times.windows(2).any(|w| !(w[0] < w[1]))
        || !times.iter().all(|t| t.is_finite())
    {
        return Err(domain("times must be nonempty, positive, finite and strictly increasing"));
    }
    Ok(())
}

/// Samples with replica stream 0 of `seed`.
pub fn sample_lue_path(n: usize, alpha: u32, times: &[f64], seed: u64) -> Result<LuePath> {
    sample_lue_path_with(n, alpha, times, seed, &mut replica_rng(seed, 0), EigenSolver::default())
}

/// Builds `A(t)` from cumulative Gaussian increments (real and imaginary
/// parts each of variance equal to the time step) and diagonalizes
/// `A A*` at every time. `seed` is only recorded.
pub fn sample_lue_path_with<R: Rng + ?Sized>(
    n: usize,
    alpha: u32,
    times: &[f64],
    seed: u64,
    rng: &mut R,
    solver: EigenSolver,
) -> Result<LuePath> {
    if n == 0 {
        return Err(domain("N must be >= 1"));
    }
    validate_times(times)?;
    let cols = n + alpha as usize;
    let mut a = vec![Complex64::new(0.0, 0.0); n * cols];
    let mut prev = 0.0;
    let mut eigenvalues = Vec::with_capacity(times.len());
    for &t in times {
        let sd = (t - prev).sqrt();
        prev = t;
        for z in a.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += Complex64::new(sd * re, sd * im);
        }
        eigenvalues.push(solver.eigenvalues(&HermitianMatrix::gram(&a, n, cols))?);
    }
    Ok(LuePath { n, alpha, times: times.to_vec(), eigenvalues, seed })
}

/// The matrix times `1 + t/(4N)` at which a path must be sampled for
/// [`hard_edge_scale`] on `t_grid`.
pub fn lue_times_for(n: usize, t_grid: &[f64]) -> Vec<f64> {
    t_grid.iter().map(|t| 1.0 + t / (4.0 * n as f64)).collect()
}

/// `L_i(t) = 4N · Y_i(1 + t/(4N))` on `t_grid`; the path must have been
/// sampled exactly at [`lue_times_for`].
pub fn hard_edge_scale(path: &LuePath, t_grid: &[f64]) -> Result<LineEnsemble> {
    let expected = lue_times_for(path.n, t_grid);
    if expected.len() != path.times.len()
        || expected.iter().zip(&path.times).any(|(e, t)| (e - t).abs() > 1e-12 * e.abs().max(1.0))
    {
        return Err(domain("path times do not match 1 + t/(4N) on the requested grid"));
    }
    let scale = 4.0 * path.n as f64;
    let values = (0..path.n).map(|i| path.eigenvalues.iter().map(|e| scale * e[i]).collect()).collect();
    LineEnsemble::new(t_grid.to_vec(), values)
}
