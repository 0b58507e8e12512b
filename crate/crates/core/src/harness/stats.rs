//! Summary statistics and two-sample tests.

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::bridge::LineEnsemble;
use crate::error::{domain, Result};

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(domain("need at least one value"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Ok((mean, f64::INFINITY));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Binomial proportion and its standard error.
pub fn proportion(successes: usize, n: usize) -> (f64, f64) {
    let p = successes as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(domain("samples must not contain NaN"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("KS statistic needs two nonempty samples"));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// KS statistic with a label-permutation p-value `(1 + #{D* ≥ D}) / (B + 1)`.
pub fn ks_permutation_test<R: Rng + ?Sized>(a: &[f64], b: &[f64], permutations: usize, rng: &mut R) -> Result<KsTest> {
    let statistic = ks_statistic(a, b)?;
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    pooled.sort_by(|p, q| p.0.total_cmp(&q.0));
    // tie groups end where the next value differs
    let ends: Vec<bool> = (0..pooled.len()).map(|k| k + 1 == pooled.len() || pooled[k + 1].0 != pooled[k].0).collect();
    let mut labels: Vec<bool> = pooled.iter().map(|p| p.1).collect();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let tol = 1e-12;
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(rng);
        let (mut ca, mut cb, mut d) = (0usize, 0usize, 0.0f64);
        for (l, end) in labels.iter().zip(&ends) {
            if *l {
                ca += 1;
            } else {
                cb += 1;
            }
            if *end {
                d = d.max((ca as f64 / na - cb as f64 / nb).abs());
            }
        }
        if d >= statistic - tol {
            exceed += 1;
        }
    }
    Ok(KsTest { statistic, p_value: (1 + exceed) as f64 / (permutations + 1) as f64, permutations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit with `bins − 1` degrees of freedom (the
/// expected counts are fixed in advance, not fitted).
pub fn chi_square_test(observed: &[f64], expected: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(domain("chi-square needs matching count vectors with at least two bins"));
    }
    if expected.iter().any(|e| !(*e > 0.0)) {
        return Err(domain("expected counts must be positive"));
    }
    let statistic: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| domain(e.to_string()))?;
    Ok(ChiSquareTest { statistic, dof, p_value: dist.sf(statistic) })
}

/// `sup |f_i(s) − f_i(t)|` over curves `i < k` and grid pairs `|s − t| ≤ r`.
pub fn modulus_of_continuity(ensemble: &LineEnsemble, k: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(domain(format!("radius must be positive, got {r}")));
    }
    if k > ensemble.k() {
        return Err(domain(format!("k = {k} exceeds the ensemble size {}", ensemble.k())));
    }
    let grid = &ensemble.grid;
    let tol = 1e-12 * r.max(1.0);
    let mut w: f64 = 0.0;
    for curve in ensemble.values.iter().take(k) {
        for p in 0..grid.len() {
            for q in p + 1..grid.len() {
                if grid[q] - grid[p] > r + tol {
                    break;
                }
                w = w.max((curve[q] - curve[p]).abs());
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;

    #[test]
    fn ks_examples() {
        let a = [0.1, 0.5, 0.9];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_statistic(&a, &[2.0, 3.0]).unwrap(), 1.0);
        assert!(ks_statistic(&a, &[]).is_err());
        let mut rng = replica_rng(1, 0);
        let u: Vec<f64> = (0..500).map(|_| rng.random()).collect();
        let mut v = u.clone();
        v.shuffle(&mut rng);
        assert_eq!(ks_statistic(&u, &v).unwrap(), 0.0);
        // ties: F_a and F_b jump together at shared values
        assert!((ks_statistic(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn permutation_test_power_and_size() {
        let mut rng = replica_rng(2, 0);
        let a: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let same = ks_permutation_test(&a, &b, 999, &mut rng).unwrap();
        assert!(same.p_value > 0.01);
        let shifted: Vec<f64> = b.iter().map(|x| x + 0.3).collect();
        let diff = ks_permutation_test(&a, &shifted, 999, &mut rng).unwrap();
        assert_eq!(diff.p_value, 1.0 / 1000.0);
    }

    #[test]
    fn chi_square_examples() {
        let t = chi_square_test(&[10.0, 10.0], &[10.0, 10.0]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        // 3.841 is the 95% quantile with one degree of freedom
        let t = chi_square_test(&[60.0, 40.0], &[50.0, 50.0]).unwrap();
        assert_eq!(t.statistic, 4.0);
        assert!((t.p_value - 0.0455).abs() < 1e-3);
        assert!(chi_square_test(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn modulus_examples() {
        let grid = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let flat = LineEnsemble::new(grid.clone(), vec![vec![2.0; 5]]).unwrap();
        assert_eq!(modulus_of_continuity(&flat, 1, 0.5).unwrap(), 0.0);
        let line = LineEnsemble::new(grid.clone(), vec![grid.iter().map(|t| 3.0 * t).collect()]).unwrap();
        assert_eq!(modulus_of_continuity(&line, 1, 0.6).unwrap(), 1.5);
        assert_eq!(modulus_of_continuity(&line, 1, 0.1).unwrap(), 0.0);
        let mut last = 0.0;
        for r in [0.1, 0.25, 0.5, 1.0] {
            let w = modulus_of_continuity(&line, 1, r).unwrap();
            assert!(w >= last);
            last = w;
        }
        assert!(modulus_of_continuity(&line, 2, 0.5).is_err());
        assert!(modulus_of_continuity(&line, 1, 0.0).is_err());
    }

    #[test]
    fn mean_se() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(mean_and_se(&[]).is_err());
        assert_eq!(proportion(1, 4).0, 0.25);
    }
}
