//! Hermitian eigenvalue solvers.
//!
//! [`hermitian_eigenvalues`] is the cyclic Jacobi reference solver.
//! [`hermitian_eigenvalues_tridiagonal`] reduces to a real symmetric
//! tridiagonal matrix with Householder reflections and finishes with
//! implicit QL; it is the one used for bulk LUE sampling.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Wraps `data` after checking `|a_ij - conj(a_ji)| <= 1e-12 ‖A‖_F`.
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(domain(format!("expected {} entries for a {n}x{n} matrix, got {}", n * n, data.len())));
        }
        let m = Self { n, data };
        let norm = m.frobenius_norm();
        let tol = 1e-12 * norm.max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in i..n {
                if (m.get(i, j) - m.get(j, i).conj()).norm() > tol {
                    return Err(domain(format!("matrix is not Hermitian at ({i}, {j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = Complex64::new(*d, 0.0);
        }
        Self { n, data }
    }

    /// `A A*` for a row-major `n × m` complex matrix `A`; Hermitian by
    /// construction.
    pub fn gram(a: &[Complex64], n: usize, m: usize) -> Self {
        assert_eq!(a.len(), n * m);
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let ri = &a[i * m..(i + 1) * m];
            for j in 0..=i {
                let rj = &a[j * m..(j + 1) * m];
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, y) in ri.iter().zip(rj) {
                    acc += x * y.conj();
                }
                data[i * n + j] = acc;
                data[j * n + i] = acc.conj();
            }
            data[i * n + i].im = 0.0;
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// Eigenvalues in ascending order by cyclic complex Jacobi rotations, run
/// until the off-diagonal Frobenius norm drops below `1e-12 ‖A‖_F`.
pub fn hermitian_eigenvalues(matrix: &HermitianMatrix) -> Result<Vec<f64>> {
    let n = matrix.n;
    let mut a = matrix.data.clone();
    let norm = matrix.frobenius_norm();
    let target = 1e-12 * norm;
    let off_norm = |a: &[Complex64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= target || n < 2 {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { iterations: sweeps, off_norm: off, norm });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                // e^{-iφ} with a_pq = r e^{iφ}
                let phase_conj = apq.conj() / r;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // columns: p <- c p - s e^{-iφ} q ; q <- s p + c e^{-iφ} q
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q] * phase_conj;
                    a[k * n + p] = akp * c - akq * s;
                    a[k * n + q] = akp * s + akq * c;
                }
                // rows: conjugate transpose of the same unitary
                let phase = phase_conj.conj();
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k] * phase;
                    a[p * n + k] = apk * c - aqk * s;
                    a[q * n + k] = apk * s + aqk * c;
                }
                a[p * n + q] = Complex64::new(0.0, 0.0);
                a[q * n + p] = Complex64::new(0.0, 0.0);
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Eigenvalues in ascending order via Householder reduction to a real
/// symmetric tridiagonal matrix and implicit QL.
pub fn hermitian_eigenvalues_tridiagonal(matrix: &HermitianMatrix) -> Result<Vec<f64>> {
    let (diag, off) = householder_tridiagonalize(matrix);
    let (eig, _) = symmetric_tridiagonal_eigen(&diag, &off, false)?;
    Ok(eig)
}

/// Returns the real diagonal and the moduli of the off-diagonal; the
/// off-diagonal phases are removed by a diagonal unitary similarity.
pub fn householder_tridiagonalize(matrix: &HermitianMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = matrix.n;
    let mut a = matrix.data.clone();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let zero = Complex64::new(0.0, 0.0);
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    for k in 0..n.saturating_sub(1) {
        diag[k] = a[k * n + k].re;
        let m = n - k - 1;
        let x0 = a[(k + 1) * n + k];
        let norm = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        off[k] = norm;
        if norm == 0.0 || m == 1 {
            continue;
        }
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        let v = &mut v[..m];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = a[(k + 1 + i) * n + k];
        }
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        let p = &mut p[..m];
        for i in 0..m {
            let row = &a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
            let mut acc = zero;
            for (aij, vj) in row.iter().zip(v.iter()) {
                acc += aij * vj;
            }
            p[i] = acc * tau;
        }
        let kk: f64 = 0.5 * tau * v.iter().zip(p.iter()).map(|(vi, pi)| (vi.conj() * pi).re).sum::<f64>();
        for i in 0..m {
            p[i] -= v[i] * kk;
        }
        for i in 0..m {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
            for j in 0..m {
                row[j] -= vi * p[j].conj() + wi * v[j].conj();
            }
        }
    }
    if n > 0 {
        diag[n - 1] = a[(n - 1) * n + n - 1].re;
    }
    (diag, off)
}

const QL_MAX_ITER: usize = 60;

/// Eigenvalues (ascending) of the symmetric tridiagonal matrix with the
/// given diagonal and off-diagonal, by implicit QL with Wilkinson-type
/// shifts. With `first_components`, also returns the first component of
/// each normalized eigenvector (Golub–Welsch).
pub fn symmetric_tridiagonal_eigen(
    diag: &[f64],
    off: &[f64],
    first_components: bool,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = diag.len();
    if n == 0 {
        return Ok((Vec::new(), first_components.then(Vec::new)));
    }
    if off.len() + 1 != n {
        return Err(domain("off-diagonal must have length n - 1"));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = if first_components {
        let mut z = vec![0.0; n];
        z[0] = 1.0;
        Some(z)
    } else {
        None
    };
    let scale: f64 = d.iter().chain(e.iter()).fold(0.0, |m, x| m.max(x.abs()));
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(Error::NoConvergence { iterations: iter, off_norm: e[l].abs(), norm: scale });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0_f64, 1.0_f64, 0.0_f64);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_mut() {
                    let f = z[i + 1];
                    z[i + 1] = s * z[i] + c * f;
                    z[i] = c * z[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let eig = order.iter().map(|&i| d[i]).collect();
    let first = z.map(|z| order.iter().map(|&i| z[i]).collect());
    Ok((eig, first))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(rng.random_range(-2.0..2.0), 0.0);
            for j in i + 1..n {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                data[i * n + j] = z;
                data[j * n + i] = z.conj();
            }
        }
        HermitianMatrix::new(n, data).unwrap()
    }

    #[test]
    fn identity_and_diagonal() {
        let id = HermitianMatrix::from_real_diagonal(&[1.0, 1.0, 1.0]);
        assert_eq!(hermitian_eigenvalues(&id).unwrap(), vec![1.0, 1.0, 1.0]);
        let d = HermitianMatrix::from_real_diagonal(&[3.0, 1.0, 2.0]);
        assert_eq!(hermitian_eigenvalues(&d).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(hermitian_eigenvalues_tridiagonal(&d).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn trace_identities_on_random_8x8() {
        for seed in 0..5 {
            let m = random_hermitian(8, seed);
            let eig = hermitian_eigenvalues(&m).unwrap();
            let sum: f64 = eig.iter().sum();
            let sq: f64 = eig.iter().map(|x| x * x).sum();
            let fro2 = m.frobenius_norm().powi(2);
            assert!((sum - m.trace()).abs() < 1e-10);
            assert!((sq - fro2).abs() < 1e-10 * fro2.max(1.0));
            assert!(eig.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn solvers_agree() {
        for (n, seed) in [(1, 1), (2, 2), (5, 3), (17, 4), (40, 5)] {
            let m = random_hermitian(n, seed);
            let a = hermitian_eigenvalues(&m).unwrap();
            let b = hermitian_eigenvalues_tridiagonal(&m).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10, "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let data = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(2.0, 0.0),
        ];
        assert!(HermitianMatrix::new(2, data).is_err());
    }

    #[test]
    fn tridiagonal_known_spectrum() {
        // -1, 2, -1 Toeplitz: eigenvalues 2 - 2 cos(kπ/(n+1))
        let n = 30;
        let (eig, first) = symmetric_tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1], true).unwrap();
        for (k, ev) in eig.iter().enumerate() {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((ev - want).abs() < 1e-12);
        }
        let s: f64 = first.unwrap().iter().map(|v| v * v).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
