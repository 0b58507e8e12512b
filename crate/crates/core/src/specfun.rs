//! Special functions behind every density and kernel formula.
//!
//! The Bessel index is carried by [`AlphaIndex`], which caches the Gamma
//! values needed by the power series. `h_α(z) = z^{-α} I_α(z)` is the
//! workhorse: it is entire, strictly positive and is what the transition
//! densities are written in terms of.

use std::f64::consts::PI;

use crate::error::{domain, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const SERIES_RTOL: f64 = 1e-16;

/// Gamma function for positive real argument.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma_unchecked(1.0 - x))
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        let a = lanczos_sum(x);
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

fn lanczos_sum(x: f64) -> f64 {
    LANCZOS_COEF[1..].iter().enumerate().fold(LANCZOS_COEF[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0))
}

/// Natural log of Γ(x) for x > 0; finite well past the overflow point of Γ.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x)
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln()
    }
}

/// Bessel index `α ≥ 0` with cached `Γ(α + j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaIndex {
    alpha: f64,
    // gamma_cache[j - 1] = Γ(α + j)
    gamma_cache: Vec<f64>,
    ln_gamma_alpha1: f64,
}

impl AlphaIndex {
    pub const GAMMA_CACHE_LEN: usize = 64;

    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(domain(format!("Bessel index must be finite and >= 0, got {alpha}")));
        }
        let mut gamma_cache = Vec::with_capacity(Self::GAMMA_CACHE_LEN);
        let mut g = gamma_unchecked(alpha + 1.0);
        for j in 1..=Self::GAMMA_CACHE_LEN {
            if !g.is_finite() {
                break;
            }
            gamma_cache.push(g);
            g *= alpha + j as f64;
        }
        Ok(Self { alpha, gamma_cache, ln_gamma_alpha1: ln_gamma_unchecked(alpha + 1.0) })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `Γ(α + j)` for `j ≥ 1`.
    pub fn gamma_shifted(&self, j: usize) -> f64 {
        assert!(j >= 1, "gamma_shifted needs j >= 1");
        match self.gamma_cache.get(j - 1) {
            Some(&g) => g,
            None => gamma_unchecked(self.alpha + j as f64),
        }
    }

    /// `ln Γ(α + j)` for `j ≥ 1`.
    pub fn ln_gamma_shifted(&self, j: usize) -> f64 {
        assert!(j >= 1, "ln_gamma_shifted needs j >= 1");
        if j == 1 {
            self.ln_gamma_alpha1
        } else {
            ln_gamma_unchecked(self.alpha + j as f64)
        }
    }

    pub fn gamma_cache(&self) -> &[f64] {
        &self.gamma_cache
    }

    /// The index `α + n`, used for `h_{α+1}` and `h_{α+2}`.
    pub fn raised(&self, n: u32) -> AlphaIndex {
        AlphaIndex::new(self.alpha + f64::from(n)).expect("raised index stays valid")
    }

    fn asymptotic_switch(&self) -> f64 {
        30.0_f64.max(2.0 * self.alpha * self.alpha)
    }
}

fn h_series(alpha: f64, ln_gamma_alpha1: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = (-ln_gamma_alpha1).exp();
    let mut sum = term;
    let mut n = 1.0_f64;
    loop {
        term *= q / (n * (n + alpha));
        sum += term;
        if term < SERIES_RTOL * sum && n > z {
            break;
        }
        n += 1.0;
    }
    sum * (-alpha * std::f64::consts::LN_2).exp()
}

// Hankel-type coefficients a_k(α) = Π_{m=1}^k (4α² − (2m−1)²) / (k! 8^k).
fn hankel_coefficients(alpha: f64, count: usize) -> impl Iterator<Item = f64> {
    let mu = 4.0 * alpha * alpha;
    let mut a = 1.0;
    (0..count).map(move |k| {
        if k > 0 {
            let m = k as f64;
            a *= (mu - (2.0 * m - 1.0).powi(2)) / (8.0 * m);
        }
        a
    })
}

fn ln_bessel_i_asymptotic(alpha: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut zk = 1.0;
    for (k, a) in hankel_coefficients(alpha, 80).enumerate() {
        let term = a / zk * if k % 2 == 0 { 1.0 } else { -1.0 };
        if term.abs() > prev {
            break;
        }
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        prev = term.abs();
        zk *= z;
    }
    z - 0.5 * (2.0 * PI * z).ln() + sum.ln()
}

/// `h_α(z) = z^{-α} I_α(z)` from its power series, switching to the
/// large-argument expansion once the series would lose accuracy.
pub fn h_alpha(idx: &AlphaIndex, z: f64) -> f64 {
    assert!(z >= 0.0, "h_alpha requires z >= 0");
    if z < idx.asymptotic_switch() {
        h_series(idx.alpha, idx.ln_gamma_alpha1, z)
    } else {
        ln_h_alpha(idx, z).exp()
    }
}

/// `ln h_α(z)`, finite for every `z ≥ 0`.
pub fn ln_h_alpha(idx: &AlphaIndex, z: f64) -> f64 {
    assert!(z >= 0.0, "ln_h_alpha requires z >= 0");
    if z < idx.asymptotic_switch() {
        h_series(idx.alpha, idx.ln_gamma_alpha1, z).ln()
    } else {
        ln_bessel_i_asymptotic(idx.alpha, z) - idx.alpha * z.ln()
    }
}

/// `(h, h', h'')` from the term-wise differentiated series, via
/// `h'_α = z h_{α+1}` and `h''_α = h_{α+1} + z² h_{α+2}`.
pub fn h_alpha_derivatives(idx: &AlphaIndex, z: f64) -> (f64, f64, f64) {
    let h0 = h_alpha(idx, z);
    let h1 = h_alpha(&idx.raised(1), z);
    let h2 = h_alpha(&idx.raised(2), z);
    (h0, z * h1, h1 + z * z * h2)
}

/// Modified Bessel function of the first kind, `I_α(z) = z^α h_α(z)`.
pub fn bessel_i(idx: &AlphaIndex, z: f64) -> f64 {
    assert!(z >= 0.0, "bessel_i requires z >= 0");
    if z == 0.0 {
        return if idx.alpha == 0.0 { 1.0 } else { 0.0 };
    }
    if z < idx.asymptotic_switch() {
        z.powf(idx.alpha) * h_alpha(idx, z)
    } else {
        ln_bessel_i_asymptotic(idx.alpha, z).exp()
    }
}

/// `e^{-z} I_α(z)`, stable for large `z`.
pub fn bessel_i_scaled(idx: &AlphaIndex, z: f64) -> f64 {
    assert!(z >= 0.0, "bessel_i_scaled requires z >= 0");
    if z == 0.0 {
        return bessel_i(idx, 0.0);
    }
    if z < idx.asymptotic_switch() {
        (idx.alpha * z.ln() + ln_h_alpha(idx, z) - z).exp()
    } else {
        (ln_bessel_i_asymptotic(idx.alpha, z) - z).exp()
    }
}

const J_SERIES_MAX: f64 = 8.0;
const J_ASYMPTOTIC_MIN: f64 = 30.0;
const J_HANKEL_TERMS: usize = 12;

/// Bessel function of the first kind `J_α(z)` for `z ≥ 0`.
///
/// Power series (Neumaier-compensated) for `z ≤ 8`, Miller backward
/// recurrence normalized by `(z/2)^α = Σ_k (α+2k) Γ(α+k)/k! J_{α+2k}(z)` up
/// to `z = 30`, and the Hankel expansion with six `P` and six `Q`
/// corrections beyond.
pub fn bessel_j(idx: &AlphaIndex, z: f64) -> f64 {
    assert!(z >= 0.0, "bessel_j requires z >= 0");
    if z == 0.0 {
        return if idx.alpha == 0.0 { 1.0 } else { 0.0 };
    }
    if z <= J_SERIES_MAX {
        bessel_j_series(idx, z)
    } else if z <= J_ASYMPTOTIC_MIN {
        bessel_j_miller(idx, z)
    } else {
        bessel_j_hankel(idx.alpha, z)
    }
}

/// Plain alternating power series with compensated summation.
pub fn bessel_j_series(idx: &AlphaIndex, z: f64) -> f64 {
    let alpha = idx.alpha;
    let q = 0.25 * z * z;
    let mut term = (alpha * (0.5 * z).ln() - idx.ln_gamma_alpha1).exp();
    if z == 0.0 {
        term = if alpha == 0.0 { 1.0 } else { 0.0 };
    }
    let mut sum = term;
    let mut comp = 0.0;
    let mut n = 1.0_f64;
    loop {
        term *= -q / (n * (n + alpha));
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if term.abs() < SERIES_RTOL * (sum + comp).abs() && n > z {
            break;
        }
        if n > 500.0 {
            break;
        }
        n += 1.0;
    }
    sum + comp
}

fn bessel_j_miller(idx: &AlphaIndex, z: f64) -> f64 {
    let alpha = idx.alpha;
    let mut top = (z + 30.0 + 10.0 * z.cbrt()) as usize;
    top += top % 2;
    // f_{n} ~ J_{α+n}, unnormalized
    let mut f_next = 0.0_f64;
    let mut f_cur = 1e-300_f64;
    let mut norm = 0.0_f64;
    // g_k = Γ(α+k)/k! for the k-th normalization weight, built upward and
    // consumed downward, so tabulate first.
    let half = top / 2;
    let mut weights = Vec::with_capacity(half + 1);
    weights.push((idx.ln_gamma_alpha1).exp());
    let mut g = (idx.ln_gamma_alpha1).exp(); // Γ(α+1)/1! for k = 1
    for k in 1..=half {
        if k > 1 {
            g *= (alpha + k as f64 - 1.0) / k as f64;
        }
        weights.push((alpha + 2.0 * k as f64) * g);
    }
    let mut n = top;
    loop {
        if n.is_multiple_of(2) {
            norm += weights[n / 2] * f_cur;
        }
        if n == 0 {
            break;
        }
        let f_prev = 2.0 * (alpha + n as f64) / z * f_cur - f_next;
        f_next = f_cur;
        f_cur = f_prev;
        n -= 1;
        if f_cur.abs() > 1e250 {
            f_cur *= 1e-250;
            f_next *= 1e-250;
            norm *= 1e-250;
        }
    }
    f_cur * (alpha * (0.5 * z).ln()).exp() / norm
}

fn bessel_j_hankel(alpha: f64, z: f64) -> f64 {
    let mut p = 0.0;
    let mut q = 0.0;
    let mut zk = 1.0;
    for (k, a) in hankel_coefficients(alpha, J_HANKEL_TERMS).enumerate() {
        let term = a / zk;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        zk *= z;
    }
    let chi = z - (0.5 * alpha + 0.25) * PI;
    (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Generalized Laguerre polynomial `L^α_n(x)` by the three-term recurrence.
pub fn laguerre(idx: &AlphaIndex, n: usize, x: f64) -> f64 {
    laguerre_with_alpha(idx.alpha, n, x)
}

pub(crate) fn laguerre_with_alpha(alpha: f64, n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Comparison functions `H_α(z) = z^{-1} h'_α/h_α` and
/// `G_α(z) = 1/(α + √(α² + z²))`.
pub fn gronwall_pair(idx: &AlphaIndex, z: f64) -> Result<(f64, f64)> {
    if !(z > 0.0) {
        return Err(domain(format!("gronwall_pair requires z > 0, got {z}")));
    }
    let raised = idx.raised(1);
    let h_ratio = (ln_h_alpha(&raised, z) - ln_h_alpha(idx, z)).exp();
    let a = idx.alpha;
    let g = 1.0 / (a + (a * a + z * z).sqrt());
    Ok((h_ratio, g))
}
