//! Laguerre biorthogonal systems, the finite-N space–time correlation
//! kernel, its hard-edge scaling, the extended Bessel kernel and Fredholm
//! gap probabilities.

use std::f64::consts::LN_2;
use std::io::Write;

use crate::density::{jj_laplace_integral, ln_q, ln_q_gauged};
use crate::error::{domain, Error, Result};
use crate::quad::{adaptive_panels, gauss_legendre_on, QuadratureSpec};
use crate::specfun::{bessel_i_scaled, bessel_j, laguerre, ln_gamma_unchecked, AlphaIndex};

/// A space–time point `(t, x)`.
pub type SpaceTime = (f64, f64);

fn ln_pow_ratio(alpha: f64, x: f64, t: f64) -> f64 {
    if alpha == 0.0 {
        0.0
    } else {
        alpha * (x / t).ln()
    }
}

/// `φ_j(t, x) = Γ(j)/(2^{j+α}Γ(α+j)) t^{-j} (x/t)^α e^{-x/2t} L^α_{j-1}(x/2t)`.
pub fn phi(idx: &AlphaIndex, j: usize, t: f64, x: f64) -> f64 {
    assert!(j >= 1 && t > 0.0 && x >= 0.0);
    let alpha = idx.alpha();
    if x == 0.0 && alpha > 0.0 {
        return 0.0;
    }
    let jf = j as f64;
    let ln_pref = ln_gamma_unchecked(jf) - (jf + alpha) * LN_2 - idx.ln_gamma_shifted(j) - jf * t.ln()
        + ln_pow_ratio(alpha, x, t)
        - x / (2.0 * t);
    ln_pref.exp() * laguerre(idx, j - 1, x / (2.0 * t))
}

/// `ψ_j(t, x) = 2^{j-1} t^{j-1} L^α_{j-1}(x/2t)`.
pub fn psi(idx: &AlphaIndex, j: usize, t: f64, x: f64) -> f64 {
    assert!(j >= 1 && t > 0.0);
    (2.0 * t).powi(j as i32 - 1) * laguerre(idx, j - 1, x / (2.0 * t))
}

/// Successive `L^α_0(x), L^α_1(x), …` by the three-term recurrence.
struct LaguerreSeq {
    alpha: f64,
    x: f64,
    n: usize,
    prev: f64,
    cur: f64,
}

impl LaguerreSeq {
    fn new(alpha: f64, x: f64) -> Self {
        Self { alpha, x, n: 0, prev: 0.0, cur: 1.0 }
    }
}

impl Iterator for LaguerreSeq {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        let out = self.cur;
        let n = self.n as f64;
        let next = if self.n == 0 {
            1.0 + self.alpha - self.x
        } else {
            ((2.0 * n + 1.0 + self.alpha - self.x) * self.cur - (n + self.alpha) * self.prev) / (n + 1.0)
        };
        self.prev = self.cur;
        self.cur = next;
        self.n += 1;
        Some(out)
    }
}

/// `Σ_{j=1}^N Γ(j)/Γ(α+j) t^{j-1} s^{-j} L^α_{j-1}(x/2t) L^α_{j-1}(y/2s)`.
fn laguerre_kernel_sum(idx: &AlphaIndex, n: usize, t: f64, x: f64, s: f64, y: f64) -> f64 {
    let alpha = idx.alpha();
    let ratio = t / s;
    let mut coef = (-idx.ln_gamma_shifted(1)).exp() / s;
    let mut sum = 0.0;
    let lx = LaguerreSeq::new(alpha, x / (2.0 * t));
    let ly = LaguerreSeq::new(alpha, y / (2.0 * s));
    for (j, (a, b)) in (1..=n).zip(lx.zip(ly)) {
        sum += coef * a * b;
        let jf = j as f64;
        coef *= jf / (alpha + jf) * ratio;
    }
    sum
}

/// `K^N((t,x);(s,y)) = −q_{s−t}(x,y) 1(t<s) + Σ_{j≤N} ψ_j(t,x) φ_j(s,y)`,
/// multiplied by `(x/y)^{α/2}` when `gauge` is set.
pub fn finite_kernel(idx: &AlphaIndex, n: usize, (t, x): SpaceTime, (s, y): SpaceTime, gauge: bool) -> Result<f64> {
    if !(t > 0.0 && s > 0.0) {
        return Err(domain(format!("kernel times must be positive, got t={t}, s={s}")));
    }
    if !(x >= 0.0 && y >= 0.0) {
        return Err(domain(format!("kernel positions must be >= 0, got x={x}, y={y}")));
    }
    let alpha = idx.alpha();
    let ln_pref = if gauge {
        if alpha > 0.0 && x * y == 0.0 {
            f64::NEG_INFINITY
        } else {
            -(alpha + 1.0) * LN_2 + ln_pow_ratio(0.5 * alpha, x * y, s * s) - y / (2.0 * s)
        }
    } else if alpha > 0.0 && y == 0.0 {
        f64::NEG_INFINITY
    } else {
        -(alpha + 1.0) * LN_2 + ln_pow_ratio(alpha, y, s) - y / (2.0 * s)
    };
    let sum = if n == 0 || ln_pref == f64::NEG_INFINITY {
        0.0
    } else {
        ln_pref.exp() * laguerre_kernel_sum(idx, n, t, x, s, y)
    };
    let q = if t < s {
        let tau = s - t;
        if gauge {
            ln_q_gauged(idx, tau, x, y).exp()
        } else {
            ln_q(idx, tau, x, y).exp()
        }
    } else {
        0.0
    };
    Ok(sum - q)
}

/// `(4N)^{-1} K̃^N((1 + t/4N, x/4N); (1 + s/4N, y/4N))`, gauge-transformed.
pub fn scaled_finite_kernel(idx: &AlphaIndex, n: usize, (t, x): SpaceTime, (s, y): SpaceTime) -> Result<f64> {
    if n == 0 {
        return Err(domain("scaled kernel needs N >= 1"));
    }
    let m = 4.0 * n as f64;
    let v = finite_kernel(idx, n, (1.0 + t / m, x / m), (1.0 + s / m, y / m), true)?;
    Ok(v / m)
}

/// Smallest `s − t` for which the unbounded branch is evaluated.
pub const MIN_BRANCH_GAP: f64 = 1e-8;

/// The extended Bessel kernel: `∫_0^{1/8} e^{-2(s−t)z} J_α(2√(zx)) J_α(2√(zy)) dz`
/// for `t ≥ s` and `−∫_{1/8}^∞` of the same integrand for `t < s`.
pub fn extended_kernel(idx: &AlphaIndex, (t, x): SpaceTime, (s, y): SpaceTime, quad: &QuadratureSpec) -> Result<f64> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(domain(format!("kernel positions must be >= 0, got x={x}, y={y}")));
    }
    let c = 2.0 * (s - t);
    if t >= s {
        Ok(jj_laplace_integral(idx, c, x, y, 0.0, Some(0.125), quad))
    } else if s - t < MIN_BRANCH_GAP {
        Err(Error::Discretization(format!(
            "t < s with s - t = {:e}: the unbounded branch is ill-conditioned; use t = s",
            s - t
        )))
    } else {
        Ok(-jj_laplace_integral(idx, c, x, y, 0.125, None, quad))
    }
}

/// `(K^ext_{t<s} + (x/y)^{α/2} q_{s−t}, ∫_0^{1/8} e^{-2(s−t)z} JJ dz)`; the two
/// entries agree.
pub fn branch_identity(
    idx: &AlphaIndex,
    (t, x): SpaceTime,
    (s, y): SpaceTime,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    if !(t < s && x > 0.0 && y > 0.0) {
        return Err(domain("branch identity needs t < s and x, y > 0"));
    }
    let ext = extended_kernel(idx, (t, x), (s, y), quad)?;
    let gauged_q = ln_q_gauged(idx, s - t, x, y).exp();
    let head = jj_laplace_integral(idx, 2.0 * (s - t), x, y, 0.0, Some(0.125), quad);
    Ok((ext + gauged_q, head))
}

/// `(∫_0^∞ e^{-ρ²u²} u J_p(au) J_p(bu) du, (2ρ²)^{-1} e^{-(a²+b²)/4ρ²} I_p(ab/2ρ²))`.
pub fn weber_integral(idx: &AlphaIndex, rho: f64, a: f64, b: f64, quad: &QuadratureSpec) -> (f64, f64) {
    let r2 = rho * rho;
    let u_max = (40.0 / r2).sqrt();
    let f = |u: f64| (-r2 * u * u).exp() * u * bessel_j(idx, a * u) * bessel_j(idx, b * u);
    let panels = ((u_max * (a + b + 1.0) / std::f64::consts::PI).ceil() as usize).clamp(1, 4000);
    let breaks: Vec<f64> = (0..=panels).map(|i| u_max * i as f64 / panels as f64).collect();
    let numeric = adaptive_panels(f, &breaks, &quad.with_max_panels(quad.max_panels.max(4 * panels))).value;
    let z = a * b / (2.0 * r2);
    // e^{-(a²+b²)/4ρ²} I_p(z) = e^{-(a−b)²/4ρ²} e^{-z} I_p(z)
    let closed = (2.0 * r2).recip() * (-(a - b).powi(2) / (4.0 * r2)).exp() * bessel_i_scaled(idx, z);
    (numeric, closed)
}

/// Residuals of the three biorthogonality/intertwining identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntertwiningResiduals {
    /// `|∫ φ_i(t,x) ψ_j(t,x) dx − δ_ij|`.
    pub delta_err: f64,
    /// `max_y |∫ φ_j(t,x) q_{s−t}(x,y) dx − φ_j(s,y)| / max(1, |φ_j(s,y)|)`.
    pub phi_q_err: f64,
    /// `max_x |∫ q_{s−t}(x,y) ψ_j(s,y) dy − ψ_j(t,x)| / max(1, |ψ_j(t,x)|)`.
    pub q_psi_err: f64,
}

pub const INTERTWINING_PROBES: [f64; 4] = [0.3, 1.0, 2.5, 5.0];

fn half_line_breaks(scale: f64, extra: f64) -> Vec<f64> {
    let upper = extra + 120.0 * scale + 40.0;
    let mut b = vec![0.0];
    let mut x = 0.25 * scale.min(1.0);
    while x < upper {
        b.push(x);
        x *= 2.0;
    }
    b.push(upper);
    b
}

pub fn intertwining_check(
    idx: &AlphaIndex,
    i: usize,
    j: usize,
    t: f64,
    s: f64,
    quad: &QuadratureSpec,
) -> Result<IntertwiningResiduals> {
    if !(0.0 < t && t < s) {
        return Err(domain(format!("need 0 < t < s, got t={t}, s={s}")));
    }
    if i == 0 || j == 0 {
        return Err(domain("indices start at 1"));
    }
    let tau = s - t;
    let delta = adaptive_panels(|x| phi(idx, i, t, x) * psi(idx, j, t, x), &half_line_breaks(t, 0.0), quad).value;
    let delta_err = (delta - if i == j { 1.0 } else { 0.0 }).abs();
    let mut phi_q_err: f64 = 0.0;
    let mut q_psi_err: f64 = 0.0;
    for &p in &INTERTWINING_PROBES {
        let lhs =
            adaptive_panels(|x| phi(idx, j, t, x) * ln_q(idx, tau, x, p).exp(), &half_line_breaks(s, p), quad).value;
        let want = phi(idx, j, s, p);
        phi_q_err = phi_q_err.max((lhs - want).abs() / want.abs().max(1.0));
        let lhs =
            adaptive_panels(|y| ln_q(idx, tau, p, y).exp() * psi(idx, j, s, y), &half_line_breaks(s, p), quad).value;
        let want = psi(idx, j, t, p);
        q_psi_err = q_psi_err.max((lhs - want).abs() / want.abs().max(1.0));
    }
    Ok(IntertwiningResiduals { delta_err, phi_q_err, q_psi_err })
}

/// LU factorization with partial pivoting, in place. Returns the pivot
/// permutation and its sign, or `None` for an exactly singular matrix.
fn lu_factor(a: &mut [f64], n: usize) -> Option<(Vec<usize>, f64)> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))?;
        if a[p * n + k] == 0.0 {
            return None;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            a[i * n + k] = f;
            for c in k + 1..n {
                a[i * n + c] -= f * a[k * n + c];
            }
        }
    }
    Some((perm, sign))
}

fn lu_solve(lu: &[f64], n: usize, perm: &[usize], b: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for k in 0..i {
            x[i] -= lu[i * n + k] * x[k];
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= lu[i * n + k] * x[k];
        }
        x[i] /= lu[i * n + i];
    }
    x
}

/// Determinant by LU; used for the small determinants of the joint densities.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    match lu_factor(&mut m, n) {
        Some((_, sign)) => sign * (0..n).map(|i| m[i * n + i]).product::<f64>(),
        None => 0.0,
    }
}

/// Gap probabilities of the equal-time hard-edge process on `(0, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapProbability {
    pub r: f64,
    /// `P(no particle in (0, r))`.
    pub e0: f64,
    /// `P(exactly one particle in (0, r))`.
    pub e1: f64,
    /// Nyström order of the reported values.
    pub order: usize,
    /// `|E0(order) − E0(order/2)|`.
    pub doubling_change: f64,
}

/// `(det(I − A), tr((I − A)^{-1} A))` for `A = √w K √w` at `order` Gauss–Legendre
/// nodes on `(0, r)`, with `K(x,y) = ∫_0^{1/8} J_α(2√(zx)) J_α(2√(zy)) dz` on
/// the same number of nodes in `z`.
fn nystrom_gap(idx: &AlphaIndex, r: f64, order: usize) -> Result<(f64, f64)> {
    let (xs, wx) = gauss_legendre_on(order, 0.0, r);
    let (zs, wz) = gauss_legendre_on(order, 0.0, 0.125);
    // C[a][m] = √(wx_a wz_m) J(2√(z_m x_a)); A = C Cᵀ
    let mut c = vec![0.0; order * order];
    for a in 0..order {
        for m in 0..order {
            c[a * order + m] = (wx[a] * wz[m]).sqrt() * bessel_j(idx, 2.0 * (zs[m] * xs[a]).sqrt());
        }
    }
    let mut kmat = vec![0.0; order * order];
    for a in 0..order {
        for b in 0..=a {
            let v: f64 = (0..order).map(|m| c[a * order + m] * c[b * order + m]).sum();
            kmat[a * order + b] = v;
            kmat[b * order + a] = v;
        }
    }
    let mut ia: Vec<f64> = kmat.iter().map(|v| -v).collect();
    for a in 0..order {
        ia[a * order + a] += 1.0;
    }
    let (perm, sign) = lu_factor(&mut ia, order).ok_or_else(|| Error::Discretization("I - K is singular".into()))?;
    let det = sign * (0..order).map(|i| ia[i * order + i]).product::<f64>();
    let mut trace = 0.0;
    let mut col = vec![0.0; order];
    for b in 0..order {
        for a in 0..order {
            col[a] = kmat[a * order + b];
        }
        trace += lu_solve(&ia, order, &perm, &col)[b];
    }
    Ok((det, trace))
}

pub const DEFAULT_NYSTROM_ORDER: usize = 64;
const MAX_NYSTROM_ORDER: usize = 1024;

/// `E0(r) = det(I − K)|_{(0,r)}` and `E1(r) = E0 · tr((I − K)^{-1} K)`,
/// doubling the Nyström order from `quad_order` until the determinant moves
/// by less than `1e-8`.
pub fn fredholm_gap(idx: &AlphaIndex, r: f64, quad_order: usize) -> Result<GapProbability> {
    if !(r > 0.0) {
        return Err(domain(format!("gap interval length must be positive, got {r}")));
    }
    if quad_order < 8 {
        return Err(domain("Nyström order must be at least 8"));
    }
    let mut order = quad_order;
    let mut det = nystrom_gap(idx, r, order)?.0;
    loop {
        let next = 2 * order;
        let (d2, tr) = nystrom_gap(idx, r, next)?;
        let change = (d2 - det).abs();
        det = d2;
        order = next;
        if change < 1e-8 {
            if !(-1e-8..=1.0 + 1e-8).contains(&det) {
                return Err(Error::Discretization(format!("determinant {det} outside [0, 1]")));
            }
            return Ok(GapProbability { r, e0: det, e1: det * tr, order, doubling_change: change });
        }
        if next >= MAX_NYSTROM_ORDER {
            return Err(Error::Discretization(format!(
                "Nyström order {next} still moves the determinant by {change:e}"
            )));
        }
    }
}

/// `K^ext((0,x);(0,x))`, the one-point intensity of the hard-edge process.
pub fn hard_edge_intensity(idx: &AlphaIndex, x: f64) -> f64 {
    let (zs, wz) = gauss_legendre_on(48, 0.0, 0.125);
    zs.iter().zip(&wz).map(|(z, w)| w * bessel_j(idx, 2.0 * (z * x).sqrt()).powi(2)).sum()
}

/// `∫_a^b K^ext((0,x);(0,x)) dx`, the expected number of points in `(a, b)`.
pub fn hard_edge_expected_count(idx: &AlphaIndex, a: f64, b: f64) -> f64 {
    let (xs, wx) = gauss_legendre_on(64, a, b);
    xs.iter().zip(&wx).map(|(x, w)| w * hard_edge_intensity(idx, *x)).sum()
}

/// Multi-time joint density of the non-colliding process started at zero,
/// in its raw form with the `C(N, α)` prefactor.
pub fn joint_density_raw(idx: &AlphaIndex, times: &[f64], configs: &[Vec<f64>]) -> Result<f64> {
    let n = validate_configs(times, configs)?;
    let alpha = idx.alpha();
    let nf = n as f64;
    let t1 = times[0];
    let mut ln_c = -(alpha * nf + nf * nf) * LN_2 - nf * nf * t1.ln();
    for j in 1..=n {
        ln_c -= idx.ln_gamma_shifted(j) + ln_gamma_unchecked(j as f64);
    }
    let mut value = ln_c.exp();
    for &x in &configs[0] {
        value *= (ln_pow_ratio(alpha, x, t1) - x / (2.0 * t1)).exp();
    }
    value *= vandermonde(&configs[0]);
    for k in 0..times.len() - 1 {
        value *= q_determinant(idx, times[k + 1] - times[k], &configs[k], &configs[k + 1]);
    }
    Ok(value * vandermonde(&configs[configs.len() - 1]))
}

/// The same density as `det[φ_i(t_1, x_j)] · Π det[q] · det[ψ_j(t_m, x_i)]`.
pub fn joint_density_determinantal(idx: &AlphaIndex, times: &[f64], configs: &[Vec<f64>]) -> Result<f64> {
    let n = validate_configs(times, configs)?;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = phi(idx, i + 1, times[0], configs[0][j]);
        }
    }
    let mut value = determinant(&a, n);
    for k in 0..times.len() - 1 {
        value *= q_determinant(idx, times[k + 1] - times[k], &configs[k], &configs[k + 1]);
    }
    let last = &configs[configs.len() - 1];
    let tm = times[times.len() - 1];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = psi(idx, j + 1, tm, last[i]);
        }
    }
    Ok(value * determinant(&a, n))
}

fn q_determinant(idx: &AlphaIndex, tau: f64, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = ln_q(idx, tau, x[i], y[j]).exp();
        }
    }
    determinant(&a, n)
}

fn vandermonde(x: &[f64]) -> f64 {
    let mut v = 1.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            v *= x[j] - x[i];
        }
    }
    v
}

fn validate_configs(times: &[f64], configs: &[Vec<f64>]) -> Result<usize> {
    if times.is_empty() || times.len() != configs.len() {
        return Err(domain("need one configuration per time"));
    }
    if !(times[0] > 0.0) || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("times must be positive and strictly increasing"));
    }
    let n = configs[0].len();
    if n == 0 {
        return Err(domain("configurations must be nonempty"));
    }
    for c in configs {
        if c.len() != n || c[0] < 0.0 || c.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("each configuration must lie in the Weyl chamber"));
        }
    }
    Ok(n)
}

/// Largest relative discrepancy between [`joint_density_raw`] and
/// [`joint_density_determinantal`] over the given samples, each a list of
/// configurations at `times`.
pub fn density2_consistency(idx: &AlphaIndex, times: &[f64], samples: &[Vec<Vec<f64>>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for configs in samples {
        let raw = joint_density_raw(idx, times, configs)?;
        let det = joint_density_determinantal(idx, times, configs)?;
        worst = worst.max((raw - det).abs() / raw.abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Kernel values on all ordered pairs of a node list.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub alpha: f64,
    pub points: Vec<SpaceTime>,
    /// Row-major `values[i * n + j] = K(points[i]; points[j])`.
    pub values: Vec<f64>,
}

impl KernelGrid {
    pub fn evaluate<F>(idx: &AlphaIndex, points: Vec<SpaceTime>, mut kernel: F) -> Result<Self>
    where
        F: FnMut(SpaceTime, SpaceTime) -> Result<f64>,
    {
        let mut values = Vec::with_capacity(points.len() * points.len());
        for &p in &points {
            for &q in &points {
                let v = kernel(p, q)?;
                if !v.is_finite() {
                    return Err(Error::Discretization(format!("kernel not finite at {p:?}, {q:?}")));
                }
                values.push(v);
            }
        }
        Ok(Self { alpha: idx.alpha(), points, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.points.len() + j]
    }

    /// CSV rows `t,x,s,y,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,s,y,value")?;
        for (i, &(t, x)) in self.points.iter().enumerate() {
            for (j, &(s, y)) in self.points.iter().enumerate() {
                writeln!(w, "{t:.16e},{x:.16e},{s:.16e},{y:.16e},{:.16e}", self.get(i, j))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive;

    fn idx(a: f64) -> AlphaIndex {
        AlphaIndex::new(a).unwrap()
    }

    fn quad() -> QuadratureSpec {
        QuadratureSpec::new(1e-12, 1e-10)
    }

    #[test]
    fn phi_psi_examples() {
        assert!((phi(&idx(0.0), 1, 1.0, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(phi(&idx(1.0), 1, 1.0, 0.0), 0.0);
        assert!(phi(&idx(0.0), 2, 1.0, 2.0).abs() < 1e-16);
        for a in [0.0, 1.3] {
            assert_eq!(psi(&idx(a), 1, 2.5, 7.0), 1.0);
        }
        assert!(psi(&idx(0.0), 2, 1.0, 2.0).abs() < 1e-15);
        assert!((psi(&idx(0.0), 2, 2.0, 0.0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn laguerre_sequence_matches_direct() {
        let ix = idx(1.7);
        for (n, v) in LaguerreSeq::new(1.7, 2.3).take(12).enumerate() {
            assert!((v - laguerre(&ix, n, 2.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_kernel_matches_definition() {
        for a in [0.0, 1.0, 2.5] {
            let ix = idx(a);
            for &((t, x), (s, y)) in &[((1.0, 0.7), (1.0, 1.9)), ((0.6, 2.0), (1.3, 0.4)), ((1.5, 0.3), (0.8, 3.0))] {
                let n = 6;
                let mut want: f64 = (1..=n).map(|j| psi(&ix, j, t, x) * phi(&ix, j, s, y)).sum();
                if t < s {
                    want -= ln_q(&ix, s - t, x, y).exp();
                }
                let got = finite_kernel(&ix, n, (t, x), (s, y), false).unwrap();
                assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "a={a}");
                let gauged = finite_kernel(&ix, n, (t, x), (s, y), true).unwrap();
                assert!((gauged - (x / y).powf(a / 2.0) * want).abs() < 1e-12 * want.abs().max(1.0));
            }
        }
        let a0 = idx(0.0);
        assert_eq!(finite_kernel(&a0, 0, (2.0, 1.0), (1.0, 1.0), false).unwrap(), 0.0);
        let v = finite_kernel(&a0, 1, (1.0, 0.4), (1.0, 1.2), false).unwrap();
        assert!((v - 0.5 * (-0.6_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn reproducing_property_at_equal_times() {
        let ix = idx(0.0);
        let k = |x: f64, y: f64| finite_kernel(&ix, 3, (1.0, x), (1.0, y), false).unwrap();
        for &(x, y) in &[(0.5, 1.0), (2.0, 3.0), (0.1, 6.0)] {
            let v = adaptive(|z| k(x, z) * k(z, y), 0.0, 200.0, &quad()).value;
            assert!((v - k(x, y)).abs() < 1e-5);
        }
    }

    #[test]
    fn scaled_kernel_at_origin_is_one_eighth() {
        let ix = idx(0.0);
        for n in [1, 25, 100] {
            let v = scaled_finite_kernel(&ix, n, (0.0, 0.0), (0.0, 0.0)).unwrap();
            assert!((v - 0.125).abs() < 1e-14);
        }
    }

    #[test]
    fn extended_kernel_examples() {
        let q = quad();
        let e = extended_kernel(&idx(0.0), (0.0, 0.0), (0.0, 0.0), &q).unwrap();
        assert!((e - 0.125).abs() < 1e-14);
        assert_eq!(extended_kernel(&idx(1.0), (0.0, 0.0), (0.0, 2.0), &q).unwrap(), 0.0);
        assert!(extended_kernel(&idx(0.0), (0.0, 1.0), (1e-9, 1.0), &q).is_err());
        for a in [0.0, 1.0] {
            let (l, r) = branch_identity(&idx(a), (0.0, 1.0), (1.0, 2.0), &q).unwrap();
            assert!((l - r).abs() < 1e-6, "{l} vs {r}");
        }
    }

    #[test]
    fn scaled_kernel_converges() {
        let ix = idx(0.0);
        let q = quad();
        let mut prev = f64::INFINITY;
        for n in [25, 50, 100] {
            let mut err: f64 = 0.0;
            for x in [0.0, 1.0, 2.0, 4.0] {
                for y in [0.0, 1.0, 2.0, 4.0] {
                    let a = scaled_finite_kernel(&ix, n, (0.0, x), (0.0, y)).unwrap();
                    let b = extended_kernel(&ix, (0.0, x), (0.0, y), &q).unwrap();
                    err = err.max((a - b).abs());
                }
            }
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 0.02);
    }

    #[test]
    fn equal_time_kernel_is_psd() {
        let ix = idx(1.0);
        let q = quad();
        let pts = [0.0, 0.3, 0.9, 1.5, 2.2, 3.0, 4.5, 6.0];
        let n = pts.len();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = extended_kernel(&ix, (0.0, pts[i]), (0.0, pts[j]), &q).unwrap();
                assert!((m[i * n + j] - extended_kernel(&ix, (0.0, pts[j]), (0.0, pts[i]), &q).unwrap()).abs() < 1e-14);
            }
        }
        // Gram structure: eigenvalues by Jacobi on the real symmetric matrix
        let h = crate::eigen::HermitianMatrix::new(n, m.iter().map(|&v| num_complex::Complex64::new(v, 0.0)).collect())
            .unwrap();
        let eig = crate::eigen::hermitian_eigenvalues(&h).unwrap();
        assert!(eig[0] >= -1e-10);
    }

    #[test]
    fn intertwining_small_indices() {
        let ix = idx(0.0);
        let r = intertwining_check(&ix, 1, 1, 1.0, 2.0, &quad()).unwrap();
        assert!(r.delta_err < 1e-6 && r.phi_q_err < 1e-6 && r.q_psi_err < 1e-6, "{r:?}");
        let r = intertwining_check(&ix, 1, 2, 1.0, 2.0, &quad()).unwrap();
        assert!(r.delta_err < 1e-6, "{r:?}");
    }

    #[test]
    fn gap_probability_alpha_zero_is_exponential() {
        // for α = 0 the gap probability of this kernel is exactly e^{-r/8}
        let ix = idx(0.0);
        for r in [0.05, 0.5, 2.0] {
            let g = fredholm_gap(&ix, r, 16).unwrap();
            assert!((g.e0 - (-r / 8.0).exp()).abs() < 1e-10, "r={r}: {}", g.e0);
            assert!(g.e0 + g.e1 <= 1.0 + 1e-6);
            assert!(g.doubling_change < 1e-8);
        }
        assert!(fredholm_gap(&ix, 0.0, 16).is_err());
        assert!(fredholm_gap(&ix, 1.0, 4).is_err());
    }

    #[test]
    fn weber_identity() {
        for &(p, rho, a, b) in &[(0.0, 1.0, 1.0, 2.0), (1.0, 0.7, 0.5, 3.0), (2.3, 1.3, 2.0, 2.5)] {
            let (num, closed) = weber_integral(&idx(p), rho, a, b, &quad());
            assert!((num - closed).abs() < 1e-8 * closed.max(1e-3), "{num} vs {closed}");
        }
    }

    #[test]
    fn joint_density_forms_agree() {
        for a in [0.0, 1.0] {
            let ix = idx(a);
            let err = density2_consistency(&ix, &[0.5, 1.0], &[vec![vec![0.5, 1.5], vec![0.7, 2.0]]]).unwrap();
            assert!(err < 1e-8, "a={a}: {err}");
            let err = density2_consistency(&ix, &[0.3, 0.9, 1.4], &[vec![vec![0.4], vec![1.1], vec![0.2]]]).unwrap();
            assert!(err < 1e-10);
        }
    }

    #[test]
    fn kernel_grid_csv() {
        let ix = idx(0.0);
        let g = KernelGrid::evaluate(&ix, vec![(0.0, 0.0), (0.0, 1.0)], |p, q| extended_kernel(&ix, p, q, &quad()))
            .unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 5);
        assert!(s.starts_with("t,x,s,y,value\n"));
    }
}
