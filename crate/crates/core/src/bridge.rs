//! Squared Bessel bridges: Karlin–McGregor densities, free bridge sampling,
//! acceptance sampling of non-intersecting ensembles with barriers, Monte
//! Carlo normalizing constants and Gibbs resampling.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::ln_q;
use crate::error::{domain, Error, Result};
use crate::kernel::determinant;
use crate::specfun::AlphaIndex;

/// A lower or upper barrier, evaluated at grid times.
#[derive(Clone)]
pub enum Barrier {
    Constant(f64),
    /// Linear interpolation through `(time, value)` knots, constant beyond.
    PiecewiseLinear(Vec<(f64, f64)>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Barrier {
    pub fn zero() -> Self {
        Barrier::Constant(0.0)
    }

    pub fn infinite() -> Self {
        Barrier::Constant(f64::INFINITY)
    }

    /// Knots must have strictly increasing times.
    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() || knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(domain("piecewise-linear barrier needs strictly increasing knot times"));
        }
        Ok(Barrier::PiecewiseLinear(knots))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Barrier::Constant(c) => *c,
            Barrier::Custom(f) => f(t),
            Barrier::PiecewiseLinear(knots) => {
                let i = knots.partition_point(|k| k.0 <= t);
                if i == 0 {
                    knots[0].1
                } else if i == knots.len() {
                    knots[i - 1].1
                } else {
                    let (t0, v0) = knots[i - 1];
                    let (t1, v1) = knots[i];
                    if t == t0 {
                        v0
                    } else {
                        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                    }
                }
            }
        }
    }
}

impl fmt::Debug for Barrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Barrier::Constant(c) => write!(f, "Constant({c})"),
            Barrier::PiecewiseLinear(k) => write!(f, "PiecewiseLinear({} knots)", k.len()),
            Barrier::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Entrance data `x`, exit data `y` on `(a, b)` with barriers `lower < upper`.
#[derive(Debug, Clone)]
pub struct BridgeBoundary {
    pub a: f64,
    pub b: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lower: Barrier,
    pub upper: Barrier,
}

impl BridgeBoundary {
    /// Checks the structural invariants: `a < b`, `k ≥ 1` and strictly
    /// increasing nonnegative `x`, `y`. Barrier compatibility is left to the
    /// sampler, which reports an acceptance failure for impossible data.
    pub fn new(a: f64, b: f64, x: Vec<f64>, y: Vec<f64>, lower: Barrier, upper: Barrier) -> Result<Self> {
        if !(a < b) {
            return Err(domain(format!("need a < b, got ({a}, {b})")));
        }
        if x.is_empty() || x.len() != y.len() {
            return Err(domain("entrance and exit data must have the same length k >= 1"));
        }
        for v in [&x, &y] {
            if v[0] < 0.0 || v.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(domain(format!("boundary data must be >= 0 and strictly increasing, got {v:?}")));
            }
        }
        Ok(Self { a, b, x, y, lower, upper })
    }

    /// No barriers: `f ≡ 0`, `g ≡ +∞`.
    pub fn free(a: f64, b: f64, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(a, b, x, y, Barrier::zero(), Barrier::infinite())
    }

    pub fn k(&self) -> usize {
        self.x.len()
    }

    /// Whether `f(t) < z_1 < … < z_k < g(t)`.
    pub fn admits(&self, t: f64, z: &[f64]) -> bool {
        ordered_within(z, self.lower.eval(t), self.upper.eval(t))
    }
}

fn ordered_within(z: &[f64], lo: f64, hi: f64) -> bool {
    let mut prev = lo;
    for &v in z {
        if !(v > prev) {
            return false;
        }
        prev = v;
    }
    prev < hi
}

/// `k` curves on a common time grid; `values[i][j]` is curve `i` at
/// `grid[j]`, with curve 0 the lowest.
#[derive(Debug, Clone, PartialEq)]
pub struct LineEnsemble {
    pub grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl LineEnsemble {
    pub fn new(grid: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        validate_grid(&grid)?;
        if values.iter().any(|row| row.len() != grid.len()) {
            return Err(domain("every curve needs one value per grid time"));
        }
        Ok(Self { grid, values })
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn curve(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// Strict ordering and nonnegativity at every grid time.
    pub fn is_non_intersecting(&self) -> bool {
        (0..self.grid.len()).all(|j| {
            let col: Vec<f64> = self.values.iter().map(|c| c[j]).collect();
            col.first().is_none_or(|v| *v >= 0.0) && col.windows(2).all(|w| w[0] < w[1])
        })
    }

    /// Index of `t` in the grid, matched to within `1e-12 · max(1, |t|)`.
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.grid.iter().position(|g| (g - t).abs() <= tol)
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|g| !g.is_finite()) {
        return Err(domain("time grid must be nonempty, finite and strictly increasing"));
    }
    Ok(())
}

/// `n_intervals + 1` equally spaced times from `a` to `b`.
pub fn uniform_grid(a: f64, b: f64, n_intervals: usize) -> Vec<f64> {
    let n = n_intervals.max(1);
    (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect()
}

/// Default sampling grid: 256 intervals.
pub fn default_grid(a: f64, b: f64) -> Vec<f64> {
    uniform_grid(a, b, 256)
}

/// Unnormalized Karlin–McGregor density of the ensemble at time `s`:
/// `det[q_{s−a}(x_i, z_j)] det[q_{b−s}(z_i, y_j)]`, times the barrier
/// indicator; zero outside the Weyl chamber.
pub fn km_density(idx: &AlphaIndex, boundary: &BridgeBoundary, s: f64, z: &[f64]) -> Result<f64> {
    if !(boundary.a < s && s < boundary.b) {
        return Err(domain(format!("time {s} outside ({}, {})", boundary.a, boundary.b)));
    }
    let k = boundary.k();
    if z.len() != k {
        return Err(domain(format!("expected {k} positions, got {}", z.len())));
    }
    if !boundary.admits(s, z) {
        return Ok(0.0);
    }
    let (t1, t2) = (s - boundary.a, boundary.b - s);
    let mut m1 = vec![0.0; k * k];
    let mut m2 = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            m1[i * k + j] = ln_q(idx, t1, boundary.x[i], z[j]).exp();
            m2[i * k + j] = ln_q(idx, t2, z[i], boundary.y[j]).exp();
        }
    }
    Ok(determinant(&m1, k) * determinant(&m2, k))
}

/// Points of the fine inverse-CDF grid.
pub const FINE_GRID: usize = 2048;
const COARSE_GRID: usize = 97;
const LOG_SUPPORT: f64 = 45.0;

/// Draws from the density `∝ q_{τ1}(v, z) q_{τ2}(z, y)` using the uniform
/// `u`, by inverse CDF on an adaptive grid in `r = √z`.
pub fn sample_bridge_step(idx: &AlphaIndex, tau1: f64, v: f64, tau2: f64, y: f64, u: f64) -> f64 {
    debug_assert!(tau1 > 0.0 && tau2 > 0.0);
    let ln_dens = |r: f64| {
        let z = r * r;
        if r <= 0.0 {
            // density in r carries the Jacobian 2r
            return f64::NEG_INFINITY;
        }
        r.ln() + ln_q(idx, tau1, v, z) + ln_q(idx, tau2, z, y)
    };
    let total = tau1 + tau2;
    let center = (tau2 * v.sqrt() + tau1 * y.sqrt()) / total;
    let sigma = (tau1 * tau2 / total).sqrt();
    let reach = 12.0 + 2.0 * (idx.alpha() + 1.0).sqrt();
    let mut lo = (center - 12.0 * sigma).max(0.0);
    let mut hi = center + reach * sigma;

    // coarse pass: locate the region where the log density is within
    // LOG_SUPPORT of its maximum, widening if the maximum sits at the edge
    let mut coarse = vec![0.0; COARSE_GRID];
    for _ in 0..8 {
        let h = (hi - lo) / (COARSE_GRID - 1) as f64;
        for (i, c) in coarse.iter_mut().enumerate() {
            *c = ln_dens(lo + h * i as f64);
        }
        let (imax, _) =
            coarse.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
        if imax == COARSE_GRID - 1 {
            hi += (hi - lo).max(sigma);
            continue;
        }
        if imax == 0 && lo > 0.0 {
            lo = (lo - (hi - lo)).max(0.0);
            continue;
        }
        let cut = coarse[imax] - LOG_SUPPORT;
        let first = coarse.iter().position(|&c| c > cut).unwrap_or(0);
        let last = coarse.iter().rposition(|&c| c > cut).unwrap_or(COARSE_GRID - 1);
        let new_lo = lo + h * first.saturating_sub(1) as f64;
        let new_hi = lo + h * (last + 1).min(COARSE_GRID - 1) as f64;
        lo = new_lo;
        hi = new_hi;
        break;
    }

    // fine pass: trapezoid CDF, exact inversion of the linear-in-cell density
    let h = (hi - lo) / (FINE_GRID - 1) as f64;
    let mut logs = vec![0.0; FINE_GRID];
    let mut max = f64::NEG_INFINITY;
    for (i, l) in logs.iter_mut().enumerate() {
        *l = ln_dens(lo + h * i as f64);
        max = max.max(*l);
    }
    let dens: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let mut cdf = vec![0.0; FINE_GRID];
    for i in 1..FINE_GRID {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
    }
    let target = u * cdf[FINE_GRID - 1];
    let cell = cdf.partition_point(|&c| c < target).clamp(1, FINE_GRID - 1) - 1;
    let (p0, p1) = (dens[cell], dens[cell + 1]);
    let rem = target - cdf[cell];
    // solve p0 d + (p1 − p0) d² / (2h) = rem for d ∈ [0, h]
    let slope = (p1 - p0) / h;
    let denom = p0 + (p0 * p0 + 2.0 * slope * rem).max(0.0).sqrt();
    let d = if denom > 0.0 { 2.0 * rem / denom } else { 0.5 * h };
    let r = lo + h * cell as f64 + d.clamp(0.0, h);
    r * r
}

/// A free squared Bessel bridge from `(a, x)` to `(b, y)`, sampled at the
/// grid times (which must lie in `[a, b]`).
pub fn sample_free_bridge<R: Rng + ?Sized>(
    idx: &AlphaIndex,
    a: f64,
    b: f64,
    x: f64,
    y: f64,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    validate_grid(grid)?;
    if !(a < b) || grid[0] < a || grid[grid.len() - 1] > b {
        return Err(domain(format!("grid must lie inside [{a}, {b}] with a < b")));
    }
    if !(x >= 0.0 && y >= 0.0) {
        return Err(domain("bridge endpoints must be >= 0"));
    }
    let mut out = Vec::with_capacity(grid.len());
    let (mut u, mut v) = (a, x);
    for &s in grid {
        let z = if s == a {
            x
        } else if s == b {
            y
        } else {
            sample_bridge_step(idx, s - u, v, b - s, y, rng.random::<f64>())
        };
        out.push(z);
        u = s;
        v = z;
    }
    Ok(out)
}

/// One attempt: all `k` curves advanced together in time, stopping at the
/// first grid time where the ordering or a barrier fails.
fn attempt_ensemble<R: Rng + ?Sized>(
    idx: &AlphaIndex,
    boundary: &BridgeBoundary,
    grid: &[f64],
    ignore_barriers: bool,
    rng: &mut R,
) -> Option<Vec<Vec<f64>>> {
    let k = boundary.k();
    let (a, b) = (boundary.a, boundary.b);
    let mut values = vec![Vec::with_capacity(grid.len()); k];
    let mut cur: Vec<f64> = boundary.x.clone();
    let mut u = a;
    let mut col = vec![0.0; k];
    for &s in grid {
        for i in 0..k {
            col[i] = if s == a {
                boundary.x[i]
            } else if s == b {
                boundary.y[i]
            } else {
                sample_bridge_step(idx, s - u, cur[i], b - s, boundary.y[i], rng.random::<f64>())
            };
        }
        let ok = if ignore_barriers { true } else { boundary.admits(s, &col) };
        if !ok {
            return None;
        }
        for i in 0..k {
            values[i].push(col[i]);
        }
        cur.copy_from_slice(&col);
        u = s;
    }
    Some(values)
}

fn check_sampling_grid(boundary: &BridgeBoundary, grid: &[f64]) -> Result<()> {
    validate_grid(grid)?;
    if grid[0] < boundary.a || grid[grid.len() - 1] > boundary.b {
        return Err(domain("sampling grid must lie inside [a, b]"));
    }
    Ok(())
}

/// Monte Carlo estimate of the probability that free bridges stay ordered
/// and within the barriers on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub accepted: u64,
    pub samples: u64,
}

impl ZEstimate {
    pub fn no_acceptance(&self) -> bool {
        self.accepted == 0
    }
}

pub fn estimate_z(
    idx: &AlphaIndex,
    boundary: &BridgeBoundary,
    grid: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<ZEstimate> {
    check_sampling_grid(boundary, grid)?;
    if n_samples == 0 {
        return Err(domain("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0u64;
    for _ in 0..n_samples {
        if attempt_ensemble(idx, boundary, grid, false, &mut rng).is_some() {
            accepted += 1;
        }
    }
    let p = accepted as f64 / n_samples as f64;
    Ok(ZEstimate { estimate: p, std_error: (p * (1.0 - p) / n_samples as f64).sqrt(), accepted, samples: n_samples })
}

/// An accepted ensemble together with the number of attempts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedSample {
    pub ensemble: LineEnsemble,
    pub attempts: u64,
}

pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

/// First free `k`-tuple of bridges that is ordered and within the barriers
/// at every grid time.
pub fn sample_nonintersecting(
    idx: &AlphaIndex,
    boundary: &BridgeBoundary,
    grid: &[f64],
    seed: u64,
    max_attempts: u64,
) -> Result<AcceptedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_nonintersecting_with(idx, boundary, grid, &mut rng, max_attempts, false)
}

fn sample_nonintersecting_with<R: Rng + ?Sized>(
    idx: &AlphaIndex,
    boundary: &BridgeBoundary,
    grid: &[f64],
    rng: &mut R,
    max_attempts: u64,
    ignore_barriers: bool,
) -> Result<AcceptedSample> {
    check_sampling_grid(boundary, grid)?;
    for attempt in 1..=max_attempts {
        if let Some(values) = attempt_ensemble(idx, boundary, grid, ignore_barriers, rng) {
            return Ok(AcceptedSample { ensemble: LineEnsemble { grid: grid.to_vec(), values }, attempts: attempt });
        }
    }
    Err(Error::AcceptanceFailure { attempts: max_attempts })
}

/// How [`resample_gibbs`] treats the neighbouring curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GibbsMode {
    #[default]
    Faithful,
    /// Drops the barriers and the ordering constraint; only useful as a
    /// negative control.
    IgnoreBarriers,
}

/// Result of a Gibbs resampling step.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub ensemble: LineEnsemble,
    pub attempts: u64,
}

/// Replaces curves `lo..=hi` on `(a, b)` by non-intersecting bridges with
/// the boundary data read from the ensemble: entrance and exit values at
/// `a`, `b`, lower barrier curve `lo − 1` (or 0) and upper barrier curve
/// `hi + 1` (or +∞). `a` and `b` must be grid times.
pub fn resample_gibbs(
    idx: &AlphaIndex,
    ensemble: &LineEnsemble,
    curves: std::ops::RangeInclusive<usize>,
    (a, b): (f64, f64),
    seed: u64,
    max_attempts: u64,
    mode: GibbsMode,
) -> Result<Resampled> {
    let (lo, hi) = (*curves.start(), *curves.end());
    if lo > hi || hi >= ensemble.k() {
        return Err(domain(format!("curve block {lo}..={hi} invalid for k = {}", ensemble.k())));
    }
    let ia = ensemble.grid_index(a).ok_or_else(|| domain(format!("resampling endpoint {a} is not a grid time")))?;
    let ib = ensemble.grid_index(b).ok_or_else(|| domain(format!("resampling endpoint {b} is not a grid time")))?;
    if ia >= ib {
        return Err(domain("need a < b"));
    }
    if ib - ia < 2 {
        return Ok(Resampled { ensemble: ensemble.clone(), attempts: 0 });
    }
    let grid = &ensemble.grid[ia..=ib];
    let knots = |c: usize| -> Vec<(f64, f64)> {
        grid.iter().copied().zip(ensemble.values[c][ia..=ib].iter().copied()).collect()
    };
    let lower = if lo == 0 { Barrier::zero() } else { Barrier::PiecewiseLinear(knots(lo - 1)) };
    let upper = if hi + 1 == ensemble.k() { Barrier::infinite() } else { Barrier::PiecewiseLinear(knots(hi + 1)) };
    let x: Vec<f64> = (lo..=hi).map(|c| ensemble.values[c][ia]).collect();
    let y: Vec<f64> = (lo..=hi).map(|c| ensemble.values[c][ib]).collect();
    let boundary = BridgeBoundary::new(grid[0], grid[grid.len() - 1], x, y, lower, upper)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ignore = mode == GibbsMode::IgnoreBarriers;
    let sample = sample_nonintersecting_with(idx, &boundary, grid, &mut rng, max_attempts, ignore)?;
    let mut out = ensemble.clone();
    for (r, c) in (lo..=hi).enumerate() {
        out.values[c][ia..=ib].copy_from_slice(&sample.ensemble.values[r]);
    }
    Ok(Resampled { ensemble: out, attempts: sample.attempts })
}
