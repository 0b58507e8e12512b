//! Deterministic numerical checks: special functions, densities, kernels
//! and gap probabilities.

use rand::Rng;

use super::config::ExperimentConfig;
use super::report::{Check, Report};
use crate::density::{
    chapman_kolmogorov, det2_q, log_q_cross_derivative_series, q_integral_repr, q_sqbessel, TransitionQuery,
};
use crate::error::{domain, Result};
use crate::kernel::{branch_identity, extended_kernel, fredholm_gap, scaled_finite_kernel, KernelGrid, SpaceTime};
use crate::quad::{gauss_laguerre, QuadratureSpec};
use crate::rng::replica_rng;
use crate::specfun::{gamma_fn, gronwall_pair, h_alpha, h_alpha_derivatives, laguerre, AlphaIndex};

fn quad() -> QuadratureSpec {
    QuadratureSpec::new(1e-13, 1e-11)
}

fn rel_err(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        lhs.abs()
    } else {
        (lhs - rhs).abs() / rhs.abs()
    }
}

/// `max_{i,j ≤ n_max} |⟨L_i, L_j⟩ / √(h_i h_j) − δ_ij|` under `x^α e^{-x}`.
pub fn laguerre_orthogonality_residual(idx: &AlphaIndex, n_max: usize) -> Result<f64> {
    let (xs, ws) = gauss_laguerre(n_max + 2, idx.alpha());
    let norm = |n: usize| -> Result<f64> {
        // Γ(n + α + 1) / n!
        Ok(gamma_fn(n as f64 + idx.alpha() + 1.0)? / gamma_fn(n as f64 + 1.0)?)
    };
    let mut worst: f64 = 0.0;
    for i in 0..=n_max {
        for j in 0..=i {
            let ip: f64 = xs.iter().zip(&ws).map(|(x, w)| w * laguerre(idx, i, *x) * laguerre(idx, j, *x)).sum();
            let v = ip / (norm(i)? * norm(j)?).sqrt();
            worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(worst)
}

/// Largest `|z h'' + (2α+1) h' − z h| / |h|` on `z = 0.1, 0.2, …, 20`,
/// with derivatives from the series (`finite_step = None`) or by central
/// differences.
pub fn h_ode_residual(idx: &AlphaIndex, finite_step: Option<f64>) -> f64 {
    let a = idx.alpha();
    (1..=200)
        .map(|k| {
            let z = k as f64 * 0.1;
            let (h, d1, d2) = match finite_step {
                None => h_alpha_derivatives(idx, z),
                Some(s) => {
                    let (h, hp, hm) = (h_alpha(idx, z), h_alpha(idx, z + s), h_alpha(idx, z - s));
                    (h, (hp - hm) / (2.0 * s), (hp - 2.0 * h + hm) / (s * s))
                }
            };
            (z * d2 + (2.0 * a + 1.0) * d1 - z * h).abs() / h
        })
        .fold(0.0, f64::max)
}

pub fn run_specfun_check(cfg: &ExperimentConfig) -> Result<Report> {
    let alphas = cfg.list("alphas", &[0.0, 0.5, 1.0, 2.3])?;
    let points: usize = cfg.param("gronwall_points", 500)?;
    let zmax: f64 = cfg.param("gronwall_zmax", 50.0)?;
    let n_max: usize = cfg.param("laguerre_max", 8)?;
    let tol_lag = cfg.tolerance("laguerre", 1e-8)?;
    let tol_ode = cfg.tolerance("ode", 1e-8)?;
    let mut rep = Report::new(
        "specfun-check",
        cfg.seed,
        &[
            "alpha",
            "gronwall_violations",
            "gronwall_min_gap",
            "laguerre_residual",
            "ode_series",
            "ode_finite_difference",
        ],
    );
    let (mut viol, mut lag, mut ode) = (0usize, 0.0f64, 0.0f64);
    for &a in &alphas {
        let idx = AlphaIndex::new(a)?;
        let mut v = 0;
        let mut min_gap = f64::INFINITY;
        for i in 1..=points {
            let z = zmax * i as f64 / points as f64;
            let (h, g) = gronwall_pair(&idx, z)?;
            if !(h < g) {
                v += 1;
            }
            min_gap = min_gap.min((g - h) / g);
        }
        let l = laguerre_orthogonality_residual(&idx, n_max)?;
        let series = h_ode_residual(&idx, None);
        let fd = h_ode_residual(&idx, Some(1e-4));
        rep.push_row(vec![a, v as f64, min_gap, l, series, fd]);
        viol += v;
        lag = lag.max(l);
        ode = ode.max(series);
    }
    rep.check(Check::equals("gronwall_violations", viol as f64, 0.0));
    rep.check(Check::below("laguerre_orthogonality", lag, tol_lag));
    rep.check(Check::below("h_ode_residual", ode, tol_ode));
    Ok(rep)
}

pub fn run_density_check(cfg: &ExperimentConfig) -> Result<Report> {
    let alphas = cfg.list("alphas", &[0.0, 1.0])?;
    let random_points: usize = cfg.param("random_points", 20)?;
    let cross_points: usize = cfg.param("cross_points", 100)?;
    let tol_ck = cfg.tolerance("chapman_kolmogorov", 1e-6)?;
    let tol_ir = cfg.tolerance("integral_repr", 1e-6)?;
    let q = quad();
    let mut rep =
        Report::new("density-check", cfg.seed, &["case", "alpha", "s", "t", "x", "y", "lhs", "rhs", "rel_err"]);
    let grid: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let mut ck_worst: f64 = 0.0;
    for &a in &alphas {
        let idx = AlphaIndex::new(a)?;
        for (s, t) in [(0.5, 0.5), (1.0, 2.0)] {
            for &x in &grid {
                for &y in &grid {
                    let (l, r) = chapman_kolmogorov(&idx, s, t, x, y, &q)?;
                    let e = rel_err(l, r);
                    ck_worst = ck_worst.max(e);
                    rep.push_row(vec![0.0, a, s, t, x, y, l, r, e]);
                }
            }
        }
    }
    let mut rng = replica_rng(cfg.seed, 0);
    let mut ir_worst: f64 = 0.0;
    for _ in 0..random_points {
        let a = rng.random_range(0.0..3.0);
        let t = rng.random_range(0.2..3.0);
        let x = rng.random_range(0.1..5.0);
        let y = rng.random_range(0.1..5.0);
        let idx = AlphaIndex::new(a)?;
        let query = TransitionQuery::new(&idx, t, x, y)?;
        let l = q_integral_repr(&query, &q)?;
        let r = q_sqbessel(&query);
        let e = rel_err(l, r);
        ir_worst = ir_worst.max(e);
        rep.push_row(vec![1.0, a, 0.0, t, x, y, l, r, e]);
    }
    let mut tp2_viol = 0usize;
    let tp2_grid: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
    for &a in &alphas {
        let idx = AlphaIndex::new(a)?;
        for t in [0.5, 1.0, 2.0] {
            for (i1, &x1) in tp2_grid.iter().enumerate() {
                for &x2 in &tp2_grid[i1 + 1..] {
                    for (j1, &y1) in tp2_grid.iter().enumerate() {
                        for &y2 in &tp2_grid[j1 + 1..] {
                            if !(det2_q(&idx, t, (x1, x2), (y1, y2))? > 0.0) {
                                tp2_viol += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    let mut cross_min = f64::INFINITY;
    for _ in 0..cross_points {
        let a = rng.random_range(0.0..3.0);
        let t = rng.random_range(0.1..3.0);
        let x = rng.random_range(0.01..10.0);
        let y = rng.random_range(0.01..10.0);
        let idx = AlphaIndex::new(a)?;
        cross_min = cross_min.min(log_q_cross_derivative_series(&TransitionQuery::new(&idx, t, x, y)?)?);
    }
    rep.note("tp2_violations", tp2_viol as f64);
    rep.note("cross_derivative_min", cross_min);
    rep.check(Check::below("chapman_kolmogorov_rel", ck_worst, tol_ck));
    rep.check(Check::below("integral_repr_rel", ir_worst, tol_ir));
    rep.check(Check::equals("tp2_violations", tp2_viol as f64, 0.0));
    rep.check(Check::above("cross_derivative_min", cross_min, 0.0));
    Ok(rep)
}

pub fn run_kernel_eval(cfg: &ExperimentConfig) -> Result<Report> {
    let idx = AlphaIndex::new(cfg.alpha)?;
    let ts = cfg.list("ts", &[0.0])?;
    let xs = cfg.list("xs", &[0.0, 1.0, 2.0, 4.0])?;
    let kind = cfg.text_param("kernel", "extended");
    let points: Vec<SpaceTime> = ts.iter().flat_map(|&t| xs.iter().map(move |&x| (t, x))).collect();
    let q = quad();
    let grid = match kind.as_str() {
        "extended" => KernelGrid::evaluate(&idx, points, |p, r| extended_kernel(&idx, p, r, &q))?,
        "finite" => KernelGrid::evaluate(&idx, points, |p, r| scaled_finite_kernel(&idx, cfg.n, p, r))?,
        other => return Err(domain(format!("unknown kernel {other:?}; use extended or finite"))),
    };
    let mut rep = Report::new("kernel-eval", cfg.seed, &["t", "x", "s", "y", "value"]);
    for (i, &(t, x)) in grid.points.iter().enumerate() {
        for (j, &(s, y)) in grid.points.iter().enumerate() {
            rep.push_row(vec![t, x, s, y, grid.get(i, j)]);
        }
    }
    Ok(rep)
}

/// Largest `|(4N)^{-1} K̃^N − K^ext|` over equal-time pairs on `xs`.
pub fn kernel_grid_error(idx: &AlphaIndex, n: usize, xs: &[f64]) -> Result<f64> {
    let q = quad();
    let mut worst: f64 = 0.0;
    for &x in xs {
        for &y in xs {
            let f = scaled_finite_kernel(idx, n, (0.0, x), (0.0, y))?;
            let e = extended_kernel(idx, (0.0, x), (0.0, y), &q)?;
            worst = worst.max((f - e).abs());
        }
    }
    Ok(worst)
}

pub fn run_kernel_convergence(cfg: &ExperimentConfig) -> Result<Report> {
    let idx = AlphaIndex::new(cfg.alpha)?;
    let ns = cfg.list("ns", &[25usize, 50, 100])?;
    let xs = cfg.list("xs", &[0.0, 1.0, 2.0, 4.0])?;
    let tol = cfg.tolerance("kernel", 0.02)?;
    let tol_branch = cfg.tolerance("branch", 1e-6)?;
    let mut rep = Report::new("kernel-converge", cfg.seed, &["N", "max_error"]);
    if xs.is_empty() || ns.is_empty() {
        return Ok(rep);
    }
    let errs: Vec<f64> = ns.iter().map(|&n| kernel_grid_error(&idx, n, &xs)).collect::<Result<_>>()?;
    for (&n, &e) in ns.iter().zip(&errs) {
        rep.push_row(vec![n as f64, e]);
    }
    let q = quad();
    let mut branch: f64 = 0.0;
    for &x in xs.iter().filter(|x| **x > 0.0) {
        for &y in xs.iter().filter(|y| **y > 0.0) {
            for s in [0.25, 1.0] {
                let (l, r) = branch_identity(&idx, (0.0, x), (s, y), &q)?;
                branch = branch.max((l - r).abs() / r.abs().max(1.0));
            }
        }
    }
    rep.note("branch_identity_residual", branch);
    rep.check(Check::holds("error_strictly_decreasing", errs.windows(2).all(|w| w[1] < w[0])));
    rep.check(Check::below("final_error", *errs.last().expect("nonempty"), tol));
    rep.check(Check::below("branch_identity", branch, tol_branch));
    Ok(rep)
}

/// Least-squares slope of `ln(1 − E0(r))` against `ln r`.
pub fn gap_log_slope(idx: &AlphaIndex, rs: &[f64], order: usize) -> Result<f64> {
    let pts: Vec<(f64, f64)> =
        rs.iter().map(|&r| Ok((r.ln(), (1.0 - fredholm_gap(idx, r, order)?.e0).ln()))).collect::<Result<_>>()?;
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

pub fn run_gap_prob(cfg: &ExperimentConfig) -> Result<Report> {
    let idx = AlphaIndex::new(cfg.alpha)?;
    let rs = cfg.list("rs", &[0.05, 0.1, 0.2, 0.4, 0.5, 1.0, 2.0, 4.0])?;
    let order: usize = cfg.param("order", crate::kernel::DEFAULT_NYSTROM_ORDER)?;
    let mut rep = Report::new("gap-prob", cfg.seed, &["r", "E0", "E1", "order", "doubling_change"]);
    let mut change: f64 = 0.0;
    for &r in &rs {
        let g = fredholm_gap(&idx, r, order)?;
        change = change.max(g.doubling_change);
        rep.push_row(vec![r, g.e0, g.e1, g.order as f64, g.doubling_change]);
    }
    rep.check(Check::below("doubling_change", change, cfg.tolerance("doubling", 1e-8)?));
    if cfg.alpha == 0.0 {
        let r = 0.05;
        let g = fredholm_gap(&idx, r, order)?;
        let dev = ((1.0 - g.e0) / r - 0.125).abs();
        rep.note("small_r_density_deviation", dev);
        rep.check(Check::below("small_r_density", dev, cfg.tolerance("small_r", 0.01)?));
    } else {
        let fit: Vec<f64> = (0..8).map(|i| 0.05 * 8f64.powf(i as f64 / 7.0)).collect();
        let slope = gap_log_slope(&idx, &fit, order)?;
        rep.note("log_slope", slope);
        rep.check(Check::below("log_slope_deviation", (slope - (cfg.alpha + 1.0)).abs(), cfg.tolerance("slope", 0.1)?));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laguerre_residual_small() {
        for a in [0.0, 2.3] {
            assert!(laguerre_orthogonality_residual(&AlphaIndex::new(a).unwrap(), 8).unwrap() < 1e-10);
        }
    }

    #[test]
    fn kernel_convergence_on_empty_grid_is_empty() {
        let cfg = ExperimentConfig::named("kernel-converge").with("xs", "");
        let r = run_kernel_convergence(&cfg).unwrap();
        assert!(r.rows.is_empty() && r.checks.is_empty());
    }

    #[test]
    fn single_node_error_decreases() {
        let idx = AlphaIndex::new(0.0).unwrap();
        let e: Vec<f64> = [10, 20, 40].iter().map(|&n| kernel_grid_error(&idx, n, &[0.0]).unwrap()).collect();
        assert!(e[0] > e[1] && e[1] > e[2]);
    }
}
