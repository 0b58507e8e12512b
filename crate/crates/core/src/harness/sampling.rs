//! Monte Carlo experiments driven by the matrix model and the bridge sampler.

use rand::Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::{Check, Report};
use super::stats::{chi_square_test, ks_permutation_test, mean_and_se, modulus_of_continuity, proportion};
use crate::bridge::{
    estimate_z, resample_gibbs, sample_nonintersecting, uniform_grid, BridgeBoundary, GibbsMode, LineEnsemble,
};
use crate::error::{domain, Error, Result};
use crate::kernel::{fredholm_gap, hard_edge_expected_count, DEFAULT_NYSTROM_ORDER};
use crate::matrixsim::{hard_edge_scale, lue_times_for, sample_lue_path_with, EigenSolver, LuePath};
use crate::rng::{replica_rng, replica_seed};
use crate::specfun::AlphaIndex;

/// Maps replicas `0..n` in parallel; the output order is the replica order.
pub fn par_replicas<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

/// The matrix model needs an integer index.
pub fn integer_alpha(alpha: f64) -> Result<u32> {
    if alpha >= 0.0 && alpha.fract() == 0.0 && alpha <= u32::MAX as f64 {
        Ok(alpha as u32)
    } else {
        Err(Error::Config(format!("the matrix model needs an integer alpha, got {alpha}")))
    }
}

/// The `solver` key: `jacobi` (default) or `tridiagonal`.
pub fn eigen_solver(cfg: &ExperimentConfig) -> Result<EigenSolver> {
    cfg.text_param("solver", "jacobi").parse().map_err(|e: Error| Error::Config(e.to_string()))
}

fn lue_path(n: usize, alpha: u32, times: &[f64], seed: u64, replica: u64, solver: EigenSolver) -> Result<LuePath> {
    let mut rng = replica_rng(seed, replica);
    sample_lue_path_with(n, alpha, times, seed, &mut rng, solver)
}

/// Scaled hard-edge ensemble `L^N` on `grid` for one replica.
pub fn hard_edge_replica(
    n: usize,
    alpha: u32,
    grid: &[f64],
    seed: u64,
    replica: u64,
    solver: EigenSolver,
) -> Result<LineEnsemble> {
    hard_edge_scale(&lue_path(n, alpha, &lue_times_for(n, grid), seed, replica, solver)?, grid)
}

pub fn run_lue_sample(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let alpha = integer_alpha(cfg.alpha)?;
    let solver = eigen_solver(cfg)?;
    let times = cfg.list("times", &[0.5, 1.0])?;
    let n = cfg.n;
    let paths = par_replicas(cfg.samples, |r| lue_path(n, alpha, &times, cfg.seed, r, solver))?;
    let mut rep = Report::new("lue-sample", cfg.seed, &["replica", "curve", "t", "value"]);
    let mut min_eig = f64::INFINITY;
    let mut sorted = true;
    for (r, p) in paths.iter().enumerate() {
        for (j, &t) in p.times.iter().enumerate() {
            let e = &p.eigenvalues[j];
            sorted &= e.windows(2).all(|w| w[0] <= w[1]);
            min_eig = min_eig.min(e[0]);
            for (i, &v) in e.iter().enumerate() {
                rep.push_row(vec![r as f64, i as f64, t, v]);
            }
        }
    }
    let n_f = n as f64;
    let mut worst_z: f64 = 0.0;
    for (j, &t) in times.iter().enumerate() {
        let traces: Vec<f64> = paths.iter().map(|p| p.eigenvalues[j].iter().sum()).collect();
        let (mean, se) = mean_and_se(&traces)?;
        let expected = 2.0 * t * n_f * (n_f + alpha as f64);
        rep.note(&format!("trace_mean_t{t}"), mean);
        rep.note(&format!("trace_se_t{t}"), se);
        rep.note(&format!("trace_expected_t{t}"), expected);
        worst_z = worst_z.max((mean - expected).abs() / se);
    }
    rep.note("samples", cfg.samples as f64);
    rep.check(Check::below("trace_mean_in_standard_errors", worst_z, cfg.tolerance("trace_se", 3.0)?));
    rep.check(Check::holds("eigenvalues_sorted", sorted));
    rep.check(Check::above("min_eigenvalue", min_eig, -1e-10));
    Ok(rep)
}

pub fn run_sample_bridge(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let idx = AlphaIndex::new(cfg.alpha)?;
    let x = cfg.list("x", &[1.0])?;
    let y = cfg.list("y", &[1.0])?;
    let max_attempts: u64 = cfg.param("max_attempts", 100_000)?;
    let boundary = BridgeBoundary::free(cfg.a, cfg.b, x, y)?;
    let grid = cfg.grid();
    let draws = par_replicas(cfg.samples, |r| {
        sample_nonintersecting(&idx, &boundary, &grid, replica_seed(cfg.seed, r), max_attempts)
    })?;
    let mut rep = Report::new("sample-bridge", cfg.seed, &["replica", "curve", "t", "value"]);
    let mut ordered = true;
    let mut attempts = Vec::with_capacity(draws.len());
    for (r, d) in draws.iter().enumerate() {
        ordered &= d.ensemble.is_non_intersecting();
        attempts.push(d.attempts as f64);
        for (i, curve) in d.ensemble.values.iter().enumerate() {
            for (&t, &v) in d.ensemble.grid.iter().zip(curve) {
                rep.push_row(vec![r as f64, i as f64, t, v]);
            }
        }
    }
    let (m, se) = mean_and_se(&attempts)?;
    rep.note("mean_attempts", m);
    rep.note("mean_attempts_se", se);
    // grid refinement study of the acceptance probability
    let refine = cfg.list("refine", &[] as &[usize])?;
    let z_samples: u64 = cfg.param("z_samples", 2000)?;
    for (k, &intervals) in refine.iter().enumerate() {
        let g = uniform_grid(cfg.a, cfg.b, intervals);
        let z = estimate_z(&idx, &boundary, &g, z_samples, replica_seed(cfg.seed, u64::MAX - k as u64))?;
        rep.note(&format!("z_{intervals}"), z.estimate);
        rep.note(&format!("z_{intervals}_se"), z.std_error);
    }
    rep.check(Check::holds("non_intersecting", ordered));
    Ok(rep)
}

/// Sorted union of two grids, merging times closer than `1e-12`.
pub fn merge_grids(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = a.iter().chain(b).copied().collect();
    g.sort_by(f64::total_cmp);
    g.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * x.abs().max(1.0));
    g
}

/// Mixed into the seed so resampling draws are independent of the paths.
const RESAMPLE_KEY: u64 = 0x9E37_79B9_7F4A_7C15;

/// One replica of the resampling comparison.
#[derive(Debug, Clone, Copy)]
struct GibbsReplica {
    original: f64,
    resampled: f64,
    control: f64,
    attempts: u64,
}

pub fn run_gibbs_invariance(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let alpha = integer_alpha(cfg.alpha)?;
    let solver = eigen_solver(cfg)?;
    let idx = AlphaIndex::new(cfg.alpha)?;
    let curve: usize = cfg.param("curve", 1)?;
    if curve == 0 || curve > cfg.n {
        return Err(Error::Config(format!("curve must be in 1..={}", cfg.n)));
    }
    let c = curve - 1;
    let ra: f64 = cfg.param("resample_a", cfg.a)?;
    let rb: f64 = cfg.param("resample_b", cfg.b)?;
    let ca: f64 = cfg.param("control_a", ra)?;
    let cb: f64 = cfg.param("control_b", rb)?;
    let permutations: usize = cfg.param("permutations", 4999)?;
    let control: bool = cfg.param("control", true)?;
    let max_attempts: u64 = cfg.param("max_attempts", 100_000)?;
    let fine: usize = cfg.param("fine_intervals", 0)?;
    let grid = if fine > 0 { merge_grids(&cfg.grid(), &uniform_grid(ra, rb, fine)) } else { cfg.grid() };
    let probe_t = 0.5 * (ra + rb);
    let probe = (0..grid.len())
        .min_by(|&i, &j| (grid[i] - probe_t).abs().total_cmp(&(grid[j] - probe_t).abs()))
        .ok_or_else(|| domain("empty grid"))?;
    let reps = par_replicas(cfg.samples, |r| {
        let ens = hard_edge_replica(cfg.n, alpha, &grid, cfg.seed, r, solver)?;
        let mut rng = replica_rng(cfg.seed ^ RESAMPLE_KEY, r);
        let (s1, s2): (u64, u64) = (rng.random(), rng.random());
        let res = resample_gibbs(&idx, &ens, c..=c, (ra, rb), s1, max_attempts, GibbsMode::Faithful)?;
        let ctl = if control {
            resample_gibbs(&idx, &ens, c..=c, (ca, cb), s2, max_attempts, GibbsMode::IgnoreBarriers)?.ensemble.values[c]
                [probe]
        } else {
            f64::NAN
        };
        Ok(GibbsReplica {
            original: ens.values[c][probe],
            resampled: res.ensemble.values[c][probe],
            control: ctl,
            attempts: res.attempts,
        })
    })?;
    let mut rep = Report::new("gibbs-test", cfg.seed, &["replica", "original", "resampled", "control", "attempts"]);
    for (r, g) in reps.iter().enumerate() {
        rep.push_row(vec![r as f64, g.original, g.resampled, g.control, g.attempts as f64]);
    }
    let orig: Vec<f64> = reps.iter().map(|g| g.original).collect();
    let res: Vec<f64> = reps.iter().map(|g| g.resampled).collect();
    let mut test_rng = replica_rng(cfg.seed, u64::MAX);
    let ks = ks_permutation_test(&orig, &res, permutations, &mut test_rng)?;
    let attempts: Vec<f64> = reps.iter().map(|g| g.attempts as f64).collect();
    let (ma, sa) = mean_and_se(&attempts)?;
    rep.note("probe_time", grid[probe]);
    rep.note("ks_statistic", ks.statistic);
    rep.note("ks_p_value", ks.p_value);
    rep.note("mean_attempts", ma);
    rep.note("mean_attempts_se", sa);
    rep.check(Check::above("resampled_p_value", ks.p_value, cfg.tolerance("p_value", 0.01)?));
    if control {
        let ctl: Vec<f64> = reps.iter().map(|g| g.control).collect();
        let ks_c = ks_permutation_test(&orig, &ctl, permutations, &mut test_rng)?;
        rep.note("control_ks_statistic", ks_c.statistic);
        rep.note("control_p_value", ks_c.p_value);
        rep.check(Check::below("control_p_value", ks_c.p_value, cfg.tolerance("control_p_value", 0.001)?));
    }
    Ok(rep)
}

pub fn run_tightness_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let alpha = integer_alpha(cfg.alpha)?;
    let solver = eigen_solver(cfg)?;
    let ns = cfg.list("ns", &[50usize, 100])?;
    let k: usize = cfg.param("k", 2)?;
    let rho: f64 = cfg.param("rho", 2.0)?;
    let eta: f64 = cfg.param("eta", 0.1)?;
    let radii = cfg.list("radii", &[0.02, 0.05, 0.1, 0.2, 0.3, 0.5])?;
    let grid = cfg.grid();
    let mut rep = Report::new("tightness", cfg.seed, &["N", "r", "probability", "se"]);
    let mut uniform_ok = vec![true; radii.len()];
    for (ni, &n) in ns.iter().enumerate() {
        if k > n {
            return Err(Error::Config(format!("k = {k} exceeds N = {n}")));
        }
        let seed = cfg.seed.wrapping_add(ni as u64);
        let omegas = par_replicas(cfg.samples, |r| {
            let ens = hard_edge_replica(n, alpha, &grid, seed, r, solver)?;
            radii.iter().map(|&rad| modulus_of_continuity(&ens, k, rad)).collect::<Result<Vec<f64>>>()
        })?;
        let mut r0 = 0.0;
        for (i, &rad) in radii.iter().enumerate() {
            let hits = omegas.iter().filter(|w| w[i] <= rho).count();
            let (p, se) = proportion(hits, cfg.samples);
            rep.push_row(vec![n as f64, rad, p, se]);
            if p >= 1.0 - eta {
                r0 = f64::max(r0, rad);
            } else {
                uniform_ok[i] = false;
            }
        }
        rep.note(&format!("r0_N{n}"), r0);
    }
    let uniform = radii.iter().zip(&uniform_ok).filter(|(_, ok)| **ok).map(|(r, _)| *r).fold(0.0, f64::max);
    rep.note("uniform_r0", uniform);
    rep.check(Check::holds("uniform_r0_found", uniform > 0.0));
    Ok(rep)
}

pub fn run_bound_experiments(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let alpha = integer_alpha(cfg.alpha)?;
    let solver = eigen_solver(cfg)?;
    let k: usize = cfg.param("k", 2)?;
    if k == 0 || k > cfg.n || cfg.n < 2 {
        return Err(Error::Config(format!("need 1 <= k <= N and N >= 2, got k = {k}, N = {}", cfg.n)));
    }
    let sup_levels = cfg.list("sup_levels", &[10.0, 20.0, 40.0, 80.0])?;
    let inf_levels = cfg.list("inf_levels", &[0.05, 0.1, 0.25, 0.5, 1.0])?;
    let grid = cfg.grid();
    let extremes = par_replicas(cfg.samples, |r| {
        let ens = hard_edge_replica(cfg.n, alpha, &grid, cfg.seed, r, solver)?;
        let sup = ens.values[k - 1].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let inf = ens.values[1].iter().cloned().fold(f64::INFINITY, f64::min);
        Ok((sup, inf))
    })?;
    let mut rep = Report::new("bounds", cfg.seed, &["kind", "level", "probability", "se"]);
    let sup_p: Vec<f64> = sup_levels
        .iter()
        .map(|&lvl| {
            let (p, se) = proportion(extremes.iter().filter(|e| e.0 > lvl).count(), cfg.samples);
            rep.push_row(vec![0.0, lvl, p, se]);
            p
        })
        .collect();
    let inf_p: Vec<f64> = inf_levels
        .iter()
        .map(|&lvl| {
            let (p, se) = proportion(extremes.iter().filter(|e| e.1 < lvl).count(), cfg.samples);
            rep.push_row(vec![1.0, lvl, p, se]);
            p
        })
        .collect();
    let eps: f64 = cfg.param("epsilon", 0.1)?;
    let r_eps = inf_levels.iter().zip(&inf_p).filter(|(_, p)| **p < eps).map(|(l, _)| *l).fold(0.0, f64::max);
    rep.note("inf_level_below_epsilon", r_eps);
    let mut sorted_sup: Vec<(f64, f64)> = sup_levels.iter().cloned().zip(sup_p).collect();
    sorted_sup.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut sorted_inf: Vec<(f64, f64)> = inf_levels.iter().cloned().zip(inf_p).collect();
    sorted_inf.sort_by(|a, b| a.0.total_cmp(&b.0));
    rep.check(Check::holds("sup_tail_nonincreasing", sorted_sup.windows(2).all(|w| w[1].1 <= w[0].1)));
    rep.check(Check::holds("inf_tail_nondecreasing", sorted_inf.windows(2).all(|w| w[1].1 >= w[0].1)));
    rep.check(Check::holds("inf_tail_below_epsilon", r_eps > 0.0));
    Ok(rep)
}

pub fn run_onepoint_convergence(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let alpha = integer_alpha(cfg.alpha)?;
    let solver = eigen_solver(cfg)?;
    let idx = AlphaIndex::new(cfg.alpha)?;
    let rs = cfg.list("rs", &[0.5, 1.0, 2.0])?;
    let bins: usize = cfg.param("bins", 10)?;
    let xmax: f64 = cfg.param("xmax", 8.0)?;
    if bins < 2 || !(xmax > 0.0) {
        return Err(Error::Config("need bins >= 2 and xmax > 0".into()));
    }
    let n = cfg.n;
    let scale = 4.0 * n as f64;
    let samples = par_replicas(cfg.samples, |r| {
        let p = lue_path(n, alpha, &[1.0], cfg.seed, r, solver)?;
        Ok(p.eigenvalues[0].iter().map(|v| scale * v).take_while(|v| *v < xmax).collect::<Vec<f64>>())
    })?;
    let mut rep = Report::new("onepoint", cfg.seed, &["kind", "lo", "hi", "empirical", "se", "predicted"]);
    let mut worst_z: f64 = 0.0;
    for &r in &rs {
        let hits = samples.iter().filter(|s| s.first().is_some_and(|v| *v < r)).count();
        let (p, se) = proportion(hits, cfg.samples);
        let predicted = 1.0 - fredholm_gap(&idx, r, DEFAULT_NYSTROM_ORDER)?.e0;
        rep.push_row(vec![0.0, 0.0, r, p, se, predicted]);
        // a zero standard error only arises when the proportion is 0 or 1
        let z = (p - predicted).abs() / se.max(1.0 / cfg.samples as f64);
        worst_z = worst_z.max(z);
    }
    let width = xmax / bins as f64;
    let mut observed = vec![0.0; bins];
    for s in &samples {
        for &v in s {
            observed[((v / width) as usize).min(bins - 1)] += 1.0;
        }
    }
    let expected: Vec<f64> = (0..bins)
        .map(|b| cfg.samples as f64 * hard_edge_expected_count(&idx, b as f64 * width, (b + 1) as f64 * width))
        .collect();
    for b in 0..bins {
        rep.push_row(vec![1.0, b as f64 * width, (b + 1) as f64 * width, observed[b], expected[b].sqrt(), expected[b]]);
    }
    let chi = chi_square_test(&observed, &expected)?;
    rep.note("smallest_cdf_max_z", worst_z);
    rep.note("chi_square", chi.statistic);
    rep.note("chi_square_p_value", chi.p_value);
    rep.check(Check::below("smallest_cdf_standard_errors", worst_z, cfg.tolerance("cdf_se", 3.0)?));
    rep.check(Check::above("intensity_chi_square_p_value", chi.p_value, cfg.tolerance("chi_p", 0.01)?));
    Ok(rep)
}
