//! Glauber dynamics experiments.

use super::config::ExperimentConfig;
use super::report::{Check, Report};
use crate::error::{Error, Result};
use crate::glauber::{
    bridge_point_density, chain_occupation, default_burn_in, detailed_balance_residual, histogram_l1, run_coupled,
    slot_marginal_exact, stationary_exact, total_variation, DiscreteBoundary, DiscreteConfig,
};
use crate::specfun::AlphaIndex;

/// Two ordered boundaries for a coupling run.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingInstance {
    pub alpha: f64,
    pub m: u32,
    pub hi: DiscreteBoundary,
    pub lo: DiscreteBoundary,
}

pub const COUPLING_INSTANCES: [&str; 3] = ["shift", "barrier", "multi"];

/// Built-in instances: shifted endpoints (one curve), barriers on both
/// sides (one curve), and two curves with barriers.
pub fn coupling_instance(name: &str) -> Result<CouplingInstance> {
    let inf = f64::INFINITY;
    let inst = match name {
        "shift" => CouplingInstance {
            alpha: 0.0,
            m: 4,
            hi: DiscreteBoundary::free(2, vec![1.5], vec![1.5])?,
            lo: DiscreteBoundary::free(2, vec![1.0], vec![1.0])?,
        },
        "barrier" => CouplingInstance {
            alpha: 1.0,
            m: 4,
            hi: DiscreteBoundary::new(3, vec![1.2], vec![1.6], vec![0.5; 7], vec![inf; 7])?,
            lo: DiscreteBoundary::new(3, vec![1.0], vec![1.0], vec![0.2; 7], vec![3.0; 7])?,
        },
        "multi" => CouplingInstance {
            alpha: 2.3,
            m: 4,
            hi: DiscreteBoundary::new(2, vec![0.8, 2.0], vec![1.0, 1.5], vec![0.25; 3], vec![inf; 3])?,
            lo: DiscreteBoundary::new(2, vec![0.5, 1.5], vec![0.5, 1.5], vec![0.0; 3], vec![3.0; 3])?,
        },
        other => {
            return Err(Error::Config(format!("unknown coupling instance {other:?}; known: {COUPLING_INSTANCES:?}")))
        }
    };
    Ok(inst)
}

pub fn run_glauber_couple(cfg: &ExperimentConfig) -> Result<Report> {
    let name = cfg.text_param("instance", "shift");
    let inst = coupling_instance(&name)?;
    let events: u64 = cfg.param("events", 1_000_000)?;
    let record_every: u64 = cfg.param("record_every", (events / 100).max(1))?;
    let idx = AlphaIndex::new(inst.alpha)?;
    let start = |b: &DiscreteBoundary| {
        DiscreteConfig::lowest_admissible(b, inst.m)
            .ok_or_else(|| Error::Config("instance has no admissible configuration".into()))
    };
    let run =
        run_coupled(&idx, &inst.hi, &inst.lo, start(&inst.hi)?, start(&inst.lo)?, events, cfg.seed, record_every)?;
    let sites = run.final_hi.levels.len();
    let mut columns = vec!["event".to_string()];
    columns.extend((0..sites).map(|c| format!("hi_{c}")));
    columns.extend((0..sites).map(|c| format!("lo_{c}")));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut rep = Report::new("glauber-couple", cfg.seed, &cols);
    let m = inst.m as f64;
    for row in &run.trace {
        let mut v = vec![row.event as f64];
        v.extend(row.hi.iter().chain(&row.lo).map(|&l| l as f64 / m));
        rep.push_row(v);
    }
    rep.note("events", events as f64);
    rep.note("accepted_hi", run.accepted_hi as f64);
    rep.note("accepted_lo", run.accepted_lo as f64);
    rep.check(Check::equals("violation_count", run.violation_count as f64, 0.0));
    Ok(rep)
}

pub fn run_glauber_run(cfg: &ExperimentConfig) -> Result<Report> {
    let idx = AlphaIndex::new(cfg.alpha)?;
    let ell: u32 = cfg.param("ell", 1)?;
    let x_root = cfg.list("x_root", &[1.0])?;
    let y_root = cfg.list("y_root", &[1.0])?;
    match cfg.text_param("study", "occupation").as_str() {
        "occupation" => {
            let m: u32 = cfg.param("m", 2)?;
            let boundary = DiscreteBoundary::free(ell, x_root, y_root)?;
            let k = boundary.k();
            let events: u64 = cfg.param("events", 200_000)?;
            let burn_in: u64 = cfg.param("burn_in", default_burn_in(k, ell, m))?;
            let table = stationary_exact(&idx, &boundary, m)?;
            let init = DiscreteConfig::lowest_admissible(&boundary, m)
                .ok_or_else(|| Error::Config("no admissible configuration".into()))?;
            let occ = chain_occupation(&idx, &boundary, &table, init, burn_in, events, cfg.seed)?;
            let mut rep = Report::new("glauber-run", cfg.seed, &["state", "empirical", "stationary"]);
            for (s, (e, p)) in occ.iter().zip(&table.probabilities).enumerate() {
                rep.push_row(vec![s as f64, *e, *p]);
            }
            let tv = total_variation(&occ, &table.probabilities);
            let db = detailed_balance_residual(&idx, &boundary, &table)?;
            rep.note("total_variation", tv);
            rep.note("detailed_balance_residual", db);
            rep.check(Check::below("total_variation", tv, cfg.tolerance("tv", 0.05)?));
            rep.check(Check::below("detailed_balance", db, cfg.tolerance("detailed_balance", 1e-12)?));
            Ok(rep)
        }
        "discretization" => {
            let ell: u32 = cfg.param("ell", 3)?;
            let ms = cfg.list("ms", &[10u32, 20, 40])?;
            let boundary = DiscreteBoundary::free(ell, x_root.clone(), y_root.clone())?;
            if boundary.k() != 1 {
                return Err(Error::Config("the discretization study uses a single curve".into()));
            }
            let slot: usize = cfg.param("slot", boundary.slots() / 2)?;
            let s = (slot + 1) as f64 / (1u64 << ell) as f64;
            let rho = bridge_point_density(&idx, x_root[0], y_root[0], s)?;
            let mut rep = Report::new("glauber-run", cfg.seed, &["M", "l1_distance"]);
            let mut errs = Vec::new();
            for &m in &ms {
                let marginal = slot_marginal_exact(&idx, &boundary, m, slot)?;
                let e = histogram_l1(&marginal, m, &rho);
                rep.push_row(vec![m as f64, e]);
                errs.push(e);
            }
            rep.check(Check::holds("l1_strictly_decreasing", errs.windows(2).all(|w| w[1] < w[0])));
            if let Some(&last) = errs.last() {
                rep.check(Check::below("final_l1", last, cfg.tolerance("l1", 0.05)?));
            }
            Ok(rep)
        }
        other => Err(Error::Config(format!("unknown study {other:?}; use occupation or discretization"))),
    }
}
