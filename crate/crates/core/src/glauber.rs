//! Discretized Bessel bridge ensembles on `Ω_{M,ℓ}` and the Metropolis
//! (Glauber) dynamics used to couple two of them monotonically.
//!
//! Heights live in Bessel coordinates (square roots of the squared Bessel
//! values) on the lattice `{0, 1/M, …, M}`, i.e. `M² + 1` levels, at the
//! `K − 1` interior times `j/K`, `K = 2^ℓ`, of the unit interval.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bridge::{Barrier, LineEnsemble};
use crate::density::ln_p;
use crate::error::{domain, Error, Result};
use crate::quad::{adaptive_panels, QuadratureSpec};
use crate::specfun::AlphaIndex;

/// Boundary data in Bessel coordinates: `√x`, `√y` per curve and `√f`,
/// `√g` at every interior slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBoundary {
    pub ell: u32,
    pub x_root: Vec<f64>,
    pub y_root: Vec<f64>,
    pub lower_root: Vec<f64>,
    pub upper_root: Vec<f64>,
}

impl DiscreteBoundary {
    pub fn new(
        ell: u32,
        x_root: Vec<f64>,
        y_root: Vec<f64>,
        lower_root: Vec<f64>,
        upper_root: Vec<f64>,
    ) -> Result<Self> {
        if ell == 0 || ell > 20 {
            return Err(domain(format!("time resolution ell must be in 1..=20, got {ell}")));
        }
        let slots = (1usize << ell) - 1;
        if x_root.is_empty() || x_root.len() != y_root.len() {
            return Err(domain("entrance and exit data must have the same length k >= 1"));
        }
        if lower_root.len() != slots || upper_root.len() != slots {
            return Err(domain(format!("barriers need one value per interior slot ({slots})")));
        }
        if x_root.iter().chain(&y_root).chain(&lower_root).any(|v| !(*v >= 0.0)) {
            return Err(domain("boundary values must be >= 0"));
        }
        Ok(Self { ell, x_root, y_root, lower_root, upper_root })
    }

    /// From squared Bessel data `x`, `y` and barriers `f`, `g` on `[0, 1]`.
    pub fn from_squared(ell: u32, x: &[f64], y: &[f64], lower: &Barrier, upper: &Barrier) -> Result<Self> {
        let k_int = 1usize << ell.min(20);
        let times = (1..k_int).map(|j| j as f64 / k_int as f64);
        let lower_root = times.clone().map(|t| lower.eval(t).max(0.0).sqrt()).collect();
        let upper_root = times.map(|t| upper.eval(t).sqrt()).collect();
        Self::new(
            ell,
            x.iter().map(|v| v.sqrt()).collect(),
            y.iter().map(|v| v.sqrt()).collect(),
            lower_root,
            upper_root,
        )
    }

    /// Unconstrained: `f ≡ 0`, `g ≡ ∞`.
    pub fn free(ell: u32, x_root: Vec<f64>, y_root: Vec<f64>) -> Result<Self> {
        let slots = (1usize << ell.min(20)) - 1;
        Self::new(ell, x_root, y_root, vec![0.0; slots], vec![f64::INFINITY; slots])
    }

    pub fn k(&self) -> usize {
        self.x_root.len()
    }

    pub fn slots(&self) -> usize {
        self.lower_root.len()
    }

    /// Transition time between consecutive slots, `2^{-ℓ}`.
    pub fn dt(&self) -> f64 {
        (-(self.ell as f64)).exp2()
    }

    /// Pointwise `self ≥ other` in every entry.
    pub fn dominates(&self, other: &DiscreteBoundary) -> bool {
        self.ell == other.ell
            && self.k() == other.k()
            && self.x_root.iter().zip(&other.x_root).all(|(a, b)| a >= b)
            && self.y_root.iter().zip(&other.y_root).all(|(a, b)| a >= b)
            && self.lower_root.iter().zip(&other.lower_root).all(|(a, b)| a >= b)
            && self.upper_root.iter().zip(&other.upper_root).all(|(a, b)| a >= b)
    }
}

/// An element of `Ω_{M,ℓ}`: integer levels `n`, height `n/M`, stored
/// row-major as `levels[i * slots + j]` for curve `i` and slot `j + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiscreteConfig {
    pub k: usize,
    pub m: u32,
    pub ell: u32,
    pub levels: Vec<u32>,
}

impl DiscreteConfig {
    pub fn new(k: usize, m: u32, ell: u32, levels: Vec<u32>) -> Result<Self> {
        if m == 0 {
            return Err(domain("height resolution M must be >= 1"));
        }
        let slots = (1usize << ell) - 1;
        if levels.len() != k * slots {
            return Err(domain(format!("expected {} levels, got {}", k * slots, levels.len())));
        }
        if levels.iter().any(|&n| n > m * m) {
            return Err(domain(format!("levels must lie in 0..={}", m * m)));
        }
        Ok(Self { k, m, ell, levels })
    }

    pub fn slots(&self) -> usize {
        (1usize << self.ell) - 1
    }

    pub fn level(&self, i: usize, j: usize) -> u32 {
        self.levels[i * self.slots() + j]
    }

    pub fn height(&self, i: usize, j: usize) -> f64 {
        self.level(i, j) as f64 / self.m as f64
    }

    pub fn max_level(&self) -> u32 {
        self.m * self.m
    }

    /// Lowest configuration with positive weight, if one exists: at each
    /// slot the smallest admissible increasing levels.
    pub fn lowest_admissible(boundary: &DiscreteBoundary, m: u32) -> Option<Self> {
        let k = boundary.k();
        let slots = boundary.slots();
        let mf = m as f64;
        let mut levels = vec![0u32; k * slots];
        for j in 0..slots {
            let mut prev = boundary.lower_root[j];
            for i in 0..k {
                // smallest n with n/M > prev and n >= 1
                let n = ((prev * mf).floor() as i64 + 1).max(1) as u32;
                let h = n as f64 / mf;
                if n > m * m || !(h > prev) {
                    return None;
                }
                levels[i * slots + j] = n;
                prev = h;
            }
            if !(prev < boundary.upper_root[j]) {
                return None;
            }
        }
        Some(Self { k, m, ell: boundary.ell, levels })
    }

    /// Coordinatewise `self ≥ other`.
    pub fn dominates(&self, other: &DiscreteConfig) -> bool {
        self.levels.iter().zip(&other.levels).all(|(a, b)| a >= b)
    }
}

/// One Poisson-clock ring: a site, a direction and the shared uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlauberEvent {
    pub curve: usize,
    pub slot: usize,
    pub up: bool,
    pub uniform: f64,
    pub time: f64,
}

/// Cached `ln p_{2^{-ℓ}}` between lattice heights and from/to the endpoints.
#[derive(Debug, Clone)]
pub struct GlauberModel {
    pub idx: AlphaIndex,
    pub boundary: DiscreteBoundary,
    pub m: u32,
    n_levels: usize,
    table: Option<Vec<f64>>,
    from_entry: Vec<Vec<f64>>,
    to_exit: Vec<Vec<f64>>,
}

const TABLE_LIMIT: usize = 4_000_000;

impl GlauberModel {
    pub fn new(idx: &AlphaIndex, boundary: &DiscreteBoundary, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(domain("height resolution M must be >= 1"));
        }
        let n_levels = (m * m + 1) as usize;
        let dt = boundary.dt();
        let mf = m as f64;
        let h = |n: usize| n as f64 / mf;
        let table = (n_levels * n_levels <= TABLE_LIMIT).then(|| {
            let mut t = vec![0.0; n_levels * n_levels];
            for a in 0..n_levels {
                for b in 0..n_levels {
                    t[a * n_levels + b] = ln_p(idx, dt, h(a), h(b));
                }
            }
            t
        });
        let from_entry =
            boundary.x_root.iter().map(|&x| (0..n_levels).map(|n| ln_p(idx, dt, x, h(n))).collect()).collect();
        let to_exit =
            boundary.y_root.iter().map(|&y| (0..n_levels).map(|n| ln_p(idx, dt, h(n), y)).collect()).collect();
        Ok(Self { idx: idx.clone(), boundary: boundary.clone(), m, n_levels, table, from_entry, to_exit })
    }

    fn ln_p_levels(&self, a: u32, b: u32) -> f64 {
        match &self.table {
            Some(t) => t[a as usize * self.n_levels + b as usize],
            None => {
                let mf = self.m as f64;
                ln_p(&self.idx, self.boundary.dt(), a as f64 / mf, b as f64 / mf)
            }
        }
    }

    /// `ln p` of the step into slot `j` (0-based interior index) of curve
    /// `i`, given the level there and at the previous time.
    fn ln_left(&self, config: &DiscreteConfig, i: usize, j: usize, level: u32) -> f64 {
        if j == 0 {
            self.from_entry[i][level as usize]
        } else {
            self.ln_p_levels(config.level(i, j - 1), level)
        }
    }

    fn ln_right(&self, config: &DiscreteConfig, i: usize, j: usize, level: u32) -> f64 {
        if j + 1 == config.slots() {
            self.to_exit[i][level as usize]
        } else {
            self.ln_p_levels(level, config.level(i, j + 1))
        }
    }

    fn admissible_at(&self, config: &DiscreteConfig, i: usize, j: usize, level: u32) -> bool {
        let mf = self.m as f64;
        let h = level as f64 / mf;
        let below = if i == 0 { self.boundary.lower_root[j] } else { config.height(i - 1, j) };
        let above = if i + 1 == config.k { self.boundary.upper_root[j] } else { config.height(i + 1, j) };
        below < h && h < above
    }

    fn check_shape(&self, config: &DiscreteConfig) -> Result<()> {
        if config.k != self.boundary.k() || config.ell != self.boundary.ell || config.m != self.m {
            return Err(domain("configuration does not match the model's k, M, ell"));
        }
        Ok(())
    }

    /// `ln W(z)`: the sum of `ln p` along every curve, or `-∞` when an
    /// indicator fails or a transition density vanishes.
    pub fn log_weight(&self, config: &DiscreteConfig) -> Result<f64> {
        self.check_shape(config)?;
        let slots = config.slots();
        let mut total = 0.0;
        for i in 0..config.k {
            for j in 0..slots {
                let n = config.level(i, j);
                if !self.admissible_at(config, i, j, n) {
                    return Ok(f64::NEG_INFINITY);
                }
                total += self.ln_left(config, i, j, n);
            }
            total += self.ln_right(config, i, slots - 1, config.level(i, slots - 1));
        }
        Ok(total)
    }

    pub fn weight(&self, config: &DiscreteConfig) -> Result<f64> {
        Ok(self.log_weight(config)?.exp())
    }

    /// Candidate level and `W(candidate)/W(current)` for the event, from the
    /// two adjacent transition factors and the local indicator. Assumes the
    /// current configuration has positive weight.
    pub fn move_ratio(&self, config: &DiscreteConfig, event: &GlauberEvent) -> (u32, f64) {
        let (i, j) = (event.curve, event.slot);
        let cur = config.level(i, j);
        let cand = if event.up { (cur + 1).min(config.max_level()) } else { cur.saturating_sub(1) };
        if cand == cur {
            return (cur, 1.0);
        }
        if !self.admissible_at(config, i, j, cand) {
            return (cand, 0.0);
        }
        let new = self.ln_left(config, i, j, cand) + self.ln_right(config, i, j, cand);
        let old = self.ln_left(config, i, j, cur) + self.ln_right(config, i, j, cur);
        (cand, (new - old).exp())
    }
}

/// Outcome of [`propose`].
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub candidate: DiscreteConfig,
    pub ratio: f64,
    pub accepted: bool,
}

/// The candidate for `event` and whether it is accepted, i.e. whether
/// `W(candidate)/W(current) ≥ event.uniform`.
pub fn propose(model: &GlauberModel, config: &DiscreteConfig, event: &GlauberEvent) -> Result<Proposal> {
    model.check_shape(config)?;
    if event.curve >= config.k || event.slot >= config.slots() {
        return Err(domain(format!("event site ({}, {}) out of range", event.curve, event.slot)));
    }
    let (level, ratio) = model.move_ratio(config, event);
    let mut candidate = config.clone();
    let slots = config.slots();
    candidate.levels[event.curve * slots + event.slot] = level;
    Ok(Proposal { candidate, ratio, accepted: ratio >= event.uniform })
}

/// Uniformized Poisson clocks: each ring picks a site and direction
/// uniformly and carries a uniform in `(0, 1)`.
#[derive(Debug, Clone)]
pub struct EventStream {
    rng: ChaCha8Rng,
    k: usize,
    slots: usize,
    time: f64,
}

impl EventStream {
    pub fn new(seed: u64, k: usize, slots: usize) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), k, slots, time: 0.0 }
    }
}

impl Iterator for EventStream {
    type Item = GlauberEvent;
    fn next(&mut self) -> Option<GlauberEvent> {
        let rate = (2 * self.k * self.slots) as f64;
        let e: f64 = loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                break -u.ln();
            }
        };
        self.time += e / rate;
        let site = self.rng.random_range(0..self.k * self.slots);
        let up = self.rng.random::<bool>();
        let uniform = loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                break u;
            }
        };
        Some(GlauberEvent { curve: site / self.slots, slot: site % self.slots, up, uniform, time: self.time })
    }
}

/// A single Metropolis chain.
#[derive(Debug, Clone)]
pub struct GlauberChain<'a> {
    pub model: &'a GlauberModel,
    pub config: DiscreteConfig,
    pub accepted: u64,
}

impl<'a> GlauberChain<'a> {
    pub fn new(model: &'a GlauberModel, config: DiscreteConfig) -> Result<Self> {
        if model.log_weight(&config)? == f64::NEG_INFINITY {
            return Err(domain("initial configuration has zero weight"));
        }
        Ok(Self { model, config, accepted: 0 })
    }

    /// Applies one event; returns whether the state changed.
    pub fn step(&mut self, event: &GlauberEvent) -> bool {
        let (level, ratio) = self.model.move_ratio(&self.config, event);
        let slots = self.config.slots();
        let site = event.curve * slots + event.slot;
        if ratio >= event.uniform && level != self.config.levels[site] {
            self.config.levels[site] = level;
            self.accepted += 1;
            true
        } else {
            false
        }
    }
}

/// Default burn-in: `100 · |sites| · M²` events.
pub fn default_burn_in(k: usize, ell: u32, m: u32) -> u64 {
    100 * (k * ((1usize << ell) - 1)) as u64 * (m as u64 * m as u64)
}

/// A recorded epoch of a coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub event: u64,
    pub hi: Vec<u32>,
    pub lo: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub trace: Vec<TraceRow>,
    /// Events after which some coordinate of the upper chain fell strictly
    /// below the lower chain.
    pub violation_count: u64,
    pub events: u64,
    pub accepted_hi: u64,
    pub accepted_lo: u64,
    pub final_hi: DiscreteConfig,
    pub final_lo: DiscreteConfig,
}

impl CoupledRun {
    /// CSV: event index then the flattened heights of both chains.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.final_hi.levels.len();
        let m = self.final_hi.m as f64;
        write!(w, "event")?;
        for c in 0..n {
            write!(w, ",hi_{c}")?;
        }
        for c in 0..n {
            write!(w, ",lo_{c}")?;
        }
        writeln!(w)?;
        for row in &self.trace {
            write!(w, "{}", row.event)?;
            for &l in row.hi.iter().chain(&row.lo) {
                write!(w, ",{:.16e}", l as f64 / m)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Runs two chains driven by one event stream. `record_every = 0` records
/// only the initial and final states.
#[allow(clippy::too_many_arguments)]
pub fn run_coupled(
    idx: &AlphaIndex,
    boundary_hi: &DiscreteBoundary,
    boundary_lo: &DiscreteBoundary,
    init_hi: DiscreteConfig,
    init_lo: DiscreteConfig,
    n_events: u64,
    seed: u64,
    record_every: u64,
) -> Result<CoupledRun> {
    if !boundary_hi.dominates(boundary_lo) {
        return Err(domain("upper boundary must dominate the lower boundary"));
    }
    if !init_hi.dominates(&init_lo) {
        return Err(domain("initial configurations must be ordered"));
    }
    let m = init_hi.m;
    if init_lo.m != m {
        return Err(domain("both chains need the same M"));
    }
    let model_hi = GlauberModel::new(idx, boundary_hi, m)?;
    let model_lo = if boundary_hi == boundary_lo { model_hi.clone() } else { GlauberModel::new(idx, boundary_lo, m)? };
    let mut hi = GlauberChain::new(&model_hi, init_hi)?;
    let mut lo = GlauberChain::new(&model_lo, init_lo)?;
    let mut trace = vec![TraceRow { event: 0, hi: hi.config.levels.clone(), lo: lo.config.levels.clone() }];
    let mut violations = 0;
    let events = EventStream::new(seed, boundary_hi.k(), boundary_hi.slots());
    for (n, ev) in (1..=n_events).zip(events) {
        let changed_hi = hi.step(&ev);
        let changed_lo = lo.step(&ev);
        if (changed_hi || changed_lo) && !hi.config.dominates(&lo.config) {
            violations += 1;
        }
        if (record_every > 0 && n % record_every == 0) || n == n_events {
            trace.push(TraceRow { event: n, hi: hi.config.levels.clone(), lo: lo.config.levels.clone() });
        }
    }
    Ok(CoupledRun {
        trace,
        violation_count: violations,
        events: n_events,
        accepted_hi: hi.accepted,
        accepted_lo: lo.accepted,
        final_hi: hi.config,
        final_lo: lo.config,
    })
}

/// Exact invariant measure on a small `Ω_{M,ℓ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryTable {
    pub k: usize,
    pub m: u32,
    pub ell: u32,
    /// Mixed-radix enumeration of all configurations, with the
    /// corresponding probabilities.
    pub probabilities: Vec<f64>,
    pub weights: Vec<f64>,
}

pub const STATIONARY_LIMIT: usize = 1_000_000;

impl StationaryTable {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn n_levels(&self) -> usize {
        (self.m * self.m + 1) as usize
    }

    /// Index of a configuration; level of site 0 is the fastest digit.
    pub fn index_of(&self, config: &DiscreteConfig) -> usize {
        let base = self.n_levels();
        config.levels.iter().rev().fold(0, |acc, &l| acc * base + l as usize)
    }

    pub fn config_at(&self, mut index: usize) -> DiscreteConfig {
        let base = self.n_levels();
        let sites = self.k * ((1usize << self.ell) - 1);
        let mut levels = vec![0u32; sites];
        for l in levels.iter_mut() {
            *l = (index % base) as u32;
            index /= base;
        }
        DiscreteConfig { k: self.k, m: self.m, ell: self.ell, levels }
    }
}

/// Enumerates `Ω_{M,ℓ}` and normalizes the weights. Fails with a capacity
/// error beyond [`STATIONARY_LIMIT`] states.
pub fn stationary_exact(idx: &AlphaIndex, boundary: &DiscreteBoundary, m: u32) -> Result<StationaryTable> {
    let k = boundary.k();
    let sites = k * boundary.slots();
    let base = (m as f64).powi(2) + 1.0;
    let size = base.powi(sites as i32);
    if size > STATIONARY_LIMIT as f64 {
        return Err(Error::Capacity { size, limit: STATIONARY_LIMIT });
    }
    let model = GlauberModel::new(idx, boundary, m)?;
    let mut table = StationaryTable { k, m, ell: boundary.ell, probabilities: Vec::new(), weights: Vec::new() };
    let n = size as usize;
    let mut ln_w = Vec::with_capacity(n);
    for s in 0..n {
        ln_w.push(model.log_weight(&table.config_at(s))?);
    }
    let max = ln_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(domain("every configuration has zero weight"));
    }
    let weights: Vec<f64> = ln_w.iter().map(|l| l.exp()).collect();
    let scaled: Vec<f64> = ln_w.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = scaled.iter().sum();
    table.probabilities = scaled.iter().map(|w| w / z).collect();
    table.weights = weights;
    Ok(table)
}

/// Largest `|π(s) P(s→s') − π(s') P(s'→s)|` over adjacent pairs, with
/// `P(s→s') = min(1, W(s')/W(s)) / (2 · sites)`.
pub fn detailed_balance_residual(
    idx: &AlphaIndex,
    boundary: &DiscreteBoundary,
    table: &StationaryTable,
) -> Result<f64> {
    let model = GlauberModel::new(idx, boundary, table.m)?;
    let sites = table.k * ((1usize << table.ell) - 1);
    let slots = (1usize << table.ell) - 1;
    let mut worst: f64 = 0.0;
    for s in 0..table.len() {
        if table.probabilities[s] == 0.0 {
            continue;
        }
        let config = table.config_at(s);
        for site in 0..sites {
            for up in [true, false] {
                let ev = GlauberEvent { curve: site / slots, slot: site % slots, up, uniform: 0.5, time: 0.0 };
                let (level, ratio) = model.move_ratio(&config, &ev);
                if level == config.levels[site] {
                    continue;
                }
                let mut next = config.clone();
                next.levels[site] = level;
                let t = table.index_of(&next);
                let back = GlauberEvent { up: !up, ..ev };
                let back_ratio = if table.probabilities[t] > 0.0 { model.move_ratio(&next, &back).1 } else { 0.0 };
                let flow = table.probabilities[s] * ratio.min(1.0);
                let back_flow = table.probabilities[t] * back_ratio.min(1.0);
                worst = worst.max((flow - back_flow).abs() / (2.0 * sites as f64));
            }
        }
    }
    Ok(worst)
}

/// Occupation frequencies of a chain after `burn_in` events, over the
/// next `n_events`, indexed like `table`.
pub fn chain_occupation(
    idx: &AlphaIndex,
    boundary: &DiscreteBoundary,
    table: &StationaryTable,
    init: DiscreteConfig,
    burn_in: u64,
    n_events: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let model = GlauberModel::new(idx, boundary, table.m)?;
    let mut chain = GlauberChain::new(&model, init)?;
    let mut events = EventStream::new(seed, boundary.k(), boundary.slots());
    for ev in events.by_ref().take(burn_in as usize) {
        chain.step(&ev);
    }
    let mut counts = vec![0u64; table.len()];
    for ev in events.take(n_events as usize) {
        chain.step(&ev);
        counts[table.index_of(&chain.config)] += 1;
    }
    Ok(counts.iter().map(|&c| c as f64 / n_events as f64).collect())
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Exact one-slot marginal of `Q_{M,ℓ}` for a single curve (`k = 1`), by
/// forward–backward transfer matrices. Entry `n` is the probability of
/// height `n/M` at interior slot `slot` (0-based).
pub fn slot_marginal_exact(idx: &AlphaIndex, boundary: &DiscreteBoundary, m: u32, slot: usize) -> Result<Vec<f64>> {
    if boundary.k() != 1 {
        return Err(domain("the transfer-matrix marginal is implemented for a single curve"));
    }
    let slots = boundary.slots();
    if slot >= slots {
        return Err(domain(format!("slot {slot} out of range (slots = {slots})")));
    }
    let model = GlauberModel::new(idx, boundary, m)?;
    let n_levels = (m * m + 1) as usize;
    let mf = m as f64;
    let allowed = |j: usize, n: usize| {
        let h = n as f64 / mf;
        boundary.lower_root[j] < h && h < boundary.upper_root[j]
    };
    let step = |v: &[f64], j_from: usize, forward: bool| -> Vec<f64> {
        // propagate a (scaled) vector one slot, forward or backward
        let j_to = if forward { j_from + 1 } else { j_from - 1 };
        let mut out = vec![0.0; n_levels];
        for (b, o) in out.iter_mut().enumerate() {
            if !allowed(j_to, b) {
                continue;
            }
            let mut acc = 0.0;
            for (a, &va) in v.iter().enumerate() {
                if va != 0.0 {
                    let (from, to) = if forward { (a, b) } else { (b, a) };
                    acc += va * model.ln_p_levels(from as u32, to as u32).exp();
                }
            }
            *o = acc;
        }
        let max = out.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            out.iter_mut().for_each(|x| *x /= max);
        }
        out
    };
    let normalize = |v: Vec<f64>| -> Vec<f64> {
        let max = v.iter().cloned().fold(0.0, f64::max);
        v.into_iter().map(|x| if max > 0.0 { x / max } else { x }).collect()
    };
    let mut fwd =
        normalize((0..n_levels).map(|n| if allowed(0, n) { model.from_entry[0][n].exp() } else { 0.0 }).collect());
    for j in 0..slot {
        fwd = step(&fwd, j, true);
    }
    let mut bwd =
        normalize((0..n_levels).map(|n| if allowed(slots - 1, n) { model.to_exit[0][n].exp() } else { 0.0 }).collect());
    for j in (slot + 1..slots).rev() {
        bwd = step(&bwd, j, false);
    }
    let joint: Vec<f64> = fwd.iter().zip(&bwd).map(|(a, b)| a * b).collect();
    let z: f64 = joint.iter().sum();
    if !(z > 0.0) {
        return Err(domain("the discrete ensemble has zero total weight"));
    }
    Ok(joint.into_iter().map(|v| v / z).collect())
}

/// Continuum one-point density of a Bessel bridge from `x_root` at time 0 to
/// `y_root` at time 1, at time `s`: `∝ p_s(x_root, w) p_{1−s}(w, y_root)`,
/// normalized by quadrature. Returns a closure-friendly table of
/// `(normalizer, ln normalizer)`.
pub fn bridge_point_density(idx: &AlphaIndex, x_root: f64, y_root: f64, s: f64) -> Result<impl Fn(f64) -> f64 + '_> {
    if !(0.0 < s && s < 1.0) {
        return Err(domain(format!("time must lie in (0, 1), got {s}")));
    }
    let raw =
        move |w: f64| if w <= 0.0 { 0.0 } else { (ln_p(idx, s, x_root, w) + ln_p(idx, 1.0 - s, w, y_root)).exp() };
    let upper = x_root.max(y_root) + 40.0;
    let breaks: Vec<f64> = (0..=80).map(|i| upper * i as f64 / 80.0).collect();
    let z = adaptive_panels(raw, &breaks, &QuadratureSpec::new(1e-14, 1e-12)).value;
    Ok(move |w: f64| raw(w) / z)
}

/// `∫ |h − ρ|` where `h` is the histogram density of the lattice marginal
/// (mass `marginal[n]` spread over `[n/M − 1/2M, n/M + 1/2M]`).
pub fn histogram_l1<F: Fn(f64) -> f64>(marginal: &[f64], m: u32, density: F) -> f64 {
    let mf = m as f64;
    let width = 1.0 / mf;
    let spec = QuadratureSpec::new(1e-13, 1e-10);
    let mut total = 0.0;
    for (n, &p) in marginal.iter().enumerate() {
        let center = n as f64 / mf;
        let (a, b) = ((center - 0.5 * width).max(0.0), center + 0.5 * width);
        let h = p / (b - a);
        total += adaptive_panels(|w| (h - density(w)).abs(), &[a, center, b], &spec).value;
    }
    // density mass beyond the lattice
    let top = (marginal.len() as f64 - 0.5) / mf;
    total + adaptive_panels(&density, &[top, top + 50.0], &spec).value
}

/// The configuration as curves in squared Bessel coordinates: heights at
/// `j/K` with pinned endpoints, linearly interpolated in Bessel coordinates
/// with `refine` sub-steps per interval and then squared.
pub fn embed_to_curve(config: &DiscreteConfig, boundary: &DiscreteBoundary, refine: usize) -> Result<LineEnsemble> {
    if config.k != boundary.k() || config.ell != boundary.ell {
        return Err(domain("configuration does not match the boundary"));
    }
    let refine = refine.max(1);
    let big_k = 1usize << config.ell;
    let n_pts = big_k * refine + 1;
    let grid: Vec<f64> = (0..n_pts).map(|p| p as f64 / (n_pts - 1) as f64).collect();
    let mut values = Vec::with_capacity(config.k);
    for i in 0..config.k {
        let knot = |j: usize| {
            if j == 0 {
                boundary.x_root[i]
            } else if j == big_k {
                boundary.y_root[i]
            } else {
                config.height(i, j - 1)
            }
        };
        let row = (0..n_pts)
            .map(|p| {
                let (j, r) = (p / refine, p % refine);
                let v = if r == 0 {
                    knot(j)
                } else {
                    let w = r as f64 / refine as f64;
                    (1.0 - w) * knot(j) + w * knot(j + 1)
                };
                v * v
            })
            .collect();
        values.push(row);
    }
    LineEnsemble::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(a: f64) -> AlphaIndex {
        AlphaIndex::new(a).unwrap()
    }

    fn tiny() -> DiscreteBoundary {
        DiscreteBoundary::free(1, vec![1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn weight_examples() {
        let ix = idx(0.0);
        let model = GlauberModel::new(&ix, &tiny(), 2).unwrap();
        let at0 = DiscreteConfig::new(1, 2, 1, vec![0]).unwrap();
        assert_eq!(model.weight(&at0).unwrap(), 0.0);
        let at1 = DiscreteConfig::new(1, 2, 1, vec![2]).unwrap();
        let p = ln_p(&ix, 0.5, 1.0, 1.0).exp();
        assert!((model.weight(&at1).unwrap() - p * p).abs() < 1e-15);
        let barred = DiscreteBoundary::new(1, vec![1.0], vec![1.0], vec![1.2], vec![f64::INFINITY]).unwrap();
        let model = GlauberModel::new(&ix, &barred, 2).unwrap();
        assert_eq!(model.weight(&at1).unwrap(), 0.0);
    }

    #[test]
    fn propose_clamps_and_rejects() {
        let ix = idx(0.0);
        let model = GlauberModel::new(&ix, &tiny(), 2).unwrap();
        let top = DiscreteConfig::new(1, 2, 1, vec![4]).unwrap();
        let ev = GlauberEvent { curve: 0, slot: 0, up: true, uniform: 0.3, time: 0.0 };
        assert_eq!(propose(&model, &top, &ev).unwrap().candidate, top);
        let low = DiscreteConfig::new(1, 2, 1, vec![0]).unwrap();
        let down = GlauberEvent { up: false, ..ev };
        assert_eq!(propose(&model, &low, &down).unwrap().candidate, low);
        let one = DiscreteConfig::new(1, 2, 1, vec![1]).unwrap();
        let p = propose(&model, &one, &GlauberEvent { uniform: 1e-300, ..down }).unwrap();
        assert_eq!(p.ratio, 0.0);
        assert!(!p.accepted);
        assert!(propose(&model, &one, &GlauberEvent { slot: 3, ..ev }).is_err());
    }

    #[test]
    fn stationary_tables() {
        let ix = idx(0.0);
        let t = stationary_exact(&ix, &tiny(), 2).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.probabilities[0], 0.0);
        let z: f64 = t.weights.iter().sum();
        for s in 0..5 {
            assert!((t.probabilities[s] - t.weights[s] / z).abs() < 1e-15);
        }
        let two = DiscreteBoundary::free(1, vec![0.5, 1.0], vec![0.5, 1.0]).unwrap();
        let t2 = stationary_exact(&ix, &two, 2).unwrap();
        for s in 0..t2.len() {
            let c = t2.config_at(s);
            assert_eq!(t2.index_of(&c), s);
            if c.level(0, 0) >= c.level(1, 0) {
                assert_eq!(t2.probabilities[s], 0.0);
            }
        }
        let big = DiscreteBoundary::free(3, vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(stationary_exact(&ix, &big, 10), Err(Error::Capacity { .. })));
    }

    #[test]
    fn detailed_balance_holds() {
        for a in [0.0, 1.5] {
            let ix = idx(a);
            let b = DiscreteBoundary::new(
                2,
                vec![0.5, 1.2],
                vec![0.7, 1.0],
                vec![0.1, 0.0, 0.3],
                vec![2.0, 3.0, f64::INFINITY],
            )
            .unwrap();
            let t = stationary_exact(&ix, &b, 3).unwrap();
            let r = detailed_balance_residual(&ix, &b, &t).unwrap();
            assert!(r < 1e-15, "{r}");
        }
    }

    #[test]
    fn claim_ratio_inequalities_by_enumeration() {
        let ix = idx(0.0);
        let hi_b = DiscreteBoundary::free(2, vec![1.5], vec![1.5]).unwrap();
        let lo_b = DiscreteBoundary::free(2, vec![1.0], vec![1.0]).unwrap();
        let m = 4;
        let hi = GlauberModel::new(&ix, &hi_b, m).unwrap();
        let lo = GlauberModel::new(&ix, &lo_b, m).unwrap();
        let levels = 17u32;
        let mut checked = 0;
        for j in 0..3 {
            let others: Vec<usize> = (0..3).filter(|&s| s != j).collect();
            for zj in 1..levels {
                for a1 in 1..levels {
                    for a2 in 1..=a1 {
                        for b1 in 1..levels {
                            for b2 in 1..=b1 {
                                let mut c1 = vec![0; 3];
                                let mut c2 = vec![0; 3];
                                c1[j] = zj;
                                c2[j] = zj;
                                c1[others[0]] = a1;
                                c2[others[0]] = a2;
                                c1[others[1]] = b1;
                                c2[others[1]] = b2;
                                let c1 = DiscreteConfig::new(1, m, 2, c1).unwrap();
                                let c2 = DiscreteConfig::new(1, m, 2, c2).unwrap();
                                for up in [true, false] {
                                    let ev = GlauberEvent { curve: 0, slot: j, up, uniform: 0.5, time: 0.0 };
                                    let r1 = hi.move_ratio(&c1, &ev).1;
                                    let r2 = lo.move_ratio(&c2, &ev).1;
                                    if up {
                                        assert!(r1 >= r2 * (1.0 - 1e-12), "up {c1:?} {c2:?}");
                                    } else {
                                        assert!(r1 <= r2 * (1.0 + 1e-12), "down {c1:?} {c2:?}");
                                    }
                                    checked += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(checked > 100_000);
    }

    #[test]
    fn coupled_identical_chains_agree() {
        let ix = idx(0.0);
        let b = DiscreteBoundary::free(2, vec![1.0], vec![1.0]).unwrap();
        let init = DiscreteConfig::lowest_admissible(&b, 4).unwrap();
        let run = run_coupled(&ix, &b, &b, init.clone(), init, 20_000, 3, 1000).unwrap();
        assert_eq!(run.violation_count, 0);
        assert!(run.trace.iter().all(|r| r.hi == r.lo));
        let mut csv = Vec::new();
        run.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), run.trace.len() + 1);
    }

    #[test]
    fn coupled_shifted_chains_stay_ordered() {
        for a in [0.0, 2.3] {
            let ix = idx(a);
            let lo_b = DiscreteBoundary::free(2, vec![1.0], vec![1.0]).unwrap();
            let hi_b = DiscreteBoundary::free(2, vec![1.5], vec![1.5]).unwrap();
            let run = run_coupled(
                &ix,
                &hi_b,
                &lo_b,
                DiscreteConfig::lowest_admissible(&hi_b, 4).unwrap(),
                DiscreteConfig::lowest_admissible(&lo_b, 4).unwrap(),
                100_000,
                7,
                0,
            )
            .unwrap();
            assert_eq!(run.violation_count, 0);
            assert!(run.accepted_hi > 0);
        }
    }

    #[test]
    fn chain_occupation_matches_stationary() {
        let ix = idx(0.0);
        let b = tiny();
        let t = stationary_exact(&ix, &b, 2).unwrap();
        let init = DiscreteConfig::lowest_admissible(&b, 2).unwrap();
        let occ = chain_occupation(&ix, &b, &t, init, default_burn_in(1, 1, 2), 200_000, 5).unwrap();
        assert!(total_variation(&occ, &t.probabilities) < 0.02);
    }

    #[test]
    fn slot_marginal_matches_enumeration() {
        let ix = idx(0.5);
        let b =
            DiscreteBoundary::new(2, vec![0.8], vec![1.1], vec![0.2, 0.0, 0.0], vec![f64::INFINITY, 2.0, 3.0]).unwrap();
        let m = 3;
        let t = stationary_exact(&ix, &b, m).unwrap();
        for slot in 0..3 {
            let exact = slot_marginal_exact(&ix, &b, m, slot).unwrap();
            let mut enumerated = vec![0.0; 10];
            for s in 0..t.len() {
                enumerated[t.config_at(s).level(0, slot) as usize] += t.probabilities[s];
            }
            for (a, e) in exact.iter().zip(&enumerated) {
                assert!((a - e).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn bridge_density_is_normalized_and_l1_of_itself_small() {
        let ix = idx(0.0);
        let rho = bridge_point_density(&ix, 1.0, 1.0, 0.5).unwrap();
        let mass = adaptive_panels(&rho, &[0.0, 1.0, 2.0, 4.0, 40.0], &QuadratureSpec::new(1e-13, 1e-12)).value;
        assert!((mass - 1.0).abs() < 1e-10);
        // sampling the density on the lattice leaves an O(1/M) binning error
        let l1 = |m: u32| {
            let marginal: Vec<f64> = (0..=m * m).map(|n| rho(n as f64 / m as f64) / m as f64).collect();
            histogram_l1(&marginal, m, &rho)
        };
        let (e20, e40) = (l1(20), l1(40));
        assert!(e20 < 0.03 && e40 < 0.015, "{e20} {e40}");
        assert!((e20 / e40 - 2.0).abs() < 0.3);
    }

    #[test]
    fn embedding() {
        let b = DiscreteBoundary::free(1, vec![1.0], vec![1.0]).unwrap();
        let c = DiscreteConfig::new(1, 2, 1, vec![4]).unwrap();
        let e = embed_to_curve(&c, &b, 1).unwrap();
        assert_eq!(e.values[0], vec![1.0, 4.0, 1.0]);
        let flat = DiscreteConfig::new(1, 2, 1, vec![2]).unwrap();
        let e = embed_to_curve(&flat, &b, 4).unwrap();
        assert!(e.values[0].iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let e = embed_to_curve(&c, &b, 2).unwrap();
        assert_eq!(e.values[0][1], 1.5 * 1.5);
    }

    #[test]
    fn discretization_converges() {
        let ix = idx(0.0);
        let b = DiscreteBoundary::free(3, vec![1.0], vec![1.0]).unwrap();
        let rho = bridge_point_density(&ix, 1.0, 1.0, 0.5).unwrap();
        let errs: Vec<f64> =
            [10, 20, 40].iter().map(|&m| histogram_l1(&slot_marginal_exact(&ix, &b, m, 3).unwrap(), m, &rho)).collect();
        eprintln!("{errs:?}");
        assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] < 0.05, "{errs:?}");
    }
}
