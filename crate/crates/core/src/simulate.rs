//! Event-driven simulation of the exchange dynamics and a Monte Carlo
//! spectral-gap estimator.
//!
//! Bond rates live in a Fenwick tree, so picking a bond and refreshing the
//! bonds touched by an event both cost `O(log B)`. The tree is rebuilt from
//! scratch every `B` events to stop the running sums from drifting.

use std::io::Write;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::GapEstimateVar;
use crate::measures::{sample_configuration, EnergyConfiguration, SimplexLaw};
use crate::models::{apply_in_place, ExchangeKernel, PairUpdate};
use crate::special::beta_cdf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    NearestNeighbor,
    LongRange,
}

impl TopologyKind {
    pub fn id(self) -> &'static str {
        match self {
            TopologyKind::NearestNeighbor => "nn",
            TopologyKind::LongRange => "lr",
        }
    }

    pub fn from_id(s: &str) -> Result<Self> {
        match s {
            "nn" | "nearest" | "nearest-neighbor" => Ok(TopologyKind::NearestNeighbor),
            "lr" | "long-range" => Ok(TopologyKind::LongRange),
            _ => Err(Error::InvalidParameter(format!("unknown topology {s:?}"))),
        }
    }
}

/// Bond structure: the chain `(i, i+1)` with unit weight, or all pairs with
/// weight `1/N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub kind: TopologyKind,
    pub sites: usize,
}

impl Topology {
    pub fn new(kind: TopologyKind, sites: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidParameter(format!("need N >= 2 sites, got {sites}")));
        }
        Ok(Topology { kind, sites })
    }

    pub fn nearest(sites: usize) -> Result<Self> {
        Self::new(TopologyKind::NearestNeighbor, sites)
    }

    pub fn long_range(sites: usize) -> Result<Self> {
        Self::new(TopologyKind::LongRange, sites)
    }

    /// 0-based bonds `(i, j)` with `i < j`.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.sites;
        match self.kind {
            TopologyKind::NearestNeighbor => (0..n - 1).map(|i| (i, i + 1)).collect(),
            TopologyKind::LongRange => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
        }
    }

    pub fn bond_weight(&self) -> f64 {
        match self.kind {
            TopologyKind::NearestNeighbor => 1.0,
            TopologyKind::LongRange => 1.0 / self.sites as f64,
        }
    }
}

struct Fenwick {
    tree: Vec<f64>,
    vals: Vec<f64>,
}

impl Fenwick {
    fn new(vals: Vec<f64>) -> Self {
        let mut f = Fenwick { tree: vec![0.0; vals.len() + 1], vals };
        f.rebuild();
        f
    }

    fn rebuild(&mut self) {
        let n = self.vals.len();
        self.tree.iter_mut().for_each(|t| *t = 0.0);
        for i in 0..n {
            let k = i + 1;
            self.tree[k] += self.vals[i];
            let parent = k + (k & k.wrapping_neg());
            if parent <= n {
                self.tree[parent] += self.tree[k];
            }
        }
    }

    fn set(&mut self, i: usize, v: f64) {
        let d = v - self.vals[i];
        self.vals[i] = v;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += d;
            k += k & k.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut k = self.vals.len();
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k &= k - 1;
        }
        s
    }

    /// Index `i` with prefix sum just above `u`.
    fn find(&self, mut u: f64) -> usize {
        let n = self.vals.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                u -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        // Guard against rounding past the last positive rate.
        let mut i = pos.min(n - 1);
        while self.vals[i] <= 0.0 && i > 0 {
            i -= 1;
        }
        i
    }
}

/// Gillespie sampler for one replica.
pub struct Simulator<R> {
    kernel: ExchangeKernel,
    weight: f64,
    bonds: Vec<(usize, usize)>,
    touching: Vec<Vec<usize>>,
    rates: Fenwick,
    pub x: Vec<f64>,
    pub time: f64,
    pub events: u64,
    rng: R,
}

impl<R: Rng> Simulator<R> {
    pub fn new(kernel: ExchangeKernel, topo: Topology, x: Vec<f64>, rng: R) -> Self {
        let bonds = topo.bonds();
        let mut touching = vec![Vec::new(); topo.sites];
        for (b, &(i, j)) in bonds.iter().enumerate() {
            touching[i].push(b);
            touching[j].push(b);
        }
        let weight = topo.bond_weight();
        let vals = bonds.iter().map(|&(i, j)| weight * kernel.rate(x[i], x[j])).collect();
        Simulator { kernel, weight, bonds, touching, rates: Fenwick::new(vals), x, time: 0.0, events: 0, rng }
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.total()
    }

    /// Waiting time to the next event, or `None` if every rate is zero.
    pub fn next_wait(&mut self) -> Option<f64> {
        let total = self.rates.total();
        if !(total > 0.0) {
            return None;
        }
        let u: f64 = self.rng.random();
        Some(-(1.0 - u).ln() / total)
    }

    /// Applies one exchange (time is not advanced).
    pub fn fire(&mut self) -> PairUpdate {
        let total = self.rates.total();
        let b = self.rates.find(self.rng.random::<f64>() * total);
        let (i, j) = self.bonds[b];
        let alpha = self.kernel.sample_alpha(self.x[i], self.x[j], &mut self.rng);
        let u = PairUpdate { i, j, alpha };
        apply_in_place(&mut self.x, u);
        self.events += 1;
        for &site in &[i, j] {
            for k in 0..self.touching[site].len() {
                let bb = self.touching[site][k];
                let (p, q) = self.bonds[bb];
                self.rates.set(bb, self.weight * self.kernel.rate(self.x[p], self.x[q]));
            }
        }
        if self.events % self.bonds.len().max(64) as u64 == 0 {
            self.rates.rebuild();
        }
        u
    }

    /// One event: returns its time and update, or `None` when stuck.
    pub fn step(&mut self) -> Option<(f64, PairUpdate)> {
        let dt = self.next_wait()?;
        self.time += dt;
        Some((self.time, self.fire()))
    }

    /// Advances to the next event while calling `record(t_k, x)` for every
    /// grid time `t_k = k·stride` passed, with the state in force at `t_k`.
    /// Returns `false` when stuck.
    pub fn step_recording(&mut self, stride: f64, next_grid: &mut f64, mut record: impl FnMut(f64, &[f64])) -> bool {
        let Some(dt) = self.next_wait() else {
            return false;
        };
        let t_next = self.time + dt;
        while *next_grid < t_next {
            record(*next_grid, &self.x);
            *next_grid += stride;
        }
        self.time = t_next;
        self.fire();
        true
    }
}

/// Recorded run: every event plus snapshots on a fixed time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: EnergyConfiguration,
    pub times: Vec<f64>,
    pub events: Vec<PairUpdate>,
    pub stride: f64,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    /// Set when the run stopped because every rate vanished.
    pub stuck: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> Vec<f64> {
        let mut x = self.initial.x.clone();
        for &u in &self.events {
            apply_in_place(&mut x, u);
        }
        x
    }

    /// Snapshot CSV: `time, x_1, ..., x_N`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.initial.sites();
        let mut header = vec!["time".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        out.write_record(&header)?;
        for (t, x) in self.snapshot_times.iter().zip(&self.snapshots) {
            let mut row = vec![crate::report::fmt_f64(*t)];
            row.extend(x.iter().map(|v| crate::report::fmt_f64(*v)));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Simulates from a draw of `law` up to time `t_max`, recording snapshots
/// every `stride`.
pub fn run<R: Rng>(
    kernel: &ExchangeKernel,
    topo: Topology,
    law: &SimplexLaw,
    t_max: f64,
    stride: f64,
    mut rng: R,
) -> Result<Trajectory> {
    if !(t_max > 0.0) || !(stride > 0.0) {
        return Err(Error::InvalidParameter("t_max and stride must be positive".into()));
    }
    if law.sites != topo.sites {
        return Err(Error::InvalidParameter("law and topology disagree on N".into()));
    }
    let initial = sample_configuration(law, &mut rng);
    let mut sim = Simulator::new(*kernel, topo, initial.x.clone(), rng);
    let mut tr = Trajectory {
        initial,
        times: Vec::new(),
        events: Vec::new(),
        stride,
        snapshot_times: Vec::new(),
        snapshots: Vec::new(),
        stuck: false,
    };
    let mut next_grid = 0.0;
    loop {
        let Some(dt) = sim.next_wait() else {
            tr.stuck = true;
            break;
        };
        let t_next = sim.time + dt;
        while next_grid <= t_max && next_grid < t_next {
            tr.snapshot_times.push(next_grid);
            tr.snapshots.push(sim.x.clone());
            next_grid += stride;
        }
        if t_next > t_max {
            break;
        }
        sim.time = t_next;
        let u = sim.fire();
        tr.times.push(t_next);
        tr.events.push(u);
    }
    Ok(tr)
}

/// Observable for the autocorrelation estimator, centered by its exact mean.
#[derive(Clone, Debug)]
pub enum Observable {
    /// `x_1 - E`.
    FirstCoordinate,
    /// `x_1² - E[x_1²]`.
    SecondMoment,
    /// Minimizing eigenvector of a Galerkin solve on the same problem.
    Galerkin(Box<GapEstimateVar>),
}

impl Observable {
    pub fn id(&self) -> &'static str {
        match self {
            Observable::FirstCoordinate => "x1",
            Observable::SecondMoment => "x1^2",
            Observable::Galerkin(_) => "galerkin",
        }
    }

    fn eval(&self, x: &[f64], law: &SimplexLaw) -> f64 {
        let e = law.mean_energy;
        match self {
            Observable::FirstCoordinate => x[0] - e,
            Observable::SecondMoment => {
                let (g, n) = (law.gamma.get(), law.sites as f64);
                let total = law.total_energy();
                let m2 = total * total * g * (g + 1.0) / (n * g * (n * g + 1.0));
                x[0] * x[0] - m2
            }
            Observable::Galerkin(v) => v.observable(x, law.total_energy()),
        }
    }
}

/// Budget of the Monte Carlo estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McBudget {
    /// Events summed over all replicas.
    pub events: u64,
    pub replicas: usize,
    pub batches_per_replica: usize,
    /// Fraction of each replica discarded as burn-in.
    pub burn_in: f64,
    /// Autocorrelation fit window, as bounds on the normalized ACF.
    pub window: (f64, f64),
    /// Lags per unit decay scale; the sampling stride is `1/(lags·λ_ref)`.
    pub lags_per_scale: f64,
}

impl Default for McBudget {
    fn default() -> Self {
        McBudget {
            events: 10_000_000,
            replicas: 8,
            batches_per_replica: 4,
            burn_in: 0.1,
            window: (0.05, 0.8),
            lags_per_scale: 10.0,
        }
    }
}

impl McBudget {
    /// Longest lag tracked: eight decay scales of the rate hint.
    pub fn max_lag(&self) -> usize {
        (8.0 * self.lags_per_scale).ceil() as usize
    }
}

/// Autocorrelation-based gap estimate. Not a bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEstimateMC {
    pub value: f64,
    pub stderr: f64,
    pub observable: String,
    /// Fitted lag window in time units.
    pub window: (f64, f64),
    pub r_squared: f64,
    /// Set when the fit failed (`R² < 0.95` or too few lags in the window).
    pub flagged: bool,
    pub events: u64,
    pub samples: u64,
    pub stride: f64,
    pub seed: u64,
    pub batches: usize,
}

#[derive(Clone)]
struct LagSums {
    c: Vec<f64>,
    n: Vec<u64>,
}

impl LagSums {
    fn new(max_lag: usize) -> Self {
        LagSums { c: vec![0.0; max_lag + 1], n: vec![0; max_lag + 1] }
    }

    fn merge(&mut self, o: &LagSums) {
        for k in 0..self.c.len() {
            self.c[k] += o.c[k];
            self.n[k] += o.n[k];
        }
    }

    fn rho(&self) -> Vec<f64> {
        let c0 = self.c[0] / self.n[0].max(1) as f64;
        (0..self.c.len()).map(|k| if self.n[k] > 0 { self.c[k] / self.n[k] as f64 / c0 } else { f64::NAN }).collect()
    }
}

/// Replica stream seeded from the master seed.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(replica);
    r
}

fn run_replica(
    kernel: &ExchangeKernel,
    topo: Topology,
    law: &SimplexLaw,
    obs: &Observable,
    events: u64,
    stride: f64,
    budget: &McBudget,
    seed: u64,
    replica: u64,
) -> (Vec<LagSums>, u64) {
    let mut rng = replica_rng(seed, replica);
    let x0 = sample_configuration(law, &mut rng).x;
    let mut sim = Simulator::new(*kernel, topo, x0, rng);
    let burn = (budget.burn_in * events as f64) as u64;
    let nb = budget.batches_per_replica.max(1);
    let max_lag = budget.max_lag();
    let mut sums = vec![LagSums::new(max_lag); nb];
    let mut ring = vec![0.0; max_lag + 1];
    let mut filled = 0usize;
    let mut head = 0usize;
    let mut samples = 0u64;
    let mut next_grid = 0.0;
    while sim.events < events {
        let counting = sim.events >= burn;
        let batch = (((sim.events - burn.min(sim.events)) as f64 / (events - burn).max(1) as f64) * nb as f64)
            .min(nb as f64 - 1.0) as usize;
        let s = &mut sums[batch];
        let ok = sim.step_recording(stride, &mut next_grid, |_, x| {
            if !counting {
                return;
            }
            let v = obs.eval(x, law);
            head = (head + 1) % (max_lag + 1);
            ring[head] = v;
            filled = (filled + 1).min(max_lag + 1);
            samples += 1;
            // Pair the new sample with each of the previous `filled - 1`.
            for k in 0..filled {
                let idx = (head + max_lag + 1 - k) % (max_lag + 1);
                s.c[k] += v * ring[idx];
                s.n[k] += 1;
            }
        });
        if !ok {
            break;
        }
    }
    (sums, samples)
}

struct Fit {
    rate: f64,
    r2: f64,
    ok: bool,
}

fn window_lags(rho: &[f64], window: (f64, f64)) -> Option<(usize, usize)> {
    let start = (1..rho.len()).find(|&k| rho[k] <= window.1)?;
    let mut end = start;
    while end + 1 < rho.len() && rho[end + 1] >= window.0 && rho[end + 1].is_finite() {
        end += 1;
    }
    if rho[start] < window.0 {
        return None;
    }
    Some((start, end))
}

fn fit_lags(rho: &[f64], lags: (usize, usize), stride: f64) -> Fit {
    let pts: Vec<(f64, f64)> =
        (lags.0..=lags.1).filter(|&k| rho[k] > 0.0).map(|k| (k as f64 * stride, rho[k].ln())).collect();
    if pts.len() < 3 {
        return Fit { rate: f64::NAN, r2: 0.0, ok: false };
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    Fit { rate: -slope, r2, ok: true }
}

/// Rough decay rate of `obs` from a short run: the inverse time for the
/// autocorrelation to fall below `1/e`.
fn pilot_rate(kernel: &ExchangeKernel, topo: Topology, law: &SimplexLaw, obs: &Observable, seed: u64) -> f64 {
    let mut rng = replica_rng(seed, u64::MAX);
    let x0 = sample_configuration(law, &mut rng).x;
    let mut sim = Simulator::new(*kernel, topo, x0, rng);
    let stride = 1.0 / sim.total_rate().max(1e-300);
    let mut xs = Vec::new();
    let mut next = 0.0;
    while sim.events < 200_000 && xs.len() < 400_000 {
        if !sim.step_recording(stride, &mut next, |_, x| xs.push(obs.eval(x, law))) {
            break;
        }
    }
    let c0: f64 = xs.iter().map(|v| v * v).sum::<f64>() / xs.len() as f64;
    for k in 1..xs.len() / 10 {
        let ck: f64 = xs.iter().zip(&xs[k..]).map(|(a, b)| a * b).sum::<f64>() / (xs.len() - k) as f64;
        if ck / c0 < (-1.0f64).exp() {
            return 1.0 / (k as f64 * stride);
        }
    }
    1.0 / (xs.len() as f64 * stride)
}

/// Decay rate of the observable's autocorrelation, fitted on the declared
/// window, with batch-means standard error over independent replicas.
///
/// `rate_hint` sets the sampling stride; without one a short pilot run
/// supplies it. For [`Observable::Galerkin`] the Galerkin value is used.
pub fn estimate_gap_autocorr(
    kernel: &ExchangeKernel,
    topo: Topology,
    law: &SimplexLaw,
    obs: &Observable,
    budget: &McBudget,
    rate_hint: Option<f64>,
    seed: u64,
) -> Result<GapEstimateMC> {
    if law.sites != topo.sites {
        return Err(Error::InvalidParameter("law and topology disagree on N".into()));
    }
    if budget.replicas == 0 || budget.events == 0 {
        return Err(Error::InvalidParameter("empty Monte Carlo budget".into()));
    }
    let hint = match (rate_hint, obs) {
        (Some(r), _) => r,
        (None, Observable::Galerkin(v)) => v.value,
        (None, _) => pilot_rate(kernel, topo, law, obs, seed),
    };
    if !(hint > 0.0) {
        return Err(Error::InvalidParameter(format!("rate hint must be positive, got {hint}")));
    }
    let stride = 1.0 / (budget.lags_per_scale * hint);
    let per = budget.events / budget.replicas as u64;
    let parts: Vec<(Vec<LagSums>, u64)> = (0..budget.replicas as u64)
        .into_par_iter()
        .map(|r| run_replica(kernel, topo, law, obs, per, stride, budget, seed, r))
        .collect();
    let mut pooled = LagSums::new(budget.max_lag());
    let mut batches = Vec::new();
    let mut samples = 0;
    for (b, s) in &parts {
        for x in b {
            pooled.merge(x);
            batches.push(x.clone());
        }
        samples += s;
    }
    let rho = pooled.rho();
    let flagged_result = |r2: f64, window: (f64, f64)| GapEstimateMC {
        value: f64::NAN,
        stderr: f64::NAN,
        observable: obs.id().into(),
        window,
        r_squared: r2,
        flagged: true,
        events: per * budget.replicas as u64,
        samples,
        stride,
        seed,
        batches: batches.len(),
    };
    let Some(lags) = window_lags(&rho, budget.window) else {
        return Ok(flagged_result(0.0, (f64::NAN, f64::NAN)));
    };
    let window = (lags.0 as f64 * stride, lags.1 as f64 * stride);
    let fit = fit_lags(&rho, lags, stride);
    if !fit.ok {
        return Ok(flagged_result(fit.r2, window));
    }
    let rates: Vec<f64> =
        batches.iter().map(|b| fit_lags(&b.rho(), lags, stride)).filter(|f| f.ok).map(|f| f.rate).collect();
    let k = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / k;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let stderr = (var / k).sqrt();
    Ok(GapEstimateMC {
        value: fit.rate,
        stderr,
        observable: obs.id().into(),
        window,
        r_squared: fit.r2,
        flagged: fit.r2 < 0.95 || !(stderr > 0.0) || !(fit.rate > 0.0),
        events: per * budget.replicas as u64,
        samples,
        stride,
        seed,
        batches: batches.len(),
    })
}

/// Kolmogorov–Smirnov comparison of the site-1 marginal with
/// `N·E · Beta(γ, (N-1)γ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub statistic: f64,
    /// 1% critical value `1.628/√n`.
    pub critical: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Samples site 1 on a sparse time grid of one long trajectory so that
/// successive samples are nearly independent, then runs the KS test.
pub fn equilibrium_check(
    kernel: &ExchangeKernel,
    topo: Topology,
    law: &SimplexLaw,
    events: u64,
    samples: usize,
    seed: u64,
) -> Result<EquilibriumReport> {
    if samples < 10 {
        return Err(Error::InvalidParameter("need at least 10 samples".into()));
    }
    let mut rng = replica_rng(seed, 0);
    let x0 = sample_configuration(law, &mut rng).x;
    let mut sim = Simulator::new(*kernel, topo, x0, rng);
    // Mean rate under the law sets the time scale.
    let mut probe = replica_rng(seed, 1);
    let mean_rate = (0..2000)
        .map(|_| Simulator::new(*kernel, topo, sample_configuration(law, &mut probe).x, replica_rng(0, 0)).total_rate())
        .sum::<f64>()
        / 2000.0;
    let stride = events as f64 / mean_rate / samples as f64;
    let mut xs = Vec::with_capacity(samples);
    let mut next = stride;
    while xs.len() < samples {
        if !sim.step_recording(stride, &mut next, |_, x| xs.push(x[0])) {
            break;
        }
    }
    xs.truncate(samples);
    let (g, n) = (law.gamma.get(), law.sites as f64);
    let total = law.total_energy();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let f = beta_cdf(g, (n - 1.0) * g, x / total);
        d = d.max((f - k as f64 / m).abs()).max(((k + 1) as f64 / m - f).abs());
    }
    let critical = 1.628 / m.sqrt();
    Ok(EquilibriumReport { statistic: d, critical, samples: xs.len(), pass: d < critical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{kmp_kernel, star_kernel};
    use crate::measures::GammaShape;

    #[test]
    fn bonds_and_weights() {
        let nn = Topology::nearest(4).unwrap();
        assert_eq!(nn.bonds(), vec![(0, 1), (1, 2), (2, 3)]);
        let lr = Topology::long_range(4).unwrap();
        assert_eq!(lr.bonds().len(), 6);
        assert_eq!(lr.bond_weight(), 0.25);
        assert!(Topology::nearest(1).is_err());
    }

    #[test]
    fn fenwick_find_and_total() {
        let mut f = Fenwick::new(vec![1.0, 0.0, 2.0, 3.0, 0.5]);
        assert_eq!(f.total(), 6.5);
        assert_eq!(f.find(0.5), 0);
        assert_eq!(f.find(1.5), 2);
        assert_eq!(f.find(3.2), 3);
        assert_eq!(f.find(6.4), 4);
        f.set(3, 0.0);
        assert_eq!(f.total(), 3.5);
        assert_eq!(f.find(3.2), 4);
    }

    #[test]
    fn kmp_two_sites_waits_are_unit_exponential() {
        let law = SimplexLaw::new(1.0, 1.0, 2).unwrap();
        let tr = run(&kmp_kernel(), Topology::nearest(2).unwrap(), &law, 20_000.0, 100.0, replica_rng(5, 0)).unwrap();
        let n = tr.times.len() as f64;
        let mean = tr.times.last().unwrap() / n;
        assert!((mean - 1.0).abs() < 4.0 / n.sqrt(), "{mean}");
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn energy_is_conserved() {
        let law = SimplexLaw::new(0.5, 2.0, 6).unwrap();
        let k = star_kernel(1.0, GammaShape::new(0.5).unwrap());
        let tr = run(&k, Topology::long_range(6).unwrap(), &law, 200.0, 1.0, replica_rng(9, 0)).unwrap();
        for x in &tr.snapshots {
            let s: f64 = x.iter().sum();
            assert!((s - 12.0).abs() < 1e-10 * 12.0);
            assert!(x.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let law = SimplexLaw::new(1.0, 1.0, 3).unwrap();
        let t = Topology::nearest(3).unwrap();
        let a = run(&kmp_kernel(), t, &law, 50.0, 1.0, replica_rng(3, 0)).unwrap();
        let b = run(&kmp_kernel(), t, &law, 50.0, 1.0, replica_rng(3, 0)).unwrap();
        assert_eq!(a, b);
    }
}
