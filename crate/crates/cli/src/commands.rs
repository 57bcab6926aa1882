use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use gapforge::appendix::{AppendixOptions, AppendixReport, appendix_suite, kappa_tilde_1_bracket};
use gapforge::bounds::{MovingPath, PathReport, SuiteOptions, TheoremCheck, build_moving_path, theorem_suite};
use gapforge::galerkin::{AssemblyOptions, GapProblem, Precision, Route, default_degree, galerkin_gap, galerkin_gap_with, two_site_constant};
use gapforge::measures::{GammaShape, SimplexLaw};
use gapforge::models::{ExchangeKernel, star_kernel};
use gapforge::report::fmt_f64;
use gapforge::simulate::{McBudget, Observable, Topology, TopologyKind, estimate_gap_autocorr, replica_rng};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Value, json};

use crate::config::{ExperimentConfig, OneOrMany, SCHEMA_VERSION};
use crate::{Command, Common, GapArgs, KappaArgs, Method, PathArgs, PrecisionArg, SimulateArgs, Suite, SweepArgs, TwoSiteArgs, VerifyArgs, exit};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Verify(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Numeric(_) => exit::NUMERIC,
            CliError::Verify(_) => exit::VERIFY,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(s) | CliError::Numeric(s) | CliError::Verify(s) => f.write_str(s),
        }
    }
}

impl From<gapforge::Error> for CliError {
    fn from(e: gapforge::Error) -> Self {
        match e {
            gapforge::Error::InvalidParameter(_) | gapforge::Error::Io(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gap(a) => gap(a),
        Command::Sweep(a) => sweep(a),
        Command::Kappa(a) => kappa(a),
        Command::TwoSite(a) => two_site(a),
        Command::Verify(a) => verify(a),
        Command::Simulate(a) => simulate(a),
        Command::Path(a) => path(a),
    }
}

fn load(common: &Common, name: &str) -> Result<ExperimentConfig> {
    match &common.config {
        Some(p) => {
            let cfg = ExperimentConfig::load(p).map_err(CliError::Config)?;
            cfg.expect_command(name).map_err(CliError::Config)?;
            Ok(cfg)
        }
        None => Ok(ExperimentConfig { schema: SCHEMA_VERSION, ..Default::default() }),
    }
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Picks the flag, then the config value, then the default, and records
/// which fields were defaulted.
struct Resolver<'a> {
    defaults: &'a mut Vec<&'static str>,
}

impl Resolver<'_> {
    fn pick<T>(&mut self, name: &'static str, flag: Option<T>, file: Option<T>, default: T) -> T {
        flag.or(file).unwrap_or_else(|| {
            self.defaults.push(name);
            default
        })
    }

    fn pick_opt<T>(&mut self, name: &'static str, flag: Option<T>, file: Option<T>) -> Option<T> {
        let v = flag.or(file);
        if v.is_none() {
            self.defaults.push(name);
        }
        v
    }

    fn list<T: Clone>(&mut self, name: &'static str, flag: Vec<T>, file: Option<Vec<T>>, default: Vec<T>) -> Vec<T> {
        if !flag.is_empty() {
            flag
        } else if let Some(v) = file {
            v
        } else {
            self.defaults.push(name);
            default
        }
    }
}

fn single<T: Clone>(name: &str, v: Option<OneOrMany<T>>) -> Result<Option<T>> {
    match v.map(OneOrMany::into_vec) {
        None => Ok(None),
        Some(v) if v.len() == 1 => Ok(Some(v[0].clone())),
        Some(_) => Err(CliError::Config(format!("'{name}' must be a single value for this command"))),
    }
}

fn method_from(s: Option<String>) -> Result<Option<Method>> {
    match s.as_deref() {
        None => Ok(None),
        Some("galerkin") => Ok(Some(Method::Galerkin)),
        Some("mc") => Ok(Some(Method::Mc)),
        Some(o) => Err(CliError::Config(format!("unknown method '{o}'"))),
    }
}

fn precision(p: PrecisionArg) -> Precision {
    match p {
        PrecisionArg::Auto => Precision::Auto,
        PrecisionArg::F64 => Precision::F64,
        PrecisionArg::Extended => Precision::Extended,
    }
}

/// Fully resolved parameters of one gap computation.
#[derive(Clone, Debug, Serialize)]
struct GapSpec {
    model: String,
    m: f64,
    gamma: f64,
    #[serde(rename = "E")]
    e: f64,
    #[serde(rename = "N")]
    n: usize,
    topology: &'static str,
    method: &'static str,
    degree: usize,
    events: u64,
    seed: u64,
}

struct GapOutcome {
    gap: f64,
    err: f64,
    detail: Value,
}

fn compute_gap(kernel: ExchangeKernel, topo: Topology, spec: &GapSpec, prec: Precision) -> Result<GapOutcome> {
    let problem = GapProblem::new(kernel, topo, spec.e, spec.degree)?;
    let g = galerkin_gap(&problem, prec)?;
    if spec.method == "galerkin" {
        let err = g.plateau_change();
        let detail = json!({
            "history": g.history,
            "plateau_change": err,
            "gram_condition": g.gram_condition,
            "precision": g.precision,
            "quadrature": g.quadrature,
        });
        return Ok(GapOutcome { gap: g.value, err, detail });
    }
    let law = SimplexLaw::new(kernel.gamma().get(), spec.e, spec.n)?;
    let budget = McBudget { events: spec.events, ..McBudget::default() };
    let reference = g.value;
    let mc = estimate_gap_autocorr(&kernel, topo, &law, &Observable::Galerkin(Box::new(g)), &budget, None, spec.seed)?;
    if mc.flagged {
        eprintln!("warning: autocorrelation fit flagged (R² = {:.4})", mc.r_squared);
    }
    let detail = json!({ "estimate": mc, "galerkin_reference": reference });
    Ok(GapOutcome { gap: mc.value, err: mc.stderr, detail })
}

fn gap(a: GapArgs) -> Result<()> {
    let cfg = load(&a.common, "gap")?;
    let mut defaults = Vec::new();
    let mut r = Resolver { defaults: &mut defaults };
    let model = r.pick("model", a.model, cfg.model.clone(), "star".to_string());
    let m = r.pick_opt("m", a.m, single("m", cfg.m.clone())?);
    let gamma = r.pick_opt("gamma", a.gamma, single("gamma", cfg.gamma.clone())?);
    let kernel = ExchangeKernel::from_id(&model, m, gamma)?;
    let e = r.pick("E", a.e, single("E", cfg.e.clone())?, 1.0);
    let n = a
        .n
        .or(single("N", cfg.n_values().map(OneOrMany::Many))?)
        .ok_or_else(|| CliError::Config("number of sites N is required".into()))?;
    let topology = r.pick("topology", a.topology, single("topology", cfg.topology.clone())?, "nn".to_string());
    let kind = TopologyKind::from_id(&topology)?;
    let method = r.pick("method", a.method, method_from(cfg.method.clone())?, Method::Galerkin);
    let degree = r.pick("degree", a.degree, cfg.degree, default_degree(n));
    let events = r.pick("events", a.events, cfg.events, McBudget::default().events);
    let seed = r.pick("seed", a.common.seed, cfg.seed, DEFAULT_SEED);
    let output = a.common.output.or(cfg.output);
    let spec = GapSpec {
        model: kernel.id().to_string(),
        m: kernel.m(),
        gamma: kernel.gamma().get(),
        e,
        n,
        topology: kind.id(),
        method: if method == Method::Galerkin { "galerkin" } else { "mc" },
        degree,
        events,
        seed,
    };
    let out = compute_gap(kernel, Topology::new(kind, n)?, &spec, precision(a.precision))?;
    if a.json {
        let record = json!({
            "params": spec,
            "defaults": defaults,
            "gap": out.gap,
            "err": out.err,
            "detail": out.detail,
        });
        emit_json(&record, output.as_deref())
    } else {
        let mut w = writer(output.as_deref())?;
        writeln!(w, "{}", fmt_f64(out.gap))?;
        Ok(())
    }
}

pub const SWEEP_HEADER: [&str; 11] =
    ["model", "m", "gamma", "E", "N", "topology", "method", "degree_or_budget", "gap", "err", "seed"];

fn sweep(a: SweepArgs) -> Result<()> {
    let cfg = load(&a.common, "sweep")?;
    let mut defaults = Vec::new();
    let mut r = Resolver { defaults: &mut defaults };
    let model = r.pick("model", a.model, cfg.model.clone(), "star".to_string());
    let ms: Vec<Option<f64>> = {
        let v = r.list("m", a.m, cfg.m.clone().map(OneOrMany::into_vec), vec![]);
        if v.is_empty() { vec![None] } else { v.into_iter().map(Some).collect() }
    };
    let gammas = r.list("gamma", a.gamma, cfg.gamma.clone().map(OneOrMany::into_vec), vec![1.0]);
    let es = r.list("E", a.e, cfg.e.clone().map(OneOrMany::into_vec), vec![1.0]);
    let ns = r.list("N", a.n, cfg.n_values(), vec![3]);
    let topologies = r.list("topology", a.topology, cfg.topology.clone().map(OneOrMany::into_vec), vec!["nn".into()]);
    let method = r.pick("method", a.method, method_from(cfg.method.clone())?, Method::Galerkin);
    let degree = r.pick_opt("degree", a.degree, cfg.degree);
    let events = r.pick("events", a.events, cfg.events, McBudget::default().events);
    let seed = r.pick("seed", a.common.seed, cfg.seed, DEFAULT_SEED);
    let output = a.common.output.clone().or(cfg.output.clone());

    let mut jobs = Vec::new();
    for &m in &ms {
        for &g in &gammas {
            let kernel = ExchangeKernel::from_id(&model, m, Some(g))?;
            for &e in &es {
                for &n in &ns {
                    for t in &topologies {
                        let kind = TopologyKind::from_id(t)?;
                        let spec = GapSpec {
                            model: kernel.id().to_string(),
                            m: kernel.m(),
                            gamma: kernel.gamma().get(),
                            e,
                            n,
                            topology: kind.id(),
                            method: if method == Method::Galerkin { "galerkin" } else { "mc" },
                            degree: degree.unwrap_or_else(|| default_degree(n)),
                            events,
                            seed: seed.wrapping_add(jobs.len() as u64),
                        };
                        jobs.push((kernel, Topology::new(kind, n)?, spec));
                    }
                }
            }
        }
    }
    // Non-star kernels ignore gamma, which can repeat rows.
    let mut seen = HashSet::new();
    jobs.retain(|(_, _, s)| seen.insert(row_key(s)));

    let done: HashSet<String> = match &a.run_dir {
        Some(dir) => existing_keys(&dir.join("sweep.csv"))?,
        None => HashSet::new(),
    };
    let pending: Vec<_> = jobs.iter().filter(|(_, _, s)| !done.contains(&row_key(s))).collect();
    let rows: Vec<Vec<String>> = pending
        .par_iter()
        .map(|(k, t, s)| {
            let out = compute_gap(*k, *t, s, Precision::Auto)?;
            Ok(sweep_row(s, out.gap, out.err))
        })
        .collect::<Result<_>>()?;

    match &a.run_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("sweep.csv");
            let fresh = !path.exists();
            let file = OpenOptions::new().create(true).append(true).open(&path)?;
            let mut w = csv::Writer::from_writer(file);
            if fresh {
                w.write_record(SWEEP_HEADER)?;
            }
            for row in &rows {
                w.write_record(row)?;
            }
            w.flush()?;
            append_manifest(dir, &model, &defaults, seed, jobs.len(), rows.len())?;
        }
        None => {
            let mut w = csv::Writer::from_writer(writer(output.as_deref())?);
            w.write_record(SWEEP_HEADER)?;
            for row in &rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn sweep_row(s: &GapSpec, gap: f64, err: f64) -> Vec<String> {
    let budget = if s.method == "galerkin" { s.degree.to_string() } else { s.events.to_string() };
    vec![
        s.model.clone(),
        fmt_f64(s.m),
        fmt_f64(s.gamma),
        fmt_f64(s.e),
        s.n.to_string(),
        s.topology.to_string(),
        s.method.to_string(),
        budget,
        fmt_f64(gap),
        fmt_f64(err),
        s.seed.to_string(),
    ]
}

/// Identifies a row by its parameter columns.
fn row_key(s: &GapSpec) -> String {
    sweep_row(s, 0.0, 0.0)[..8].join(",")
}

fn existing_keys(path: &Path) -> Result<HashSet<String>> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    let mut rd = csv::Reader::from_path(path)?;
    let mut out = HashSet::new();
    for rec in rd.records() {
        let rec = rec?;
        out.insert(rec.iter().take(8).collect::<Vec<_>>().join(","));
    }
    Ok(out)
}

fn append_manifest(dir: &Path, model: &str, defaults: &[&str], seed: u64, total: usize, written: usize) -> Result<()> {
    let path: PathBuf = dir.join("manifest.json");
    let mut runs: Vec<Value> = if path.exists() { serde_json::from_str(&fs::read_to_string(&path)?)? } else { Vec::new() };
    runs.push(json!({
        "schema": SCHEMA_VERSION,
        "model": model,
        "defaults": defaults,
        "seed": seed,
        "rows_in_grid": total,
        "rows_written": written,
        "rows_skipped": total - written,
        "version": env!("CARGO_PKG_VERSION"),
    }));
    fs::write(&path, serde_json::to_string_pretty(&runs)?)?;
    Ok(())
}

fn kappa(a: KappaArgs) -> Result<()> {
    let kernel = star_kernel(a.m, GammaShape::new(a.gamma)?);
    let mut routes = vec![Route::PairFactorized];
    if a.m >= 0.0 && a.m.fract() == 0.0 {
        routes.insert(0, Route::Expansion);
    }
    let mut values = serde_json::Map::new();
    for (name, kind) in [("kappa", TopologyKind::NearestNeighbor), ("kappa_tilde", TopologyKind::LongRange)] {
        let p = GapProblem::new(kernel, Topology::new(kind, 3)?, 1.0 / 3.0, a.degree)?;
        let mut by_route = serde_json::Map::new();
        for &route in &routes {
            let opts = AssemblyOptions { route, ..AssemblyOptions::default() };
            let g = galerkin_gap_with(&p, Precision::Auto, &opts)?;
            let key = if route == Route::Expansion { "expansion" } else { "pair_factorized" };
            by_route.insert(key.into(), json!({ "value": g.value, "history": g.history, "precision": g.precision }));
        }
        values.insert(name.into(), Value::Object(by_route));
    }
    let bracket = if a.m == 1.0 {
        let b = kappa_tilde_1_bracket(a.gamma, a.n_max, a.degree)?;
        eprintln!(
            "kappa_tilde_1 in [{}, {}] (lower {} 1/3)",
            fmt_f64(b.lower),
            fmt_f64(b.upper),
            if b.lower > 1.0 / 3.0 { ">" } else { "<=" }
        );
        Some(b)
    } else {
        None
    };
    let record = json!({
        "m": a.m,
        "gamma": a.gamma,
        "degree": a.degree,
        "values": values,
        "bracket": bracket,
    });
    emit_json(&record, a.output.as_deref())
}

fn two_site(a: TwoSiteArgs) -> Result<()> {
    let kernel = ExchangeKernel::from_id(&a.model, a.m, a.gamma)?;
    let t = two_site_constant(&kernel, a.degree)?;
    let record = json!({
        "model": kernel.id(),
        "m": kernel.m(),
        "gamma": kernel.gamma().get(),
        "degree": a.degree,
        "value": t.value,
        "history": t.history,
        "quadrature": t.quadrature,
    });
    emit_json(&record, a.output.as_deref())
}

#[derive(Serialize)]
struct PathSummary {
    pairs: usize,
    max_j: usize,
    all_pass: bool,
    failing: Vec<(usize, usize)>,
}

fn path_summary(max_j: usize) -> Result<PathSummary> {
    let mut pairs = 0;
    let mut failing = Vec::new();
    for i in 1..max_j {
        for j in i + 1..=max_j {
            pairs += 1;
            if !build_moving_path(i, j)?.check().pass {
                failing.push((i, j));
            }
        }
    }
    Ok(PathSummary { pairs, max_j, all_pass: failing.is_empty(), failing })
}

#[derive(Serialize)]
struct VerifyReport {
    suite: &'static str,
    pass: bool,
    appendix: Option<AppendixReport>,
    theorems: Option<Vec<TheoremCheck>>,
    paths: Option<PathSummary>,
}

fn verify(a: VerifyArgs) -> Result<()> {
    let (do_appendix, do_theorems) = match a.suite {
        Suite::Appendix => (true, false),
        Suite::Theorems => (false, true),
        Suite::All => (true, true),
    };
    let appendix = if do_appendix { Some(appendix_suite(&AppendixOptions::default())?) } else { None };
    let (theorems, paths) = if do_theorems {
        let mut opts = SuiteOptions::default();
        if let Some(s) = a.seed {
            opts.seed = s;
        }
        if let Some(n) = a.mc_samples {
            opts.mc_samples = n;
        }
        (Some(theorem_suite(&opts)?), Some(path_summary(21)?))
    } else {
        (None, None)
    };
    let mut pass = true;
    if let Some(r) = &appendix {
        eprintln!(
            "appendix: constants {}, kappa bracket {}, propositions {}, lemmas {}",
            word(r.constants_pass()),
            word(r.brackets_pass()),
            word(r.propositions_pass()),
            word(r.lemmas_pass())
        );
        pass &= r.pass();
    }
    if let Some(t) = &theorems {
        let failing = t.iter().filter(|c| !c.pass).count();
        eprintln!("theorems: {} checks, {} failing", t.len(), failing);
        pass &= failing == 0;
        if let Some(path) = &a.csv {
            write_theorem_csv(t, path)?;
        }
    }
    if let Some(p) = &paths {
        eprintln!("moving paths: {} pairs, {}", p.pairs, word(p.all_pass));
        pass &= p.all_pass;
    }
    let suite = match a.suite {
        Suite::Appendix => "appendix",
        Suite::Theorems => "theorems",
        Suite::All => "all",
    };
    emit_json(&VerifyReport { suite, pass, appendix, theorems, paths }, a.output.as_deref())?;
    if pass { Ok(()) } else { Err(CliError::Verify(format!("verification suite '{suite}' failed"))) }
}

fn word(ok: bool) -> &'static str {
    if ok { "pass" } else { "FAIL" }
}

fn write_theorem_csv(checks: &[TheoremCheck], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["claim", "model", "m", "gamma", "E", "N", "resolution", "lhs", "rhs", "margin", "status", "pass"])?;
    for c in checks {
        let p = &c.params;
        w.write_record([
            c.claim.clone(),
            p.model.clone(),
            fmt_f64(p.m),
            fmt_f64(p.gamma),
            p.e.map(fmt_f64).unwrap_or_default(),
            p.n.map(|n| n.to_string()).unwrap_or_default(),
            p.resolution.clone(),
            fmt_f64(c.lhs),
            fmt_f64(c.rhs),
            fmt_f64(c.margin),
            format!("{:?}", c.status).to_lowercase(),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = load(&a.common, "simulate")?;
    let mut defaults = Vec::new();
    let mut r = Resolver { defaults: &mut defaults };
    let model = r.pick("model", a.model, cfg.model.clone(), "star".to_string());
    let m = r.pick_opt("m", a.m, single("m", cfg.m.clone())?);
    let gamma = r.pick_opt("gamma", a.gamma, single("gamma", cfg.gamma.clone())?);
    let kernel = ExchangeKernel::from_id(&model, m, gamma)?;
    let e = r.pick("E", a.e, single("E", cfg.e.clone())?, 1.0);
    let n = r.pick("N", a.n, single("N", cfg.n_values().map(OneOrMany::Many))?, 3);
    let topology = r.pick("topology", a.topology, single("topology", cfg.topology.clone())?, "nn".to_string());
    let seed = r.pick("seed", a.common.seed, cfg.seed, DEFAULT_SEED);
    let kind = TopologyKind::from_id(&topology)?;
    let law = SimplexLaw::new(kernel.gamma().get(), e, n)?;
    let tr = gapforge::simulate::run(&kernel, Topology::new(kind, n)?, &law, a.t_max, a.stride, replica_rng(seed, 0))?;
    eprintln!("{} events up to t = {}, seed {seed}", tr.events.len(), a.t_max);
    tr.write_csv(writer(a.common.output.or(cfg.output).as_deref())?)?;
    Ok(())
}

#[derive(Serialize)]
struct PathRecord {
    path: MovingPath,
    report: PathReport,
}

fn path(a: PathArgs) -> Result<()> {
    let p = build_moving_path(a.i, a.j)?;
    let report = p.check();
    let pass = report.pass;
    if a.json {
        emit_json(&PathRecord { path: p, report }, None)?;
    } else {
        let mut out = io::stdout().lock();
        let join = |v: &[usize]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "K = {}", p.k())?;
        writeln!(out, "sites: {}", join(&p.sites))?;
        let swaps: Vec<String> = p.swaps().iter().map(|(a, b)| format!("({a},{b})")).collect();
        writeln!(out, "swaps: {}", swaps.join(" "))?;
        writeln!(out, "result: {}", join(&p.compose()[1..]))?;
        writeln!(
            out,
            "invariants: steps {} energy {} composition {} nearest uses {} next-nearest uses {}",
            word(report.short_steps),
            word(report.tracks_energy),
            word(report.composes_to_swap),
            report.max_nearest_uses,
            report.max_next_nearest_uses
        )?;
    }
    if pass { Ok(()) } else { Err(CliError::Verify("moving-path invariants violated".into())) }
}
