//! Command-line harness: single runs, sweeps, figure reproduction and a
//! standalone xApp server.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::MAX_UES;
use crate::config::ScenarioConfig;
use crate::engine::{run, run_with_endpoint, RunResult};
use crate::frame::FLEXIBLE_SYMBOLS;
use crate::metrics::capacity_bound_mbps;
use crate::ric::a1::A1Policy;
use crate::ric::transport::{serve_stream, TcpEndpoint};
use crate::scenarios;
use crate::sched::PolicyKind;

#[derive(Debug, Parser)]
#[command(name = "nrsim", version, about = "5G NR MAC scheduling simulator with a near-RT RIC loop")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario or a policy × UE count × seed sweep.
    Run(RunArgs),
    /// Regenerate the throughput, delay and per-user CSVs.
    Reproduce(ReproduceArgs),
    /// Serve xApp sessions over TCP.
    Xapp(XappArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Scenario file (TOML). Flags override its values.
    #[arg(long, env = "NRSIM_CONFIG")]
    pub config: Option<PathBuf>,
    /// Policies, comma separated (rr, mt, pf).
    #[arg(long, env = "NRSIM_POLICY", value_delimiter = ',')]
    pub policy: Vec<PolicyKind>,
    /// UE counts, e.g. `7`, `1-10` or `1,4,8`.
    #[arg(long, env = "NRSIM_UES", value_parser = parse_ue_counts)]
    pub ues: Option<UeCounts>,
    /// Seeds, comma separated.
    #[arg(long, env = "NRSIM_SEED", value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Run length in TTIs.
    #[arg(long, env = "NRSIM_TTIS")]
    pub ttis: Option<u32>,
    /// Output directory.
    #[arg(long, env = "NRSIM_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Sweep all policies over 1-10 UEs unless narrowed by flags.
    #[arg(long, env = "NRSIM_SWEEP")]
    pub sweep: bool,
    /// A1 policy file for the in-process xApp.
    #[arg(long, env = "NRSIM_A1_POLICY")]
    pub a1_policy: Option<PathBuf>,
    /// Connect to an external xApp at this address instead.
    #[arg(long, env = "NRSIM_E2_SOCKET")]
    pub e2_socket: Option<String>,
    /// Concurrent sweep cells (default: all cores).
    #[arg(long, env = "NRSIM_JOBS")]
    pub jobs: Option<usize>,
    /// Skip the summary table on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    #[arg(long, env = "NRSIM_OUT", default_value = "figures")]
    pub out: PathBuf,
    /// Number of seeds averaged per point (seeds 1..=N).
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, env = "NRSIM_TTIS")]
    pub ttis: Option<u32>,
    #[arg(long, env = "NRSIM_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct XappArgs {
    /// Address to listen on.
    #[arg(long, env = "NRSIM_E2_SOCKET", default_value = "127.0.0.1:7070")]
    pub listen: String,
    #[arg(long, env = "NRSIM_A1_POLICY")]
    pub a1_policy: PathBuf,
    /// Exit after this many gNB sessions.
    #[arg(long)]
    pub sessions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeCounts(pub Vec<usize>);

pub fn parse_ue_counts(s: &str) -> Result<UeCounts, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |x: &str| {
            x.trim()
                .parse::<usize>()
                .map_err(|e| format!("`{x}` in `{s}`: {e}"))
        };
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err("no UE counts given".into());
    }
    Ok(UeCounts(out))
}

/// Policies × UE counts × seeds over a base scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub policies: Vec<PolicyKind>,
    pub ue_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub base: ScenarioConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> crate::Result<()> {
        let mut errs = Vec::new();
        if self.policies.is_empty() {
            errs.push("no policies".to_owned());
        }
        if self.seeds.is_empty() {
            errs.push("no seeds".to_owned());
        }
        if self.ue_counts.is_empty() {
            errs.push("no UE counts".to_owned());
        }
        if let Some(n) = self.ue_counts.iter().find(|&&n| n == 0 || n > MAX_UES) {
            errs.push(format!("UE count {n} outside 1..={MAX_UES}"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(crate::Error::Config(errs))
        }
    }

    /// Cells in output order: policy, then UE count, then seed.
    pub fn cells(&self) -> Vec<ScenarioConfig> {
        let mut cells = Vec::new();
        for &policy in &self.policies {
            for &n_ues in &self.ue_counts {
                for &seed in &self.seeds {
                    cells.push(ScenarioConfig {
                        policy,
                        n_ues,
                        seed,
                        ..self.base.clone()
                    });
                }
            }
        }
        cells
    }
}

pub const SUMMARY_HEADER: [&str; 7] = [
    "policy",
    "n_ues",
    "seed",
    "avg_ue_throughput_mbps",
    "cell_throughput_mbps",
    "avg_delay_ms",
    "jain",
];

pub const PER_UE_HEADER: [&str; 11] = [
    "policy",
    "n_ues",
    "seed",
    "ue_id",
    "direction",
    "demand_class",
    "throughput_mbps",
    "mean_delay_ms",
    "mean_mcs",
    "tti_allocation_pct",
    "mean_symbols",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub policy: PolicyKind,
    pub n_ues: usize,
    pub seed: u64,
    pub avg_ue_throughput_mbps: f64,
    pub cell_throughput_mbps: f64,
    pub avg_delay_ms: Option<f64>,
    pub jain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerUeRow {
    pub policy: PolicyKind,
    pub n_ues: usize,
    pub seed: u64,
    pub ue_id: u32,
    pub direction: crate::traffic::Direction,
    pub demand_class: u8,
    pub throughput_mbps: f64,
    pub mean_delay_ms: f64,
    pub mean_mcs: f64,
    pub tti_allocation_pct: f64,
    pub mean_symbols: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SwitchRow {
    policy: PolicyKind,
    n_ues: usize,
    seed: u64,
    tti: u32,
    effective_tti: u32,
    from: PolicyKind,
    to: PolicyKind,
}

fn summary_row(r: &RunResult) -> SummaryRow {
    let s = &r.summary;
    SummaryRow {
        policy: s.policy,
        n_ues: s.n_ues,
        seed: s.seed,
        avg_ue_throughput_mbps: s.cell.avg_ue_throughput_mbps,
        cell_throughput_mbps: s.cell.cell_throughput_mbps,
        avg_delay_ms: s.cell.avg_delay_ms,
        jain: s.cell.jain,
    }
}

fn per_ue_rows(r: &RunResult) -> impl Iterator<Item = PerUeRow> + '_ {
    r.ue_stats.iter().map(|u| PerUeRow {
        policy: r.summary.policy,
        n_ues: r.summary.n_ues,
        seed: r.summary.seed,
        ue_id: u.ue_id,
        direction: u.direction,
        demand_class: u.demand_class,
        throughput_mbps: u.throughput_mbps,
        mean_delay_ms: u.mean_delay_ms,
        mean_mcs: u.mean_mcs,
        tti_allocation_pct: u.tti_allocation_pct,
        mean_symbols: u.mean_symbols_per_alloc,
    })
}

/// Invariant checks on a finished run beyond those made during it.
pub fn check_run(r: &RunResult) -> Vec<String> {
    let mut errs = r.violations.clone();
    let bound = capacity_bound_mbps(FLEXIBLE_SYMBOLS as u32, r.config.n_prb, r.window.slot_ms);
    for u in &r.ue_stats {
        if u.throughput_mbps > bound {
            errs.push(format!(
                "UE {} {} throughput {} Mbps above capacity bound {bound}",
                u.ue_id, u.direction, u.throughput_mbps
            ));
        }
    }
    if let Some(j) = r.summary.cell.jain {
        if !(j > 0.0 && j <= 1.0 + 1e-12) {
            errs.push(format!("Jain index {j} outside (0, 1]"));
        }
    }
    if r.allocations.len() != r.config.duration_ttis as usize {
        errs.push("grant log does not cover the run".into());
    }
    errs
}

/// Outcome of a batch of runs.
#[derive(Debug, Default)]
pub struct ExperimentReport {
    pub results: Vec<RunResult>,
    /// Cells that did not complete, with the reason.
    pub failures: Vec<String>,
    pub violations: Vec<String>,
}

impl ExperimentReport {
    pub fn success(&self) -> bool {
        self.failures.is_empty() && self.violations.is_empty()
    }

    pub fn exit_code(&self) -> ExitCode {
        if self.success() {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }
    }
}

fn label(c: &ScenarioConfig) -> String {
    format!("{} n_ues={} seed={}", c.policy, c.n_ues, c.seed)
}

fn thread_pool(jobs: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.max(1));
    }
    b.build().context("building worker pool")
}

/// Runs every cell, isolating failures to their own cell.
pub fn run_cells(
    cells: &[ScenarioConfig],
    jobs: Option<usize>,
    e2_socket: Option<&str>,
) -> anyhow::Result<ExperimentReport> {
    let pool = thread_pool(jobs)?;
    let outcomes: Vec<Result<RunResult, String>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cfg| {
                let result = match e2_socket {
                    Some(addr) => TcpEndpoint::connect(addr)
                        .and_then(|mut ep| run_with_endpoint(cfg, Some(&mut ep))),
                    None => run(cfg),
                };
                result.map_err(|e| format!("{}: {e}", label(cfg)))
            })
            .collect()
    });
    let mut report = ExperimentReport::default();
    for out in outcomes {
        match out {
            Ok(r) => {
                let tag = label(&r.config);
                report
                    .violations
                    .extend(check_run(&r).into_iter().map(|v| format!("{tag}: {v}")));
                report.results.push(r);
            }
            Err(e) => report.failures.push(e),
        }
    }
    Ok(report)
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_outputs(out: &Path, report: &ExperimentReport) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(
        &out.join("summary.csv"),
        &SUMMARY_HEADER,
        report.results.iter().map(summary_row),
    )?;
    write_csv(
        &out.join("per_ue.csv"),
        &PER_UE_HEADER,
        report.results.iter().flat_map(per_ue_rows),
    )?;
    let switches: Vec<SwitchRow> = report
        .results
        .iter()
        .flat_map(|r| {
            r.switches.iter().map(|s| SwitchRow {
                policy: r.summary.policy,
                n_ues: r.summary.n_ues,
                seed: r.summary.seed,
                tti: s.tti.0,
                effective_tti: s.effective_tti.0,
                from: s.from,
                to: s.to,
            })
        })
        .collect();
    if !switches.is_empty() {
        write_csv(
            &out.join("policy_switches.csv"),
            &["policy", "n_ues", "seed", "tti", "effective_tti", "from", "to"],
            switches,
        )?;
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>, prec: usize) -> String {
    x.map_or_else(|| "-".to_owned(), |v| format!("{v:.prec$}"))
}

pub fn print_summary(report: &ExperimentReport) {
    println!(
        "{:<6} {:>5} {:>6} {:>14} {:>14} {:>12} {:>7}",
        "policy", "n_ues", "seed", "avg_ue_Mbps", "cell_Mbps", "delay_ms", "jain"
    );
    for r in &report.results {
        let s = summary_row(r);
        println!(
            "{:<6} {:>5} {:>6} {:>14.3} {:>14.3} {:>12} {:>7}",
            s.policy.name(),
            s.n_ues,
            s.seed,
            s.avg_ue_throughput_mbps,
            s.cell_throughput_mbps,
            fmt_opt(s.avg_delay_ms, 3),
            fmt_opt(s.jain, 4),
        );
    }
    for f in &report.failures {
        eprintln!("cell failed: {f}");
    }
    for v in &report.violations {
        eprintln!("invariant violated: {v}");
    }
}

/// Builds the sweep described by the flags on top of the config file.
pub fn sweep_spec(args: &RunArgs) -> anyhow::Result<SweepSpec> {
    let mut base = match &args.config {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ScenarioConfig::default(),
    };
    if let Some(t) = args.ttis {
        base.duration_ttis = t;
    }
    if let Some(p) = &args.a1_policy {
        base.ric.a1_policy =
            Some(A1Policy::load(p).with_context(|| format!("loading {}", p.display()))?);
    }
    base.validate().context("invalid configuration")?;
    let policies = match (args.policy.is_empty(), args.sweep) {
        (false, _) => args.policy.clone(),
        (true, true) => PolicyKind::ALL.to_vec(),
        (true, false) => vec![base.policy],
    };
    let ue_counts = match (&args.ues, args.sweep) {
        (Some(u), _) => u.0.clone(),
        (None, true) => (1..=10).collect(),
        (None, false) => vec![base.n_ues],
    };
    let seeds = if args.seed.is_empty() {
        vec![base.seed]
    } else {
        args.seed.clone()
    };
    let spec = SweepSpec {
        policies,
        ue_counts,
        seeds,
        base,
    };
    spec.validate()?;
    for cell in spec.cells() {
        cell.validate().with_context(|| label(&cell))?;
    }
    Ok(spec)
}

/// Executes the run or sweep and writes `summary.csv` and `per_ue.csv`.
pub fn run_experiment(args: &RunArgs) -> anyhow::Result<ExperimentReport> {
    let spec = sweep_spec(args)?;
    let report = run_cells(&spec.cells(), args.jobs, args.e2_socket.as_deref())?;
    write_outputs(&args.out, &report)?;
    if !args.quiet {
        print_summary(&report);
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
struct Fig5Row {
    policy: PolicyKind,
    n_ues: usize,
    avg_ue_throughput_mbps: f64,
    cell_throughput_mbps: f64,
    jain: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Fig6Row {
    policy: PolicyKind,
    n_ues: usize,
    avg_delay_ms: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Fig78Row {
    ue_id: u32,
    direction: crate::traffic::Direction,
    demand_class: u8,
    mcs: u8,
    throughput_mbps: f64,
    mean_delay_ms: f64,
    mean_mcs: f64,
    tti_allocation_pct: f64,
    mean_symbols: f64,
}

fn mean_of(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Mean of a summary field over the seeds of each (policy, n_ues) point,
/// in policy-major order.
fn seed_means<T>(
    report: &ExperimentReport,
    make: impl Fn(PolicyKind, usize, &[&RunResult]) -> T,
) -> Vec<T> {
    let mut rows = Vec::new();
    for p in PolicyKind::ALL {
        for n in 1..=10 {
            let runs: Vec<&RunResult> = report
                .results
                .iter()
                .filter(|r| r.summary.policy == p && r.summary.n_ues == n)
                .collect();
            if !runs.is_empty() {
                rows.push(make(p, n, &runs));
            }
        }
    }
    rows
}

fn sweep_cells(
    preset: fn(usize, PolicyKind, u64) -> ScenarioConfig,
    seeds: u64,
    ttis: Option<u32>,
) -> Vec<ScenarioConfig> {
    let mut cells = Vec::new();
    for p in PolicyKind::ALL {
        for n in 1..=10 {
            for seed in 1..=seeds {
                let mut c = preset(n, p, seed);
                if let Some(t) = ttis {
                    c.duration_ttis = t;
                }
                cells.push(c);
            }
        }
    }
    cells
}

/// Writes `fig5.csv`, `fig6.csv` and `fig7_8.csv`.
pub fn reproduce_figures(args: &ReproduceArgs) -> anyhow::Result<ExperimentReport> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut all = ExperimentReport::default();

    let thr = run_cells(&sweep_cells(scenarios::throughput_sweep, args.seeds, args.ttis), args.jobs, None)?;
    let rows = seed_means(&thr, |policy, n_ues, runs| Fig5Row {
        policy,
        n_ues,
        avg_ue_throughput_mbps: mean_of(runs.iter().map(|r| Some(r.summary.cell.avg_ue_throughput_mbps))).unwrap_or(0.0),
        cell_throughput_mbps: mean_of(runs.iter().map(|r| Some(r.summary.cell.cell_throughput_mbps))).unwrap_or(0.0),
        jain: mean_of(runs.iter().map(|r| r.summary.cell.jain)),
    });
    write_csv(
        &args.out.join("fig5.csv"),
        &["policy", "n_ues", "avg_ue_throughput_mbps", "cell_throughput_mbps", "jain"],
        rows,
    )?;

    let delay = run_cells(&sweep_cells(scenarios::delay_sweep, args.seeds, args.ttis), args.jobs, None)?;
    let rows = seed_means(&delay, |policy, n_ues, runs| Fig6Row {
        policy,
        n_ues,
        avg_delay_ms: mean_of(runs.iter().map(|r| r.summary.cell.avg_delay_ms)),
    });
    write_csv(&args.out.join("fig6.csv"), &["policy", "n_ues", "avg_delay_ms"], rows)?;

    let mut cfg = scenarios::per_user(1);
    if let Some(t) = args.ttis {
        cfg.duration_ttis = t;
    }
    let per_user = run_cells(&[cfg], args.jobs, None)?;
    if let Some(r) = per_user.results.first() {
        let rows = r.ue_stats.iter().map(|u| Fig78Row {
            ue_id: u.ue_id,
            direction: u.direction,
            demand_class: u.demand_class,
            mcs: r.ues[u.ue_id as usize].mcs,
            throughput_mbps: u.throughput_mbps,
            mean_delay_ms: u.mean_delay_ms,
            mean_mcs: u.mean_mcs,
            tti_allocation_pct: u.tti_allocation_pct,
            mean_symbols: u.mean_symbols_per_alloc,
        });
        write_csv(
            &args.out.join("fig7_8.csv"),
            &[
                "ue_id",
                "direction",
                "demand_class",
                "mcs",
                "throughput_mbps",
                "mean_delay_ms",
                "mean_mcs",
                "tti_allocation_pct",
                "mean_symbols",
            ],
            rows,
        )?;
    }

    for part in [thr, delay, per_user] {
        all.failures.extend(part.failures);
        all.violations.extend(part.violations);
        all.results.extend(part.results);
    }
    for f in &all.failures {
        eprintln!("cell failed: {f}");
    }
    for v in &all.violations {
        eprintln!("invariant violated: {v}");
    }
    println!(
        "wrote fig5.csv, fig6.csv and fig7_8.csv to {} ({} runs)",
        args.out.display(),
        all.results.len()
    );
    Ok(all)
}

/// Accepts gNB connections and serves each on its own thread with a fresh
/// xApp agent.
pub fn serve(args: &XappArgs) -> anyhow::Result<()> {
    let policy = A1Policy::load(&args.a1_policy)
        .with_context(|| format!("loading {}", args.a1_policy.display()))?;
    let listener = TcpListener::bind(&args.listen).with_context(|| format!("binding {}", args.listen))?;
    eprintln!("xApp listening on {}", listener.local_addr()?);
    serve_sessions(&listener, &policy, args.sessions)
}

pub fn serve_sessions(
    listener: &TcpListener,
    policy: &A1Policy,
    sessions: Option<usize>,
) -> anyhow::Result<()> {
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        let mut served = 0;
        while sessions.is_none_or(|n| served < n) {
            let policy = policy.clone();
            // Accept here so that sessions are counted in arrival order.
            let (stream, peer) = listener.accept()?;
            served += 1;
            handles.push(scope.spawn(move || {
                match serve_stream(stream, policy) {
                    Ok(agent) => eprintln!(
                        "session {peer}: {} reports, {} controls, {} acks",
                        agent.state.last_window.map_or(0, |w| w + 1),
                        agent.controls_sent,
                        agent.acks.len()
                    ),
                    Err(e) => eprintln!("session {peer}: {e}"),
                }
            }));
        }
        for h in handles {
            let _ = h.join();
        }
        Ok(())
    })
}

pub fn main_with(cli: Cli) -> ExitCode {
    let outcome = match &cli.command {
        Command::Run(a) => run_experiment(a).map(|r| r.exit_code()),
        Command::Reproduce(a) => reproduce_figures(a).map(|r| r.exit_code()),
        Command::Xapp(a) => serve(a).map(|_| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
