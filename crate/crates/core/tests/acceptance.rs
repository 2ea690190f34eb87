//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria listed in `EXPECTED_RED` fail for reasons analysed in the
//! README. The target exits non-zero if any criterion's outcome differs
//! from that expectation, so a regression or an unexpected pass both show.

use std::time::Instant;

use nrsim::cli::{run_experiment, RunArgs, UeCounts};
use nrsim::frame::TtiIndex;
use nrsim::metrics::{
    allocation_rank_correlation, delay, jain_index, summarize, throughput, CellSummary,
    PacketRecord,
};
use nrsim::ric::a1::A1Policy;
use nrsim::ric::wire::{decode_message, encode_message};
use nrsim::ric::{round_sig, Ack, Control, E2Message, Indication, UeKpi};
use nrsim::scenarios;
use nrsim::sched::{pf_allocate, pf_priority, symbol_rate, PolicyKind, SchedulableUe};
use nrsim::traffic::{Direction, TrafficMode};
use nrsim::{run, RunResult, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const EXPECTED_RED: &[u32] = &[2, 4];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        id,
        pass,
        detail: detail.into(),
    }
}

fn run_all(cells: Vec<ScenarioConfig>) -> Vec<RunResult> {
    cells
        .into_par_iter()
        .map(|c| {
            let r = run(&c).expect("scenario runs");
            assert!(r.violations.is_empty(), "{:?}", r.violations);
            r
        })
        .collect()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Counts adjacent steps that go the wrong way. Passes with at most one
/// such step, smaller than 5 % of the preceding value.
fn monotone_within_tolerance(xs: &[f64], increasing: bool) -> (bool, Vec<(usize, f64)>) {
    let bad: Vec<(usize, f64)> = xs
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let step = if increasing { w[0] - w[1] } else { w[1] - w[0] };
            (step > 0.0).then(|| (i + 1, step / w[0].abs().max(f64::MIN_POSITIVE)))
        })
        .collect();
    let ok = bad.is_empty() || (bad.len() == 1 && bad[0].1 < 0.05);
    (ok, bad)
}

type Preset = fn(usize, PolicyKind, u64) -> ScenarioConfig;

fn sweep(preset: Preset, seeds: u64) -> Vec<RunResult> {
    let mut cells = Vec::new();
    for p in PolicyKind::ALL {
        for n in 1..=10 {
            for s in 1..=seeds {
                cells.push(preset(n, p, s));
            }
        }
    }
    run_all(cells)
}

fn curve(runs: &[RunResult], p: PolicyKind, f: impl Fn(&CellSummary) -> f64) -> Vec<f64> {
    (1..=10)
        .map(|n| {
            mean(
                runs.iter()
                    .filter(|r| r.summary.policy == p && r.summary.n_ues == n)
                    .map(|r| f(&r.summary.cell)),
            )
        })
        .collect()
}

fn fmt_curve(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let runs = sweep(scenarios::throughput_sweep, 5);
    let elapsed = t0.elapsed().as_secs_f64();
    let mut pass = elapsed < 60.0;
    let mut detail = format!("{} runs in {elapsed:.1} s", runs.len());
    for p in PolicyKind::ALL {
        let c = curve(&runs, p, |s| s.avg_ue_throughput_mbps);
        let (ok, bad) = monotone_within_tolerance(&c, false);
        pass &= ok;
        detail += &format!("; {p} [{}] inversions {bad:?}", fmt_curve(&c));
    }
    outcome(1, pass, detail)
}

fn criterion_2() -> Outcome {
    let runs = sweep(scenarios::delay_sweep, 5);
    let mut pass = true;
    let mut detail = String::new();
    for p in PolicyKind::ALL {
        let c = curve(&runs, p, |s| s.avg_delay_ms.unwrap_or(0.0));
        let (ok, bad) = monotone_within_tolerance(&c, true);
        pass &= ok;
        detail += &format!("{p} [{}] decreases {bad:?}; ", fmt_curve(&c));
    }
    outcome(2, pass, detail.trim_end_matches("; "))
}

struct Heterogeneous {
    by_policy: Vec<(PolicyKind, Vec<RunResult>)>,
}

impl Heterogeneous {
    fn new(seeds: u64) -> Self {
        let by_policy = PolicyKind::ALL
            .iter()
            .map(|&p| {
                let cells = (1..=seeds).map(|s| scenarios::heterogeneous(p, s)).collect();
                (p, run_all(cells))
            })
            .collect();
        Self { by_policy }
    }

    fn mean(&self, p: PolicyKind, f: impl Fn(&CellSummary) -> f64) -> f64 {
        let runs = &self.by_policy.iter().find(|(q, _)| *q == p).unwrap().1;
        mean(runs.iter().map(|r| f(&r.summary.cell)))
    }
}

fn criterion_3(h: &Heterogeneous) -> Outcome {
    let mt = h.mean(PolicyKind::MaxThroughput, |s| s.avg_delay_ms.unwrap());
    let rr = h.mean(PolicyKind::RoundRobin, |s| s.avg_delay_ms.unwrap());
    outcome(3, mt < rr, format!("mean delay mt {mt:.4} ms, rr {rr:.4} ms"))
}

fn criterion_4(h: &Heterogeneous) -> Outcome {
    let j = |p| h.mean(p, |s| s.jain.unwrap());
    let (rr, pf, mt) = (
        j(PolicyKind::RoundRobin),
        j(PolicyKind::ProportionalFair),
        j(PolicyKind::MaxThroughput),
    );
    let pass = rr >= pf && pf >= mt && rr - mt >= 0.05;
    outcome(4, pass, format!("jain rr {rr:.6}, pf {pf:.6}, mt {mt:.6}"))
}

fn criterion_5(h: &Heterogeneous) -> Outcome {
    let c = |p| h.mean(p, |s| s.cell_throughput_mbps);
    let (mt, pf, rr) = (
        c(PolicyKind::MaxThroughput),
        c(PolicyKind::ProportionalFair),
        c(PolicyKind::RoundRobin),
    );
    outcome(
        5,
        mt >= pf && pf >= rr,
        format!("cell Mbps mt {mt:.4}, pf {pf:.4}, rr {rr:.4}"),
    )
}

/// Spearman correlation written out directly: ranks with ties averaged,
/// then Pearson on the ranks.
fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&v| {
                let below = x.iter().filter(|&&w| w < v).count() as f64;
                let equal = x.iter().filter(|&&w| w == v).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn criterion_6() -> Outcome {
    let expected = 3.0 * 1599.0 / 0.25 / 1000.0;
    let single = ScenarioConfig {
        n_ues: 1,
        ue_demand_classes: Some(vec![3]),
        ue_distances_m: Some(vec![10.0]),
        policy: PolicyKind::ProportionalFair,
        ..Default::default()
    };
    let r = run(&single).unwrap();
    let dl = r
        .ue_stats
        .iter()
        .find(|s| s.direction == Direction::Dl)
        .unwrap();
    let six_dl = r.allocations.iter().all(|a| a.slot_format.n_dl_data() == 6);
    let single_ok = r.ues[0].mcs == 28 && six_dl && (dl.throughput_mbps - expected).abs() <= 0.02 * expected;

    let r7 = run(&scenarios::per_user(1)).unwrap();
    let thr: Vec<f64> = r7.ue_stats.iter().map(|s| s.throughput_mbps).collect();
    let in_range = thr.iter().all(|&t| t > 0.0 && t <= 19.2);
    let rho = allocation_rank_correlation(&r7.ue_stats).unwrap_or(f64::NAN);
    // Lexicographic score as a single number: the three keys are bounded
    // (MCS ≤ 28, percentage ≤ 100, symbols ≤ 12), so weighting by powers of
    // 1e6 keeps their order.
    let score: Vec<f64> = r7
        .ue_stats
        .iter()
        .map(|s| s.mean_mcs * 1e12 + s.tti_allocation_pct * 1e6 + s.mean_symbols_per_alloc)
        .collect();
    let rho_oracle = spearman_oracle(&thr, &score);
    let pass = single_ok && in_range && rho >= 0.8 && (rho - rho_oracle).abs() < 1e-12;
    outcome(
        6,
        pass,
        format!(
            "single UE DL {:.4} Mbps (expected {expected:.3} ± 2 %, 6 DL symbols every slot: {six_dl}); \
             7-UE PF throughputs in (0, 19.2]: {in_range}; rank correlation {rho:.4} (oracle {rho_oracle:.4})",
            dl.throughput_mbps,
        ),
    )
}

/// Reference PF: every symbol, rebuild the list of UEs with unmet demand,
/// sort by priority then id, take the head.
fn pf_brute_force(ues: &[SchedulableUe], n_symbols: u32, t: f64) -> Vec<u32> {
    let mut order: Vec<u32> = Vec::new();
    for _ in 0..n_symbols {
        let mut ranked: Vec<(f64, u32)> = ues
            .iter()
            .filter_map(|u| {
                let g = order.iter().filter(|&&id| id == u.ue_id).count() as u32;
                let rate = symbol_rate(u.mcs, 24) as f64;
                (g < u.demand_symbols).then(|| (pf_priority(rate, u.pf_avg_rate, g, t), u.ue_id))
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        match ranked.first() {
            Some(&(_, id)) => order.push(id),
            None => break,
        }
    }
    order
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut matches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=5u32);
        let ues: Vec<SchedulableUe> = (0..n)
            .map(|id| SchedulableUe {
                ue_id: id,
                mcs: rng.random_range(0..=28),
                demand_symbols: rng.random_range(1..=3),
                backlog_bits: 1 << 20,
                pf_avg_rate: rng.random_range(1.0..4000.0),
            })
            .collect();
        let n_symbols = rng.random_range(0..=12);
        if pf_allocate(&ues, n_symbols, 100.0, 24) == pf_brute_force(&ues, n_symbols, 100.0) {
            matches += 1;
        }
    }
    outcome(7, matches == 1000, format!("{matches}/1000 slots identical"))
}

fn criterion_8() -> Outcome {
    let rec = |bits: u64, t_t: f64, t_r: f64| PacketRecord {
        ue_id: 0,
        direction: Direction::Dl,
        size_bits: bits,
        t_t,
        t_r,
    };
    let three = [rec(8000, 0.0, 1.0), rec(8000, 0.5, 2.0), rec(8000, 1.0, 3.0)];
    let six_symbols = [rec(6 * 1599, 0.0, 0.25)];
    let checks = [
        ("3 x 8000 bits over 3 ms = 8 Mbps", throughput(&three, 3.0).unwrap() == 8.0),
        ("6 x 1599 bits per 0.25 ms = 38.376 Mbps", throughput(&six_symbols, 0.25).unwrap() == 38.376),
        ("delay 5.25 - 5.0 = 0.25 ms", delay(&rec(8000, 5.0, 5.25)).unwrap() == 0.25),
        ("delay of same-instant delivery = 0", delay(&rec(8000, 7.5, 7.5)).unwrap() == 0.0),
        ("reversed timestamps rejected", delay(&rec(8000, 2.0, 1.0)).is_err()),
        ("zero window rejected", throughput(&three, 0.0).is_err()),
        ("jain(2, 4) = 0.9", jain_index(&[2.0, 4.0]).unwrap() == 0.9),
        ("jain(3, 3, 3) = 1", jain_index(&[3.0, 3.0, 3.0]).unwrap() == 1.0),
        ("jain(0, 5, 0, 0) = 0.25", jain_index(&[0.0, 5.0, 0.0, 0.0]).unwrap() == 0.25),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        8,
        failed.is_empty(),
        format!("{} exact examples, failed: {failed:?}", checks.len()),
    )
}

fn criterion_9() -> Outcome {
    let policy = A1Policy::from_toml_str(
        r#"
        mode = "adaptive"
        static_policy = "mt"
        evaluation_period = 10
        hysteresis = 1
        [[rules]]
        condition = "jain < 0.6"
        target = "pf"
        "#,
    )
    .unwrap();
    let mut cfg = scenarios::heterogeneous(PolicyKind::MaxThroughput, 1);
    cfg.ric.a1_policy = Some(policy);
    let r = run(&cfg).unwrap();

    let one_switch = r.switches.len() == 1 && r.acks.len() == 1 && r.acks[0].accepted;
    let Some(ack) = r.acks.first().copied() else {
        return outcome(9, false, "no control was issued");
    };
    let eff = ack.effective_tti.0 as usize;
    let log_switches = r.policies[..eff].iter().all(|&p| p == PolicyKind::MaxThroughput)
        && r.policies[eff..].iter().all(|&p| p == PolicyKind::ProportionalFair);
    // Grant signature: MT keeps serving the same few UEs, PF spreads.
    let distinct = |range: std::ops::Range<usize>| {
        let mut ids: Vec<u32> = r.allocations[range]
            .iter()
            .flat_map(|a| a.grants.iter().map(|g| g.ue_id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    };
    let span = 40;
    let (before, after) = (distinct(eff - span..eff), distinct(eff..eff + span));

    let len = eff as u32;
    let jain_of = |a: u32, b: u32| {
        let stats = r.stats_between(TtiIndex(a), TtiIndex(b)).unwrap();
        summarize(&stats, r.ues.len()).jain.unwrap_or(0.0)
    };
    let pre = jain_of(0, len);
    let post = jain_of(len, 2 * len);
    let pass = one_switch && log_switches && before < after && post > pre;
    outcome(
        9,
        pass,
        format!(
            "controls {}, ack effective TTI {}, policy log switches there: {log_switches}; \
             distinct UEs granted in {span} TTIs before/after {before}/{after}; \
             jain over [0,{len}) {pre:.4} vs [{len},{}) {post:.4}",
            r.acks.len(),
            ack.effective_tti,
            2 * len
        ),
    )
}

fn random_message(rng: &mut ChaCha8Rng) -> E2Message {
    let tti = TtiIndex(rng.random());
    let x = |rng: &mut ChaCha8Rng| round_sig(rng.random::<f64>() * 10f64.powi(rng.random_range(-5..6)));
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(0..=20);
            let ues = (0..n)
                .map(|_| {
                    UeKpi::new(
                        rng.random_range(0..64),
                        if rng.random() { Direction::Dl } else { Direction::Ul },
                        x(rng),
                        x(rng),
                        x(rng),
                        x(rng),
                    )
                })
                .collect();
            E2Message::Indication(Indication {
                tti,
                window: rng.random(),
                policy: PolicyKind::ALL[rng.random_range(0..3)],
                cell_throughput_mbps: x(rng),
                mean_delay_ms: rng.random_bool(0.9).then(|| x(rng)),
                jain: rng.random_bool(0.9).then(|| x(rng)),
                ues,
            })
        }
        1 => E2Message::Control(Control::new(tti, PolicyKind::ALL[rng.random_range(0..3)])),
        _ => E2Message::Ack(Ack {
            tti,
            accepted: rng.random(),
            effective_tti: TtiIndex(rng.random()),
            policy: PolicyKind::ALL[rng.random_range(0..3)],
        }),
    }
}

fn criterion_10() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let args = RunArgs {
            sweep: true,
            ues: Some(UeCounts(vec![1, 4, 10])),
            seed: vec![1, 2],
            out: d.path().to_path_buf(),
            quiet: true,
            ..Default::default()
        };
        assert!(run_experiment(&args).unwrap().success());
    }
    let same = ["summary.csv", "per_ue.csv"].iter().all(|f| {
        std::fs::read(dirs[0].path().join(f)).unwrap() == std::fs::read(dirs[1].path().join(f)).unwrap()
    });
    let cbr = ScenarioConfig {
        traffic: TrafficMode::Cbr { rate_mbps: 5.0 },
        duration_ttis: 2000,
        ..scenarios::heterogeneous(PolicyKind::ProportionalFair, 3)
    };
    let json_same = run(&cbr).unwrap().to_json() == run(&cbr).unwrap().to_json();

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 20_000;
    let failures = (0..n)
        .filter(|_| {
            let m = random_message(&mut rng);
            decode_message(&encode_message(&m)).ok().as_ref() != Some(&m)
        })
        .count();
    outcome(
        10,
        same && json_same && failures == 0,
        format!(
            "sweep CSVs byte-identical: {same}; run JSON identical: {json_same}; \
             {failures}/{n} codec round-trip failures"
        ),
    )
}

fn main() {
    let het = Heterogeneous::new(10);
    let outcomes = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(&het),
        criterion_4(&het),
        criterion_5(&het),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    let mut unexpected = Vec::new();
    for o in &outcomes {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let expected_red = EXPECTED_RED.contains(&o.id);
        let note = if expected_red { " (expected red, see README)" } else { "" };
        println!("criterion {:>2}: {verdict}{note}: {}", o.id, o.detail);
        if o.pass == expected_red {
            unexpected.push(o.id);
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria pass", outcomes.len());
    if !unexpected.is_empty() {
        eprintln!("criteria with unexpected outcome: {unexpected:?}");
        std::process::exit(1);
    }
}
