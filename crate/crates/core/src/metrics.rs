//! Throughput, delay, fairness and per-UE allocation statistics.
//!
//! Throughput is received packet bits over the measurement window; delay is
//! receive time minus creation time of each delivered packet. Packets still
//! in flight when a window closes count toward neither.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::channel::transport_block_bits;
use crate::error::{Error, Result};
use crate::frame::TtiIndex;
use crate::sched::Allocation;
use crate::traffic::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub ue_id: u32,
    pub direction: Direction,
    pub size_bits: u64,
    /// Creation time, ms.
    pub t_t: f64,
    /// Delivery time, ms.
    pub t_r: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThroughputAccumulator {
    pub rx_bits_total: u64,
    pub delivery_time_ms: f64,
}

impl ThroughputAccumulator {
    pub fn add(&mut self, record: &PacketRecord) {
        self.rx_bits_total += record.size_bits;
    }

    pub fn mbps(&self) -> Result<f64> {
        bits_to_mbps(self.rx_bits_total, self.delivery_time_ms)
    }
}

fn bits_to_mbps(bits: u64, window_ms: f64) -> Result<f64> {
    if !(window_ms > 0.0) {
        return Err(Error::domain(format!("window {window_ms} ms must be positive")));
    }
    Ok(bits as f64 / window_ms / 1e3)
}

/// Received bits over `window_ms`, in Mbps.
pub fn throughput(records: &[PacketRecord], window_ms: f64) -> Result<f64> {
    bits_to_mbps(records.iter().map(|r| r.size_bits).sum(), window_ms)
}

pub fn delay(record: &PacketRecord) -> Result<f64> {
    if record.t_r < record.t_t {
        return Err(Error::Invariant(format!(
            "packet received at {} ms before it was created at {} ms",
            record.t_r, record.t_t
        )));
    }
    Ok(record.t_r - record.t_t)
}

/// Mean delay in ms; `None` for an empty set.
pub fn mean_delay(records: &[PacketRecord]) -> Result<Option<f64>> {
    if records.is_empty() {
        return Ok(None);
    }
    let mut sum = 0.0;
    for r in records {
        sum += delay(r)?;
    }
    Ok(Some(sum / records.len() as f64))
}

/// Jain's fairness index `(Σx)² / (n·Σx²)`.
pub fn jain_index(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("Jain index of an empty set"));
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|x| x * x).sum();
    if !(sum_sq > 0.0) {
        return Err(Error::domain("Jain index needs at least one positive value"));
    }
    Ok(sum * sum / (values.len() as f64 * sum_sq))
}

/// A half-open TTI range `[start, end)` used as the averaging window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementWindow {
    pub start: TtiIndex,
    pub end: TtiIndex,
    pub slot_ms: f64,
}

impl MeasurementWindow {
    pub fn n_ttis(&self) -> u32 {
        self.end.0.saturating_sub(self.start.0)
    }

    pub fn duration_ms(&self) -> f64 {
        f64::from(self.n_ttis()) * self.slot_ms
    }

    pub fn contains_tti(&self, tti: TtiIndex) -> bool {
        (self.start..self.end).contains(&tti)
    }

    /// A packet belongs to the window if it completed in one of its TTIs,
    /// i.e. its delivery time lies in `(start, end]` slot boundaries.
    pub fn contains_delivery(&self, t_r: f64) -> bool {
        t_r > f64::from(self.start.0) * self.slot_ms && t_r <= f64::from(self.end.0) * self.slot_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeInfo {
    pub ue_id: u32,
    pub demand_class: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeStats {
    pub ue_id: u32,
    pub direction: Direction,
    pub demand_class: u8,
    pub throughput_mbps: f64,
    /// 0 when nothing was delivered.
    pub mean_delay_ms: f64,
    /// Mean MCS over granted symbols; 0 when never granted.
    pub mean_mcs: f64,
    /// Percentage of window TTIs with at least one grant.
    pub tti_allocation_pct: f64,
    pub mean_symbols_per_alloc: f64,
    pub delivered_packets: u64,
    pub served: bool,
}

#[derive(Default)]
struct Acc {
    rx_bits: u64,
    packets: u64,
    delay_sum: f64,
    mcs_sum: u64,
    symbols: u64,
    ttis: u64,
}

/// Per UE and direction statistics over `window`. `allocations` and
/// `records` may extend beyond the window; only the overlap is counted.
pub fn collect_ue_stats(
    allocations: &[Allocation],
    records: &[PacketRecord],
    ues: &[UeInfo],
    window: &MeasurementWindow,
) -> Result<Vec<UeStats>> {
    if !(window.duration_ms() > 0.0) {
        return Err(Error::domain("measurement window is empty"));
    }
    let index: HashMap<(u32, Direction), usize> = ues
        .iter()
        .enumerate()
        .flat_map(|(i, u)| Direction::BOTH.map(|d| ((u.ue_id, d), 2 * i + d.index())))
        .collect();
    let mut acc: Vec<Acc> = (0..2 * ues.len()).map(|_| Acc::default()).collect();

    for alloc in allocations.iter().filter(|a| window.contains_tti(a.tti)) {
        let mut touched: Vec<usize> = Vec::new();
        for g in &alloc.grants {
            if let Some(&i) = index.get(&(g.ue_id, g.direction)) {
                acc[i].mcs_sum += u64::from(g.mcs);
                acc[i].symbols += 1;
                if !touched.contains(&i) {
                    touched.push(i);
                }
            }
        }
        for i in touched {
            acc[i].ttis += 1;
        }
    }
    for r in records.iter().filter(|r| window.contains_delivery(r.t_r)) {
        if let Some(&i) = index.get(&(r.ue_id, r.direction)) {
            acc[i].rx_bits += r.size_bits;
            acc[i].packets += 1;
            acc[i].delay_sum += delay(r)?;
        }
    }

    let n_ttis = f64::from(window.n_ttis());
    let mut out = Vec::with_capacity(acc.len());
    for (u, pair) in ues.iter().zip(acc.chunks(2)) {
        for (dir, a) in Direction::BOTH.into_iter().zip(pair) {
            let ratio = |num: f64, den: u64| if den == 0 { 0.0 } else { num / den as f64 };
            out.push(UeStats {
                ue_id: u.ue_id,
                direction: dir,
                demand_class: u.demand_class,
                throughput_mbps: bits_to_mbps(a.rx_bits, window.duration_ms())?,
                mean_delay_ms: ratio(a.delay_sum, a.packets),
                mean_mcs: ratio(a.mcs_sum as f64, a.symbols),
                tti_allocation_pct: 100.0 * a.ttis as f64 / n_ttis,
                mean_symbols_per_alloc: ratio(a.symbols as f64, a.ttis),
                delivered_packets: a.packets,
                served: a.ttis > 0,
            });
        }
    }
    Ok(out)
}

/// Cell-level aggregates over a set of per-UE stats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    /// Sum of per-UE throughputs, DL plus UL.
    pub cell_throughput_mbps: f64,
    /// Cell throughput divided by the number of UEs.
    pub avg_ue_throughput_mbps: f64,
    /// Mean over every delivered packet; `None` if none were delivered.
    pub avg_delay_ms: Option<f64>,
    /// Jain index over the per-UE, per-direction throughputs.
    pub jain: Option<f64>,
}

pub fn summarize(stats: &[UeStats], n_ues: usize) -> CellSummary {
    let cell: f64 = stats.iter().map(|s| s.throughput_mbps).sum();
    let packets: u64 = stats.iter().map(|s| s.delivered_packets).sum();
    let delay_sum: f64 = stats
        .iter()
        .map(|s| s.mean_delay_ms * s.delivered_packets as f64)
        .sum();
    let thr: Vec<f64> = stats.iter().map(|s| s.throughput_mbps).collect();
    CellSummary {
        cell_throughput_mbps: cell,
        avg_ue_throughput_mbps: if n_ues == 0 { 0.0 } else { cell / n_ues as f64 },
        avg_delay_ms: (packets > 0).then(|| delay_sum / packets as f64),
        jain: jain_index(&thr).ok(),
    }
}

/// Highest throughput a single UE can see in one direction: every flexible
/// symbol of that direction at the top MCS.
pub fn capacity_bound_mbps(flexible_symbols: u32, n_prb: u32, slot_ms: f64) -> f64 {
    let bits = u64::from(flexible_symbols) * transport_block_bits(crate::channel::MAX_MCS, 1, n_prb);
    bits as f64 / slot_ms / 1e3
}

/// Ranks with ties sharing their average rank, 1-based.
fn average_ranks<T, F>(items: &[T], cmp: F) -> Vec<f64>
where
    F: Fn(&T, &T) -> std::cmp::Ordering,
{
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| cmp(&items[a], &items[b]));
    let mut ranks = vec![0.0; items.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && cmp(&items[idx[i]], &items[idx[j]]).is_eq() {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

/// Spearman correlation of two samples. `None` if either is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let ra = average_ranks(a, |x, y| x.total_cmp(y));
    let rb = average_ranks(b, |x, y| x.total_cmp(y));
    pearson(&ra, &rb)
}

/// Rank agreement between throughput and the lexicographic
/// (mean MCS, TTI allocation %, symbols per allocation) score.
pub fn allocation_rank_correlation(stats: &[UeStats]) -> Option<f64> {
    if stats.len() < 2 {
        return None;
    }
    let thr: Vec<f64> = stats.iter().map(|s| s.throughput_mbps).collect();
    let thr_ranks = average_ranks(&thr, |x, y| x.total_cmp(y));
    let score_ranks = average_ranks(stats, |x, y| {
        x.mean_mcs
            .total_cmp(&y.mean_mcs)
            .then(x.tti_allocation_pct.total_cmp(&y.tti_allocation_pct))
            .then(x.mean_symbols_per_alloc.total_cmp(&y.mean_symbols_per_alloc))
    });
    pearson(&thr_ranks, &score_ranks)
}
