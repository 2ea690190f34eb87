//! Slot scheduler.
//!
//! Each granted data symbol carries the whole band (all PRBs) for a single
//! UE, so scheduling a slot means choosing which UE owns each DL data symbol
//! and each UL data symbol. The two directions are scheduled independently.

mod mt;
mod pf;
mod rr;

pub use mt::mt_allocate;
pub use pf::{pf_allocate, pf_priority};
pub use rr::rr_allocate;

use serde::{Deserialize, Serialize};

use crate::channel::transport_block_bits;
use crate::frame::{SlotFormat, SymbolRole, TtiIndex};
use crate::traffic::Direction;

/// Floor of the PF average rate, in bits per TTI.
pub const PF_EPSILON: f64 = 1.0;
pub const DEFAULT_PF_TIME_CONSTANT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "rr")]
    RoundRobin,
    #[serde(rename = "mt")]
    MaxThroughput,
    #[serde(rename = "pf")]
    ProportionalFair,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::RoundRobin,
        PolicyKind::MaxThroughput,
        PolicyKind::ProportionalFair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::RoundRobin => "rr",
            PolicyKind::MaxThroughput => "mt",
            PolicyKind::ProportionalFair => "pf",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rr" | "round_robin" => Ok(PolicyKind::RoundRobin),
            "mt" | "max_throughput" => Ok(PolicyKind::MaxThroughput),
            "pf" | "proportional_fair" => Ok(PolicyKind::ProportionalFair),
            other => Err(format!("unknown scheduling policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedPolicy {
    pub kind: PolicyKind,
    /// PF averaging window in TTIs.
    pub pf_time_constant: f64,
}

impl SchedPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            pf_time_constant: DEFAULT_PF_TIME_CONSTANT,
        }
    }
}

/// A UE eligible for grants in one direction of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulableUe {
    pub ue_id: u32,
    pub mcs: u8,
    /// Symbols requested this slot; the demand class capped by backlog.
    pub demand_symbols: u32,
    pub backlog_bits: u64,
    /// Exponential average of served bits per TTI.
    pub pf_avg_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grant {
    pub symbol: u8,
    pub ue_id: u32,
    pub direction: Direction,
    pub mcs: u8,
    pub tb_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub tti: TtiIndex,
    pub slot_format: SlotFormat,
    pub grants: Vec<Grant>,
}

impl Allocation {
    pub fn grants_for(&self, ue_id: u32, dir: Direction) -> impl Iterator<Item = &Grant> {
        self.grants
            .iter()
            .filter(move |g| g.ue_id == ue_id && g.direction == dir)
    }

    /// Total transport block bits granted to a UE in one direction.
    pub fn granted_bits(&self, ue_id: u32, dir: Direction) -> u64 {
        self.grants_for(ue_id, dir).map(|g| g.tb_bits).sum()
    }

    /// Checks the structural invariants against the UEs the slot was
    /// scheduled for. Returns one message per violation.
    pub fn violations(&self, dl_ues: &[SchedulableUe], ul_ues: &[SchedulableUe]) -> Vec<String> {
        let mut errs = Vec::new();
        let mut seen = [false; crate::frame::SYMBOLS_PER_SLOT];
        for g in &self.grants {
            let idx = usize::from(g.symbol);
            if idx >= seen.len() || std::mem::replace(&mut seen[idx], true) {
                errs.push(format!("symbol {idx} granted twice or out of range"));
                continue;
            }
            let want = match g.direction {
                Direction::Dl => SymbolRole::DlData,
                Direction::Ul => SymbolRole::UlData,
            };
            if self.slot_format.roles()[idx] != want {
                errs.push(format!("symbol {idx} role does not match {} grant", g.direction));
            }
        }
        for (dir, ues) in [(Direction::Dl, dl_ues), (Direction::Ul, ul_ues)] {
            for ue in ues {
                let n = self.grants_for(ue.ue_id, dir).count() as u32;
                if n > ue.demand_symbols {
                    errs.push(format!(
                        "UE {} got {n} {dir} symbols over demand {}",
                        ue.ue_id, ue.demand_symbols
                    ));
                }
            }
        }
        errs
    }
}

/// Round-robin position per direction: the last fully served UE id.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RrCursors {
    pub dl: Option<u32>,
    pub ul: Option<u32>,
}

impl RrCursors {
    fn get_mut(&mut self, dir: Direction) -> &mut Option<u32> {
        match dir {
            Direction::Dl => &mut self.dl,
            Direction::Ul => &mut self.ul,
        }
    }
}

/// Achievable bits of one full-band symbol at `mcs`.
pub fn symbol_rate(mcs: u8, n_prb: u32) -> u64 {
    transport_block_bits(mcs, 1, n_prb)
}

/// Schedules one slot. DL and UL data symbols are filled independently by
/// the policy's allocator; the callers pass only eligible UEs.
pub fn allocate(
    policy: &SchedPolicy,
    tti: TtiIndex,
    format: SlotFormat,
    dl_ues: &[SchedulableUe],
    ul_ues: &[SchedulableUe],
    cursors: &mut RrCursors,
    n_prb: u32,
) -> Allocation {
    let mut grants = Vec::with_capacity(crate::frame::FLEXIBLE_SYMBOLS);
    for (dir, ues, symbols) in [
        (Direction::Dl, dl_ues, format.dl_symbols()),
        (Direction::Ul, ul_ues, format.ul_symbols()),
    ] {
        let n_symbols = symbols.len() as u32;
        let order = match policy.kind {
            PolicyKind::RoundRobin => {
                let cursor = cursors.get_mut(dir);
                let (order, next) = rr_allocate(ues, n_symbols, *cursor);
                *cursor = next;
                order
            }
            PolicyKind::MaxThroughput => mt_allocate(ues, n_symbols),
            PolicyKind::ProportionalFair => {
                pf_allocate(ues, n_symbols, policy.pf_time_constant, n_prb)
            }
        };
        for (symbol, ue_id) in symbols.zip(order) {
            let mcs = ues
                .iter()
                .find(|u| u.ue_id == ue_id)
                .expect("allocator returns known UEs")
                .mcs;
            grants.push(Grant {
                symbol: symbol as u8,
                ue_id,
                direction: dir,
                mcs,
                tb_bits: symbol_rate(mcs, n_prb),
            });
        }
    }
    Allocation {
        tti,
        slot_format: format,
        grants,
    }
}

/// One EMA step, floored at [`PF_EPSILON`].
pub fn pf_update_average(avg: f64, served_bits: u64, time_constant: f64) -> f64 {
    let alpha = 1.0 / time_constant;
    ((1.0 - alpha) * avg + alpha * served_bits as f64).max(PF_EPSILON)
}

/// Updates every UE's average with what it was served in `allocation`,
/// zero included.
pub fn pf_update_averages(
    ues: &mut [SchedulableUe],
    allocation: &Allocation,
    dir: Direction,
    time_constant: f64,
) {
    for ue in ues {
        let served = allocation.granted_bits(ue.ue_id, dir);
        ue.pf_avg_rate = pf_update_average(ue.pf_avg_rate, served, time_constant);
    }
}

#[cfg(test)]
pub(crate) fn ue(ue_id: u32, mcs: u8, demand: u32, avg: f64) -> SchedulableUe {
    SchedulableUe {
        ue_id,
        mcs,
        demand_symbols: demand,
        backlog_bits: 1 << 20,
        pf_avg_rate: avg,
    }
}

/// Per-UE symbol counts of a granted sequence, indexed like `ues`.
#[cfg(test)]
pub(crate) fn counts(ues: &[SchedulableUe], order: &[u32]) -> Vec<u32> {
    ues.iter()
        .map(|u| order.iter().filter(|&&id| id == u.ue_id).count() as u32)
        .collect()
}
