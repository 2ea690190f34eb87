//! Per-UE demand profiles, packet arrivals and the DL/UL byte queues that
//! stand in for the RLC buffer.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::frame::TtiIndex;

pub const DEMAND_CLASSES: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "DL")]
    Dl,
    #[serde(rename = "UL")]
    Ul,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Dl, Direction::Ul];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Dl => "DL",
            Direction::Ul => "UL",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "DL" | "dl" => Ok(Direction::Dl),
            "UL" | "ul" => Ok(Direction::Ul),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    /// Per-slot symbol request cap, applied separately to DL and UL.
    pub symbols_per_slot: u8,
    /// Share of the UE's traffic that is DL. At 0.5 both directions carry
    /// the full configured load.
    pub direction_mix: f64,
}

impl DemandProfile {
    pub fn new(symbols_per_slot: u8) -> Self {
        Self {
            symbols_per_slot,
            direction_mix: 0.5,
        }
    }

    /// Load multiplier for `dir`: 1 for both directions at an even mix,
    /// falling to 0 for a direction the mix excludes.
    pub fn direction_weight(&self, dir: Direction) -> f64 {
        let share = match dir {
            Direction::Dl => self.direction_mix,
            Direction::Ul => 1.0 - self.direction_mix,
        };
        (2.0 * share).clamp(0.0, 1.0)
    }
}

/// Demand classes 1, 2, 3 assigned cyclically by UE id.
pub fn assign_demand_profiles(n_ues: usize) -> Vec<DemandProfile> {
    (0..n_ues)
        .map(|id| DemandProfile::new((id % usize::from(DEMAND_CLASSES)) as u8 + 1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    pub size_bytes: u32,
    /// Enqueue time in ms; the transmit epoch of the delay metric.
    pub t_created: f64,
    pub ue_id: u32,
    pub direction: Direction,
}

impl Packet {
    pub fn size_bits(&self) -> u64 {
        u64::from(self.size_bytes) * 8
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TrafficMode {
    /// Every queue is topped up to at least one slot's worth of demand.
    #[default]
    FullBuffer,
    /// Constant bit rate per UE and direction.
    Cbr { rate_mbps: f64 },
}

/// Packet arrivals for one UE in one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProcess {
    pub ue_id: u32,
    pub direction: Direction,
    mode: TrafficMode,
    slot_ms: f64,
    /// False when the demand profile excludes this direction.
    active: bool,
    bits_per_tti: f64,
    credit_bits: f64,
}

impl ArrivalProcess {
    /// A CBR source starts with a random credit in `[0, packet_bits)` so that
    /// sources do not all fire in the same TTI.
    pub fn new<R: Rng>(
        ue_id: u32,
        direction: Direction,
        mode: TrafficMode,
        profile: &DemandProfile,
        slot_ms: f64,
        packet_bits: u64,
        rng: &mut R,
    ) -> Self {
        let (bits_per_tti, credit_bits) = match mode {
            TrafficMode::FullBuffer => (0.0, 0.0),
            TrafficMode::Cbr { rate_mbps } => {
                let phase = rng.random_range(0.0..packet_bits as f64);
                let rate = rate_mbps * profile.direction_weight(direction);
                (rate * 1e6 * slot_ms * 1e-3, phase)
            }
        };
        Self {
            ue_id,
            direction,
            mode,
            slot_ms,
            active: profile.direction_weight(direction) > 0.0,
            bits_per_tti,
            credit_bits,
        }
    }

    pub fn mode(&self) -> TrafficMode {
        self.mode
    }

    /// Packets created at the start of `tti`.
    ///
    /// `backlog_bits` is the queue's unsent volume and `fill_target_bits` the
    /// full-buffer refill level (one slot's worth of demand).
    pub fn generate(
        &mut self,
        tti: TtiIndex,
        backlog_bits: u64,
        fill_target_bits: u64,
        packet_bytes: u32,
        next_id: &mut u64,
    ) -> Vec<Packet> {
        let t_start_ms = f64::from(tti.value()) * self.slot_ms;
        let packet_bits = u64::from(packet_bytes) * 8;
        let make = |next_id: &mut u64| {
            let p = Packet {
                id: *next_id,
                size_bytes: packet_bytes,
                t_created: t_start_ms,
                ue_id: self.ue_id,
                direction: self.direction,
            };
            *next_id += 1;
            p
        };
        let mut out = Vec::new();
        if !self.active {
            return out;
        }
        match self.mode {
            TrafficMode::FullBuffer => {
                let target = fill_target_bits.max(1);
                let mut backlog = backlog_bits;
                while backlog < target {
                    out.push(make(next_id));
                    backlog += packet_bits;
                }
            }
            TrafficMode::Cbr { .. } => {
                self.credit_bits += self.bits_per_tti;
                while self.credit_bits >= packet_bits as f64 {
                    self.credit_bits -= packet_bits as f64;
                    out.push(make(next_id));
                }
            }
        }
        out
    }
}

/// A packet handed to the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delivered {
    pub packet: Packet,
    pub t_received: f64,
}

/// FIFO of packets awaiting transmission. The head may be partially sent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UeQueue {
    pending: VecDeque<Packet>,
    head_sent_bits: u64,
    unsent_bits: u64,
    enqueued_bits: u64,
    delivered_bits: u64,
}

impl UeQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, packet: Packet) {
        self.unsent_bits += packet.size_bits();
        self.enqueued_bits += packet.size_bits();
        self.pending.push_back(packet);
    }

    pub fn extend(&mut self, packets: impl IntoIterator<Item = Packet>) {
        for p in packets {
            self.push(p);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn pending(&self) -> impl Iterator<Item = &Packet> {
        self.pending.iter()
    }

    /// Bits still to be transmitted, excluding the sent part of the head.
    pub fn unsent_bits(&self) -> u64 {
        self.unsent_bits
    }

    pub fn bytes_pending(&self) -> u64 {
        self.pending.iter().map(|p| u64::from(p.size_bytes)).sum()
    }

    /// Bits of the head packet already transmitted in earlier TTIs.
    pub fn head_sent_bits(&self) -> u64 {
        self.head_sent_bits
    }

    pub fn enqueued_bits(&self) -> u64 {
        self.enqueued_bits
    }

    pub fn delivered_bits(&self) -> u64 {
        self.delivered_bits
    }

    /// Enqueued volume equals delivered plus unsent plus the sent part of
    /// the head.
    pub fn is_conserved(&self) -> bool {
        self.enqueued_bits == self.delivered_bits + self.unsent_bits + self.head_sent_bits
    }
}

/// Spends up to `budget_bits` on the queue head-first.
///
/// Whole packets that fit are delivered with `t_received = t_now`. If the
/// budget runs out mid-packet, the remainder is applied to the head, which
/// completes in a later call. Returns the delivered packets and the bits put
/// into the unfinished head during this call. Unused budget is padding.
pub fn drain(queue: &mut UeQueue, budget_bits: u64, t_now: f64) -> (Vec<Delivered>, u64) {
    let mut budget = budget_bits;
    let mut delivered = Vec::new();
    let mut partial = 0;
    while budget > 0 {
        let Some(head) = queue.pending.front() else {
            break;
        };
        let need = head.size_bits() - queue.head_sent_bits;
        if budget >= need {
            budget -= need;
            queue.unsent_bits -= need;
            queue.delivered_bits += head.size_bits();
            queue.head_sent_bits = 0;
            let packet = queue.pending.pop_front().expect("head exists");
            delivered.push(Delivered {
                packet,
                t_received: t_now,
            });
        } else {
            queue.head_sent_bits += budget;
            queue.unsent_bits -= budget;
            partial = budget;
            budget = 0;
        }
    }
    (delivered, partial)
}
