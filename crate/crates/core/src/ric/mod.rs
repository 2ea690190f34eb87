//! Near-RT RIC emulation.
//!
//! The gNB sends a KPI [`Indication`] every report window; an xApp answers
//! with a [`Control`] naming the scheduling policy it wants, and the gNB
//! confirms with an [`Ack`]. Messages travel as `|`-delimited text lines
//! (see [`wire`]) over any [`transport::E2Endpoint`].

pub mod a1;
pub mod transport;
pub mod wire;
pub mod xapp;

use serde::{Deserialize, Serialize};

use crate::frame::TtiIndex;
use crate::metrics::{CellSummary, UeStats};
use crate::sched::PolicyKind;
use crate::traffic::Direction;

pub use a1::{A1Mode, A1Policy, Comparator, Condition, KpiField, Rule};
pub use transport::{channel_pair, ChannelEndpoint, E2Endpoint, TcpEndpoint};
pub use wire::{decode_lines, decode_message, encode_message};
pub use xapp::{xapp_evaluate, InlineXapp, KpiSnapshot, XappAgent, XappState};

/// Rounds to 6 significant decimal digits, the precision carried on the wire.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeKpi {
    pub ue_id: u32,
    pub direction: Direction,
    pub throughput_mbps: f64,
    pub mean_delay_ms: f64,
    pub mean_mcs: f64,
    pub tti_allocation_pct: f64,
}

impl UeKpi {
    pub fn new(
        ue_id: u32,
        direction: Direction,
        throughput_mbps: f64,
        mean_delay_ms: f64,
        mean_mcs: f64,
        tti_allocation_pct: f64,
    ) -> Self {
        Self {
            ue_id,
            direction,
            throughput_mbps: round_sig(throughput_mbps),
            mean_delay_ms: round_sig(mean_delay_ms),
            mean_mcs: round_sig(mean_mcs),
            tti_allocation_pct: round_sig(tti_allocation_pct),
        }
    }
}

impl From<&UeStats> for UeKpi {
    fn from(s: &UeStats) -> Self {
        UeKpi::new(
            s.ue_id,
            s.direction,
            s.throughput_mbps,
            s.mean_delay_ms,
            s.mean_mcs,
            s.tti_allocation_pct,
        )
    }
}

/// KPIs of one report window, gNB to xApp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indication {
    /// Last TTI of the window.
    pub tti: TtiIndex,
    /// Window index, counted from 0 at the start of the run.
    pub window: u64,
    /// Policy in force when the window closed.
    pub policy: PolicyKind,
    pub cell_throughput_mbps: f64,
    pub mean_delay_ms: Option<f64>,
    pub jain: Option<f64>,
    pub ues: Vec<UeKpi>,
}

impl Indication {
    pub fn new(
        tti: TtiIndex,
        window: u64,
        policy: PolicyKind,
        summary: &CellSummary,
        stats: &[UeStats],
    ) -> Self {
        Self {
            tti,
            window,
            policy,
            cell_throughput_mbps: round_sig(summary.cell_throughput_mbps),
            mean_delay_ms: summary.avg_delay_ms.map(round_sig),
            jain: summary.jain.map(round_sig),
            ues: stats.iter().map(UeKpi::from).collect(),
        }
    }
}

/// Policy request, xApp to gNB. The name is free text so that the gNB can
/// reject names it does not know.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub tti: TtiIndex,
    pub policy: String,
}

impl Control {
    pub fn new(tti: TtiIndex, policy: PolicyKind) -> Self {
        Self {
            tti,
            policy: policy.name().to_owned(),
        }
    }
}

/// gNB reply to a [`Control`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    /// TTI at which the control was processed.
    pub tti: TtiIndex,
    pub accepted: bool,
    /// First TTI scheduled under `policy`.
    pub effective_tti: TtiIndex,
    /// Policy in force after processing the control.
    pub policy: PolicyKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum E2Message {
    Indication(Indication),
    Control(Control),
    Ack(Ack),
}

impl E2Message {
    pub fn tti(&self) -> TtiIndex {
        match self {
            E2Message::Indication(m) => m.tti,
            E2Message::Control(m) => m.tti,
            E2Message::Ack(m) => m.tti,
        }
    }
}
