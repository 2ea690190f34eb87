//! TTI-stepped simulation loop.
//!
//! Each TTI runs, in order: packet arrivals, the DL/UL symbol split from
//! current demand, the slot format, allocation under the active policy,
//! queue draining with delivery stamps, PF average updates and logging.
//! The RIC mailbox is processed after the TTI, so a control handled at the
//! end of TTI `t` governs allocation from `t + 1` onward.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{draw_shadowing, link_quality, place_ues, LinkQuality, UePosition};
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::frame::{build_slot_format, split_flexible_symbols, NumerologyConfig, TtiIndex};
use crate::metrics::{
    collect_ue_stats, summarize, CellSummary, MeasurementWindow, PacketRecord, UeInfo, UeStats,
};
use crate::ric::transport::E2Endpoint;
use crate::ric::wire::{decode_line, encode_message};
use crate::ric::{Ack, Control, E2Message, Indication, InlineXapp};
use crate::rng::{self, Stream};
use crate::sched::{
    allocate, pf_update_average, symbol_rate, Allocation, PolicyKind, RrCursors, SchedPolicy,
    SchedulableUe, PF_EPSILON,
};
use crate::traffic::{drain, ArrivalProcess, DemandProfile, Direction, UeQueue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeState {
    pub ue_id: u32,
    pub position: UePosition,
    pub distance_m: f64,
    pub shadowing_db: f64,
    pub link: LinkQuality,
    pub profile: DemandProfile,
    /// Indexed by [`Direction::index`].
    pub queues: [UeQueue; 2],
    pub arrivals: [ArrivalProcess; 2],
    pub pf_avg: [f64; 2],
}

impl UeState {
    /// Bits of one full-band symbol at this UE's MCS.
    pub fn symbol_bits(&self, n_prb: u32) -> u64 {
        symbol_rate(self.link.mcs, n_prb)
    }

    fn demand_class(&self) -> u32 {
        u32::from(self.profile.symbols_per_slot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub config: ScenarioConfig,
    pub tti: TtiIndex,
    pub slot_ms: f64,
    pub ues: Vec<UeState>,
    pub policy: SchedPolicy,
    /// First TTI scheduled under the current policy.
    pub policy_since: TtiIndex,
    pub cursors: RrCursors,
    pub next_packet_id: u64,
}

/// What one TTI produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TtiOutcome {
    pub allocation: Allocation,
    pub policy: PolicyKind,
    pub delivered: Vec<PacketRecord>,
    /// Invariant violations detected in this TTI.
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySwitch {
    /// TTI at whose end the control was processed.
    pub tti: TtiIndex,
    pub effective_tti: TtiIndex,
    pub from: PolicyKind,
    pub to: PolicyKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub n_ues: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub cell: CellSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeDescriptor {
    pub ue_id: u32,
    pub demand_class: u8,
    pub distance_m: f64,
    pub snr_db: f64,
    pub cqi: u8,
    pub mcs: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub ues: Vec<UeDescriptor>,
    /// One entry per TTI.
    pub allocations: Vec<Allocation>,
    /// Policy in force for each TTI.
    pub policies: Vec<PolicyKind>,
    pub packets: Vec<PacketRecord>,
    pub window: MeasurementWindow,
    pub ue_stats: Vec<UeStats>,
    pub summary: RunSummary,
    pub switches: Vec<PolicySwitch>,
    pub reports: Vec<Indication>,
    pub acks: Vec<Ack>,
    pub violations: Vec<String>,
}

impl RunResult {
    pub fn ue_info(&self) -> Vec<UeInfo> {
        self.ues
            .iter()
            .map(|u| UeInfo {
                ue_id: u.ue_id,
                demand_class: u.demand_class,
            })
            .collect()
    }

    /// Per-UE statistics over an arbitrary TTI range of this run.
    pub fn stats_between(&self, start: TtiIndex, end: TtiIndex) -> Result<Vec<UeStats>> {
        let window = MeasurementWindow {
            start,
            end,
            slot_ms: self.window.slot_ms,
        };
        collect_ue_stats(&self.allocations, &self.packets, &self.ue_info(), &window)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("run result serializes")
    }
}

/// Builds the initial state: placement, link qualities, empty queues,
/// PF averages at ε and fresh RR cursors.
pub fn setup(config: &ScenarioConfig) -> Result<SimState> {
    config.validate()?;
    let n = config.n_ues;
    let slot_ms = NumerologyConfig::new(config.numerology)?.slot_duration_ms();
    let carrier = config.carrier();
    let positions = match &config.ue_distances_m {
        Some(d) => d.iter().map(|&x| UePosition { x, y: 0.0 }).collect(),
        None => place_ues(n, config.cell_radius_m, config.seed)?,
    };
    let shadowing = draw_shadowing(n, config.shadowing_std_db, config.seed)?;
    let mut traffic_rng = rng::stream(config.seed, Stream::Traffic);
    let packet_bits = u64::from(config.packet_size_bytes) * 8;

    let classes = config.ue_classes();
    let mut ues = Vec::with_capacity(n);
    for (i, (position, shadowing_db)) in positions.into_iter().zip(shadowing).enumerate() {
        let ue_id = i as u32;
        let profile = DemandProfile::new(classes[i]);
        let distance_m = position.distance();
        let link = link_quality(distance_m, shadowing_db, &carrier, config.cqi_backoff_db)?;
        let arrivals = Direction::BOTH.map(|dir| {
            ArrivalProcess::new(
                ue_id,
                dir,
                config.traffic,
                &profile,
                slot_ms,
                packet_bits,
                &mut traffic_rng,
            )
        });
        ues.push(UeState {
            ue_id,
            position,
            distance_m,
            shadowing_db,
            link,
            profile,
            queues: Default::default(),
            arrivals,
            pf_avg: [PF_EPSILON; 2],
        });
    }
    Ok(SimState {
        config: config.clone(),
        tti: TtiIndex(0),
        slot_ms,
        ues,
        policy: config.sched_policy(),
        policy_since: TtiIndex(0),
        cursors: RrCursors::default(),
        next_packet_id: 0,
    })
}

impl SimState {
    /// SHA-256 over the JSON serialization, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn schedulable(&self, dir: Direction) -> Vec<SchedulableUe> {
        let n_prb = self.config.n_prb;
        self.ues
            .iter()
            .filter(|u| u.link.schedulable)
            .filter_map(|u| {
                let backlog = u.queues[dir.index()].unsent_bits();
                (backlog > 0).then(|| SchedulableUe {
                    ue_id: u.ue_id,
                    mcs: u.link.mcs,
                    demand_symbols: u.demand_class().min(backlog.div_ceil(u.symbol_bits(n_prb)) as u32),
                    backlog_bits: backlog,
                    pf_avg_rate: u.pf_avg[dir.index()],
                })
            })
            .collect()
    }

    /// Advances one TTI.
    pub fn step_tti(&mut self) -> Result<TtiOutcome> {
        let tti = self.tti;
        let n_prb = self.config.n_prb;
        let packet_bytes = self.config.packet_size_bytes;

        for ue in &mut self.ues {
            let target = u64::from(ue.demand_class()) * ue.symbol_bits(n_prb);
            for dir in Direction::BOTH {
                let d = dir.index();
                let backlog = ue.queues[d].unsent_bits();
                let new = ue.arrivals[d].generate(
                    tti,
                    backlog,
                    target,
                    packet_bytes,
                    &mut self.next_packet_id,
                );
                ue.queues[d].extend(new);
            }
        }

        let dl = self.schedulable(Direction::Dl);
        let ul = self.schedulable(Direction::Ul);
        let demand = |ues: &[SchedulableUe]| ues.iter().map(|u| u.demand_symbols).sum::<u32>();
        let (n_dl, n_ul) = split_flexible_symbols(demand(&dl), demand(&ul));
        let format = build_slot_format(n_dl, n_ul)?;
        let allocation = allocate(&self.policy, tti, format, &dl, &ul, &mut self.cursors, n_prb);
        let mut violations = allocation.violations(&dl, &ul);

        let t_now = f64::from(tti.0 + 1) * self.slot_ms;
        let mut delivered = Vec::new();
        for ue in &mut self.ues {
            for dir in Direction::BOTH {
                let d = dir.index();
                let granted = allocation.granted_bits(ue.ue_id, dir);
                let q = &mut ue.queues[d];
                let before = q.delivered_bits() + q.head_sent_bits();
                let (done, _) = drain(q, granted, t_now);
                let sent = q.delivered_bits() + q.head_sent_bits() - before;
                if sent > granted {
                    violations.push(format!(
                        "UE {} {dir}: {sent} bits sent over {granted} granted",
                        ue.ue_id
                    ));
                }
                if !q.is_conserved() {
                    violations.push(format!("UE {} {dir}: queue bits not conserved", ue.ue_id));
                }
                delivered.extend(done.into_iter().map(|p| PacketRecord {
                    ue_id: p.packet.ue_id,
                    direction: p.packet.direction,
                    size_bits: p.packet.size_bits(),
                    t_t: p.packet.t_created,
                    t_r: p.t_received,
                }));
                ue.pf_avg[d] = pf_update_average(ue.pf_avg[d], granted, self.policy.pf_time_constant);
            }
        }
        let horizon = f64::from(self.config.duration_ttis) * self.slot_ms;
        for r in &delivered {
            if !(0.0 <= r.t_t && r.t_t <= r.t_r && r.t_r <= horizon) {
                violations.push(format!(
                    "packet of UE {} has t_t = {} and t_r = {} outside the run",
                    r.ue_id, r.t_t, r.t_r
                ));
            }
        }

        self.tti = tti.next();
        Ok(TtiOutcome {
            allocation,
            policy: self.policy.kind,
            delivered,
            violations,
        })
    }

    /// Handles a policy control at the current TTI boundary.
    ///
    /// A new policy takes effect at the next TTI and resets PF averages and
    /// RR cursors. A control naming the policy already in force changes
    /// nothing and is acknowledged with the TTI from which it has been in
    /// force, so repeated identical controls get identical acks. An unknown
    /// name is rejected.
    pub fn apply_control(&mut self, ctrl: &Control) -> (Ack, Option<PolicySwitch>) {
        let processed_at = TtiIndex(self.tti.0.saturating_sub(1));
        let current = self.policy.kind;
        let Ok(target) = ctrl.policy.parse::<PolicyKind>() else {
            let ack = Ack {
                tti: processed_at,
                accepted: false,
                effective_tti: self.policy_since,
                policy: current,
            };
            return (ack, None);
        };
        if target == current {
            let ack = Ack {
                tti: processed_at,
                accepted: true,
                effective_tti: self.policy_since,
                policy: current,
            };
            return (ack, None);
        }
        self.policy.kind = target;
        self.policy_since = self.tti;
        self.cursors = RrCursors::default();
        for ue in &mut self.ues {
            ue.pf_avg = [PF_EPSILON; 2];
        }
        let ack = Ack {
            tti: processed_at,
            accepted: true,
            effective_tti: self.tti,
            policy: target,
        };
        let switch = PolicySwitch {
            tti: processed_at,
            effective_tti: self.tti,
            from: current,
            to: target,
        };
        (ack, Some(switch))
    }
}

/// Applies a control to engine state.
pub fn gnb_apply_control(state: &mut SimState, ctrl: &Control) -> Ack {
    state.apply_control(ctrl).0
}

/// Runs a scenario. When the config carries an A1 policy, the xApp runs
/// in-process and synchronously, which keeps the run deterministic.
pub fn run(config: &ScenarioConfig) -> Result<RunResult> {
    match &config.ric.a1_policy {
        Some(policy) => {
            let mut xapp = InlineXapp::new(policy.clone());
            run_with_endpoint(config, Some(&mut xapp))
        }
        None => run_with_endpoint(config, None),
    }
}

/// Runs a scenario, exchanging E2 messages over `endpoint` if given.
pub fn run_with_endpoint(
    config: &ScenarioConfig,
    mut endpoint: Option<&mut dyn E2Endpoint>,
) -> Result<RunResult> {
    let mut state = setup(config)?;
    let duration = config.duration_ttis as usize;
    let period = config.ric.report_period_ttis;
    let ue_info: Vec<UeInfo> = state
        .ues
        .iter()
        .map(|u| UeInfo {
            ue_id: u.ue_id,
            demand_class: u.profile.symbols_per_slot,
        })
        .collect();

    let mut allocations = Vec::with_capacity(duration);
    let mut policies = Vec::with_capacity(duration);
    let mut packets = Vec::new();
    let mut violations = Vec::new();
    let mut reports = Vec::new();
    let mut acks = Vec::new();
    let mut switches = Vec::new();
    let mut window_alloc_start = 0;
    let mut window_pkt_start = 0;
    let mut line_no = 0;

    for _ in 0..duration {
        let out = state.step_tti()?;
        let tti = out.allocation.tti;
        violations.extend(out.violations.into_iter().map(|v| format!("TTI {tti}: {v}")));
        allocations.push(out.allocation);
        policies.push(out.policy);
        packets.extend(out.delivered);

        if (tti.0 + 1) % period == 0 {
            let window = MeasurementWindow {
                start: TtiIndex(tti.0 + 1 - period),
                end: tti.next(),
                slot_ms: state.slot_ms,
            };
            let stats = collect_ue_stats(
                &allocations[window_alloc_start..],
                &packets[window_pkt_start..],
                &ue_info,
                &window,
            )?;
            window_alloc_start = allocations.len();
            window_pkt_start = packets.len();
            let ind = Indication::new(
                tti,
                u64::from(tti.0 / period),
                state.policy.kind,
                &summarize(&stats, ue_info.len()),
                &stats,
            );
            if let Some(ep) = endpoint.as_deref_mut() {
                ep.send(&encode_message(&E2Message::Indication(ind.clone())))?;
            }
            reports.push(ind);
        }

        if let Some(ep) = endpoint.as_deref_mut() {
            for line in ep.poll()? {
                line_no += 1;
                let ctrl = match decode_line(&line, line_no)? {
                    E2Message::Control(c) => c,
                    other => {
                        violations.push(format!("TTI {tti}: unexpected message from xApp: {other:?}"));
                        continue;
                    }
                };
                let (ack, switch) = state.apply_control(&ctrl);
                ep.send(&encode_message(&E2Message::Ack(ack)))?;
                acks.push(ack);
                switches.extend(switch);
            }
        }
    }

    let warmup = config.effective_warmup();
    let window = MeasurementWindow {
        start: TtiIndex(warmup),
        end: TtiIndex(config.duration_ttis),
        slot_ms: state.slot_ms,
    };
    let ue_stats = collect_ue_stats(&allocations, &packets, &ue_info, &window)?;
    let summary = RunSummary {
        policy: config.policy,
        n_ues: config.n_ues,
        seed: config.seed,
        cell: summarize(&ue_stats, config.n_ues),
    };
    let ues = state
        .ues
        .iter()
        .map(|u| UeDescriptor {
            ue_id: u.ue_id,
            demand_class: u.profile.symbols_per_slot,
            distance_m: u.distance_m,
            snr_db: u.link.snr_db,
            cqi: u.link.cqi,
            mcs: u.link.mcs,
        })
        .collect();
    Ok(RunResult {
        config: config.clone(),
        ues,
        allocations,
        policies,
        packets,
        window,
        ue_stats,
        summary,
        switches,
        reports,
        acks,
        violations,
    })
}
