//! xApp rule engine and its in-process deployment.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::a1::{A1Mode, A1Policy};
use super::transport::E2Endpoint;
use super::wire::{decode_message, encode_message};
use super::{Ack, Control, E2Message, Indication};
use crate::error::{Error, Result};
use crate::sched::PolicyKind;

/// Reports kept for inspection.
pub const HISTORY_LEN: usize = 32;

/// Cell-level KPIs derived from one indication.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KpiSnapshot {
    pub window: u64,
    pub jain: Option<f64>,
    pub cell_throughput_mbps: f64,
    pub mean_delay_ms: Option<f64>,
    /// Smallest per-UE throughput, DL plus UL.
    pub min_ue_throughput_mbps: Option<f64>,
    pub mean_mcs: Option<f64>,
    pub mean_tti_allocation_pct: Option<f64>,
}

impl KpiSnapshot {
    pub fn from_indication(ind: &Indication) -> Self {
        let mut per_ue: Vec<(u32, f64)> = Vec::new();
        for u in &ind.ues {
            match per_ue.iter_mut().find(|(id, _)| *id == u.ue_id) {
                Some((_, t)) => *t += u.throughput_mbps,
                None => per_ue.push((u.ue_id, u.throughput_mbps)),
            }
        }
        let n = ind.ues.len() as f64;
        let mean = |f: fn(&super::UeKpi) -> f64| {
            (!ind.ues.is_empty()).then(|| ind.ues.iter().map(f).sum::<f64>() / n)
        };
        KpiSnapshot {
            window: ind.window,
            jain: ind.jain,
            cell_throughput_mbps: ind.cell_throughput_mbps,
            mean_delay_ms: ind.mean_delay_ms,
            min_ue_throughput_mbps: per_ue.iter().map(|&(_, t)| t).reduce(f64::min),
            mean_mcs: mean(|u| u.mean_mcs),
            mean_tti_allocation_pct: mean(|u| u.tti_allocation_pct),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct XappState {
    /// The xApp's view of the gNB policy: learned from the first report,
    /// updated when a control is sent and corrected by every ack.
    pub active_policy: Option<PolicyKind>,
    pub last_window: Option<u64>,
    pub last_switch_window: Option<u64>,
    pub static_control_sent: bool,
    pub history: VecDeque<KpiSnapshot>,
}

impl XappState {
    pub fn on_ack(&mut self, ack: &Ack) {
        self.active_policy = Some(ack.policy);
    }
}

/// Decides whether `report` calls for a policy change.
///
/// Reports must arrive in increasing window order; a stale or repeated
/// window is rejected.
pub fn xapp_evaluate(
    state: &mut XappState,
    report: &Indication,
    policy: &A1Policy,
) -> Result<Option<Control>> {
    if state.last_window.is_some_and(|w| report.window <= w) {
        return Err(Error::domain(format!(
            "report window {} not after last processed {:?}",
            report.window, state.last_window
        )));
    }
    state.last_window = Some(report.window);
    let kpi = KpiSnapshot::from_indication(report);
    if state.history.len() == HISTORY_LEN {
        state.history.pop_front();
    }
    state.history.push_back(kpi);
    let active = *state.active_policy.get_or_insert(report.policy);

    let target = match policy.mode {
        A1Mode::Static => {
            if state.static_control_sent || active == policy.static_policy {
                return Ok(None);
            }
            state.static_control_sent = true;
            policy.static_policy
        }
        A1Mode::Adaptive => {
            if !(report.window + 1).is_multiple_of(u64::from(policy.evaluation_period)) {
                return Ok(None);
            }
            if state
                .last_switch_window
                .is_some_and(|w| report.window - w < u64::from(policy.hysteresis))
            {
                return Ok(None);
            }
            match policy.first_match(&kpi) {
                Some(t) if t != active => t,
                _ => return Ok(None),
            }
        }
    };
    state.active_policy = Some(target);
    state.last_switch_window = Some(report.window);
    Ok(Some(Control::new(report.tti, target)))
}

/// xApp message handler, independent of transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XappAgent {
    pub policy: A1Policy,
    pub state: XappState,
    pub controls_sent: u64,
    pub acks: Vec<Ack>,
}

impl XappAgent {
    pub fn new(policy: A1Policy) -> Self {
        Self {
            policy,
            state: XappState::default(),
            controls_sent: 0,
            acks: Vec::new(),
        }
    }

    /// Handles one message from the gNB and returns the reply, if any.
    pub fn handle(&mut self, msg: &E2Message) -> Result<Option<E2Message>> {
        match msg {
            E2Message::Indication(ind) => {
                let ctrl = xapp_evaluate(&mut self.state, ind, &self.policy)?;
                self.controls_sent += u64::from(ctrl.is_some());
                Ok(ctrl.map(E2Message::Control))
            }
            E2Message::Ack(ack) => {
                self.state.on_ack(ack);
                self.acks.push(*ack);
                Ok(None)
            }
            E2Message::Control(_) => Err(Error::domain("xApp received a control message")),
        }
    }

    /// Serves lines until `recv` reports the end of the stream.
    pub fn serve(
        &mut self,
        mut recv: impl FnMut() -> Option<std::io::Result<String>>,
        mut send: impl FnMut(&str) -> Result<()>,
    ) -> Result<()> {
        let mut line_no = 0;
        while let Some(line) = recv() {
            let line = line?;
            line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let msg = super::wire::decode_line(&line, line_no)?;
            if let Some(reply) = self.handle(&msg)? {
                send(&encode_message(&reply))?;
            }
        }
        Ok(())
    }
}

/// The xApp running synchronously inside the engine: each indication is
/// evaluated as it is sent, and any control is ready on the next poll.
/// Messages still pass through the wire encoding.
#[derive(Debug, Clone)]
pub struct InlineXapp {
    pub agent: XappAgent,
    outbox: VecDeque<String>,
}

impl InlineXapp {
    pub fn new(policy: A1Policy) -> Self {
        Self {
            agent: XappAgent::new(policy),
            outbox: VecDeque::new(),
        }
    }
}

impl E2Endpoint for InlineXapp {
    fn send(&mut self, line: &str) -> Result<()> {
        let msg = decode_message(line)?;
        if let Some(reply) = self.agent.handle(&msg)? {
            self.outbox.push_back(encode_message(&reply));
        }
        Ok(())
    }

    fn poll(&mut self) -> Result<Vec<String>> {
        Ok(self.outbox.drain(..).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::TtiIndex;
    use crate::ric::UeKpi;
    use crate::traffic::Direction;

    fn report(window: u64, policy: PolicyKind, jain: f64) -> Indication {
        Indication {
            tti: TtiIndex((window as u32 + 1) * 40 - 1),
            window,
            policy,
            cell_throughput_mbps: 50.0,
            mean_delay_ms: Some(1.0),
            jain: Some(jain),
            ues: vec![
                UeKpi::new(0, Direction::Dl, 10.0, 1.0, 28.0, 100.0),
                UeKpi::new(0, Direction::Ul, 5.0, 1.0, 28.0, 50.0),
                UeKpi::new(1, Direction::Dl, 1.0, 1.0, 10.0, 0.0),
            ],
        }
    }

    fn adaptive(period: u32, hysteresis: u32, rules: &str) -> A1Policy {
        A1Policy::from_toml_str(&format!(
            "mode = \"adaptive\"\nstatic_policy = \"mt\"\nevaluation_period = {period}\nhysteresis = {hysteresis}\n{rules}"
        ))
        .unwrap()
    }

    const JAIN_TO_PF: &str = "[[rules]]\ncondition = \"jain < 0.6\"\ntarget = \"pf\"\n";

    #[test]
    fn low_jain_requests_pf() {
        let p = adaptive(1, 1, JAIN_TO_PF);
        let mut s = XappState::default();
        let ctrl = xapp_evaluate(&mut s, &report(0, PolicyKind::MaxThroughput, 0.45), &p).unwrap();
        assert_eq!(ctrl, Some(Control::new(TtiIndex(39), PolicyKind::ProportionalFair)));
    }

    #[test]
    fn high_jain_is_quiet() {
        let p = adaptive(1, 1, JAIN_TO_PF);
        let mut s = XappState::default();
        let ctrl = xapp_evaluate(&mut s, &report(0, PolicyKind::MaxThroughput, 0.9), &p).unwrap();
        assert_eq!(ctrl, None);
    }

    #[test]
    fn hysteresis_allows_one_switch() {
        // Two rules that would flip back and forth on every report.
        let rules = "[[rules]]\ncondition = \"jain < 0.6\"\ntarget = \"pf\"\n\
                     [[rules]]\ncondition = \"jain >= 0.6\"\ntarget = \"mt\"\n";
        let p = adaptive(1, 3, rules);
        let mut s = XappState::default();
        let sent: Vec<_> = [(0, 0.4), (1, 0.9), (2, 0.9)]
            .iter()
            .filter_map(|&(w, j)| xapp_evaluate(&mut s, &report(w, PolicyKind::MaxThroughput, j), &p).unwrap())
            .collect();
        assert_eq!(sent.len(), 1);
        // Window 3 is outside the hysteresis span of the switch at window 0.
        let late = xapp_evaluate(&mut s, &report(3, PolicyKind::ProportionalFair, 0.9), &p).unwrap();
        assert_eq!(late.map(|c| c.policy), Some("mt".to_owned()));
    }

    #[test]
    fn evaluates_on_period_boundaries_only() {
        let p = adaptive(4, 1, JAIN_TO_PF);
        let mut s = XappState::default();
        let fired: Vec<u64> = (0..8)
            .filter(|&w| {
                xapp_evaluate(&mut s, &report(w, PolicyKind::MaxThroughput, 0.1), &p)
                    .unwrap()
                    .is_some()
            })
            .collect();
        assert_eq!(fired, [3]);
    }

    #[test]
    fn permanently_true_rule_fires_within_one_period() {
        for period in 1..=6u64 {
            let p = adaptive(period as u32, 1, JAIN_TO_PF);
            let mut s = XappState::default();
            let first = (0..)
                .find(|&w| {
                    xapp_evaluate(&mut s, &report(w, PolicyKind::RoundRobin, 0.1), &p)
                        .unwrap()
                        .is_some()
                })
                .unwrap();
            assert!(first < period);
        }
    }

    #[test]
    fn static_mode_sends_once() {
        let p = A1Policy::static_policy(PolicyKind::RoundRobin);
        let mut s = XappState::default();
        let sent = (0..5)
            .filter_map(|w| xapp_evaluate(&mut s, &report(w, PolicyKind::MaxThroughput, 0.1), &p).unwrap())
            .count();
        assert_eq!(sent, 1);

        let mut s = XappState::default();
        assert_eq!(
            xapp_evaluate(&mut s, &report(0, PolicyKind::RoundRobin, 0.1), &p).unwrap(),
            None
        );
    }

    #[test]
    fn stale_report_is_rejected() {
        let p = adaptive(1, 1, JAIN_TO_PF);
        let mut s = XappState::default();
        xapp_evaluate(&mut s, &report(2, PolicyKind::ProportionalFair, 0.9), &p).unwrap();
        assert!(xapp_evaluate(&mut s, &report(2, PolicyKind::ProportionalFair, 0.9), &p).is_err());
        assert!(xapp_evaluate(&mut s, &report(1, PolicyKind::ProportionalFair, 0.9), &p).is_err());
    }

    #[test]
    fn negative_ack_restores_view() {
        let p = adaptive(1, 1, JAIN_TO_PF);
        let mut agent = XappAgent::new(p);
        let reply = agent
            .handle(&E2Message::Indication(report(0, PolicyKind::MaxThroughput, 0.3)))
            .unwrap();
        assert!(matches!(reply, Some(E2Message::Control(_))));
        assert_eq!(agent.state.active_policy, Some(PolicyKind::ProportionalFair));
        agent
            .handle(&E2Message::Ack(Ack {
                tti: TtiIndex(39),
                accepted: false,
                effective_tti: TtiIndex(40),
                policy: PolicyKind::MaxThroughput,
            }))
            .unwrap();
        assert_eq!(agent.state.active_policy, Some(PolicyKind::MaxThroughput));
    }

    #[test]
    fn snapshot_aggregates() {
        let k = KpiSnapshot::from_indication(&report(0, PolicyKind::MaxThroughput, 0.5));
        assert_eq!(k.min_ue_throughput_mbps, Some(1.0));
        assert_eq!(k.mean_mcs, Some(22.0));
        assert_eq!(k.mean_tti_allocation_pct, Some(50.0));
    }

    #[test]
    fn inline_xapp_goes_through_the_wire() {
        let mut x = InlineXapp::new(adaptive(1, 1, JAIN_TO_PF));
        let ind = E2Message::Indication(report(0, PolicyKind::MaxThroughput, 0.2));
        x.send(&encode_message(&ind)).unwrap();
        assert_eq!(x.poll().unwrap(), ["CTL|39|pf\n"]);
        assert!(x.poll().unwrap().is_empty());
        assert!(x.send("garbage").is_err());
    }
}
