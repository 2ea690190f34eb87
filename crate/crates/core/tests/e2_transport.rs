use std::net::TcpListener;
use std::thread;

use nrsim::cli::serve_sessions;
use nrsim::engine::run_with_endpoint;
use nrsim::ric::a1::A1Policy;
use nrsim::ric::transport::{serve_xapp, spawn_channel_xapp, E2Endpoint, TcpEndpoint};
use nrsim::scenarios;
use nrsim::sched::PolicyKind;
use nrsim::{run, RunResult, ScenarioConfig};

fn fairness_rule() -> A1Policy {
    A1Policy::from_toml_str(
        r#"
        mode = "adaptive"
        static_policy = "mt"
        evaluation_period = 10
        [[rules]]
        condition = "jain < 0.6"
        target = "pf"
        "#,
    )
    .unwrap()
}

fn closed_loop_scenario() -> ScenarioConfig {
    ScenarioConfig {
        duration_ttis: 2000,
        ..scenarios::heterogeneous(PolicyKind::MaxThroughput, 1)
    }
}

/// Checks that hold however late the xApp's reply arrives.
fn assert_single_switch(r: &RunResult) {
    assert!(r.violations.is_empty(), "{:?}", r.violations);
    assert_eq!(r.acks.len(), 1, "{:?}", r.acks);
    let ack = r.acks[0];
    assert!(ack.accepted);
    assert_eq!(ack.policy, PolicyKind::ProportionalFair);
    assert_eq!(ack.effective_tti.0, ack.tti.0 + 1);
    assert!(ack.effective_tti.0 >= 400, "decision needs ten reports");
    let eff = ack.effective_tti.0 as usize;
    assert!(r.policies[..eff].iter().all(|&p| p == PolicyKind::MaxThroughput));
    assert!(r.policies[eff..].iter().all(|&p| p == PolicyKind::ProportionalFair));
    assert_eq!(r.switches.len(), 1);
    assert_eq!(r.reports.len(), 2000 / 40);
}

#[test]
fn channel_xapp_switches_once() {
    let (mut gnb, handle) = spawn_channel_xapp(fairness_rule());
    let r = run_with_endpoint(&closed_loop_scenario(), Some(&mut gnb as &mut dyn E2Endpoint)).unwrap();
    drop(gnb);
    let agent = handle.join().unwrap().unwrap();
    assert_single_switch(&r);
    assert_eq!(agent.controls_sent, 1);
    assert_eq!(agent.state.last_window, Some(49));
    assert_eq!(agent.state.active_policy, Some(PolicyKind::ProportionalFair));
}

#[test]
fn tcp_xapp_switches_once() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || serve_xapp(&listener, fairness_rule()));

    let mut gnb = TcpEndpoint::connect(addr).unwrap();
    let r = run_with_endpoint(&closed_loop_scenario(), Some(&mut gnb as &mut dyn E2Endpoint)).unwrap();
    drop(gnb);
    let agent = server.join().unwrap().unwrap();
    assert_single_switch(&r);
    assert_eq!(agent.controls_sent, 1);
    assert_eq!(agent.acks.len(), 1);
    assert_eq!(agent.acks[0], r.acks[0]);
}

#[test]
fn inline_loop_switches_right_after_the_deciding_report() {
    let mut cfg = closed_loop_scenario();
    cfg.ric.a1_policy = Some(fairness_rule());
    let r = run(&cfg).unwrap();
    assert_single_switch(&r);
    // The tenth report closes TTI 399; the control lands on the next TTI.
    assert_eq!(r.acks[0].tti.0, 399);
    assert_eq!(r.acks[0].effective_tti.0, 400);
}

#[test]
fn static_mode_pins_the_policy_once() {
    let policy = A1Policy::from_toml_str("mode = \"static\"\nstatic_policy = \"rr\"\n").unwrap();
    let mut cfg = closed_loop_scenario();
    cfg.ric.a1_policy = Some(policy);
    let r = run(&cfg).unwrap();
    assert_eq!(r.acks.len(), 1);
    let eff = r.acks[0].effective_tti.0 as usize;
    assert_eq!(eff, 40);
    assert!(r.policies[eff..].iter().all(|&p| p == PolicyKind::RoundRobin));
}

#[test]
fn server_handles_concurrent_sessions() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let policy = fairness_rule();
    let server = thread::spawn(move || serve_sessions(&listener, &policy, Some(2)));

    let gnbs: Vec<_> = (0..2)
        .map(|_| {
            thread::spawn(move || {
                let mut ep = TcpEndpoint::connect(addr).unwrap();
                run_with_endpoint(&closed_loop_scenario(), Some(&mut ep as &mut dyn E2Endpoint)).unwrap()
            })
        })
        .collect();
    for g in gnbs {
        assert_single_switch(&g.join().unwrap());
    }
    server.join().unwrap().unwrap();
}

struct Scripted {
    replies: Vec<String>,
}

impl E2Endpoint for Scripted {
    fn send(&mut self, _line: &str) -> nrsim::Result<()> {
        Ok(())
    }

    fn poll(&mut self) -> nrsim::Result<Vec<String>> {
        Ok(std::mem::take(&mut self.replies))
    }
}

#[test]
fn garbage_from_the_xapp_is_a_parse_error() {
    let mut ep = Scripted {
        replies: vec!["CTL|not-a-number|pf".into()],
    };
    let err = run_with_endpoint(&closed_loop_scenario(), Some(&mut ep as &mut dyn E2Endpoint)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 1") && msg.contains("tti"), "{msg}");
}

#[test]
fn unknown_policy_is_refused_without_a_switch() {
    let mut ep = Scripted {
        replies: vec!["CTL|0|edf".into()],
    };
    let r = run_with_endpoint(&closed_loop_scenario(), Some(&mut ep as &mut dyn E2Endpoint)).unwrap();
    assert_eq!(r.acks.len(), 1);
    assert!(!r.acks[0].accepted);
    assert!(r.switches.is_empty());
    assert!(r.policies.iter().all(|&p| p == PolicyKind::MaxThroughput));
}
