//! Preset scenarios for the throughput, delay and fairness experiments.

use crate::config::ScenarioConfig;
use crate::metrics::capacity_bound_mbps;
use crate::sched::PolicyKind;
use crate::traffic::TrafficMode;

/// Demand class used by the saturated sweeps.
pub const SWEEP_DEMAND_CLASS: u8 = 3;
/// CBR load of the delay sweep as a fraction of one UE's capacity.
pub const DELAY_SWEEP_LOAD: f64 = 0.6;
/// Transmit power that spreads link qualities across the cell radius.
pub const HETEROGENEOUS_TX_POWER_DBM: f64 = 0.0;
pub const HETEROGENEOUS_N_UES: usize = 10;
pub const PER_USER_N_UES: usize = 7;
/// Enough power that every UE in the per-user cell stays in coverage while
/// link qualities still differ.
pub const PER_USER_TX_POWER_DBM: f64 = 5.0;

/// Default parameters with one UE count, policy and seed.
pub fn table1(n_ues: usize, policy: PolicyKind, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_ues,
        policy,
        seed,
        ..Default::default()
    }
}

/// Saturated throughput sweep cell: full buffer, every UE in the top
/// demand class.
pub fn throughput_sweep(n_ues: usize, policy: PolicyKind, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        ue_demand_classes: Some(vec![SWEEP_DEMAND_CLASS]),
        ..table1(n_ues, policy, seed)
    }
}

/// Throughput of a lone top-MCS UE in the sweep demand class, per direction.
pub fn single_ue_capacity_mbps(cfg: &ScenarioConfig) -> f64 {
    let slot_ms = crate::frame::slot_duration(cfg.numerology).expect("valid numerology");
    capacity_bound_mbps(u32::from(SWEEP_DEMAND_CLASS), cfg.n_prb, slot_ms)
}

/// Delay sweep cell: constant bit rate per UE and direction at 60 % of the
/// single-UE capacity.
pub fn delay_sweep(n_ues: usize, policy: PolicyKind, seed: u64) -> ScenarioConfig {
    let base = throughput_sweep(n_ues, policy, seed);
    let rate_mbps = DELAY_SWEEP_LOAD * single_ue_capacity_mbps(&base);
    ScenarioConfig {
        traffic: TrafficMode::Cbr { rate_mbps },
        ..base
    }
}

/// Ten saturated UEs whose link qualities range from the cell edge to the
/// cell centre.
pub fn heterogeneous(policy: PolicyKind, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        tx_power_dbm: HETEROGENEOUS_TX_POWER_DBM,
        ..throughput_sweep(HETEROGENEOUS_N_UES, policy, seed)
    }
}

/// Seven saturated UEs under PF with differing links, for the per-user DL/UL
/// breakdown.
pub fn per_user(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_ues: PER_USER_N_UES,
        tx_power_dbm: PER_USER_TX_POWER_DBM,
        ..heterogeneous(PolicyKind::ProportionalFair, seed)
    }
}
