//! Scenario configuration, loadable from TOML.
//!
//! Every field has a default, so a config file only lists what it changes.
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{CarrierConfig, MAX_UES, MIN_UE_DISTANCE_M};
use crate::error::{Error, Result};
use crate::frame::NumerologyConfig;
use crate::ric::a1::A1Policy;
use crate::sched::{PolicyKind, SchedPolicy, DEFAULT_PF_TIME_CONSTANT};
use crate::traffic::{TrafficMode, DEMAND_CLASSES};

pub const DEFAULT_WARMUP_TTIS: u32 = 400;
pub const DEFAULT_REPORT_PERIOD_TTIS: u32 = 40;
/// Largest per-slot symbol demand an override may request.
pub const MAX_DEMAND_CLASS: u8 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RicConfig {
    /// TTIs per KPI indication.
    pub report_period_ttis: u32,
    /// Runs the in-process xApp with this policy when set.
    pub a1_policy: Option<A1Policy>,
}

impl Default for RicConfig {
    fn default() -> Self {
        Self {
            report_period_ttis: DEFAULT_REPORT_PERIOD_TTIS,
            a1_policy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub bandwidth_mhz: f64,
    pub numerology: u8,
    pub carrier_freq_ghz: f64,
    pub packet_size_bytes: u32,
    pub n_gnb: u32,
    pub n_ues: usize,
    pub duration_ttis: u32,
    /// Number of demand classes; UE `i` gets class `i % n + 1`.
    pub demand_classes: u8,
    pub mcs_table: String,
    pub channel_model: String,
    pub n_prb: u32,
    pub rbg_size: u32,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub cell_radius_m: f64,
    pub shadowing_std_db: f64,
    pub cqi_backoff_db: f64,
    pub seed: u64,
    pub policy: PolicyKind,
    pub pf_time_constant: f64,
    pub traffic: TrafficMode,
    pub warmup_ttis: u32,
    /// Per-UE demand classes. A single entry applies to every UE.
    pub ue_demand_classes: Option<Vec<u8>>,
    /// Fixed UE distances in metres, replacing random placement.
    pub ue_distances_m: Option<Vec<f64>>,
    pub ric: RicConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            bandwidth_mhz: 20.0,
            numerology: 2,
            carrier_freq_ghz: 3.5,
            packet_size_bytes: 1000,
            n_gnb: 1,
            n_ues: 7,
            duration_ttis: 12_000,
            demand_classes: DEMAND_CLASSES,
            mcs_table: "64qam".into(),
            channel_model: "umi_los".into(),
            n_prb: 24,
            rbg_size: 2,
            tx_power_dbm: 30.0,
            noise_figure_db: 5.0,
            cell_radius_m: 200.0,
            shadowing_std_db: 4.0,
            cqi_backoff_db: 6.0,
            seed: 1,
            policy: PolicyKind::ProportionalFair,
            pf_time_constant: DEFAULT_PF_TIME_CONSTANT,
            traffic: TrafficMode::FullBuffer,
            warmup_ttis: DEFAULT_WARMUP_TTIS,
            ue_demand_classes: None,
            ue_distances_m: None,
            ric: RicConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn carrier(&self) -> CarrierConfig {
        CarrierConfig {
            bandwidth_hz: self.bandwidth_mhz * 1e6,
            carrier_freq_ghz: self.carrier_freq_ghz,
            n_prb: self.n_prb,
            rbg_size: self.rbg_size,
            tx_power_dbm: self.tx_power_dbm,
            noise_figure_db: self.noise_figure_db,
        }
    }

    pub fn sched_policy(&self) -> SchedPolicy {
        SchedPolicy {
            kind: self.policy,
            pf_time_constant: self.pf_time_constant,
        }
    }

    /// Warm-up actually applied: the configured value, or 0 when the run is
    /// too short to leave a measurement window after it.
    pub fn effective_warmup(&self) -> u32 {
        if self.duration_ttis > self.warmup_ttis {
            self.warmup_ttis
        } else {
            0
        }
    }

    /// Demand class of every UE.
    pub fn ue_classes(&self) -> Vec<u8> {
        match self.ue_demand_classes.as_deref() {
            Some([k]) => vec![*k; self.n_ues],
            Some(list) => list.to_vec(),
            None => (0..self.n_ues)
                .map(|i| (i % usize::from(self.demand_classes.max(1))) as u8 + 1)
                .collect(),
        }
    }

    /// Checks every field and reports all offenses at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_gnb != 1 {
            errs.push(format!("n_gnb = {}: only a single gNB is supported", self.n_gnb));
        }
        if self.n_ues == 0 || self.n_ues > MAX_UES {
            errs.push(format!("n_ues = {} outside 1..={MAX_UES}", self.n_ues));
        }
        if self.duration_ttis == 0 {
            errs.push("duration_ttis must be at least 1".into());
        }
        if self.packet_size_bytes == 0 {
            errs.push("packet_size_bytes must be positive".into());
        }
        if self.demand_classes == 0 || self.demand_classes > MAX_DEMAND_CLASS {
            errs.push(format!(
                "demand_classes = {} outside 1..={MAX_DEMAND_CLASS}",
                self.demand_classes
            ));
        }
        if self.mcs_table != "64qam" {
            errs.push(format!("mcs_table `{}` unsupported (only `64qam`)", self.mcs_table));
        }
        if self.channel_model != "umi_los" {
            errs.push(format!(
                "channel_model `{}` unsupported (only `umi_los`)",
                self.channel_model
            ));
        }
        match NumerologyConfig::new(self.numerology) {
            Ok(num) => errs.extend(self.carrier().validate(num.subcarrier_spacing_khz())),
            Err(e) => errs.push(e.to_string()),
        }
        if !(self.carrier_freq_ghz > 0.0) {
            errs.push(format!("carrier_freq_ghz = {} must be positive", self.carrier_freq_ghz));
        }
        if !self.tx_power_dbm.is_finite() || !self.noise_figure_db.is_finite() {
            errs.push("tx_power_dbm and noise_figure_db must be finite".into());
        }
        if !(self.cell_radius_m > MIN_UE_DISTANCE_M) || !self.cell_radius_m.is_finite() {
            errs.push(format!(
                "cell_radius_m = {} must exceed {MIN_UE_DISTANCE_M}",
                self.cell_radius_m
            ));
        }
        if !(self.shadowing_std_db >= 0.0) || !self.shadowing_std_db.is_finite() {
            errs.push(format!(
                "shadowing_std_db = {} must be finite and non-negative",
                self.shadowing_std_db
            ));
        }
        if !(self.cqi_backoff_db >= 0.0) {
            errs.push(format!("cqi_backoff_db = {} must be non-negative", self.cqi_backoff_db));
        }
        if !(self.pf_time_constant >= 1.0) {
            errs.push(format!("pf_time_constant = {} must be at least 1", self.pf_time_constant));
        }
        if let TrafficMode::Cbr { rate_mbps } = self.traffic {
            if !(rate_mbps >= 0.0) || !rate_mbps.is_finite() {
                errs.push(format!("cbr rate_mbps = {rate_mbps} must be finite and non-negative"));
            }
        }
        if let Some(list) = &self.ue_demand_classes {
            if list.len() != 1 && list.len() != self.n_ues {
                errs.push(format!(
                    "ue_demand_classes has {} entries; expected 1 or n_ues = {}",
                    list.len(),
                    self.n_ues
                ));
            }
            if let Some(k) = list.iter().find(|&&k| k == 0 || k > MAX_DEMAND_CLASS) {
                errs.push(format!("ue_demand_classes entry {k} outside 1..={MAX_DEMAND_CLASS}"));
            }
        }
        if let Some(list) = &self.ue_distances_m {
            if list.len() != self.n_ues {
                errs.push(format!(
                    "ue_distances_m has {} entries; expected n_ues = {}",
                    list.len(),
                    self.n_ues
                ));
            }
            if let Some(d) = list
                .iter()
                .find(|&&d| !(MIN_UE_DISTANCE_M..=self.cell_radius_m).contains(&d))
            {
                errs.push(format!(
                    "ue_distances_m entry {d} outside [{MIN_UE_DISTANCE_M}, {}]",
                    self.cell_radius_m
                ));
            }
        }
        if self.ric.report_period_ttis == 0 {
            errs.push("ric.report_period_ttis must be at least 1".into());
        }
        if let Some(policy) = &self.ric.a1_policy {
            if let Err(Error::Config(e)) = policy.validate() {
                errs.extend(e.into_iter().map(|m| format!("ric.a1_policy: {m}")));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}
