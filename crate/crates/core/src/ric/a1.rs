//! A1-style policy document driving the xApp.
//!
//! ```toml
//! mode = "adaptive"          # or "static"
//! static_policy = "mt"       # used in static mode
//! evaluation_period = 1      # report windows between evaluations
//! hysteresis = 1             # minimum windows between two switches
//!
//! [[rules]]
//! condition = "jain < 0.6"   # field op threshold, op in < <= > >= (or ≤ ≥)
//! target = "pf"
//! ```
//!
//! Rules are tried in order and the first whose condition holds decides.
//! Condition fields: `jain`, `cell_throughput_mbps`, `mean_delay_ms`,
//! `min_ue_throughput_mbps`, `mean_mcs`, `mean_tti_allocation_pct`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::xapp::KpiSnapshot;
use crate::error::{Error, Result};
use crate::sched::PolicyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum A1Mode {
    Static,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpiField {
    Jain,
    CellThroughputMbps,
    MeanDelayMs,
    MinUeThroughputMbps,
    MeanMcs,
    MeanTtiAllocationPct,
}

impl KpiField {
    pub const ALL: [KpiField; 6] = [
        KpiField::Jain,
        KpiField::CellThroughputMbps,
        KpiField::MeanDelayMs,
        KpiField::MinUeThroughputMbps,
        KpiField::MeanMcs,
        KpiField::MeanTtiAllocationPct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KpiField::Jain => "jain",
            KpiField::CellThroughputMbps => "cell_throughput_mbps",
            KpiField::MeanDelayMs => "mean_delay_ms",
            KpiField::MinUeThroughputMbps => "min_ue_throughput_mbps",
            KpiField::MeanMcs => "mean_mcs",
            KpiField::MeanTtiAllocationPct => "mean_tti_allocation_pct",
        }
    }

    /// The field's value in a snapshot; `None` when undefined for the window.
    pub fn value(self, kpi: &KpiSnapshot) -> Option<f64> {
        match self {
            KpiField::Jain => kpi.jain,
            KpiField::CellThroughputMbps => Some(kpi.cell_throughput_mbps),
            KpiField::MeanDelayMs => kpi.mean_delay_ms,
            KpiField::MinUeThroughputMbps => kpi.min_ue_throughput_mbps,
            KpiField::MeanMcs => kpi.mean_mcs,
            KpiField::MeanTtiAllocationPct => kpi.mean_tti_allocation_pct,
        }
    }
}

impl FromStr for KpiField {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        KpiField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown KPI field `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
        }
    }
}

/// `field op threshold`. Stored in files as a single string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Condition {
    pub field: KpiField,
    pub op: Comparator,
    pub threshold: f64,
}

impl Condition {
    /// False when the field has no value for this snapshot.
    pub fn holds(&self, kpi: &KpiSnapshot) -> bool {
        self.field
            .value(kpi)
            .is_some_and(|v| self.op.holds(v, self.threshold))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.field.name(), self.op.symbol(), self.threshold)
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        let [field, op, threshold] = tokens[..] else {
            return Err(format!("condition `{s}` is not `field op threshold`"));
        };
        let op = match op {
            "<" => Comparator::Lt,
            "<=" | "≤" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" | "≥" => Comparator::Ge,
            other => return Err(format!("unknown comparator `{other}` in `{s}`")),
        };
        let threshold: f64 = threshold
            .parse()
            .map_err(|e| format!("threshold `{threshold}` in `{s}`: {e}"))?;
        if !threshold.is_finite() {
            return Err(format!("threshold in `{s}` must be finite"));
        }
        Ok(Condition {
            field: field.parse()?,
            op,
            threshold,
        })
    }
}

impl TryFrom<String> for Condition {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Condition> for String {
    fn from(c: Condition) -> String {
        c.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub condition: Condition,
    pub target: PolicyKind,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct A1Policy {
    pub mode: A1Mode,
    pub static_policy: PolicyKind,
    #[serde(default = "one")]
    pub evaluation_period: u32,
    #[serde(default = "one")]
    pub hysteresis: u32,
    #[serde(default)]
    pub rules: Vec<Rule>,
}

impl A1Policy {
    pub fn static_policy(policy: PolicyKind) -> Self {
        Self {
            mode: A1Mode::Static,
            static_policy: policy,
            evaluation_period: 1,
            hysteresis: 1,
            rules: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let policy: A1Policy = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.evaluation_period == 0 {
            errs.push("evaluation_period must be at least 1".to_owned());
        }
        if self.hysteresis == 0 {
            errs.push("hysteresis must be at least 1".to_owned());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Target of the first rule whose condition holds.
    pub fn first_match(&self, kpi: &KpiSnapshot) -> Option<PolicyKind> {
        self.rules
            .iter()
            .find(|r| r.condition.holds(kpi))
            .map(|r| r.target)
    }
}
