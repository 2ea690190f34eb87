//! Static UE geometry and the SNR → CQI → MCS → transport block chain.
//!
//! Pathloss is the UMi street-canyon LOS close-in model with a static
//! per-UE log-normal shadowing term. There is no fast fading, so a UE's link
//! quality is fixed for the whole run.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub const MIN_UE_DISTANCE_M: f64 = 10.0;
pub const MAX_UES: usize = 64;
pub const MAX_CQI: u8 = 15;
pub const MAX_MCS: u8 = 28;
pub const SUBCARRIERS_PER_PRB: u32 = 12;

/// Raw MCS table as shipped with the crate.
pub const MCS_TABLE_DATA: &str = include_str!("../data/mcs_table_64qam.txt");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UePosition {
    pub x: f64,
    pub y: f64,
}

impl UePosition {
    pub fn distance(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkQuality {
    pub snr_db: f64,
    pub cqi: u8,
    pub mcs: u8,
    /// False for CQI 0: the UE is out of range and never granted.
    pub schedulable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsTableEntry {
    pub mcs_index: u8,
    pub modulation_order: u8,
    pub code_rate_x1024: u16,
    pub spectral_efficiency: f64,
}

impl McsTableEntry {
    pub fn code_rate(&self) -> f64 {
        f64::from(self.code_rate_x1024) / 1024.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    entries: Vec<McsTableEntry>,
}

impl McsTable {
    /// Parses `mcs_index,modulation_order,code_rate_x1024,spectral_efficiency`
    /// records. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |field: &str, reason: &str| Error::Parse {
                line: lineno + 1,
                field: field.to_string(),
                reason: reason.to_string(),
            };
            if fields.len() != 4 {
                return Err(bad(line, "expected 4 comma-separated fields"));
            }
            let entry = McsTableEntry {
                mcs_index: fields[0].parse().map_err(|_| bad(fields[0], "not an index"))?,
                modulation_order: fields[1]
                    .parse()
                    .map_err(|_| bad(fields[1], "not a modulation order"))?,
                code_rate_x1024: fields[2]
                    .parse()
                    .map_err(|_| bad(fields[2], "not a code rate"))?,
                spectral_efficiency: fields[3]
                    .parse()
                    .map_err(|_| bad(fields[3], "not a number"))?,
            };
            if usize::from(entry.mcs_index) != entries.len() {
                return Err(bad(fields[0], "MCS indices must be consecutive from 0"));
            }
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(Error::domain("empty MCS table"));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[McsTableEntry] {
        &self.entries
    }

    pub fn get(&self, mcs: u8) -> Option<&McsTableEntry> {
        self.entries.get(usize::from(mcs))
    }

    pub fn max_mcs(&self) -> u8 {
        (self.entries.len() - 1) as u8
    }
}

/// The shipped 64QAM table, parsed once.
pub fn mcs_table() -> &'static McsTable {
    static TABLE: OnceLock<McsTable> = OnceLock::new();
    TABLE.get_or_init(|| McsTable::parse(MCS_TABLE_DATA).expect("shipped MCS table parses"))
}

/// Spectral efficiency of CQI 1..=15 (4-bit CQI table, 64QAM). Index 0 is
/// "out of range".
pub const CQI_SPECTRAL_EFFICIENCY: [f64; 16] = [
    0.0, 0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223,
    3.9023, 4.5234, 5.1152, 5.5547,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierConfig {
    pub bandwidth_hz: f64,
    pub carrier_freq_ghz: f64,
    pub n_prb: u32,
    pub rbg_size: u32,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
}

impl Default for CarrierConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            carrier_freq_ghz: 3.5,
            n_prb: 24,
            rbg_size: 2,
            tx_power_dbm: 30.0,
            noise_figure_db: 5.0,
        }
    }
}

impl CarrierConfig {
    pub fn n_rbg(&self) -> u32 {
        self.n_prb.div_ceil(self.rbg_size)
    }

    /// Checks that the PRBs fit the channel at the given subcarrier spacing.
    pub fn validate(&self, subcarrier_spacing_khz: f64) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n_prb == 0 {
            errs.push("n_prb must be at least 1".to_string());
        }
        if self.rbg_size == 0 {
            errs.push("rbg_size must be at least 1".to_string());
        }
        if !(self.bandwidth_hz > 0.0) {
            errs.push("bandwidth_hz must be positive".to_string());
        }
        if !(self.carrier_freq_ghz > 0.0) {
            errs.push("carrier_freq_ghz must be positive".to_string());
        }
        let occupied =
            f64::from(self.n_prb) * f64::from(SUBCARRIERS_PER_PRB) * subcarrier_spacing_khz * 1e3;
        if occupied > self.bandwidth_hz {
            errs.push(format!(
                "{} PRBs at {subcarrier_spacing_khz} kHz occupy {occupied} Hz > bandwidth {} Hz",
                self.n_prb, self.bandwidth_hz
            ));
        }
        errs
    }
}

/// Places `n` UEs uniformly (by area) in the annulus between 10 m and `radius`.
pub fn place_ues(n: usize, radius: f64, seed: u64) -> Result<Vec<UePosition>> {
    if n == 0 || n > MAX_UES {
        return Err(Error::domain(format!("UE count {n} outside 1..={MAX_UES}")));
    }
    if !(radius > MIN_UE_DISTANCE_M) {
        return Err(Error::domain(format!(
            "cell radius {radius} m must exceed {MIN_UE_DISTANCE_M} m"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Placement);
    let (r0, r1) = (MIN_UE_DISTANCE_M * MIN_UE_DISTANCE_M, radius * radius);
    Ok((0..n)
        .map(|_| {
            let d = rng.random_range(r0..=r1).sqrt();
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            UePosition {
                x: d * theta.cos(),
                y: d * theta.sin(),
            }
        })
        .collect())
}

/// Static log-normal shadowing in dB, one draw per UE.
pub fn draw_shadowing(n: usize, sigma_db: f64, seed: u64) -> Result<Vec<f64>> {
    if sigma_db == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let normal = Normal::new(0.0, sigma_db)
        .map_err(|e| Error::domain(format!("shadowing sigma {sigma_db}: {e}")))?;
    let mut rng = rng::stream(seed, Stream::Shadowing);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// UMi street-canyon LOS pathloss, `32.4 + 21 log10(d) + 20 log10(fc)`.
pub fn pathloss_los_db(distance_m: f64, fc_ghz: f64) -> Result<f64> {
    if !(distance_m >= 1.0) {
        return Err(Error::domain(format!("distance {distance_m} m below 1 m")));
    }
    Ok(32.4 + 21.0 * distance_m.log10() + 20.0 * fc_ghz.log10())
}

/// Thermal noise over `bandwidth_hz` plus receiver noise figure.
pub fn noise_power_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

pub fn compute_snr(tx_power_dbm: f64, pathloss_db: f64, shadowing_db: f64, noise_dbm: f64) -> f64 {
    tx_power_dbm - pathloss_db - shadowing_db - noise_dbm
}

/// Highest CQI whose spectral efficiency the backed-off Shannon rate supports.
pub fn snr_to_cqi(snr_db: f64, backoff_db: f64) -> u8 {
    let capacity = (1.0 + 10f64.powf((snr_db - backoff_db) / 10.0)).log2();
    CQI_SPECTRAL_EFFICIENCY
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .find(|(_, &se)| se <= capacity)
        .map_or(0, |(cqi, _)| cqi as u8)
}

/// Highest MCS whose spectral efficiency does not exceed the CQI's. CQI 1
/// sits below MCS 0 and falls back to it; CQI 0 also maps to MCS 0 but the
/// caller treats it as unschedulable.
pub fn cqi_to_mcs(cqi: u8) -> Result<u8> {
    if cqi > MAX_CQI {
        return Err(Error::domain(format!("CQI {cqi} outside 0..={MAX_CQI}")));
    }
    if cqi == 0 {
        return Ok(0);
    }
    let target = CQI_SPECTRAL_EFFICIENCY[usize::from(cqi)];
    Ok(mcs_table()
        .entries()
        .iter()
        .filter(|e| e.spectral_efficiency <= target)
        .map(|e| e.mcs_index)
        .max()
        .unwrap_or(0))
}

/// Bits carried by `n_symbols` full-band OFDM symbols at `mcs`.
pub fn transport_block_bits(mcs: u8, n_symbols: u32, n_prb: u32) -> u64 {
    let se = mcs_table()
        .get(mcs.min(MAX_MCS))
        .expect("MCS within table")
        .spectral_efficiency;
    let res = f64::from(n_symbols) * f64::from(n_prb) * f64::from(SUBCARRIERS_PER_PRB);
    (res * se).floor() as u64
}

/// Link quality of a UE at `distance_m` with the given shadowing.
pub fn link_quality(
    distance_m: f64,
    shadowing_db: f64,
    carrier: &CarrierConfig,
    cqi_backoff_db: f64,
) -> Result<LinkQuality> {
    let pl = pathloss_los_db(distance_m, carrier.carrier_freq_ghz)?;
    let noise = noise_power_dbm(carrier.bandwidth_hz, carrier.noise_figure_db);
    let snr_db = compute_snr(carrier.tx_power_dbm, pl, shadowing_db, noise);
    let cqi = snr_to_cqi(snr_db, cqi_backoff_db);
    Ok(LinkQuality {
        snr_db,
        cqi,
        mcs: cqi_to_mcs(cqi)?,
        schedulable: cqi > 0,
    })
}
