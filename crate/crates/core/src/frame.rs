//! NR frame arithmetic and the flexible (dynamic TDD) slot format.
//!
//! One TTI is one slot. A slot always carries 14 OFDM symbols (normal
//! cyclic prefix): symbol 0 is DL control, symbol 13 is UL control and the
//! 12 symbols in between are data symbols whose direction is chosen per
//! slot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SYMBOLS_PER_SLOT: usize = 14;
/// Data symbols between the DL and UL control symbols.
pub const FLEXIBLE_SYMBOLS: usize = 12;
pub const MAX_NUMEROLOGY: u8 = 4;
pub const SUBFRAME_MS: f64 = 1.0;
pub const FRAME_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumerologyConfig {
    mu: u8,
}

impl NumerologyConfig {
    pub fn new(mu: u8) -> Result<Self> {
        check_mu(mu)?;
        Ok(Self { mu })
    }

    pub fn mu(&self) -> u8 {
        self.mu
    }

    pub fn subcarrier_spacing_khz(&self) -> f64 {
        15.0 * f64::from(1u32 << self.mu)
    }

    pub fn symbols_per_slot(&self) -> usize {
        SYMBOLS_PER_SLOT
    }

    pub fn slots_per_subframe(&self) -> u32 {
        1 << self.mu
    }

    pub fn slot_duration_ms(&self) -> f64 {
        SUBFRAME_MS / f64::from(self.slots_per_subframe())
    }
}

fn check_mu(mu: u8) -> Result<()> {
    if mu > MAX_NUMEROLOGY {
        return Err(Error::domain(format!(
            "numerology {mu} outside 0..={MAX_NUMEROLOGY}"
        )));
    }
    Ok(())
}

/// Number of slots in a 1 ms subframe, `2^mu`.
pub fn slots_per_subframe(mu: u8) -> Result<u32> {
    Ok(NumerologyConfig::new(mu)?.slots_per_subframe())
}

/// Slot (TTI) duration in milliseconds.
pub fn slot_duration(mu: u8) -> Result<f64> {
    Ok(NumerologyConfig::new(mu)?.slot_duration_ms())
}

/// Slot index counted from simulation start.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TtiIndex(pub u32);

impl TtiIndex {
    pub fn value(self) -> u32 {
        self.0
    }

    pub fn next(self) -> Self {
        TtiIndex(self.0 + 1)
    }
}

impl std::fmt::Display for TtiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Start time of `tti` in milliseconds.
pub fn tti_to_time(tti: TtiIndex, numerology: NumerologyConfig) -> f64 {
    f64::from(tti.0) * numerology.slot_duration_ms()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymbolRole {
    DlControl,
    DlData,
    UlData,
    UlControl,
}

/// Roles of the 14 symbols of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotFormat {
    roles: [SymbolRole; SYMBOLS_PER_SLOT],
    n_dl: u8,
}

impl SlotFormat {
    pub fn roles(&self) -> &[SymbolRole; SYMBOLS_PER_SLOT] {
        &self.roles
    }

    pub fn n_dl_data(&self) -> usize {
        usize::from(self.n_dl)
    }

    pub fn n_ul_data(&self) -> usize {
        FLEXIBLE_SYMBOLS - self.n_dl_data()
    }

    /// Indices of the DL data symbols, in transmission order.
    pub fn dl_symbols(&self) -> std::ops::Range<usize> {
        1..1 + self.n_dl_data()
    }

    pub fn ul_symbols(&self) -> std::ops::Range<usize> {
        1 + self.n_dl_data()..SYMBOLS_PER_SLOT - 1
    }
}

impl Default for SlotFormat {
    fn default() -> Self {
        build_slot_format(6, 6).expect("balanced format is valid")
    }
}

/// `[DlControl] + n_dl × [DlData] + n_ul × [UlData] + [UlControl]`.
pub fn build_slot_format(n_dl_data: usize, n_ul_data: usize) -> Result<SlotFormat> {
    if n_dl_data + n_ul_data != FLEXIBLE_SYMBOLS {
        return Err(Error::Invariant(format!(
            "slot format needs {FLEXIBLE_SYMBOLS} data symbols, got {n_dl_data} DL + {n_ul_data} UL"
        )));
    }
    let mut roles = [SymbolRole::UlData; SYMBOLS_PER_SLOT];
    roles[0] = SymbolRole::DlControl;
    roles[SYMBOLS_PER_SLOT - 1] = SymbolRole::UlControl;
    for role in &mut roles[1..1 + n_dl_data] {
        *role = SymbolRole::DlData;
    }
    Ok(SlotFormat {
        roles,
        n_dl: n_dl_data as u8,
    })
}

/// Splits the 12 data symbols between DL and UL in proportion to demand.
///
/// Rounds half to even so that swapping the arguments swaps the result, then
/// guarantees at least one symbol to any direction with non-zero demand.
/// Zero total demand gives the balanced (6, 6) split.
pub fn split_flexible_symbols(dl_demand: u32, ul_demand: u32) -> (usize, usize) {
    let total = u64::from(dl_demand) + u64::from(ul_demand);
    if total == 0 {
        return (FLEXIBLE_SYMBOLS / 2, FLEXIBLE_SYMBOLS / 2);
    }
    let num = FLEXIBLE_SYMBOLS as u64 * u64::from(dl_demand);
    let (q, r) = (num / total, num % total);
    let mut n_dl = match (2 * r).cmp(&total) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    } as usize;
    if dl_demand > 0 && n_dl == 0 {
        n_dl = 1;
    }
    if ul_demand > 0 && n_dl == FLEXIBLE_SYMBOLS {
        n_dl = FLEXIBLE_SYMBOLS - 1;
    }
    (n_dl, FLEXIBLE_SYMBOLS - n_dl)
}
