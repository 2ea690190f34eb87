use super::{symbol_rate, SchedulableUe};

/// Priority of a UE that already holds `granted` symbols in the current
/// slot: instantaneous rate over the average it would have if the slot
/// ended now.
pub fn pf_priority(rate: f64, avg: f64, granted: u32, time_constant: f64) -> f64 {
    rate / (avg + f64::from(granted) * rate / time_constant)
}

/// A PF candidate with a raw rate; lets the selection run on arbitrary
/// rates, not just table MCS values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PfCandidate {
    pub ue_id: u32,
    pub rate: f64,
    pub avg: f64,
    pub demand: u32,
}

/// Grants symbols one at a time to the UE with the highest priority among
/// those with unmet demand, lower id on ties.
pub fn pf_allocate(
    ues: &[SchedulableUe],
    n_symbols: u32,
    time_constant: f64,
    n_prb: u32,
) -> Vec<u32> {
    let candidates: Vec<PfCandidate> = ues
        .iter()
        .map(|u| PfCandidate {
            ue_id: u.ue_id,
            rate: symbol_rate(u.mcs, n_prb) as f64,
            avg: u.pf_avg_rate,
            demand: u.demand_symbols,
        })
        .collect();
    pf_select(&candidates, n_symbols, time_constant)
}

pub(crate) fn pf_select(candidates: &[PfCandidate], n_symbols: u32, time_constant: f64) -> Vec<u32> {
    let mut by_id: Vec<PfCandidate> = candidates.to_vec();
    by_id.sort_by_key(|c| c.ue_id);
    let mut granted = vec![0u32; by_id.len()];
    let mut order = Vec::with_capacity(n_symbols as usize);

    for _ in 0..n_symbols {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in by_id.iter().enumerate() {
            if granted[i] >= c.demand {
                continue;
            }
            let p = pf_priority(c.rate, c.avg, granted[i], time_constant);
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((i, p));
            }
        }
        let Some((i, _)) = best else { break };
        granted[i] += 1;
        order.push(by_id[i].ue_id);
    }
    order
}
