use super::SchedulableUe;

/// Highest MCS first (lower id on ties), each UE taking its full demand
/// until the symbols run out.
pub fn mt_allocate(ues: &[SchedulableUe], n_symbols: u32) -> Vec<u32> {
    let mut ranked: Vec<&SchedulableUe> = ues.iter().collect();
    ranked.sort_by(|a, b| b.mcs.cmp(&a.mcs).then(a.ue_id.cmp(&b.ue_id)));

    let mut order = Vec::with_capacity(n_symbols as usize);
    let mut remaining = n_symbols;
    for ue in ranked {
        if remaining == 0 {
            break;
        }
        let granted = ue.demand_symbols.min(remaining);
        order.extend(std::iter::repeat_n(ue.ue_id, granted as usize));
        remaining -= granted;
    }
    order
}

#[cfg(test)]
mod tests {
    use super::super::{counts, rr_allocate, ue};
    use super::*;

    #[test]
    fn sort_then_fill() {
        let ues = [ue(0, 28, 2, 1.0), ue(1, 10, 2, 1.0), ue(2, 4, 2, 1.0)];
        assert_eq!(counts(&ues, &mt_allocate(&ues, 4)), [2, 2, 0]);
    }

    #[test]
    fn equal_mcs_is_id_ordered_fill() {
        let ues = [ue(3, 15, 2, 1.0), ue(1, 15, 3, 1.0), ue(2, 15, 1, 1.0)];
        assert_eq!(mt_allocate(&ues, 5), [1, 1, 1, 2, 3]);
        let (rr, _) = rr_allocate(&ues, 5, None);
        assert_eq!(mt_allocate(&ues, 5), rr);
    }

    #[test]
    fn best_channel_starves_the_other() {
        let ues = [ue(0, 4, 3, 1.0), ue(1, 28, 3, 1.0)];
        assert_eq!(mt_allocate(&ues, 3), [1, 1, 1]);
    }
}
