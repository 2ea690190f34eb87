use super::SchedulableUe;

/// Cycles through UEs in id order starting after `cursor`, giving each its
/// full demand while symbols last. Channel quality plays no part.
///
/// Returns the granted UE id per symbol and the new cursor: the last UE
/// whose demand was fully met. A UE cut short by the end of the slot is
/// visited first next time.
pub fn rr_allocate(
    ues: &[SchedulableUe],
    n_symbols: u32,
    cursor: Option<u32>,
) -> (Vec<u32>, Option<u32>) {
    let mut by_id: Vec<&SchedulableUe> = ues.iter().collect();
    by_id.sort_by_key(|u| u.ue_id);
    let start = cursor
        .and_then(|c| by_id.iter().position(|u| u.ue_id > c))
        .unwrap_or(0);

    let mut order = Vec::with_capacity(n_symbols as usize);
    let mut remaining = n_symbols;
    let mut next_cursor = cursor;
    for ue in by_id.iter().cycle().skip(start).take(by_id.len()) {
        if remaining == 0 {
            break;
        }
        let granted = ue.demand_symbols.min(remaining);
        order.extend(std::iter::repeat_n(ue.ue_id, granted as usize));
        remaining -= granted;
        if granted == ue.demand_symbols {
            next_cursor = Some(ue.ue_id);
        }
    }
    (order, next_cursor)
}
