use std::collections::BTreeSet;

use crate::model::Cell;

/// Every 4-connected subset of `allowed` that contains `root` and has at
/// most `max_size` cells, each exactly once (Redelmeier's method).
/// Enumeration stops after `cap` subsets when a cap is given.
pub fn connected_subsets(
    allowed: &BTreeSet<Cell>,
    root: Cell,
    max_size: usize,
    cap: Option<usize>,
) -> Vec<Vec<Cell>> {
    let mut out = Vec::new();
    if !allowed.contains(&root) || max_size == 0 {
        return out;
    }
    let mut current = vec![root];
    out.push(current.clone());
    let mut seen: BTreeSet<Cell> = BTreeSet::from([root]);
    let mut untried = Vec::new();
    for n in root.neighbors() {
        if allowed.contains(&n) && seen.insert(n) {
            untried.push(n);
        }
    }
    let cap = cap.unwrap_or(usize::MAX);
    grow(allowed, &mut current, untried, &seen, max_size, cap, &mut out);
    out
}

fn grow(
    allowed: &BTreeSet<Cell>,
    current: &mut Vec<Cell>,
    mut untried: Vec<Cell>,
    seen: &BTreeSet<Cell>,
    max_size: usize,
    cap: usize,
    out: &mut Vec<Vec<Cell>>,
) {
    if current.len() >= max_size {
        return;
    }
    while let Some(c) = untried.pop() {
        if out.len() >= cap {
            return;
        }
        current.push(c);
        out.push(current.clone());
        let mut next_seen = seen.clone();
        let mut next_untried = untried.clone();
        for n in c.neighbors() {
            if allowed.contains(&n) && next_seen.insert(n) {
                next_untried.push(n);
            }
        }
        grow(allowed, current, next_untried, &next_seen, max_size, cap, out);
        current.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::is_connected;

    fn rect(c: i32, r: i32) -> BTreeSet<Cell> {
        (0..r).flat_map(|row| (0..c).map(move |col| Cell::new(col, row))).collect()
    }

    /// Brute force over bitmasks.
    fn brute(allowed: &BTreeSet<Cell>, root: Cell, max: usize) -> BTreeSet<Vec<Cell>> {
        let cells: Vec<Cell> = allowed.iter().copied().collect();
        let mut out = BTreeSet::new();
        for mask in 1u32..(1 << cells.len()) {
            let sub: Vec<Cell> = (0..cells.len()).filter(|i| mask >> i & 1 == 1).map(|i| cells[i]).collect();
            if sub.len() <= max && sub.contains(&root) && is_connected(&sub) {
                out.insert(sub);
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_on_small_grids() {
        for (c, r, root, max) in [(3, 2, Cell::new(2, 0), 6), (3, 3, Cell::new(1, 1), 5), (4, 3, Cell::new(0, 0), 7)] {
            let allowed = rect(c, r);
            let got = connected_subsets(&allowed, root, max, None);
            let mut normalized: Vec<Vec<Cell>> = got
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    s.sort();
                    s
                })
                .collect();
            let n = normalized.len();
            normalized.sort();
            normalized.dedup();
            assert_eq!(n, normalized.len(), "duplicates");
            assert_eq!(normalized.into_iter().collect::<BTreeSet<_>>(), brute(&allowed, root, max));
        }
    }

    #[test]
    fn cap_limits_output() {
        assert_eq!(connected_subsets(&rect(4, 4), Cell::new(0, 0), 16, Some(10)).len(), 10);
        assert!(connected_subsets(&rect(2, 2), Cell::new(5, 5), 3, None).is_empty());
    }
}
