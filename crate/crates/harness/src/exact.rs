//! Exhaustive optima for small instances, used for approximation ratios.

use nnha_core::graphs::Graph;
use nnha_core::{Error, Result};

pub const MAXCUT_CAP: usize = 20;
pub const KCUT_CAP: usize = 10;
pub const MIS_CAP: usize = 20;

fn cap(g: &Graph, limit: usize, what: &str) -> Result<()> {
    if g.n() > limit {
        return Err(Error::Resource(format!(
            "exact {what} is capped at n = {limit}, graph has {}",
            g.n()
        )));
    }
    Ok(())
}

/// Maximum cut by Gray-code enumeration with vertex 0 fixed.
pub fn max_cut(g: &Graph) -> Result<usize> {
    cap(g, MAXCUT_CAP, "MaxCut")?;
    let n = g.n();
    if n < 2 {
        return Ok(0);
    }
    let mut side = vec![false; n];
    let mut cut = 0usize;
    let mut best = 0usize;
    for step in 1u64..(1u64 << (n - 1)) {
        // flip vertex 1 + (index of the lowest set bit)
        let v = 1 + step.trailing_zeros() as usize;
        let mut same = 0usize;
        for &w in g.neighbors(v) {
            if side[w] == side[v] {
                same += 1;
            }
        }
        let deg = g.degree(v);
        cut = cut + same - (deg - same);
        side[v] = !side[v];
        best = best.max(cut);
    }
    Ok(best)
}

/// Maximum k-cut by enumeration of `k^(n-1)` labelings with vertex 0 fixed.
pub fn max_kcut(g: &Graph, k: usize) -> Result<usize> {
    cap(g, KCUT_CAP, "Max k-Cut")?;
    if k < 2 {
        return Err(Error::Parameter(format!(
            "color count must be >= 2, got {k}"
        )));
    }
    let n = g.n();
    if n < 2 {
        return Ok(0);
    }
    let mut labels = vec![0usize; n];
    let mut best = 0;
    loop {
        let cut = g
            .edges()
            .iter()
            .filter(|&&(a, b)| labels[a] != labels[b])
            .count();
        best = best.max(cut);
        let mut i = 1;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return Ok(best);
        }
    }
}

/// Maximum independent set size by branch and bound: branch on a vertex of
/// largest remaining degree, take degree-0 vertices outright.
pub fn max_independent_set(g: &Graph) -> Result<usize> {
    cap(g, MIS_CAP, "MIS")?;
    let masks: Vec<u32> = (0..g.n())
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &w| m | (1 << w)))
        .collect();
    let all = if g.n() == 0 {
        0
    } else {
        u32::MAX >> (32 - g.n())
    };
    let mut best = 0;
    mis_search(&masks, all, 0, &mut best);
    Ok(best)
}

fn mis_search(masks: &[u32], remaining: u32, size: usize, best: &mut usize) {
    if size + remaining.count_ones() as usize <= *best {
        return;
    }
    if remaining == 0 {
        *best = size;
        return;
    }
    let mut pick = usize::MAX;
    let mut pick_deg = 0u32;
    let mut free = 0u32;
    let mut bits = remaining;
    while bits != 0 {
        let v = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let d = (masks[v] & remaining).count_ones();
        if d == 0 {
            free |= 1 << v;
        } else if pick == usize::MAX || d > pick_deg {
            pick = v;
            pick_deg = d;
        }
    }
    let size = size + free.count_ones() as usize;
    let remaining = remaining & !free;
    if pick == usize::MAX {
        *best = (*best).max(size);
        return;
    }
    mis_search(
        masks,
        remaining & !(1 << pick) & !masks[pick],
        size + 1,
        best,
    );
    mis_search(masks, remaining & !(1 << pick), size, best);
}

#[cfg(test)]
mod tests {
    use nnha_core::graphs::{cut_value, kings_subgraph, mis_status, random_regular, Coloring};

    use super::*;

    fn naive_max_cut(g: &Graph) -> usize {
        (0..1usize << g.n())
            .map(|z| {
                g.edges()
                    .iter()
                    .filter(|&&(a, b)| (z >> a) & 1 != (z >> b) & 1)
                    .count()
            })
            .max()
            .unwrap_or(0)
    }

    fn naive_mis(g: &Graph) -> usize {
        (0..1usize << g.n())
            .filter_map(|z| {
                let set: Vec<usize> = (0..g.n()).filter(|v| (z >> v) & 1 == 1).collect();
                mis_status(g, &set)
                    .unwrap()
                    .is_independent
                    .then_some(set.len())
            })
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn small_known_values() {
        let tri = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(max_cut(&tri).unwrap(), 2);
        assert_eq!(max_kcut(&tri, 3).unwrap(), 3);
        assert_eq!(max_independent_set(&tri).unwrap(), 1);
        let c4 = Graph::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(max_cut(&c4).unwrap(), 4);
        assert_eq!(max_independent_set(&c4).unwrap(), 2);
        assert_eq!(max_independent_set(&Graph::empty(7)).unwrap(), 7);
        assert_eq!(max_cut(&Graph::empty(1)).unwrap(), 0);
    }

    #[test]
    fn agrees_with_naive_enumeration() {
        for s in 0..6 {
            let g = random_regular(10, 3, s).unwrap();
            assert_eq!(max_cut(&g).unwrap(), naive_max_cut(&g));
            assert_eq!(max_independent_set(&g).unwrap(), naive_mis(&g));
            let k = kings_subgraph(3, 4, 0.25, s).unwrap();
            assert_eq!(max_independent_set(&k).unwrap(), naive_mis(&k));
            assert_eq!(max_cut(&k).unwrap(), naive_max_cut(&k));
        }
    }

    #[test]
    fn kcut_with_two_colors_is_max_cut() {
        let g = random_regular(8, 3, 2).unwrap();
        assert_eq!(max_kcut(&g, 2).unwrap(), max_cut(&g).unwrap());
        let best = max_kcut(&g, 3).unwrap();
        assert!(best >= max_cut(&g).unwrap());
        assert_eq!(
            cut_value(&g, &Coloring::constant(8, 3).unwrap()).unwrap(),
            0
        );
    }

    #[test]
    fn caps_are_enforced() {
        let g = Graph::empty(21);
        assert!(max_cut(&g).is_err());
        assert!(max_independent_set(&g).is_err());
        assert!(max_kcut(&Graph::empty(11), 3).is_err());
    }
}
