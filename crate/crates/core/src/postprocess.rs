//! Shot-by-shot post-processing: steepest-ascent recoloring for (k-)cuts and
//! the greedy add / repair pipeline for maximal independent sets.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graphs::{cut_value, BitString, Coloring, Graph, IndependentSet};
use crate::samplers::ShotSet;
use crate::seed;

/// Move selection for [`greedy_flip_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlipMode {
    /// Apply the recoloring with the largest gain, ties broken at random.
    #[default]
    Steepest,
    /// Apply a uniformly random recoloring among those with positive gain.
    RandomImproving,
}

/// Steepest-ascent single-vertex recoloring until no move increases the cut.
pub fn greedy_flip(g: &Graph, c: &Coloring, seed: u64) -> Result<Coloring> {
    greedy_flip_with(g, c, FlipMode::Steepest, &mut seed::rng(seed))
}

pub fn greedy_flip_with<R: Rng + ?Sized>(
    g: &Graph,
    c: &Coloring,
    mode: FlipMode,
    rng: &mut R,
) -> Result<Coloring> {
    let n = g.n();
    if c.len() != n {
        return Err(Error::Dimension(format!(
            "coloring of length {} for graph on {n} vertices",
            c.len()
        )));
    }
    let k = c.k();
    let mut out = c.clone();
    // counts[v * k + color] = neighbours of v currently holding `color`
    let mut counts = vec![0usize; n * k];
    for &(a, b) in g.edges() {
        counts[a * k + out.labels()[b]] += 1;
        counts[b * k + out.labels()[a]] += 1;
    }
    let mut moves: Vec<(usize, usize)> = Vec::new();
    loop {
        moves.clear();
        let mut best_gain = 0usize;
        for v in 0..n {
            let own = counts[v * k + out.labels()[v]];
            for color in 0..k {
                let other = counts[v * k + color];
                if own <= other {
                    continue;
                }
                let gain = own - other;
                match mode {
                    FlipMode::Steepest => {
                        if gain > best_gain {
                            best_gain = gain;
                            moves.clear();
                        }
                        if gain == best_gain {
                            moves.push((v, color));
                        }
                    }
                    FlipMode::RandomImproving => moves.push((v, color)),
                }
            }
        }
        if moves.is_empty() {
            return Ok(out);
        }
        let (v, color) = moves[rng.random_range(0..moves.len())];
        let old = out.labels()[v];
        for &w in g.neighbors(v) {
            counts[w * k + old] -= 1;
            counts[w * k + color] += 1;
        }
        out.set(v, color);
    }
}

/// True when no single-vertex recoloring increases the cut.
pub fn is_one_local_optimal(g: &Graph, c: &Coloring) -> bool {
    let k = c.k();
    (0..g.n()).all(|v| {
        let mut counts = vec![0usize; k];
        for &w in g.neighbors(v) {
            counts[c.labels()[w]] += 1;
        }
        let own = counts[c.labels()[v]];
        counts.iter().all(|&other| other >= own)
    })
}

/// Raw and post-processed cut of every shot read as a bipartition. Shot `i`
/// breaks ties on substream `i` of `seed`.
pub fn flip_shots(g: &Graph, shots: &ShotSet, seed: u64) -> Result<Vec<(usize, usize)>> {
    shots
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let raw = Coloring::from_bits(z);
            let out = greedy_flip_with(
                g,
                &raw,
                FlipMode::Steepest,
                &mut seed::rng(seed::derive(seed, i as u64)),
            )?;
            Ok((cut_value(g, &raw)?, cut_value(g, &out)?))
        })
        .collect()
}

/// Adds uniformly random eligible vertices (outside the set, no neighbour
/// inside) until none remain.
pub fn greedy_add(g: &Graph, s: &IndependentSet, seed: u64) -> Result<IndependentSet> {
    greedy_add_with(g, s, &mut seed::rng(seed))
}

pub fn greedy_add_with<R: Rng + ?Sized>(
    g: &Graph,
    s: &IndependentSet,
    rng: &mut R,
) -> Result<IndependentSet> {
    if !s.is_independent() {
        return Err(Error::Contract(
            "greedy_add needs an independent input set; repair it first".into(),
        ));
    }
    if let Some(&v) = s.members().iter().find(|&&v| v >= g.n()) {
        return Err(Error::Dimension(format!(
            "vertex {v} out of range for n={}",
            g.n()
        )));
    }
    let mut member = s.mask(g.n());
    grow(g, &mut member, None, rng);
    IndependentSet::from_mask(g, &member)
}

/// Greedy repair of a raw measurement: a random maximal independent subset
/// of the induced subgraph `G[z]`, then greedy completion on all of `g`.
pub fn mis_repair(g: &Graph, z: &BitString, seed: u64) -> Result<IndependentSet> {
    mis_repair_with(g, z, &mut seed::rng(seed))
}

pub fn mis_repair_with<R: Rng + ?Sized>(
    g: &Graph,
    z: &BitString,
    rng: &mut R,
) -> Result<IndependentSet> {
    if z.len() != g.n() {
        return Err(Error::Dimension(format!(
            "bit string of length {} for graph on {} vertices",
            z.len(),
            g.n()
        )));
    }
    let mut member = vec![false; g.n()];
    grow(g, &mut member, Some(z.bits()), rng);
    grow(g, &mut member, None, rng);
    IndependentSet::from_mask(g, &member)
}

/// [`mis_repair`] of every shot, shot `i` on substream `i` of `seed`.
pub fn repair_shots(g: &Graph, shots: &ShotSet, seed: u64) -> Result<Vec<IndependentSet>> {
    shots
        .iter()
        .enumerate()
        .map(|(i, z)| mis_repair_with(g, z, &mut seed::rng(seed::derive(seed, i as u64))))
        .collect()
}

/// Grows an independent `member` mask by random eligible vertices, optionally
/// restricted to `allowed`. Work is linear in the edges touched.
fn grow<R: Rng + ?Sized>(g: &Graph, member: &mut [bool], allowed: Option<&[bool]>, rng: &mut R) {
    let n = g.n();
    let in_scope = |v: usize| allowed.is_none_or(|a| a[v]);
    let mut blocked = vec![false; n];
    for v in 0..n {
        if member[v] {
            blocked[v] = true;
            for &w in g.neighbors(v) {
                blocked[w] = true;
            }
        }
    }
    let mut eligible: Vec<usize> = (0..n).filter(|&v| !blocked[v] && in_scope(v)).collect();
    let mut slot = vec![usize::MAX; n];
    for (i, &v) in eligible.iter().enumerate() {
        slot[v] = i;
    }
    while !eligible.is_empty() {
        let v = eligible[rng.random_range(0..eligible.len())];
        member[v] = true;
        remove(v, &mut eligible, &mut slot);
        for &w in g.neighbors(v) {
            remove(w, &mut eligible, &mut slot);
        }
    }
}

fn remove(v: usize, eligible: &mut Vec<usize>, slot: &mut [usize]) {
    let i = slot[v];
    if i == usize::MAX {
        return;
    }
    let last = *eligible.last().expect("slot points into eligible");
    eligible.swap_remove(i);
    if last != v {
        slot[last] = i;
    }
    slot[v] = usize::MAX;
}
