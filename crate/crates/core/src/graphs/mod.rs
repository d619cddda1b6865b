//! Graphs, candidate solutions and the objective functions evaluated on them.

mod generators;
mod io;

pub use generators::{kings_subgraph, random_regular, unit_disk_edges};
pub use io::{load_graph, parse_graph, save_graph, write_graph};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Undirected simple graph with optional planar coordinates (micrometers or
/// lattice units, depending on the producer). Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    positions: Option<Vec<[f64; 2]>>,
}

impl Graph {
    /// Builds a graph from unordered vertex pairs. Self-loops, repeated pairs
    /// and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Dimension(format!(
                    "edge ({a},{b}) has an endpoint outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::Parameter(format!("self-loop on vertex {a}")));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Parameter(format!(
                "duplicate edge ({},{})",
                w[0].0, w[0].1
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &list {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            n,
            edges: list,
            adjacency,
            positions: None,
        })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
            positions: None,
        }
    }

    pub fn with_positions(mut self, positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.len() != self.n {
            return Err(Error::Dimension(format!(
                "{} positions for {} vertices",
                positions.len(),
                self.n
            )));
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Parameter("non-finite vertex position".into()));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(i, j)` with `i < j`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    /// True when `set` (sorted or not) induces a connected subgraph.
    pub fn is_connected_subset(&self, set: &[usize]) -> bool {
        if set.is_empty() {
            return true;
        }
        let mut inside = vec![false; self.n];
        for &v in set {
            inside[v] = true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![set[0]];
        seen[set[0]] = true;
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &u in self.neighbors(v) {
                if inside[u] && !seen[u] {
                    seen[u] = true;
                    reached += 1;
                    stack.push(u);
                }
            }
        }
        reached == inside.iter().filter(|&&b| b).count()
    }
}

/// A measured bit string; bit `i` belongs to vertex/qubit `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![true; n])
    }

    /// Bit `i` is bit `i` of `index` (little-endian in vertex order).
    pub fn from_index(index: usize, n: usize) -> Self {
        Self((0..n).map(|i| (index >> i) & 1 == 1).collect())
    }

    pub fn to_index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | (usize::from(b) << i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Vertices whose bit is set.
    pub fn ones_positions(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("unexpected character {other:?} in bit string")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(BitString)
    }
}

/// Assignment of one of `k` colors to every vertex. For `k = 2` this is a
/// MaxCut bipartition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coloring {
    labels: Vec<usize>,
    k: usize,
}

impl Coloring {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Parameter(format!(
                "color count must be >= 2, got {k}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Parameter(format!(
                "label {bad} out of range for k={k}"
            )));
        }
        Ok(Self { labels, k })
    }

    pub fn constant(n: usize, k: usize) -> Result<Self> {
        Self::new(vec![0; n], k)
    }

    /// Bipartition read off a bit string: `0 -> V+`, `1 -> V-`.
    pub fn from_bits(bits: &BitString) -> Self {
        Self {
            labels: bits.bits().iter().map(|&b| usize::from(b)).collect(),
            k: 2,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub(crate) fn set(&mut self, v: usize, color: usize) {
        debug_assert!(color < self.k);
        self.labels[v] = color;
    }
}

/// Result of checking a vertex subset against a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MisStatus {
    pub is_independent: bool,
    pub is_maximal: bool,
    pub size: usize,
}

/// A vertex subset with cached independence/maximality flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndependentSet {
    members: Vec<usize>,
    is_independent: bool,
    is_maximal: bool,
}

impl IndependentSet {
    /// Wraps `members` (any order, duplicates removed) and computes the flags
    /// against `g`.
    pub fn new(g: &Graph, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        let status = mis_status(g, &members)?;
        Ok(Self {
            members,
            is_independent: status.is_independent,
            is_maximal: status.is_maximal,
        })
    }

    pub fn empty(g: &Graph) -> Self {
        Self {
            members: Vec::new(),
            is_independent: true,
            is_maximal: g.n() == 0,
        }
    }

    pub fn from_mask(g: &Graph, mask: &[bool]) -> Result<Self> {
        if mask.len() != g.n() {
            return Err(Error::Dimension(format!(
                "mask of length {} for graph on {} vertices",
                mask.len(),
                g.n()
            )));
        }
        Self::new(
            g,
            mask.iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i))
                .collect(),
        )
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_independent(&self) -> bool {
        self.is_independent
    }

    pub fn is_maximal(&self) -> bool {
        self.is_maximal
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &v in &self.members {
            mask[v] = true;
        }
        mask
    }

    pub fn to_bits(&self, n: usize) -> BitString {
        BitString::new(self.mask(n))
    }

    /// Recomputes the flags against `g` and compares with the cached ones.
    pub fn flags_consistent(&self, g: &Graph) -> bool {
        match mis_status(g, &self.members) {
            Ok(s) => s.is_independent == self.is_independent && s.is_maximal == self.is_maximal,
            Err(_) => false,
        }
    }
}

/// Number of edges whose endpoints carry different labels.
pub fn cut_value(g: &Graph, c: &Coloring) -> Result<usize> {
    if c.len() != g.n() {
        return Err(Error::Dimension(format!(
            "coloring of length {} for graph on {} vertices",
            c.len(),
            g.n()
        )));
    }
    let labels = c.labels();
    Ok(g.edges()
        .iter()
        .filter(|&&(a, b)| labels[a] != labels[b])
        .count())
}

pub fn mis_status(g: &Graph, set: &[usize]) -> Result<MisStatus> {
    let mut inside = vec![false; g.n()];
    for &v in set {
        if v >= g.n() {
            return Err(Error::Dimension(format!(
                "vertex {v} outside graph on {} vertices",
                g.n()
            )));
        }
        inside[v] = true;
    }
    let size = inside.iter().filter(|&&b| b).count();
    let is_independent = g.edges().iter().all(|&(a, b)| !(inside[a] && inside[b]));
    let is_maximal = is_independent
        && (0..g.n()).all(|v| inside[v] || g.neighbors(v).iter().any(|&u| inside[u]));
    Ok(MisStatus {
        is_independent,
        is_maximal,
        size,
    })
}

/// Combinatorial Laplacian `D - A`.
pub fn laplacian(g: &Graph) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(g.n(), g.n());
    for &(a, b) in g.edges() {
        l[(a, b)] -= 1.0;
        l[(b, a)] -= 1.0;
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::new(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(Graph::new(3, [(0, 0)]), Err(Error::Parameter(_))));
        assert!(matches!(
            Graph::new(3, [(0, 1), (1, 0)]),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(Graph::new(3, [(0, 3)]), Err(Error::Dimension(_))));
        assert!(Graph::empty(2).with_positions(vec![[0.0, 0.0]]).is_err());
    }

    #[test]
    fn cut_examples() {
        let k3 = triangle();
        let c = Coloring::new(vec![0, 0, 1], 2).unwrap();
        assert_eq!(cut_value(&k3, &c).unwrap(), 2);
        assert_eq!(
            cut_value(&k3, &Coloring::constant(3, 3).unwrap()).unwrap(),
            0
        );
        let c4 = Graph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let alt = Coloring::new(vec![0, 1, 0, 1], 2).unwrap();
        assert_eq!(cut_value(&c4, &alt).unwrap(), 4);
        let short = Coloring::new(vec![0, 1], 2).unwrap();
        assert!(matches!(cut_value(&c4, &short), Err(Error::Dimension(_))));
    }

    #[test]
    fn coloring_validation() {
        assert!(Coloring::new(vec![0, 3], 3).is_err());
        assert!(Coloring::new(vec![0, 0], 1).is_err());
    }

    #[test]
    fn mis_status_examples() {
        let g = path3();
        let st = |s: &[usize]| mis_status(&g, s).unwrap();
        assert_eq!(
            st(&[0, 2]),
            MisStatus {
                is_independent: true,
                is_maximal: true,
                size: 2
            }
        );
        assert_eq!(
            st(&[0, 1]),
            MisStatus {
                is_independent: false,
                is_maximal: false,
                size: 2
            }
        );
        assert_eq!(
            st(&[1]),
            MisStatus {
                is_independent: true,
                is_maximal: true,
                size: 1
            }
        );
        assert_eq!(
            st(&[0]),
            MisStatus {
                is_independent: true,
                is_maximal: false,
                size: 1
            }
        );
        assert!(matches!(mis_status(&g, &[5]), Err(Error::Dimension(_))));
    }

    #[test]
    fn independent_set_flags() {
        let g = path3();
        let s = IndependentSet::new(&g, vec![2, 0, 0]).unwrap();
        assert_eq!(s.members(), &[0, 2]);
        assert!(s.is_independent() && s.is_maximal());
        assert!(s.flags_consistent(&g));
        assert!(!IndependentSet::empty(&g).is_maximal());
    }

    #[test]
    fn laplacian_examples() {
        let edge = Graph::new(2, [(0, 1)]).unwrap();
        assert_eq!(
            laplacian(&edge),
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );
        assert_eq!(laplacian(&Graph::empty(3)), DMatrix::zeros(3, 3));

        let l = laplacian(&triangle());
        let mut ev: Vec<f64> = l.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in ev.iter().zip([0.0, 3.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bitstring_text_and_index() {
        let b: BitString = "0110".parse().unwrap();
        assert_eq!(b.to_string(), "0110");
        assert_eq!(b.to_index(), 0b0110);
        assert_eq!(BitString::from_index(6, 4), b);
        assert_eq!(b.ones_positions(), vec![1, 2]);
        assert!("01x".parse::<BitString>().is_err());
    }

    #[test]
    fn connected_subsets() {
        let g = path3();
        assert!(g.is_connected_subset(&[0, 1, 2]));
        assert!(!g.is_connected_subset(&[0, 2]));
        assert!(g.is_connected_subset(&[1]));
    }
}
