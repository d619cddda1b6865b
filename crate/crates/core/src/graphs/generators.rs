use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::Graph;
use crate::error::{Error, Result};
use crate::seed;

const MAX_PAIRING_ATTEMPTS: usize = 100_000;
const MAX_LATTICE_ATTEMPTS: u64 = 64;

/// Uniform-ish random `degree`-regular simple graph from the pairing
/// (configuration) model. Any loop or repeated pair discards the whole
/// matching and a new one is drawn.
pub fn random_regular(n: usize, degree: usize, seed: u64) -> Result<Graph> {
    if (n * degree) % 2 == 1 {
        return Err(Error::Parameter(format!(
            "no {degree}-regular graph on {n} vertices (n*degree is odd)"
        )));
    }
    if degree > 0 && degree >= n {
        return Err(Error::Parameter(format!(
            "degree {degree} must be below n={n}"
        )));
    }
    if degree == 0 {
        return Ok(Graph::empty(n));
    }

    let mut rng = seed::rng(seed);
    let mut points: Vec<usize> = (0..n)
        .flat_map(|v| std::iter::repeat_n(v, degree))
        .collect();
    'attempt: for _ in 0..MAX_PAIRING_ATTEMPTS {
        points.shuffle(&mut rng);
        let mut seen = HashSet::with_capacity(points.len() / 2);
        for pair in points.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !seen.insert((a, b)) {
                continue 'attempt;
            }
        }
        let mut edges: Vec<_> = seen.into_iter().collect();
        edges.sort_unstable();
        return Graph::new(n, edges);
    }
    Err(Error::Numerical(format!(
        "pairing model failed to produce a simple {degree}-regular graph on {n} vertices"
    )))
}

/// Square lattice with king moves (horizontal, vertical and diagonal
/// neighbours), each site kept independently with probability `1 - dropout`.
/// Sites are numbered row-major among the kept ones; positions are
/// `(column, row)` in lattice units.
pub fn kings_subgraph(rows: usize, cols: usize, dropout: f64, seed: u64) -> Result<Graph> {
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::Parameter(format!(
            "dropout {dropout} outside [0, 1)"
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Parameter(
            "lattice must have at least one site".into(),
        ));
    }
    for attempt in 0..MAX_LATTICE_ATTEMPTS {
        let mut rng = seed::rng(seed::derive(seed, attempt));
        let mut index = vec![None; rows * cols];
        let mut positions = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if rng.random::<f64>() >= dropout {
                    index[r * cols + c] = Some(positions.len());
                    positions.push([c as f64, r as f64]);
                }
            }
        }
        if positions.is_empty() {
            continue;
        }
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let Some(a) = index[r * cols + c] else {
                    continue;
                };
                // forward half of the king neighbourhood
                for (dr, dc) in [(0isize, 1isize), (1, -1), (1, 0), (1, 1)] {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                        continue;
                    }
                    if let Some(b) = index[rr as usize * cols + cc as usize] {
                        edges.push((a, b));
                    }
                }
            }
        }
        return Graph::new(positions.len(), edges)?.with_positions(positions);
    }
    Err(Error::Parameter(format!(
        "dropout {dropout} removed every site in {MAX_LATTICE_ATTEMPTS} attempts"
    )))
}

/// Unit-disk graph: `(i, j)` is an edge iff the points are at most `radius`
/// apart. Distances equal to the radius (up to rounding) count as edges.
pub fn unit_disk_edges(positions: &[[f64; 2]], radius: f64) -> Result<Graph> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Parameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let limit = radius * radius * (1.0 + 1e-12);
    let mut edges = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if dx * dx + dy * dy <= limit {
                edges.push((i, j));
            }
        }
    }
    Graph::new(positions.len(), edges)?.with_positions(positions.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_k4_is_unique() {
        let g = random_regular(4, 3, 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn regular_degrees_and_determinism() {
        for seed in 0..20 {
            let g = random_regular(16, 3, seed).unwrap();
            assert!((0..16).all(|v| g.degree(v) == 3));
            assert_eq!(g.num_edges(), 24);
            assert_eq!(g, random_regular(16, 3, seed).unwrap());
        }
        assert_ne!(
            random_regular(16, 3, 0).unwrap(),
            random_regular(16, 3, 1).unwrap()
        );
    }

    #[test]
    fn regular_rejects_infeasible() {
        assert!(matches!(random_regular(5, 3, 0), Err(Error::Parameter(_))));
        assert!(matches!(random_regular(4, 4, 0), Err(Error::Parameter(_))));
        assert_eq!(random_regular(5, 0, 0).unwrap().num_edges(), 0);
    }

    #[test]
    fn kings_full_2x2_is_k4() {
        let g = kings_subgraph(2, 2, 0.0, 3).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.num_edges(), 6);
        assert_eq!(g.positions().unwrap()[3], [1.0, 1.0]);
    }

    #[test]
    fn kings_dropout_statistics() {
        let (rows, cols, p) = (60, 60, 0.3);
        let g = kings_subgraph(rows, cols, p, 11).unwrap();
        let sites = (rows * cols) as f64;
        let mean = sites * (1.0 - p);
        let sigma = (sites * p * (1.0 - p)).sqrt();
        assert!((g.n() as f64 - mean).abs() < 3.0 * sigma, "kept {}", g.n());
        assert_eq!(g, kings_subgraph(rows, cols, p, 11).unwrap());
    }

    #[test]
    fn kings_rejects_bad_dropout() {
        assert!(kings_subgraph(3, 3, 1.0, 0).is_err());
        assert!(kings_subgraph(3, 3, -0.1, 0).is_err());
    }

    #[test]
    fn unit_disk_examples() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]];
        let g = unit_disk_edges(&pts, 2.0).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(unit_disk_edges(&pts, 1.9).unwrap().num_edges(), 0);
        assert!(unit_disk_edges(&pts, 0.0).is_err());
    }

    #[test]
    fn unit_disk_reproduces_kings_edges() {
        for seed in 0..10 {
            let kings = kings_subgraph(6, 7, 0.3, seed).unwrap();
            let spacing = 4.8;
            let scaled: Vec<[f64; 2]> = kings
                .positions()
                .unwrap()
                .iter()
                .map(|p| [p[0] * spacing, p[1] * spacing])
                .collect();
            let disk = unit_disk_edges(&scaled, 1.5 * spacing).unwrap();
            assert_eq!(disk.edges(), kings.edges());
        }
    }
}
