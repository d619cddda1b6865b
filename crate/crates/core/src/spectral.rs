//! Max k-Cut from measured correlations: weighted connected-correlation
//! matrices over several quench ansatze, their leading eigenvectors as vertex
//! features, k-means clustering and a greedy recoloring pass.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graphs::{cut_value, Coloring, Graph};
use crate::postprocess::{greedy_flip_with, FlipMode};
use crate::samplers::{
    estimate_occupations, quench_distribution, quench_meta, OutcomeDistribution, QuenchParams,
    RydbergModel, ShotSet,
};
use crate::seed;

const TAG_SHOTS: u64 = 1;
const TAG_FEATURES: u64 = 2;
const TAG_KMEANS: u64 = 3;
const TAG_GUESS: u64 = 4;
const TAG_FLIP: u64 = 5;

const LLOYD_MAX_ITERS: usize = 300;

/// Which end of the spectrum supplies the feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMode {
    #[default]
    Largest,
    Smallest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOptions {
    pub eigen_mode: EigenMode,
    /// Scale each feature row to unit length before clustering.
    pub normalize_rows: bool,
    pub restarts: usize,
    pub flip_mode: FlipMode,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            eigen_mode: EigenMode::Largest,
            normalize_rows: false,
            restarts: 10,
            flip_mode: FlipMode::Steepest,
        }
    }
}

/// Quantum parameters (one quench per ansatz), classical weights and color
/// count of the spectral pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralParams {
    pub quench_list: Vec<QuenchParams>,
    pub lambdas: Vec<f64>,
    pub k: usize,
    pub options: SpectralOptions,
}

impl SpectralParams {
    pub fn new(quench_list: Vec<QuenchParams>, lambdas: Vec<f64>, k: usize) -> Result<Self> {
        let p = Self {
            quench_list,
            lambdas,
            k,
            options: SpectralOptions::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quench_list.len() != self.lambdas.len() {
            return Err(Error::Dimension(format!(
                "{} quenches but {} weights",
                self.quench_list.len(),
                self.lambdas.len()
            )));
        }
        if self.quench_list.is_empty() {
            return Err(Error::Parameter("at least one ansatz is required".into()));
        }
        if self.k < 2 {
            return Err(Error::Parameter(format!(
                "color count must be >= 2, got {}",
                self.k
            )));
        }
        if self.options.restarts == 0 {
            return Err(Error::Parameter(
                "k-means needs at least one restart".into(),
            ));
        }
        for q in &self.quench_list {
            q.validate()?;
        }
        if let Some(l) = self.lambdas.iter().find(|l| !l.is_finite()) {
            return Err(Error::Parameter(format!("non-finite weight {l}")));
        }
        Ok(())
    }
}

/// `C = sum_a lambda_a cov_a`, keeping the per-ansatz covariances so the
/// weights can be changed without touching the shots.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
    per_ansatz: Vec<DMatrix<f64>>,
}

impl CorrelationMatrix {
    pub fn from_covariances(per_ansatz: Vec<DMatrix<f64>>, lambdas: &[f64]) -> Result<Self> {
        if per_ansatz.len() != lambdas.len() {
            return Err(Error::Dimension(format!(
                "{} covariance matrices but {} weights",
                per_ansatz.len(),
                lambdas.len()
            )));
        }
        let n = per_ansatz.first().map_or(0, |m| m.nrows());
        if per_ansatz.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::Dimension(
                "covariance matrices differ in size".into(),
            ));
        }
        let mut entries = DMatrix::zeros(n, n);
        for (cov, &l) in per_ansatz.iter().zip(lambdas) {
            for j in 0..n {
                for i in 0..=j {
                    entries[(i, j)] += l * cov[(i, j)];
                }
            }
        }
        for j in 0..n {
            for i in j + 1..n {
                entries[(i, j)] = entries[(j, i)];
            }
        }
        Ok(Self {
            entries,
            per_ansatz,
        })
    }

    /// Same covariances, new weights.
    pub fn reweighted(&self, lambdas: &[f64]) -> Result<Self> {
        Self::from_covariances(self.per_ansatz.clone(), lambdas)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn per_ansatz(&self) -> &[DMatrix<f64>] {
        &self.per_ansatz
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

/// Empirical connected correlation `<n_i n_j> - <n_i><n_j>`, exactly symmetric.
pub fn connected_correlation(shots: &ShotSet) -> DMatrix<f64> {
    let occ = estimate_occupations(shots);
    let n = shots.n();
    let mut cov = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = occ.second_moments[(i, j)] - occ.means[i] * occ.means[j];
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

pub fn weighted_correlation(shot_sets: &[ShotSet], lambdas: &[f64]) -> Result<CorrelationMatrix> {
    if shot_sets.len() != lambdas.len() {
        return Err(Error::Dimension(format!(
            "{} shot sets but {} weights",
            shot_sets.len(),
            lambdas.len()
        )));
    }
    if let Some(first) = shot_sets.first() {
        if let Some(bad) = shot_sets.iter().find(|s| s.n() != first.n()) {
            return Err(Error::Dimension(format!(
                "shot sets over {} and {} qubits",
                first.n(),
                bad.n()
            )));
        }
    }
    CorrelationMatrix::from_covariances(
        shot_sets.iter().map(connected_correlation).collect(),
        lambdas,
    )
}

/// `k` eigenvectors of a symmetric matrix as an `n x k` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    degenerate: bool,
}

impl FeatureMatrix {
    /// Row `i` is the feature vector of vertex `i`.
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// Eigenvalues belonging to the columns, in column order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Set when a selected eigenvalue is repeated, so the basis is arbitrary.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn normalized_rows(&self) -> DMatrix<f64> {
        let mut out = self.rows.clone();
        for mut row in out.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
        out
    }
}

/// Eigenvectors of the `k` algebraically largest (or smallest) eigenvalues.
/// Each column is signed so its largest-magnitude entry is positive.
pub fn top_k_eigvecs(m: &DMatrix<f64>, k: usize, mode: EigenMode) -> Result<FeatureMatrix> {
    eigvecs_impl(m, k, mode, None::<&mut seed::Rng>).map(|(f, _)| f)
}

/// As [`top_k_eigvecs`], but a repeated eigenvalue's eigenspace gets a
/// uniformly random orthonormal basis drawn from `rng`.
pub fn top_k_eigvecs_randomized<R: Rng + ?Sized>(
    m: &DMatrix<f64>,
    k: usize,
    mode: EigenMode,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    eigvecs_impl(m, k, mode, Some(rng)).map(|(f, _)| f)
}

// Also reports whether the whole spectrum is one repeated eigenvalue.
fn eigvecs_impl<R: Rng + ?Sized>(
    m: &DMatrix<f64>,
    k: usize,
    mode: EigenMode,
    rng: Option<&mut R>,
) -> Result<(FeatureMatrix, bool)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension(format!("matrix is {}x{}", n, m.ncols())));
    }
    if k == 0 || k > n {
        return Err(Error::Dimension(format!(
            "cannot take {k} eigenvectors of a {n}x{n} matrix"
        )));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        match mode {
            EigenMode::Largest => y.total_cmp(&x),
            EigenMode::Smallest => x.total_cmp(&y),
        }
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }

    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-9 * scale;
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || (values[i] - values[i - 1]).abs() > tol {
            groups.push((start, i));
            start = i;
        }
    }
    let degenerate = groups.iter().any(|&(a, b)| b - a > 1 && a < k);
    let uninformative = groups.len() == 1;

    if let Some(rng) = rng {
        for &(a, b) in groups.iter().filter(|&&(a, b)| b - a > 1 && a < k) {
            let q = haar_orthogonal(b - a, rng);
            let block = vectors.columns(a, b - a) * q;
            vectors.columns_mut(a, b - a).copy_from(&block);
        }
    }

    let mut rows = vectors.columns(0, k).into_owned();
    for mut col in rows.column_iter_mut() {
        let max = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let lead = col.iter().position(|v| v.abs() >= max - 1e-12).unwrap_or(0);
        if col[lead] < 0.0 {
            col.neg_mut();
        }
    }
    Ok((
        FeatureMatrix {
            rows,
            eigenvalues: values[..k].to_vec(),
            degenerate,
        },
        uninformative,
    ))
}

// QR of a Gaussian matrix with the sign of diag(R) fixed.
fn haar_orthogonal<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(m, m, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub coloring: Coloring,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
}

/// Lloyd's k-means on the rows of `points` with k-means++ seeding; the
/// restart with the smallest within-cluster sum of squares wins. Labels are
/// renumbered in order of first appearance.
pub fn k_means<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<Clustering> {
    let n = points.nrows();
    if k > n {
        return Err(Error::Dimension(format!("{k} clusters for {n} points")));
    }
    if k < 2 {
        return Err(Error::Parameter(format!(
            "color count must be >= 2, got {k}"
        )));
    }
    if restarts == 0 {
        return Err(Error::Parameter(
            "k-means needs at least one restart".into(),
        ));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts {
        let (labels, wcss) = lloyd(points, k, rng);
        if best.as_ref().is_none_or(|(_, w)| wcss < *w) {
            best = Some((labels, wcss));
        }
    }
    let (labels, wcss) = best.expect("at least one restart");
    Ok(Clustering {
        coloring: Coloring::new(canonical_labels(&labels), k)?,
        wcss,
    })
}

fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            if map.len() <= l {
                map.resize(l + 1, None);
            }
            *map[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn sq_dist(points: &DMatrix<f64>, i: usize, center: &[f64]) -> f64 {
    points
        .row(i)
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn lloyd<R: Rng + ?Sized>(points: &DMatrix<f64>, k: usize, rng: &mut R) -> (Vec<usize>, f64) {
    let n = points.nrows();
    let row = |i: usize| -> Vec<f64> { points.row(i).iter().copied().collect() };

    let mut centers: Vec<Vec<f64>> = vec![row(rng.random_range(0..n))];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 && u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            if nearest[chosen] == 0.0 {
                chosen = nearest.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(row(pick));
        for (i, w) in nearest.iter_mut().enumerate() {
            *w = w.min(sq_dist(points, i, centers.last().unwrap()));
        }
    }

    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    for _ in 0..LLOYD_MAX_ITERS {
        let mut changed = false;
        for i in 0..n {
            let (mut best, mut best_d) = (0, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let dd = sq_dist(points, i, center);
                if dd < best_d {
                    best = c;
                    best_d = dd;
                }
            }
            dist[i] = best_d;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        // empty clusters restart at the point worst served by its center
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]));
            if let Some(i) = far.filter(|&i| dist[i] > 0.0) {
                sizes[labels[i]] -= 1;
                labels[i] = c;
                sizes[c] = 1;
                dist[i] = 0.0;
                changed = true;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            if sizes[c] == 0 {
                continue;
            }
            center.iter_mut().for_each(|x| *x = 0.0);
            for i in (0..n).filter(|&i| labels[i] == c) {
                for (x, v) in center.iter_mut().zip(points.row(i).iter()) {
                    *x += v;
                }
            }
            center.iter_mut().for_each(|x| *x /= sizes[c] as f64);
        }
        if !changed {
            break;
        }
    }
    let wcss = (0..n)
        .map(|i| sq_dist(points, i, &centers[labels[i]]))
        .sum::<f64>();
    (labels, wcss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KcutDiagnostics {
    pub eigenvalues: Vec<f64>,
    pub degenerate: bool,
    /// Spectrum was a single repeated eigenvalue, so the clustering step fell
    /// back to a uniformly random guess.
    pub uninformative: bool,
    pub wcss: Option<f64>,
    pub raw_cut: usize,
    pub cut: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KcutOutcome {
    pub coloring: Coloring,
    /// Clustering output before the greedy pass.
    pub raw: Coloring,
    pub diagnostics: KcutDiagnostics,
}

/// Clustering plus greedy pass on a correlation matrix. When every
/// eigenvalue coincides (for instance `C = 0` after a zero-time quench) the
/// features carry no information and each vertex gets a uniformly random
/// color, which is exactly [`classical_limit_kcut`] under the same seed.
pub fn kcut_from_correlation(
    g: &Graph,
    corr: &CorrelationMatrix,
    k: usize,
    options: &SpectralOptions,
    seed: u64,
) -> Result<KcutOutcome> {
    if corr.n() != g.n() {
        return Err(Error::Dimension(format!(
            "correlation matrix over {} qubits for graph on {} vertices",
            corr.n(),
            g.n()
        )));
    }
    if k > g.n() {
        return Err(Error::Dimension(format!(
            "{k} colors for {} vertices",
            g.n()
        )));
    }
    let mut rng = seed::rng(seed::derive(seed, TAG_FEATURES));
    let (features, uninformative) =
        eigvecs_impl(corr.entries(), k, options.eigen_mode, Some(&mut rng))?;
    let (raw, wcss) = if uninformative {
        (random_coloring(g.n(), k, seed)?, None)
    } else {
        let points = if options.normalize_rows {
            features.normalized_rows()
        } else {
            features.rows.clone()
        };
        let mut rng = seed::rng(seed::derive(seed, TAG_KMEANS));
        let c = k_means(&points, k, options.restarts, &mut rng)?;
        (c.coloring, Some(c.wcss))
    };
    let mut rng = seed::rng(seed::derive(seed, TAG_FLIP));
    let coloring = greedy_flip_with(g, &raw, options.flip_mode, &mut rng)?;
    let diagnostics = KcutDiagnostics {
        eigenvalues: features.eigenvalues.clone(),
        degenerate: features.degenerate,
        uninformative,
        wcss,
        raw_cut: cut_value(g, &raw)?,
        cut: cut_value(g, &coloring)?,
    };
    Ok(KcutOutcome {
        coloring,
        raw,
        diagnostics,
    })
}

pub fn kcut_from_shots(
    g: &Graph,
    shot_sets: &[ShotSet],
    lambdas: &[f64],
    k: usize,
    options: &SpectralOptions,
    seed: u64,
) -> Result<KcutOutcome> {
    let corr = weighted_correlation(shot_sets, lambdas)?;
    kcut_from_correlation(g, &corr, k, options, seed)
}

/// Exact measurement distributions of every quench ansatz.
pub fn ansatz_distributions(
    g: &Graph,
    quench_list: &[QuenchParams],
    model: &RydbergModel,
) -> Result<Vec<OutcomeDistribution>> {
    quench_list
        .iter()
        .map(|q| quench_distribution(g, q, model))
        .collect()
}

/// `shots` draws from each ansatz distribution on independent substreams.
pub fn sample_ansatze(
    dists: &[OutcomeDistribution],
    quench_list: &[QuenchParams],
    shots: usize,
    seed: u64,
) -> Result<Vec<ShotSet>> {
    if dists.len() != quench_list.len() {
        return Err(Error::Dimension(format!(
            "{} distributions for {} quenches",
            dists.len(),
            quench_list.len()
        )));
    }
    dists
        .iter()
        .zip(quench_list)
        .enumerate()
        .map(|(a, (d, q))| {
            let s = seed::derive_path(seed, &[TAG_SHOTS, a as u64]);
            ShotSet::new(d.sample(shots, &mut seed::rng(s)), quench_meta(q, s))
        })
        .collect()
}

/// Quench sampling, weighted correlations, eigenvector features, k-means and
/// greedy recoloring.
pub fn kcut_pipeline(
    g: &Graph,
    params: &SpectralParams,
    model: &RydbergModel,
    shots_per_ansatz: usize,
    seed: u64,
) -> Result<KcutOutcome> {
    params.validate()?;
    let dists = ansatz_distributions(g, &params.quench_list, model)?;
    let shots = sample_ansatze(&dists, &params.quench_list, shots_per_ansatz, seed)?;
    kcut_from_shots(g, &shots, &params.lambdas, params.k, &params.options, seed)
}

fn random_coloring(n: usize, k: usize, seed: u64) -> Result<Coloring> {
    let mut rng = seed::rng(seed::derive(seed, TAG_GUESS));
    Coloring::new((0..n).map(|_| rng.random_range(0..k)).collect(), k)
}

/// Uniformly random coloring followed by the greedy pass: the no-quantum
/// baseline of the spectral pipeline.
pub fn classical_limit_kcut(g: &Graph, k: usize, seed: u64) -> Result<Coloring> {
    let raw = random_coloring(g.n(), k, seed)?;
    greedy_flip_with(
        g,
        &raw,
        FlipMode::Steepest,
        &mut seed::rng(seed::derive(seed, TAG_FLIP)),
    )
}
