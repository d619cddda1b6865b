//! Cluster-update annealing for maximum independent set. Clusters come from
//! a driven sandpile; inside each cluster the current solution is replaced by
//! a repaired reservoir sample and the merge is accepted by Metropolis.

use std::collections::VecDeque;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graphs::{BitString, Graph, IndependentSet};
use crate::postprocess::{greedy_add_with, mis_repair_with};
use crate::samplers::{OutcomeDistribution, ShotSet};
use crate::seed;

pub const DEFAULT_DISSIPATION: f64 = 0.05;

const TAG_SANDPILE: u64 = 1;
const TAG_RESERVOIR: u64 = 2;
const TAG_REPAIR: u64 = 3;
const TAG_ACCEPT: u64 = 4;

/// Grain counts of a sandpile on a fixed graph. Stable between avalanches:
/// every vertex holds fewer grains than its degree.
#[derive(Debug, Clone)]
pub struct SandpileState {
    grains: Vec<u32>,
    dissipation: f64,
    rng: seed::Rng,
}

impl SandpileState {
    /// Empty pile. `dissipation` is the chance that a shed grain is lost and
    /// must lie in `(0, 1]`; without loss an avalanche need not end.
    pub fn new(g: &Graph, dissipation: f64, seed: u64) -> Result<Self> {
        if !(dissipation > 0.0 && dissipation <= 1.0) {
            return Err(Error::Parameter(format!(
                "dissipation must be in (0, 1], got {dissipation}"
            )));
        }
        if g.n() == 0 {
            return Err(Error::Parameter("sandpile on an empty graph".into()));
        }
        Ok(Self {
            grains: vec![0; g.n()],
            dissipation,
            rng: seed::rng(seed),
        })
    }

    pub fn grains(&self) -> &[u32] {
        &self.grains
    }

    pub fn dissipation(&self) -> f64 {
        self.dissipation
    }

    pub fn is_stable(&self, g: &Graph) -> bool {
        self.grains
            .iter()
            .enumerate()
            .all(|(v, &c)| (c as usize) < g.degree(v).max(1))
    }
}

/// Drops grains on random vertices until one reaches its degree, then
/// relaxes the pile. Returns the sorted set of vertices that toppled.
pub fn sandpile_cluster(g: &Graph, state: &mut SandpileState) -> Result<Vec<usize>> {
    if state.grains.len() != g.n() {
        return Err(Error::Dimension(format!(
            "sandpile over {} vertices for graph on {}",
            state.grains.len(),
            g.n()
        )));
    }
    let n = g.n();
    let threshold = |v: usize| g.degree(v).max(1) as u32;
    let start = loop {
        let v = state.rng.random_range(0..n);
        state.grains[v] += 1;
        if state.grains[v] >= threshold(v) {
            break v;
        }
    };
    let mut toppled = vec![false; n];
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        while state.grains[v] >= threshold(v) {
            toppled[v] = true;
            if g.degree(v) == 0 {
                state.grains[v] = 0;
                break;
            }
            state.grains[v] -= threshold(v);
            for &w in g.neighbors(v) {
                if state.rng.random::<f64>() < state.dissipation {
                    continue;
                }
                state.grains[w] += 1;
                if state.grains[w] == threshold(w) {
                    queue.push_back(w);
                }
            }
        }
    }
    Ok((0..n).filter(|&v| toppled[v]).collect())
}

/// Vertices within `radius` hops of a random center: a fixed-size
/// alternative to sandpile clusters.
pub fn ball_cluster<R: Rng + ?Sized>(g: &Graph, radius: usize, rng: &mut R) -> Vec<usize> {
    let n = g.n();
    let mut depth = vec![usize::MAX; n];
    let center = rng.random_range(0..n);
    depth[center] = 0;
    let mut queue = VecDeque::from([center]);
    while let Some(v) = queue.pop_front() {
        if depth[v] == radius {
            continue;
        }
        for &w in g.neighbors(v) {
            if depth[w] == usize::MAX {
                depth[w] = depth[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (0..n).filter(|&v| depth[v] != usize::MAX).collect()
}

/// Takes `chi_prime` inside `cluster` and `chi` elsewhere, then repairs the
/// result into a maximal independent set.
pub fn merge_solutions(
    g: &Graph,
    chi: &IndependentSet,
    chi_prime: &IndependentSet,
    cluster: &[usize],
    seed: u64,
) -> Result<IndependentSet> {
    merge_solutions_with(g, chi, chi_prime, cluster, &mut seed::rng(seed))
}

pub fn merge_solutions_with<R: Rng + ?Sized>(
    g: &Graph,
    chi: &IndependentSet,
    chi_prime: &IndependentSet,
    cluster: &[usize],
    rng: &mut R,
) -> Result<IndependentSet> {
    let n = g.n();
    let mut inside = vec![false; n];
    for &v in cluster {
        if v >= n {
            return Err(Error::Dimension(format!(
                "cluster vertex {v} out of range for n={n}"
            )));
        }
        inside[v] = true;
    }
    let a = chi.mask(n);
    let b = chi_prime.mask(n);
    let z = BitString::new(
        (0..n)
            .map(|v| if inside[v] { b[v] } else { a[v] })
            .collect(),
    );
    mis_repair_with(g, &z, rng)
}

/// Metropolis rule for maximization: accept with probability
/// `min(1, exp(beta * delta))`. `beta = inf` accepts exactly when `delta >= 0`.
pub fn metropolis_accept<R: Rng + ?Sized>(delta: f64, beta: f64, rng: &mut R) -> bool {
    debug_assert!(beta >= 0.0, "inverse temperature must be non-negative");
    if delta >= 0.0 {
        return true;
    }
    if beta.is_infinite() {
        return false;
    }
    rng.random::<f64>() < (beta * delta).exp()
}

/// Source of raw bit strings for the update steps.
pub trait Reservoir {
    fn n(&self) -> usize;
    fn draw(&mut self, rng: &mut seed::Rng) -> BitString;
}

/// Fresh independent draws from an exact distribution.
#[derive(Debug, Clone)]
pub struct DistributionReservoir {
    dist: OutcomeDistribution,
}

impl DistributionReservoir {
    pub fn new(dist: OutcomeDistribution) -> Self {
        Self { dist }
    }
}

impl Reservoir for DistributionReservoir {
    fn n(&self) -> usize {
        self.dist.n()
    }

    fn draw(&mut self, rng: &mut seed::Rng) -> BitString {
        self.dist.draw(rng)
    }
}

/// The same string every time; all zeros gives the no-quantum limit.
#[derive(Debug, Clone)]
pub struct ConstantReservoir {
    bits: BitString,
}

impl ConstantReservoir {
    pub fn new(bits: BitString) -> Self {
        Self { bits }
    }
}

impl Reservoir for ConstantReservoir {
    fn n(&self) -> usize {
        self.bits.len()
    }

    fn draw(&mut self, _rng: &mut seed::Rng) -> BitString {
        self.bits.clone()
    }
}

/// A finite pool of recorded shots, drawn without replacement in random
/// order and reshuffled once used up.
#[derive(Debug, Clone)]
pub struct ShotPool {
    shots: Vec<BitString>,
    order: Vec<usize>,
    cursor: usize,
    passes: usize,
}

impl ShotPool {
    pub fn new(shots: &ShotSet) -> Self {
        Self {
            shots: shots.shots().to_vec(),
            order: Vec::new(),
            cursor: 0,
            passes: 0,
        }
    }

    /// Completed passes through the pool.
    pub fn passes(&self) -> usize {
        self.passes
    }
}

impl Reservoir for ShotPool {
    fn n(&self) -> usize {
        self.shots[0].len()
    }

    fn draw(&mut self, rng: &mut seed::Rng) -> BitString {
        if self.cursor == self.order.len() {
            if !self.order.is_empty() {
                self.passes += 1;
                if self.passes == 1 {
                    warn!(
                        "shot pool of {} exhausted; reshuffling and reusing shots",
                        self.shots.len()
                    );
                }
            }
            self.order = (0..self.shots.len()).collect();
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.shots[self.order[self.cursor - 1]].clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusterMode {
    Sandpile { dissipation: f64 },
    Ball { radius: usize },
}

impl Default for ClusterMode {
    fn default() -> Self {
        ClusterMode::Sandpile {
            dissipation: DEFAULT_DISSIPATION,
        }
    }
}

/// Epoch count, inverse temperature per epoch and cluster rule. One epoch
/// is `n` update steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealRun {
    beta_schedule: Vec<f64>,
    epochs: usize,
    cluster: ClusterMode,
}

impl AnnealRun {
    /// `beta_schedule` holds one value per epoch, or a single value used
    /// throughout. `f64::INFINITY` gives zero-temperature runs.
    pub fn new(beta_schedule: Vec<f64>, epochs: usize, cluster: ClusterMode) -> Result<Self> {
        if epochs == 0 {
            return Err(Error::Parameter(
                "an anneal needs at least one epoch".into(),
            ));
        }
        if beta_schedule.len() != 1 && beta_schedule.len() != epochs {
            return Err(Error::Dimension(format!(
                "{} inverse temperatures for {epochs} epochs",
                beta_schedule.len()
            )));
        }
        if let Some(b) = beta_schedule.iter().find(|b| !(**b >= 0.0)) {
            return Err(Error::Parameter(format!(
                "inverse temperature {b} is not >= 0"
            )));
        }
        match cluster {
            ClusterMode::Sandpile { dissipation } if !(dissipation > 0.0 && dissipation <= 1.0) => {
                return Err(Error::Parameter(format!(
                    "dissipation must be in (0, 1], got {dissipation}"
                )));
            }
            _ => {}
        }
        Ok(Self {
            beta_schedule,
            epochs,
            cluster,
        })
    }

    pub fn zero_temperature(epochs: usize) -> Result<Self> {
        Self::new(vec![f64::INFINITY], epochs, ClusterMode::default())
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn cluster(&self) -> ClusterMode {
        self.cluster
    }

    pub fn beta(&self, epoch: usize) -> f64 {
        if self.beta_schedule.len() == 1 {
            self.beta_schedule[0]
        } else {
            self.beta_schedule[epoch]
        }
    }
}

/// One record per update step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealStep {
    pub step: usize,
    pub epoch: usize,
    pub cluster_size: usize,
    /// Candidate size minus current size.
    pub delta: i64,
    pub accepted: bool,
    /// Size of the current solution after the step.
    pub objective: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    pub best: IndependentSet,
    pub last: IndependentSet,
    pub trajectory: Vec<AnnealStep>,
}

/// Runs `epochs * n` cluster updates from a greedy maximal set and returns
/// the largest set seen together with the per-step trajectory.
pub fn run_cluster_sa(
    g: &Graph,
    run: &AnnealRun,
    reservoir: &mut dyn Reservoir,
    seed: u64,
) -> Result<AnnealOutcome> {
    let n = g.n();
    if reservoir.n() != n {
        return Err(Error::Dimension(format!(
            "reservoir over {} qubits for graph on {n} vertices",
            reservoir.n()
        )));
    }
    let mut repair_rng = seed::rng(seed::derive(seed, TAG_REPAIR));
    let mut draw_rng = seed::rng(seed::derive(seed, TAG_RESERVOIR));
    let mut accept_rng = seed::rng(seed::derive(seed, TAG_ACCEPT));
    let mut cluster_rng = seed::rng(seed::derive(seed, TAG_SANDPILE));
    let mut current = greedy_add_with(g, &IndependentSet::empty(g), &mut repair_rng)?;
    let mut best = current.clone();
    if n == 0 {
        return Ok(AnnealOutcome {
            last: current,
            best,
            trajectory: Vec::new(),
        });
    }
    let mut pile = match run.cluster {
        ClusterMode::Sandpile { dissipation } => Some(SandpileState::new(
            g,
            dissipation,
            seed::derive(seed, TAG_SANDPILE),
        )?),
        ClusterMode::Ball { .. } => None,
    };

    let mut trajectory = Vec::with_capacity(run.epochs * n);
    for epoch in 0..run.epochs {
        let beta = run.beta(epoch);
        for _ in 0..n {
            let cluster = match (&mut pile, run.cluster) {
                (Some(p), _) => sandpile_cluster(g, p)?,
                (None, ClusterMode::Ball { radius }) => ball_cluster(g, radius, &mut cluster_rng),
                (None, ClusterMode::Sandpile { .. }) => {
                    unreachable!("sandpile state is built up front")
                }
            };
            let z = reservoir.draw(&mut draw_rng);
            let sample = mis_repair_with(g, &z, &mut repair_rng)?;
            let candidate = merge_solutions_with(g, &current, &sample, &cluster, &mut repair_rng)?;
            let delta = candidate.size() as i64 - current.size() as i64;
            let accepted = metropolis_accept(delta as f64, beta, &mut accept_rng);
            if accepted {
                current = candidate;
                if current.size() > best.size() {
                    best = current.clone();
                }
            }
            trajectory.push(AnnealStep {
                step: trajectory.len(),
                epoch,
                cluster_size: cluster.len(),
                delta,
                accepted,
                objective: current.size(),
            });
        }
    }
    Ok(AnnealOutcome {
        best,
        last: current,
        trajectory,
    })
}
