//! QAOA on MaxCut: `prod_j exp(-i beta_j B) exp(-i gamma_j C) |+>` with
//! `C = sum_<ij> Z_i Z_j` and `B = sum_i X_i`.
//!
//! The phase separator is diagonal, so each layer is one pass multiplying
//! amplitudes by a phase looked up from the cut size, followed by `n`
//! single-qubit mixer sweeps.

use num_complex::Complex64;

use super::shots::{uniform_sample, OutcomeDistribution, ShotMeta, ShotSet};
use super::statevector::StateVector;
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::seed;

pub const DEFAULT_QAOA_QUBIT_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct QaoaParams {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.len() != betas.len() {
            return Err(Error::Dimension(format!(
                "{} gammas but {} betas",
                gammas.len(),
                betas.len()
            )));
        }
        Ok(Self { gammas, betas })
    }

    pub fn zero_layers() -> Self {
        Self {
            gammas: Vec::new(),
            betas: Vec::new(),
        }
    }

    pub fn p(&self) -> usize {
        self.gammas.len()
    }

    /// `[gamma_1..gamma_p, beta_1..beta_p]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.gammas.iter().chain(&self.betas).copied().collect()
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "odd QAOA parameter vector length {}",
                x.len()
            )));
        }
        let p = x.len() / 2;
        Self::new(x[..p].to_vec(), x[p..].to_vec())
    }
}

/// Graph-specific precomputation (cut size of every basis state) shared by
/// all evaluations on that graph.
#[derive(Debug, Clone)]
pub struct QaoaInstance {
    n: usize,
    num_edges: usize,
    odd_degree: bool,
    cuts: Vec<u16>,
}

impl QaoaInstance {
    pub fn new(g: &Graph) -> Result<Self> {
        Self::with_cap(g, DEFAULT_QAOA_QUBIT_CAP)
    }

    pub fn with_cap(g: &Graph, max_qubits: usize) -> Result<Self> {
        let n = g.n();
        if n > max_qubits {
            return Err(Error::Resource(format!(
                "{n} qubits exceeds the state-vector cap of {max_qubits}"
            )));
        }
        let masks: Vec<usize> = g
            .edges()
            .iter()
            .map(|&(a, b)| (1 << a) | (1 << b))
            .collect();
        let cuts = (0..1usize << n)
            .map(|z| masks.iter().filter(|&&m| (z & m).count_ones() == 1).count() as u16)
            .collect();
        let odd_degree = n > 0 && (0..n).all(|v| g.degree(v) % 2 == 1);
        Ok(Self {
            n,
            num_edges: g.num_edges(),
            odd_degree,
            cuts,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Every vertex has odd degree.
    pub fn odd_degree(&self) -> bool {
        self.odd_degree
    }

    /// Cut size of every basis state.
    pub fn cut_table(&self) -> &[u16] {
        &self.cuts
    }

    pub fn state(&self, params: &QaoaParams) -> StateVector {
        let mut psi = StateVector::plus(self.n);
        let e = self.num_edges as f64;
        for (&gamma, &beta) in params.gammas.iter().zip(&params.betas) {
            // C_z = |E| - 2 cut(z)
            let table: Vec<Complex64> = (0..=self.num_edges)
                .map(|cut| Complex64::from_polar(1.0, -gamma * (e - 2.0 * cut as f64)))
                .collect();
            psi.apply_phase_classes(&self.cuts, &table);
            psi.rotate_x_all(beta);
        }
        psi
    }

    /// Exact `<cut>`, i.e. `(|E| - <sum ZZ>) / 2`.
    pub fn expectation(&self, params: &QaoaParams) -> f64 {
        let psi = self.state(params);
        psi.amplitudes()
            .iter()
            .zip(&self.cuts)
            .map(|(a, &c)| a.norm_sqr() * f64::from(c))
            .sum()
    }

    pub fn distribution(&self, params: &QaoaParams) -> Result<OutcomeDistribution> {
        OutcomeDistribution::from_probabilities(self.n, &self.state(params).probabilities())
    }

    /// Zero layers leave `|+>^n`, so those shots come from the uniform
    /// sampler and match `uniform_sample` bit for bit under the same seed.
    pub fn sample(&self, params: &QaoaParams, shots: usize, seed: u64) -> Result<ShotSet> {
        if params.p() == 0 {
            let strings = uniform_sample(self.n, shots, seed)?.shots().to_vec();
            return ShotSet::new(strings, qaoa_meta(params, seed));
        }
        let dist = self.distribution(params)?;
        let mut rng = seed::rng(seed);
        ShotSet::new(dist.sample(shots, &mut rng), qaoa_meta(params, seed))
    }
}

fn qaoa_meta(params: &QaoaParams, seed: u64) -> ShotMeta {
    ShotMeta::new("qaoa")
        .with_seed(seed)
        .with_param("p", params.p())
        .with_param("gammas", format!("{:?}", params.gammas))
        .with_param("betas", format!("{:?}", params.betas))
}

pub fn qaoa_state(g: &Graph, params: &QaoaParams) -> Result<StateVector> {
    Ok(QaoaInstance::new(g)?.state(params))
}

pub fn qaoa_sample(g: &Graph, params: &QaoaParams, shots: usize, seed: u64) -> Result<ShotSet> {
    QaoaInstance::new(g)?.sample(params, shots, seed)
}

pub fn qaoa_expectation(g: &Graph, params: &QaoaParams) -> Result<f64> {
    Ok(QaoaInstance::new(g)?.expectation(params))
}
