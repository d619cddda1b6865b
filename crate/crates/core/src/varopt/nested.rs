//! Two-level search for the spectral k-cut: random quench parameters outside,
//! classical weights optimized on cached shots inside.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::samplers::{QuenchParams, RydbergModel};
use crate::seed;
use crate::spectral::{
    ansatz_distributions, kcut_from_correlation, sample_ansatze, weighted_correlation,
    CorrelationMatrix, SpectralOptions, SpectralParams,
};

use super::dfo::{dfo_maximize, Evaluation, SearchBox};
use super::objective::mean_stderr;

const TAG_OUTER: u64 = 1;
const TAG_SHOTS: u64 = 2;
const TAG_INNER: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct NestedSettings {
    pub k: usize,
    pub n_ansatz: usize,
    pub shots_per_ansatz: usize,
    /// Clustering seeds averaged per weight trial (common to all trials).
    pub repetitions: usize,
    pub outer_budget: usize,
    /// Evaluation budget of the weight optimizer per quantum proposal.
    pub inner_budget: usize,
    pub t_range: (f64, f64),
    pub delta_range: (f64, f64),
    pub options: SpectralOptions,
}

impl NestedSettings {
    pub fn new(k: usize, outer_budget: usize, inner_budget: usize) -> Self {
        Self {
            k,
            n_ansatz: 3,
            shots_per_ansatz: 100,
            repetitions: 5,
            outer_budget,
            inner_budget,
            t_range: (0.0, 4.0),
            delta_range: (0.0, 15.0),
            options: SpectralOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.outer_budget == 0 || self.inner_budget == 0 {
            return Err(Error::Parameter("nested budgets must be >= 1".into()));
        }
        if self.n_ansatz == 0 || self.shots_per_ansatz == 0 || self.repetitions == 0 {
            return Err(Error::Parameter(format!(
                "degenerate nested settings {self:?}"
            )));
        }
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ordered(self.t_range) || !ordered(self.delta_range) || self.t_range.0 < 0.0 {
            return Err(Error::Parameter(format!(
                "invalid proposal ranges t {:?}, delta {:?}",
                self.t_range, self.delta_range
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub quench_list: Vec<QuenchParams>,
    pub lambdas: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
    pub inner_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestedOutcome {
    pub params: SpectralParams,
    pub value: f64,
    pub stderr: f64,
    pub outer: Vec<OuterRecord>,
    /// Quantum shots drawn over the whole search.
    pub shots: usize,
}

/// Mean cut over `repetitions` clustering seeds for weights `lambdas`.
pub fn inner_objective(
    g: &Graph,
    corr: &CorrelationMatrix,
    lambdas: &[f64],
    settings: &NestedSettings,
    seed: u64,
) -> Result<(f64, f64)> {
    let c = corr.reweighted(lambdas)?;
    let cuts = (0..settings.repetitions)
        .map(|r| {
            let out = kcut_from_correlation(
                g,
                &c,
                settings.k,
                &settings.options,
                seed::derive(seed, r as u64),
            )?;
            Ok(out.diagnostics.cut as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_stderr(&cuts))
}

pub fn nested_optimize_spectral(
    g: &Graph,
    model: &RydbergModel,
    settings: &NestedSettings,
    seed: u64,
) -> Result<NestedOutcome> {
    settings.validate()?;
    let a = settings.n_ansatz;
    let mut proposals = seed::rng(seed::derive(seed, TAG_OUTER));
    let mut outer = Vec::with_capacity(settings.outer_budget);
    let mut best: Option<usize> = None;
    for i in 0..settings.outer_budget {
        let quench_list: Vec<QuenchParams> = (0..a)
            .map(|_| {
                let t = proposals.random_range(settings.t_range.0..=settings.t_range.1);
                let delta = proposals.random_range(settings.delta_range.0..=settings.delta_range.1);
                QuenchParams::new(t, delta)
            })
            .collect();
        let dists = ansatz_distributions(g, &quench_list, model)?;
        let shots = sample_ansatze(
            &dists,
            &quench_list,
            settings.shots_per_ansatz,
            seed::derive_path(seed, &[TAG_SHOTS, i as u64]),
        )?;
        let corr = weighted_correlation(&shots, &vec![1.0; a])?;
        let inner_seed = seed::derive_path(seed, &[TAG_INNER, i as u64]);
        let bounds = SearchBox::new(vec![-1.0; a], vec![1.0; a], vec![0.5; a])?
            .with_max_evals(settings.inner_budget);
        let run = dfo_maximize(
            |lambdas, _| {
                let (value, stderr) = inner_objective(g, &corr, lambdas, settings, inner_seed)?;
                Ok(Evaluation {
                    value,
                    stderr,
                    shots: 0,
                })
            },
            &bounds,
        )?;
        if let Some(e) = run.error {
            return Err(e);
        }
        let stderr = run
            .history
            .iter()
            .find(|h| h.params == run.best_params)
            .map_or(f64::NAN, |h| h.stderr);
        outer.push(OuterRecord {
            quench_list,
            lambdas: run.best_params,
            value: run.best_value,
            stderr,
            inner_evals: run.history.len(),
        });
        if best.is_none_or(|b| outer[i].value > outer[b].value) {
            best = Some(i);
        }
    }
    let b = &outer[best.expect("outer budget >= 1")];
    let mut params = SpectralParams::new(b.quench_list.clone(), b.lambdas.clone(), settings.k)?;
    params.options = settings.options.clone();
    Ok(NestedOutcome {
        params,
        value: b.value,
        stderr: b.stderr,
        shots: settings.outer_budget * a * settings.shots_per_ansatz,
        outer,
    })
}
